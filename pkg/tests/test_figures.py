"""Tests for the figure-reproduction tables."""

import io
import json
import math

import numpy as np
import pytest

from helpers import find_peaks

from sqdistill.config import canonical_config
from sqdistill.figures import (
    demo_wigner_config,
    fig2_tables,
    fig3_tables,
    fig4_tables,
    fig5_tables,
    reproduce_figure,
)
from sqdistill.protocol import transmitted_state
from sqdistill.tomography import wigner_grid_from_csv


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    lines = text.strip().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def column(rows, columns, name, cast=float):
    idx = columns.index(name)
    return [cast(row[idx]) if row[idx] else None for row in rows]


class TestFig2:
    def test_tap_and_signal_marginals(self):
        files = fig2_tables(canonical_config())
        cols_a, rows_a = parse_csv(files["fig2a_tap_marginal.csv"])
        assert cols_a == ["quadrature_snu", "analytic_density", "mc_density"]
        q = np.array(column(rows_a, cols_a, "quadrature_snu"))
        analytic = np.array(column(rows_a, cols_a, "analytic_density"))
        mc = np.array(column(rows_a, cols_a, "mc_density"))
        width = q[1] - q[0]
        assert analytic.sum() * width == pytest.approx(1.0, abs=0.01)
        assert np.max(np.abs(mc - analytic)) < 0.15 * analytic.max()
        # bimodal tap marginal: both component centers outdo the midpoint
        mid = np.argmin(np.abs(q - q.mean()))
        assert analytic[0:mid].max() > analytic[mid] < analytic[mid:].max()

        cols_b, rows_b = parse_csv(files["fig2b_signal_marginal.csv"])
        distilled_analytic = np.array(column(rows_b, cols_b, "distilled_density_analytic"))
        distilled_mc = np.array(column(rows_b, cols_b, "distilled_density_mc"))
        noisy = np.array(column(rows_b, cols_b, "noisy_density"))
        shot = np.array(column(rows_b, cols_b, "shot_noise_density"))
        assert np.max(np.abs(distilled_mc - distilled_analytic)) < 0.1 * distilled_analytic.max()
        # distillation narrows the distribution below shot noise
        assert distilled_analytic.max() > shot.max() > noisy.max()


class TestFig3:
    def test_trends(self):
        files = fig3_tables(canonical_config(), steps=15)
        cols, rows = parse_csv(files["fig3_threshold_sweep.csv"])
        thresholds = column(rows, cols, "threshold_snu")
        assert thresholds == sorted(thresholds)
        variances = column(rows, cols, "variance_snu")
        probs = column(rows, cols, "success_probability")
        assert all(b <= a + 1e-12 for a, b in zip(variances, variances[1:]))
        assert all(b < a for a, b in zip(probs, probs[1:]))
        mc_accepted = column(rows, cols, "mc_accepted_count", cast=int)
        assert all(
            b <= a for a, b in zip(mc_accepted, mc_accepted[1:])
            if a is not None and b is not None
        )
        rel = column(rows, cols, "threshold_rel_snu")
        assert rel[0] == pytest.approx(-2 * (rel[-1] - rel[0]) / 6, rel=1e-9)


class TestFig4:
    def test_relative_threshold_families(self):
        files = fig4_tables(canonical_config(), steps=7)
        cols, rows = parse_csv(files["fig4_angle_sweep.csv"])
        rels = column(rows, cols, "threshold_rel_snu")
        assert set(rels) == {1.3, 5.3}
        for t_rel in (1.3, 5.3):
            sub = [row for row in rows if float(row[cols.index("threshold_rel_snu")]) == t_rel]
            betas = column(sub, cols, "beta_deg")
            assert betas == sorted(betas)
            variances = column(sub, cols, "variance_snu")
            # once the tap sees the displacement (beta >= 15 deg here), the
            # distillation quality degrades monotonically with beta
            tail = [v for b, v in zip(betas, variances) if b >= 15.0]
            assert all(b >= a for a, b in zip(tail, tail[1:]))


class TestFig5:
    def test_reconstructions(self):
        config = demo_wigner_config()
        files = fig5_tables(config, n_angles=64, n_per_angle=20_000,
                            bins=128, grid_points=81)
        assert set(files) == {
            "fig5_mixed_reconstructed.csv", "fig5_distilled_reconstructed.csv",
            "fig5_mixed_analytic.csv", "fig5_config.json",
        }
        mixed = wigner_grid_from_csv(io.StringIO(files["fig5_mixed_reconstructed.csv"]))
        distilled = wigner_grid_from_csv(io.StringIO(files["fig5_distilled_reconstructed.csv"]))
        analytic = wigner_grid_from_csv(io.StringIO(files["fig5_mixed_analytic.csv"]))
        assert np.array_equal(mixed.x_axis, analytic.x_axis)

        signal_state = transmitted_state(config.state(), config.splitter(), config.detector())
        displaced = signal_state.components[1]
        mixed_peaks = find_peaks(mixed, min_separation=0.7)
        assert len(mixed_peaks) == 2
        # post-selection keeps the displaced component: a single blob there
        distilled_peaks = find_peaks(distilled, min_separation=0.7)
        assert len(distilled_peaks) == 1
        px, pp = distilled_peaks[0]
        assert math.hypot(px - displaced.mean_x, pp - displaced.mean_p) < 0.5

        parsed = json.loads(files["fig5_config.json"])
        assert parsed["tap_R"] == config.tap_R


class TestReproduceFigure:
    def test_unknown_figure(self):
        with pytest.raises(ValueError):
            reproduce_figure(6)

    def test_canonical_config_included(self):
        files = reproduce_figure(4)
        assert "canonical.json" in files
        assert json.loads(files["canonical.json"])["gamma"] == 0.5
