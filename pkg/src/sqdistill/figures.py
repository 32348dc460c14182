"""Reproduction tables: the CSV data underlying the reference figures.

Each ``figN_tables`` function returns a mapping of file name to CSV text so
callers (the service endpoint and, through it, the CLI) can write plot-ready
files.  Figures 2-4 run on the canonical configuration; the Wigner-density
figure runs on a scaled-down demonstration state because the canonical
+27 dB anti-squeezing would need a +/-80 SNU phase window.

Threshold axes follow the convention of quoting thresholds relative to the
center of the tap marginal; absolute values are emitted alongside.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ExperimentConfig, canonical_config, canonical_config_text
from .montecarlo import mc_sweep, sample_protocol, selection_mask
from .protocol import (
    PostSelectionRule,
    apply_detector,
    conditional_distilled_stats,
    filter_weight,
    split_component_stats,
    threshold_sweep,
    transmitted_state,
)
from .states import (
    MixtureState,
    QuadratureAngle,
    marginal_pdf,
    quadrature_stats,
    variance_to_db,
)
from .tomography import (
    GridSpec,
    analytic_wigner_grid,
    default_projection_range,
    inverse_radon,
    protocol_projections,
    wigner_grid_to_csv,
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _csv(columns: list[str], rows: list[tuple]) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _grid_csv(grid) -> str:
    import io

    buf = io.StringIO()
    wigner_grid_to_csv(grid, buf)
    return buf.getvalue()


def _tap_state(config: ExperimentConfig) -> MixtureState:
    state = config.state()
    taps = [
        apply_detector(split_component_stats(c, config.splitter())[1], config.detector())
        for c in state.components
    ]
    return MixtureState(taps, state.weights)


def fig2_tables(config: ExperimentConfig) -> dict[str, str]:
    """Marginal distributions: (a) the tap quadrature, (b) the verified signal
    quadrature before and after post-selection, against shot noise."""
    state = config.state()
    tap_state = _tap_state(config)
    signal_state = transmitted_state(state, config.splitter(), config.detector())
    tap_angle = config.rule().tap_angle
    verify = config.verification_angle()
    samples = sample_protocol(config.simulation())

    tap_mean, tap_var = quadrature_stats(tap_state, tap_angle)
    sigma_t = math.sqrt(tap_var)
    edges = np.linspace(tap_mean - 4.5 * sigma_t, tap_mean + 4.5 * sigma_t, 201)
    centers = 0.5 * (edges[:-1] + edges[1:])
    mc_density = np.histogram(samples.tap_values, bins=edges, density=True)[0]
    rows_a = list(zip(
        centers.tolist(),
        marginal_pdf(tap_state, tap_angle, centers).tolist(),
        mc_density.tolist(),
    ))

    sig_mean, sig_var = quadrature_stats(signal_state, verify)
    sigma_s = math.sqrt(sig_var)
    edges_s = np.linspace(sig_mean - 5 * sigma_s, sig_mean + 5 * sigma_s, 201)
    centers_s = 0.5 * (edges_s[:-1] + edges_s[1:])
    kept = samples.signal_values[selection_mask(samples, config.rule())]
    distilled_mc = np.histogram(kept, bins=edges_s, density=True)[0]

    # Post-selection only reweights the components when the tap projection is
    # uncorrelated with the verified one (the canonical geometry).
    weights = []
    for comp, w in zip(state.components, state.weights):
        _, tap, _, _ = split_component_stats(comp, config.splitter())
        tap = apply_detector(tap, config.detector())
        weights.append(w * filter_weight(
            config.threshold, tap.projected_mean(tap_angle),
            tap.projected_variance(tap_angle), config.keep_side,
        ))
    total = sum(weights)
    distilled_state = MixtureState(signal_state.components, [w / total for w in weights])

    shot = np.exp(-centers_s**2 / 2.0) / math.sqrt(2 * math.pi)
    rows_b = list(zip(
        centers_s.tolist(),
        shot.tolist(),
        marginal_pdf(signal_state, verify, centers_s).tolist(),
        marginal_pdf(distilled_state, verify, centers_s).tolist(),
        distilled_mc.tolist(),
    ))
    return {
        "fig2a_tap_marginal.csv": _csv(
            ["quadrature_snu", "analytic_density", "mc_density"], rows_a
        ),
        "fig2b_signal_marginal.csv": _csv(
            ["quadrature_snu", "shot_noise_density", "noisy_density",
             "distilled_density_analytic", "distilled_density_mc"],
            rows_b,
        ),
    }


def fig3_tables(config: ExperimentConfig, steps: int = 25) -> dict[str, str]:
    """Distilled variance and success probability versus threshold, analytic
    and Monte Carlo on one recorded dataset."""
    state = config.state()
    tap_mean, tap_var = quadrature_stats(_tap_state(config), config.rule().tap_angle)
    sigma_t = math.sqrt(tap_var)
    thresholds = tap_mean + np.linspace(-2 * sigma_t, 4 * sigma_t, steps)

    analytic = threshold_sweep(
        state, config.splitter(), config.rule(), config.verification_angle(),
        config.detector(), thresholds,
    )
    mc_rows = mc_sweep(config.simulation(), thresholds, stderr_method="normal")

    rows = []
    for (t, res), mc in zip(analytic, mc_rows):
        mc_ok = mc.result is not None
        rows.append((
            float(t),
            float(t - tap_mean),
            res.distilled_variance,
            variance_to_db(res.distilled_variance),
            res.success_probability,
            res.distilled_mean,
            mc.result.distilled_variance if mc_ok else None,
            variance_to_db(mc.result.distilled_variance) if mc_ok else None,
            mc.result.standard_error if mc_ok else None,
            mc.accepted_count,
            mc.error,
        ))
    return {
        "fig3_threshold_sweep.csv": _csv(
            ["threshold_snu", "threshold_rel_snu", "variance_snu", "variance_db",
             "success_probability", "mean_snu", "mc_variance_snu", "mc_variance_db",
             "mc_variance_stderr_snu", "mc_accepted_count", "mc_note"],
            rows,
        ),
    }


def fig4_tables(config: ExperimentConfig, steps: int = 31,
                relative_thresholds: tuple[float, ...] = (1.3, 5.3)) -> dict[str, str]:
    """Distilled variance and success probability versus tap angle, at fixed
    thresholds relative to the tap marginal center."""
    state = config.state()
    splitter = config.splitter()
    detector = config.detector()
    verify = config.verification_angle()
    tap_state = _tap_state(config)
    betas = np.linspace(0.0, 90.0, steps)

    rows = []
    for t_rel in relative_thresholds:
        for beta_deg in betas:
            beta = QuadratureAngle.from_degrees(float(beta_deg))
            center, _ = quadrature_stats(tap_state, beta)
            rule = PostSelectionRule(beta, center + t_rel, config.keep_side)
            res = conditional_distilled_stats(state, splitter, rule, verify, detector)
            rows.append((
                float(beta_deg), float(t_rel), float(center + t_rel),
                res.distilled_variance, variance_to_db(res.distilled_variance),
                res.success_probability,
            ))
    return {
        "fig4_angle_sweep.csv": _csv(
            ["beta_deg", "threshold_rel_snu", "threshold_snu",
             "variance_snu", "variance_db", "success_probability"],
            rows,
        ),
    }


def demo_wigner_config() -> ExperimentConfig:
    """Scaled-down bimodal state for Wigner reconstruction demonstrations."""
    return ExperimentConfig.model_validate({
        "var_sq_db": -3.1,
        "var_anti_db": 4.0,
        "gamma": 0.5,
        "displacement": {"x": 2.0, "p": 8.0},
        "tap_R": 0.25,
        "detector_eta": 1.0,
        "tap_angle_deg": 90.0,
        "verification_angle_deg": 0.0,
        "threshold": 4.0,
        "keep_side": "above",
        "samples": 50000,
        "seed": 424242,
        "notes": {
            "purpose": "moderate anti-squeezing stand-in for Wigner reconstruction;"
                       " the canonical +27 dB state would need a +/-80 SNU phase window",
            "threshold": "tap center of the displaced component, sqrt(R)*displacement.p",
        },
    })


def fig5_tables(config: ExperimentConfig | None = None, n_angles: int = 128,
                n_per_angle: int = 50_000, bins: int = 256,
                grid_points: int = 101) -> dict[str, str]:
    """Wigner densities: reconstructed noisy state, reconstructed distilled
    state, and the analytic noisy reference, all on one grid."""
    config = config or demo_wigner_config()
    sim = config.simulation(sample_count=n_per_angle)
    signal_state = transmitted_state(config.state(), config.splitter(), config.detector())
    extent = default_projection_range(signal_state)
    grid = GridSpec.symmetric(extent, grid_points)

    mixed = inverse_radon(protocol_projections(
        sim, n_angles, n_per_angle, bins, histogram_range=extent, postselect=False
    ), grid)
    distilled = inverse_radon(protocol_projections(
        sim, n_angles, n_per_angle, bins, histogram_range=extent, postselect=True
    ), grid)
    analytic = analytic_wigner_grid(signal_state, grid)

    return {
        "fig5_mixed_reconstructed.csv": _grid_csv(mixed),
        "fig5_distilled_reconstructed.csv": _grid_csv(distilled),
        "fig5_mixed_analytic.csv": _grid_csv(analytic),
        "fig5_config.json": config.model_dump_json(indent=2) + "\n",
    }


def reproduce_figure(figure: int, config: ExperimentConfig | None = None) -> dict[str, str]:
    """Emit the CSV files underlying one reference figure.

    Figures 2-4 use the shipped canonical configuration (also written into
    the output as canonical.json); figure 5 uses the documented
    moderate-anti-squeezing demonstration state.
    """
    if figure == 5:
        return fig5_tables(config)
    config = config or canonical_config()
    if figure == 2:
        files = fig2_tables(config)
    elif figure == 3:
        files = fig3_tables(config)
    elif figure == 4:
        files = fig4_tables(config)
    else:
        raise ValueError(f"figure must be one of 2, 3, 4, 5, got {figure}")
    files["canonical.json"] = canonical_config_text()
    return files
