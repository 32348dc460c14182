"""Tests for the thin-client CLI: exit codes, file outputs, determinism."""

import json

import pytest

import sqdistill as sq
from sqdistill.cli import main
from sqdistill.config import canonical_config_text
from sqdistill.montecarlo import export_record_file
from sqdistill.tomography import wigner_grid_from_csv


@pytest.fixture()
def canonical_path(tmp_path) -> str:
    path = tmp_path / "canonical.json"
    path.write_text(canonical_config_text(), encoding="utf-8")
    return str(path)


def run(capsys, *argv) -> tuple[int, str, str]:
    status = main(list(argv))
    captured = capsys.readouterr()
    return status, captured.out, captured.err


class TestAnalyze:
    def test_no_selection_limit(self, capsys, canonical_path):
        status, out, _ = run(capsys, "analyze", canonical_path, "--threshold=-1e6")
        assert status == 0
        body = json.loads(out)
        assert body["distilled_variance_snu"] == pytest.approx(1.3384, abs=1e-4)
        assert body["distilled_variance_db"] == pytest.approx(1.27, abs=0.005)

    def test_missing_config_is_io_error(self, capsys, tmp_path):
        status, _, err = run(capsys, "analyze", str(tmp_path / "nope.json"))
        assert status == 2
        assert "cannot read" in err

    def test_invalid_config_names_field(self, capsys, tmp_path):
        cfg = json.loads(canonical_config_text())
        cfg["gamma"] = 2.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        status, _, err = run(capsys, "analyze", str(path))
        assert status == 1
        assert "gamma" in err

    def test_unknown_key_names_field(self, capsys, tmp_path):
        cfg = json.loads(canonical_config_text())
        cfg["tap_ratio"] = 0.5
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg), encoding="utf-8")
        status, _, err = run(capsys, "analyze", str(path))
        assert status == 1
        assert "tap_ratio" in err

    def test_unknown_flag_is_validation_error(self, capsys, canonical_path):
        status, _, err = run(capsys, "analyze", canonical_path, "--frobnicate")
        assert status == 1
        assert "frobnicate" in err


class TestSimulate:
    def test_deterministic_json(self, capsys, canonical_path):
        args = ("simulate", canonical_path, "--samples", "5000")
        status1, out1, _ = run(capsys, *args)
        status2, out2, _ = run(capsys, *args)
        assert status1 == status2 == 0
        assert out1 == out2
        body = json.loads(out1)
        assert body["sample_count"] == 5000
        assert body["standard_error_snu"] > 0


class TestSweeps:
    def test_threshold_sweep_file(self, capsys, canonical_path, tmp_path):
        out_csv = tmp_path / "sweep.csv"
        status, _, _ = run(
            capsys, "sweep-threshold", canonical_path,
            "--min=-5", "--max=40", "--steps", "6", "--out", str(out_csv),
        )
        assert status == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0].split(",")[0:2] == ["threshold_snu", "distilled_mean_snu"]
        assert len(lines) == 7
        # identical re-run reproduces identical bytes
        first = out_csv.read_bytes()
        run(capsys, "sweep-threshold", canonical_path,
            "--min=-5", "--max=40", "--steps", "6", "--out", str(out_csv))
        assert out_csv.read_bytes() == first

    def test_angle_sweep_file(self, capsys, canonical_path, tmp_path):
        out_csv = tmp_path / "angle.csv"
        status, _, _ = run(
            capsys, "sweep-angle", canonical_path,
            "--threshold", "10", "--steps", "5", "--out", str(out_csv),
        )
        assert status == 0
        lines = out_csv.read_text().splitlines()
        assert lines[0].startswith("beta_deg,")
        assert len(lines) == 6


class TestTomo:
    def test_analytic_grid_file(self, capsys, canonical_path, tmp_path):
        out_csv = tmp_path / "wigner.csv"
        status, _, _ = run(
            capsys, "tomo", canonical_path, "--analytic",
            "--grid-points", "21", "--grid-extent", "8", "--range", "8",
            "--out", str(out_csv),
        )
        assert status == 0
        grid = wigner_grid_from_csv(out_csv)
        assert grid.values.shape == (21, 21)
        assert grid.values.max() > 0


class TestIngest:
    def test_matches_direct_estimate(self, capsys, tmp_path):
        cfg = sq.canonical_config()
        samples = sq.sample_protocol(cfg.simulation(sample_count=8000))
        record = tmp_path / "run.csv"
        export_record_file(samples, record)
        out_json = tmp_path / "result.json"
        status, _, _ = run(
            capsys, "ingest", str(record), "--threshold", "19.94", "--out", str(out_json),
        )
        assert status == 0
        body = json.loads(out_json.read_text())
        direct = sq.postselect_estimate(samples, cfg.rule(19.94))
        assert body["result"]["distilled_variance_snu"] == direct.distilled_variance
        assert body["record_count"] == 8000

    def test_missing_record_file(self, capsys, tmp_path):
        status, _, err = run(capsys, "ingest", str(tmp_path / "nope.csv"), "--threshold", "0")
        assert status == 2
        assert "cannot read" in err


class TestReproduce:
    def test_figure_4_directory(self, capsys, tmp_path):
        out_dir = tmp_path / "fig4"
        status, _, err = run(capsys, "reproduce", "--fig", "4", "--out", str(out_dir))
        assert status == 0
        names = sorted(p.name for p in out_dir.iterdir())
        assert names == ["canonical.json", "fig4_angle_sweep.csv"]
        table = (out_dir / "fig4_angle_sweep.csv").read_text().splitlines()
        assert table[0] == ("beta_deg,threshold_rel_snu,threshold_snu,"
                            "variance_snu,variance_db,success_probability")
        # both relative thresholds present, variance and probability populated
        rows = [line.split(",") for line in table[1:]]
        rels = {row[1] for row in rows}
        assert rels == {"1.3", "5.3"}

    def test_bad_figure_number(self, capsys, tmp_path):
        status, _, err = run(capsys, "reproduce", "--fig", "7", "--out", str(tmp_path))
        assert status == 1


class TestRemoteServer:
    def test_unreachable_server_is_io_error(self, capsys, canonical_path):
        status, _, err = run(
            capsys, "--server", "http://127.0.0.1:9", "analyze", canonical_path,
        )
        assert status == 2
        assert "unreachable" in err
