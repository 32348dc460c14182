"""Tests for record-file parsing, binning, and pipeline identity."""

import io
import math
from fractions import Fraction

import numpy as np
import pytest

from sqdistill.ingest import (
    BinnedRecord,
    NoCompleteBinsError,
    NoRecordsError,
    RecordHeader,
    RecordParseError,
    bin_and_sync,
    read_record_file,
    records_to_pairs,
    write_record_file,
)
from sqdistill.montecarlo import export_record_file, postselect_estimate, sample_protocol
from sqdistill.protocol import DetectorModel, PostSelectionRule, TapSplitter
from sqdistill.states import QuadratureAngle, make_noisy_state_xy
from sqdistill.montecarlo import SimulationConfig

CANONICAL = RecordHeader(
    sample_rate_hz=10_000_000,
    bin_length_us=1.0,
    toggle_hz=500_000.0,
    toggle_phase_samples=0,
    value_scale=3.0518e-4,
)


def brute_force_straddle_count(header: RecordHeader, n_samples: int) -> int:
    """Count bins whose samples span more than one toggle half-period."""
    h = header.half_period_samples()
    spb = header.samples_per_bin
    rejected = 0
    for b in range(n_samples // spb):
        indices = {
            math.floor(Fraction(s - header.toggle_phase_samples) / h)
            for s in range(b * spb, (b + 1) * spb)
        }
        if len(indices) > 1:
            rejected += 1
    return rejected


class TestRecordHeader:
    def test_canonical_derived_quantities(self):
        assert CANONICAL.samples_per_bin == 10
        assert CANONICAL.half_period_samples() == 10
        assert CANONICAL.is_bin_aligned()

    def test_fractional_bin_rejected(self):
        with pytest.raises(ValueError):
            RecordHeader(10_000_000, 0.25, 500_000.0, 0, 1.0)  # 2.5 samples per bin

    def test_misaligned_header_detected(self):
        misaligned = RecordHeader(10_000_000, 1.0, 400_000.0, 0, 1.0)  # 12.5 samples
        assert not misaligned.is_bin_aligned()
        phase = RecordHeader(10_000_000, 1.0, 500_000.0, 3, 1.0)
        assert not phase.is_bin_aligned()

    def test_invalid_fields(self):
        with pytest.raises(ValueError):
            RecordHeader(0, 1.0, 500_000.0, 0, 1.0)
        with pytest.raises(ValueError):
            RecordHeader(10_000_000, 1.0, -5.0, 0, 1.0)
        with pytest.raises(ValueError):
            RecordHeader(10_000_000, 1.0, 500_000.0, 0, 0.0)


class TestReadWrite:
    def test_round_trip_exact(self):
        rng = np.random.default_rng(21)
        tap = rng.standard_normal(137)
        signal = rng.standard_normal(137) * (1.0 / 3.0)
        buf = io.StringIO()
        write_record_file(CANONICAL, tap, signal, buf)
        buf.seek(0)
        header, tap_back, signal_back = read_record_file(buf)
        assert header == CANONICAL
        assert np.array_equal(tap, tap_back)
        assert np.array_equal(signal, signal_back)

    def test_round_trip_integers(self, tmp_path):
        path = tmp_path / "run.csv"
        tap = np.array([123, -456, 32767, -32768])
        signal = np.array([0, 1, -1, 7])
        write_record_file(CANONICAL, tap, signal, path)
        header, tap_back, signal_back = read_record_file(path)
        assert np.array_equal(tap_back, tap)
        assert np.array_equal(signal_back, signal)
        assert header.value_scale == CANONICAL.value_scale

    def test_empty_data_section(self):
        buf = io.StringIO()
        write_record_file(CANONICAL, np.array([]), np.array([]), buf)
        buf.seek(0)
        header, tap, signal = read_record_file(buf)
        assert header == CANONICAL
        assert len(tap) == 0 and len(signal) == 0

    def test_spec_sample_document(self):
        text = (
            "# format: cvdistill-record v1\n"
            "# sample_rate_hz: 10000000\n"
            "# bin_length_us: 1.0\n"
            "# toggle_hz: 500000\n"
            "# toggle_phase_samples: 0\n"
            "# value_scale: 3.0518e-4\n"
            "index,tap_raw,signal_raw\n"
            "0,123,-456\n"
        )
        header, tap, signal = read_record_file(io.StringIO(text))
        assert header.sample_rate_hz == 10_000_000
        assert tap[0] == 123.0
        assert signal[0] == -456.0

    @pytest.mark.parametrize(
        "mutate,bad_line",
        [
            (lambda L: ["# format: other v9"] + L[1:], 1),
            (lambda L: L[:3] + ["# frobnication: 3"] + L[3:], 4),
            (lambda L: L[:2] + ["# bad header line"] + L[2:], 3),
            (lambda L: L[:3] + ["# toggle_hz: fast"] + L[4:], 4),
            (lambda L: L + ["1,2"], 9),
            (lambda L: L + ["1,two,3"], 9),
            (lambda L: L[:7] + ["0,1,2", "# sample_rate_hz: 1"], 9),
        ],
    )
    def test_parse_errors_carry_line_numbers(self, mutate, bad_line):
        base = (
            "# format: cvdistill-record v1\n"
            "# sample_rate_hz: 10000000\n"
            "# bin_length_us: 1.0\n"
            "# toggle_hz: 500000\n"
            "# toggle_phase_samples: 0\n"
            "# value_scale: 3.0518e-4\n"
            "index,tap_raw,signal_raw\n"
            "0,123,-456\n"
        ).splitlines()
        text = "\n".join(mutate(base)) + "\n"
        with pytest.raises(RecordParseError) as exc:
            read_record_file(io.StringIO(text))
        assert exc.value.line_number == bad_line

    def test_missing_header_field(self):
        text = (
            "# format: cvdistill-record v1\n"
            "# sample_rate_hz: 10000000\n"
            "index,tap_raw,signal_raw\n"
        )
        with pytest.raises(RecordParseError, match="missing header fields"):
            read_record_file(io.StringIO(text))


class TestBinAndSync:
    def test_constant_input(self):
        n = 200
        result = bin_and_sync(CANONICAL, np.full(n, 4.0), np.full(n, -2.0))
        assert result.total_bins == 20
        assert result.rejected_bin_count == 0
        for rec in result.records:
            assert rec.tap_value == pytest.approx(4.0 * CANONICAL.value_scale, rel=1e-15)
            assert rec.signal_value == pytest.approx(-2.0 * CANONICAL.value_scale, rel=1e-15)

    def test_canonical_alternation(self):
        # 200 samples -> 20 bins; the 500 kHz toggle flips every bin, giving
        # 10 on-labeled and 10 off-labeled bins, starting on at phase 0.
        n = 200
        result = bin_and_sync(CANONICAL, np.zeros(n), np.zeros(n))
        flags = [r.modulation_on for r in result.records]
        assert len(flags) == 20
        assert flags == [i % 2 == 0 for i in range(20)]
        assert sum(flags) == 10

    def test_sixteen_bit_scaling(self):
        header = RecordHeader(1_000_000, 1.0, 500_000.0, 0, 3.0518e-4)
        result = bin_and_sync(header, np.array([32767.0]), np.array([-32768.0]))
        assert result.records[0].tap_value == pytest.approx(32767 * 3.0518e-4, rel=1e-15)

    def test_binning_linearity(self):
        rng = np.random.default_rng(22)
        x = rng.standard_normal(400)
        y = rng.standard_normal(400)
        a, b = 1.7, -0.3
        zeros = np.zeros(400)
        bx = np.array([r.tap_value for r in bin_and_sync(CANONICAL, x, zeros).records])
        by = np.array([r.tap_value for r in bin_and_sync(CANONICAL, y, zeros).records])
        bxy = np.array(
            [r.tap_value for r in bin_and_sync(CANONICAL, a * x + b * y, zeros).records]
        )
        assert np.allclose(bxy, a * bx + b * by, atol=1e-12)

    def test_partial_trailing_bin_dropped(self):
        result = bin_and_sync(CANONICAL, np.zeros(205), np.zeros(205))
        assert result.total_bins == 20

    def test_too_few_samples(self):
        with pytest.raises(NoCompleteBinsError):
            bin_and_sync(CANONICAL, np.zeros(7), np.zeros(7))

    def test_strict_mode_rejects_misaligned(self):
        header = RecordHeader(10_000_000, 1.0, 500_000.0, 3, 1.0)
        with pytest.raises(ValueError, match="permissive"):
            bin_and_sync(header, np.zeros(100), np.zeros(100))

    def test_permissive_misaligned_phase(self):
        header = RecordHeader(10_000_000, 1.0, 500_000.0, 3, 1.0)
        n = 200
        result = bin_and_sync(header, np.zeros(n), np.zeros(n), permissive=True)
        expected_rejected = brute_force_straddle_count(header, n)
        assert result.rejected_bin_count == expected_rejected
        assert result.rejected_bin_count + len(result.records) == result.total_bins
        # phase 3 puts an edge inside every bin (edges at 3, 13, 23, ...)
        assert expected_rejected == 20

    @pytest.mark.parametrize("seed", range(8))
    def test_permissive_rejection_matches_combinatorial_count(self, seed):
        rng = np.random.default_rng(100 + seed)
        header = RecordHeader(
            sample_rate_hz=10_000_000,
            bin_length_us=1.0,
            toggle_hz=float(rng.uniform(3e5, 9e5)),
            toggle_phase_samples=int(rng.integers(0, 40)),
            value_scale=1.0,
        )
        n = int(rng.integers(200, 800))
        result = bin_and_sync(header, np.zeros(n), np.zeros(n), permissive=True)
        assert result.rejected_bin_count == brute_force_straddle_count(header, n)
        assert result.rejected_bin_count + len(result.records) == result.total_bins


class TestRecordsToPairs:
    def make_records(self, n=20):
        return [BinnedRecord(i, float(i), float(-i), i % 2 == 0) for i in range(n)]

    def test_filter_all_preserves_length(self):
        pairs = records_to_pairs(self.make_records())
        assert len(pairs) == 20
        assert np.all(pairs.component_labels == -1)

    def test_off_only_keeps_half(self):
        pairs = records_to_pairs(self.make_records(), "off_only")
        assert len(pairs) == 10
        assert np.array_equal(pairs.tap_values, np.arange(1, 20, 2, dtype=float))

    def test_empty_after_filter(self):
        records = [BinnedRecord(0, 1.0, 1.0, True)]
        with pytest.raises(NoRecordsError):
            records_to_pairs(records, "off_only")

    def test_unknown_filter(self):
        with pytest.raises(ValueError):
            records_to_pairs(self.make_records(), "even_only")


class TestPipelineIdentity:
    def test_export_ingest_estimate_bit_exact(self, tmp_path):
        config = SimulationConfig(
            state=make_noisy_state_xy(0.5, 2.5, 0.5, 1.0, 4.0),
            splitter=TapSplitter.from_reflectance(0.2),
            rule=PostSelectionRule(QuadratureAngle(math.pi / 2), 0.8),
            verification_angle=QuadratureAngle(0.0),
            detector=DetectorModel(),
            sample_count=30_000,
            seed=99,
        )
        samples = sample_protocol(config)
        path = tmp_path / "export.csv"
        export_record_file(samples, path)

        header, tap_raw, signal_raw = read_record_file(path)
        binned = bin_and_sync(header, tap_raw, signal_raw)
        assert binned.rejected_bin_count == 0
        pairs = records_to_pairs(binned.records)

        assert np.array_equal(pairs.signal_values, samples.signal_values)
        assert np.array_equal(pairs.tap_values, samples.tap_values)
        direct = postselect_estimate(samples, config.rule)
        ingested = postselect_estimate(pairs, config.rule)
        assert direct == ingested  # bit-exact, including the bootstrap stderr
