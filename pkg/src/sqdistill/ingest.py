"""Two-channel measurement-record ingestion: parse, bin, and synchronize.

Record files carry already-demodulated per-sample quadrature values for the
tap and signal channels as text CSV with '#'-prefixed header lines:

    # format: cvdistill-record v1
    # sample_rate_hz: 10000000
    # bin_length_us: 1.0
    # toggle_hz: 500000
    # toggle_phase_samples: 0
    # value_scale: 3.0518e-4
    index,tap_raw,signal_raw
    0,123,-456
    ...

Binning averages consecutive groups of sample_rate*bin_length samples per
channel and multiplies by value_scale.  The displacement modulation is an
exact square wave toggling at toggle_hz; it is ON starting at sample offset
toggle_phase_samples, so sample s lies in half-period
floor((s - phase) / half_period) and is ON when that index is even.  A bin
is kept only when all of its samples fall in a single half-period; in
permissive mode bins straddling a toggle edge are rejected and counted,
while the default strict mode requires a header whose bins cannot straddle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from io import TextIOBase
from pathlib import Path
from typing import Literal

import numpy as np

from .montecarlo import PairedSamples

FORMAT_LINE = "# format: cvdistill-record v1"

_HEADER_FIELDS = (
    "sample_rate_hz",
    "bin_length_us",
    "toggle_hz",
    "toggle_phase_samples",
    "value_scale",
)

ModulationFilter = Literal["all", "on_only", "off_only"]


class RecordParseError(ValueError):
    """Malformed record file; carries the 1-based offending line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NoCompleteBinsError(RuntimeError):
    """Fewer raw samples than one complete bin."""


class NoRecordsError(RuntimeError):
    """No binned records left after filtering."""


@dataclass(frozen=True)
class RecordHeader:
    """Acquisition metadata for a two-channel record file."""

    sample_rate_hz: int
    bin_length_us: float
    toggle_hz: float
    toggle_phase_samples: int
    value_scale: float

    def __post_init__(self):
        if self.sample_rate_hz < 1:
            raise ValueError(f"sample_rate_hz must be >= 1, got {self.sample_rate_hz}")
        if self.bin_length_us <= 0 or self.toggle_hz <= 0:
            raise ValueError("bin_length_us and toggle_hz must be positive")
        if self.value_scale == 0:
            raise ValueError("value_scale must be nonzero")
        spb = self.sample_rate_hz * self.bin_length_us / 1e6
        if abs(spb - round(spb)) > 1e-6 * max(1.0, spb) or round(spb) < 1:
            raise ValueError(
                f"sample_rate * bin_length must be an integer >= 1 sample, got {spb}"
            )

    @property
    def samples_per_bin(self) -> int:
        return round(self.sample_rate_hz * self.bin_length_us / 1e6)

    def half_period_samples(self) -> Fraction:
        """Toggle half-period in samples, exact."""
        return Fraction(self.sample_rate_hz) / (2 * Fraction(self.toggle_hz))

    def is_bin_aligned(self) -> bool:
        """True when no bin can straddle a toggle edge: the half-period is a
        whole number of bins and the toggle phase sits on a bin boundary."""
        spb = self.samples_per_bin
        h = self.half_period_samples()
        return (h / spb).denominator == 1 and self.toggle_phase_samples % spb == 0


@dataclass(frozen=True)
class BinnedRecord:
    """One time bin: averaged channel values and the modulation label."""

    bin_index: int
    tap_value: float
    signal_value: float
    modulation_on: bool

    def __post_init__(self):
        if not (math.isfinite(self.tap_value) and math.isfinite(self.signal_value)):
            raise ValueError(f"bin {self.bin_index}: values must be finite")


@dataclass(frozen=True)
class BinningResult:
    """Clean bins plus the count of bins rejected for straddling a toggle edge."""

    records: list[BinnedRecord]
    rejected_bin_count: int
    total_bins: int


def _parse_header_value(key: str, text: str, line_number: int):
    try:
        if key in ("sample_rate_hz", "toggle_phase_samples"):
            return int(text)
        return float(text)
    except ValueError:
        raise RecordParseError(line_number, f"non-numeric header value for {key}: {text!r}") from None


def read_record_file(source) -> tuple[RecordHeader, np.ndarray, np.ndarray]:
    """Parse a record file into (header, tap_raw, signal_raw).

    ``source`` is a path or an open text stream.  Raw values are returned
    unscaled, as written.

    Raises
    ------
    RecordParseError
        On a malformed header line, a non-numeric field, or an inconsistent
        column count; the exception carries the line number.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return read_record_file(fh)
    if not isinstance(source, TextIOBase) and not hasattr(source, "__iter__"):
        raise TypeError(f"cannot read records from {type(source)!r}")

    lines = iter(enumerate(source, start=1))
    try:
        n, first = next(lines)
    except StopIteration:
        raise RecordParseError(1, "empty file") from None
    if first.rstrip("\n") != FORMAT_LINE:
        raise RecordParseError(n, f"expected {FORMAT_LINE!r}, got {first.rstrip()!r}")

    fields: dict[str, float | int] = {}
    column_line_seen = False
    tap: list[float] = []
    signal: list[float] = []
    last_line = n
    for n, line in lines:
        last_line = n
        line = line.rstrip("\n")
        if not line:
            continue
        if line.startswith("#"):
            if column_line_seen:
                raise RecordParseError(n, "header line after the data section")
            body = line[1:].strip()
            if ":" not in body:
                raise RecordParseError(n, f"malformed header line {line!r}")
            key, _, value = body.partition(":")
            key = key.strip()
            if key not in _HEADER_FIELDS:
                raise RecordParseError(n, f"unknown header field {key!r}")
            fields[key] = _parse_header_value(key, value.strip(), n)
            continue
        if not column_line_seen:
            if line != "index,tap_raw,signal_raw":
                raise RecordParseError(n, f"expected column header, got {line!r}")
            missing = [k for k in _HEADER_FIELDS if k not in fields]
            if missing:
                raise RecordParseError(n, f"missing header fields: {', '.join(missing)}")
            column_line_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise RecordParseError(n, f"expected 3 columns, got {len(parts)}")
        try:
            int(parts[0])
            tap.append(float(parts[1]))
            signal.append(float(parts[2]))
        except ValueError:
            raise RecordParseError(n, f"non-numeric field in row {line!r}") from None
    if not column_line_seen:
        raise RecordParseError(last_line, "missing column header line")

    try:
        header = RecordHeader(**fields)  # type: ignore[arg-type]
    except ValueError as exc:
        raise RecordParseError(1, f"invalid header: {exc}") from None
    return header, np.array(tap), np.array(signal)


def _format_raw(value) -> str:
    f = float(value)
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def write_record_file(header: RecordHeader, tap_raw, signal_raw, destination) -> None:
    """Write a record file; values round-trip exactly through read_record_file."""
    tap_raw = np.asarray(tap_raw)
    signal_raw = np.asarray(signal_raw)
    if tap_raw.shape != signal_raw.shape or tap_raw.ndim != 1:
        raise ValueError("tap and signal raw arrays must be 1-D and equally long")
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8") as fh:
            write_record_file(header, tap_raw, signal_raw, fh)
        return
    w = destination.write
    w(FORMAT_LINE + "\n")
    w(f"# sample_rate_hz: {header.sample_rate_hz}\n")
    w(f"# bin_length_us: {header.bin_length_us!r}\n")
    w(f"# toggle_hz: {header.toggle_hz!r}\n")
    w(f"# toggle_phase_samples: {header.toggle_phase_samples}\n")
    w(f"# value_scale: {header.value_scale!r}\n")
    w("index,tap_raw,signal_raw\n")
    for i, (t, s) in enumerate(zip(tap_raw, signal_raw)):
        w(f"{i},{_format_raw(t)},{_format_raw(s)}\n")


def _half_period_index(sample: int, phase: int, h_num: int, h_den: int) -> int:
    # floor((sample - phase) / (h_num / h_den)) in exact integer arithmetic
    return ((sample - phase) * h_den) // h_num


def bin_and_sync(
    header: RecordHeader,
    tap_raw,
    signal_raw,
    permissive: bool = False,
) -> BinningResult:
    """Average raw samples into toggle-synchronized bins.

    Every complete group of ``samples_per_bin`` samples becomes a candidate
    bin with value value_scale * mean(raw).  Bins whose samples span a
    toggle edge are rejected (only possible in permissive mode); clean bins
    are labeled with the modulation state of their half-period.

    Raises
    ------
    NoCompleteBinsError
        If there are fewer samples than one bin.
    ValueError
        In strict mode when the header allows straddling bins.
    """
    tap_raw = np.asarray(tap_raw, dtype=float)
    signal_raw = np.asarray(signal_raw, dtype=float)
    if tap_raw.shape != signal_raw.shape or tap_raw.ndim != 1:
        raise ValueError("tap and signal raw arrays must be 1-D and equally long")
    if not permissive and not header.is_bin_aligned():
        raise ValueError(
            "toggle is not aligned to bin boundaries; pass permissive=True to "
            "reject straddling bins instead"
        )
    spb = header.samples_per_bin
    total = len(tap_raw) // spb
    if total == 0:
        raise NoCompleteBinsError(
            f"{len(tap_raw)} samples is less than one {spb}-sample bin"
        )
    tap_bins = header.value_scale * tap_raw[: total * spb].reshape(total, spb).mean(axis=1)
    signal_bins = header.value_scale * signal_raw[: total * spb].reshape(total, spb).mean(axis=1)

    h = header.half_period_samples()
    h_num, h_den = h.numerator, h.denominator
    phase = header.toggle_phase_samples
    records = []
    rejected = 0
    for b in range(total):
        first = _half_period_index(b * spb, phase, h_num, h_den)
        last = _half_period_index(b * spb + spb - 1, phase, h_num, h_den)
        if first != last:
            rejected += 1
            continue
        records.append(
            BinnedRecord(b, float(tap_bins[b]), float(signal_bins[b]), first % 2 == 0)
        )
    return BinningResult(records, rejected, total)


def records_to_pairs(
    records: list[BinnedRecord], modulation_filter: ModulationFilter = "all"
) -> PairedSamples:
    """Project binned records into the paired-samples shape.

    Component labels are unknown for measured data and carry the sentinel -1.

    Raises
    ------
    NoRecordsError
        If nothing survives the modulation filter.
    """
    if modulation_filter == "all":
        kept = records
    elif modulation_filter == "on_only":
        kept = [r for r in records if r.modulation_on]
    elif modulation_filter == "off_only":
        kept = [r for r in records if not r.modulation_on]
    else:
        raise ValueError(
            f"modulation_filter must be 'all', 'on_only' or 'off_only', got {modulation_filter!r}"
        )
    if not kept:
        raise NoRecordsError(f"no records left after filter {modulation_filter!r}")
    return PairedSamples(
        np.array([r.signal_value for r in kept]),
        np.array([r.tap_value for r in kept]),
        np.full(len(kept), -1, dtype=np.int64),
    )
