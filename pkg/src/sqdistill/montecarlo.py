"""Stochastic simulation of the full distillation protocol.

Samples phase-space points from the mixture's Wigner density (a true
probability density for Gaussian mixtures), mixes in vacuum at the tap beam
splitter and at each lossy detector, records paired (signal, tap) quadrature
projections, and estimates post-selected statistics with uncertainties.
Serves as the independent oracle for the closed-form module.

Reproducibility contract: the generator is numpy's counter-based Philox
(Philox 4x64, 10 rounds).  Samples are produced in fixed-size substreams of
65536 draws; substream i of a run with seed s uses the 128-bit Philox key
((s mod 2^64) << 64) | i.  The sample arrays are therefore bit-identical
for a given (seed, sample_count) regardless of how many workers generate
the substreams.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .protocol import DetectorModel, DistillationResult, PostSelectionRule, TapSplitter
from .states import MixtureState, QuadratureAngle, as_angle

CHUNK = 1 << 16

# Index budget per bootstrap batch, keeps peak memory near 128 MB.
_BOOT_BATCH_ELEMENTS = 16_000_000

_NO_LABEL = -1


class InsufficientSamplesError(RuntimeError):
    """Fewer than two samples survive post-selection."""

    def __init__(self, accepted_count: int):
        super().__init__(
            f"insufficient selected samples: {accepted_count} accepted, need >= 2"
        )
        self.accepted_count = accepted_count


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed for one reproducible protocol run."""

    state: MixtureState
    splitter: TapSplitter
    rule: PostSelectionRule
    verification_angle: QuadratureAngle
    detector: DetectorModel
    sample_count: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "verification_angle", as_angle(self.verification_angle))
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")


@dataclass(frozen=True)
class PairedSamples:
    """Simultaneously recorded signal/tap quadrature values.

    ``component_labels`` is simulation-only ground truth (which mixture
    component produced each draw); ingested laboratory data carries the
    sentinel -1.
    """

    signal_values: np.ndarray
    tap_values: np.ndarray
    component_labels: np.ndarray

    def __post_init__(self):
        if not (len(self.signal_values) == len(self.tap_values) == len(self.component_labels)):
            raise ValueError("signal, tap and label arrays must have equal length")

    def __len__(self) -> int:
        return len(self.signal_values)


def _substream(seed: int, index: int) -> np.random.Generator:
    key = ((int(seed) % (1 << 64)) << 64) | index
    return np.random.Generator(np.random.Philox(key=key))


def _sample_chunk(config: SimulationConfig, index: int, count: int,
                  signal: np.ndarray, tap: np.ndarray, labels: np.ndarray) -> None:
    """Fill one substream's slice of the output arrays in place."""
    rng = _substream(config.seed, index)
    state = config.state
    t, r = config.splitter.transmittance, config.splitter.reflectance
    st, sr = math.sqrt(t), math.sqrt(r)
    eta = config.detector.efficiency
    se, sl = math.sqrt(eta), math.sqrt(1.0 - eta)

    cum = np.cumsum(state.weights)
    u = rng.random(count)
    lab = np.minimum(np.searchsorted(cum, u, side="right"), len(state) - 1)
    z = rng.standard_normal((8, count))

    mean_x = np.array([c.mean_x for c in state.components])
    mean_p = np.array([c.mean_p for c in state.components])
    std_x = np.sqrt([c.var_x for c in state.components])
    std_p = np.sqrt([c.var_p for c in state.components])

    x = mean_x[lab] + std_x[lab] * z[0]
    p = mean_p[lab] + std_p[lab] * z[1]
    # Tap beam splitter, vacuum on the open port; the sign convention matches
    # split_component_stats (tap picks up -sqrt(T) of the vacuum).
    x_s = st * x + sr * z[2]
    p_s = st * p + sr * z[3]
    x_t = sr * x - st * z[2]
    p_t = sr * p - st * z[3]
    # Detector loss mixes independent vacuum into each port.
    x_s = se * x_s + sl * z[4]
    p_s = se * p_s + sl * z[5]
    x_t = se * x_t + sl * z[6]
    p_t = se * p_t + sl * z[7]

    va = config.verification_angle
    ta = config.rule.tap_angle
    start = index * CHUNK
    signal[start:start + count] = va.cos() * x_s + va.sin() * p_s
    tap[start:start + count] = ta.cos() * x_t + ta.sin() * p_t
    labels[start:start + count] = lab


def sample_protocol(config: SimulationConfig, workers: int = 1) -> PairedSamples:
    """Draw ``config.sample_count`` protocol runs.

    Deterministic for a fixed config: the substream partition makes the
    result independent of ``workers``.
    """
    n = config.sample_count
    signal = np.empty(n)
    tap = np.empty(n)
    labels = np.empty(n, dtype=np.int64)
    n_chunks = (n + CHUNK - 1) // CHUNK
    counts = [min(CHUNK, n - i * CHUNK) for i in range(n_chunks)]
    if workers <= 1:
        for i, count in enumerate(counts):
            _sample_chunk(config, i, count, signal, tap, labels)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_sample_chunk, config, i, count, signal, tap, labels)
                for i, count in enumerate(counts)
            ]
            for f in futures:
                f.result()
    return PairedSamples(signal, tap, labels)


def selection_mask(samples: PairedSamples, rule: PostSelectionRule) -> np.ndarray:
    """Boolean mask of draws whose tap value passes the threshold."""
    if rule.keep_side == "above":
        return samples.tap_values >= rule.threshold
    return samples.tap_values <= rule.threshold


def _bootstrap_variance_stderr(
    kept: np.ndarray, resamples: int, seed: int
) -> float:
    rng = np.random.Generator(np.random.Philox(key=((int(seed) % (1 << 64)) << 64) | 0xB007))
    k = len(kept)
    batch = max(1, min(resamples, _BOOT_BATCH_ELEMENTS // k))
    boot = np.empty(resamples)
    done = 0
    while done < resamples:
        m = min(batch, resamples - done)
        idx = rng.integers(0, k, size=(m, k))
        boot[done:done + m] = np.var(kept[idx], axis=1, ddof=1)
        done += m
    return float(np.std(boot, ddof=1))


def postselect_estimate(
    samples: PairedSamples,
    rule: PostSelectionRule,
    stderr_method: str = "bootstrap",
    bootstrap_resamples: int = 200,
    bootstrap_seed: int = 0,
) -> DistillationResult:
    """Post-selected sample statistics.

    Keeps the signal values whose paired tap value passes the rule and
    returns their mean, unbiased variance, the acceptance fraction, and the
    standard error of the variance (``stderr_method`` of "bootstrap",
    default 200 resamples, or "normal" for var * sqrt(2 / (k - 1))).

    Raises
    ------
    InsufficientSamplesError
        If fewer than two draws pass; carries ``accepted_count``.
    """
    if len(samples) == 0:
        raise InsufficientSamplesError(0)
    mask = selection_mask(samples, rule)
    k = int(mask.sum())
    if k < 2:
        raise InsufficientSamplesError(k)
    kept = samples.signal_values[mask]
    mean = float(np.mean(kept))
    variance = float(np.var(kept, ddof=1))
    if stderr_method == "normal":
        stderr = variance * math.sqrt(2.0 / (k - 1))
    elif stderr_method == "bootstrap":
        stderr = _bootstrap_variance_stderr(kept, bootstrap_resamples, bootstrap_seed)
    else:
        raise ValueError(f"stderr_method must be 'bootstrap' or 'normal', got {stderr_method!r}")
    return DistillationResult(mean, variance, k / len(samples), stderr)


@dataclass(frozen=True)
class McSweepRow:
    """One threshold of an MC sweep; ``result`` is None when too few samples survived."""

    threshold: float
    accepted_count: int
    result: DistillationResult | None
    error: str | None = None


def mc_sweep(
    config: SimulationConfig,
    thresholds,
    samples: PairedSamples | None = None,
    **estimate_kwargs,
) -> list[McSweepRow]:
    """Post-select one recorded dataset at each threshold, ordered by threshold.

    The sample set is drawn once and reused, mirroring how the experiment
    post-selects a single recorded run; rows with fewer than two surviving
    draws are flagged rather than fatal.
    """
    if samples is None:
        samples = sample_protocol(config)
    rows = []
    for t in sorted(float(t) for t in thresholds):
        rule = replace(config.rule, threshold=t)
        accepted = int(selection_mask(samples, rule).sum())
        try:
            result = postselect_estimate(samples, rule, **estimate_kwargs)
            rows.append(McSweepRow(t, accepted, result))
        except InsufficientSamplesError as exc:
            rows.append(McSweepRow(t, accepted, None, str(exc)))
    return rows


def export_record_file(samples: PairedSamples, destination) -> None:
    """Write paired samples in the two-channel record-file format.

    Uses a one-sample-per-bin header (1 MHz rate, 1 us bins, 500 kHz toggle)
    and unit value scale so that reading the file back and re-binning
    reproduces the sample values bit-exactly.
    """
    from .ingest import RecordHeader, write_record_file

    header = RecordHeader(
        sample_rate_hz=1_000_000,
        bin_length_us=1.0,
        toggle_hz=500_000.0,
        toggle_phase_samples=0,
        value_scale=1.0,
    )
    write_record_file(header, samples.tap_values, samples.signal_values, destination)
