"""Closed-form theory of tap-and-post-select squeezing distillation.

The protocol: the noisy mixture state hits a tap beam splitter; one output
(the tap) is measured along a chosen quadrature; the other (the signal) is
kept only when the tap outcome passes a threshold.  For each mixture
component the tap outcome is Gaussian, so the probability that a component
survives selection is an Erfc filter weight, and the post-selected signal
statistics follow in closed form.

Two regimes are implemented:

* ``distilled_stats`` - the tap projection is uncorrelated with the verified
  signal quadrature inside every component (e.g. tap measures p, signal
  measures x).  Selection then only reweights the components.
* ``conditional_distilled_stats`` - arbitrary tap angles, where selection
  also truncates each component; uses exact truncated-bivariate-Gaussian
  moments per component.

Filter weights and component posteriors are computed in log space so that
extreme thresholds degrade gracefully (success probability underflows to 0
while the posterior, and hence the distilled variance, stays exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

from scipy.special import erfc, erfcx, log_ndtr, logsumexp

from .states import GaussianComponent, MixtureState, QuadratureAngle, as_angle

KeepSide = Literal["above", "below"]

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT2 = math.sqrt(2.0)

# Below this the selected ensemble is empty for all practical purposes.
_WEIGHT_UNDERFLOW = 1e-300


class CorrelatedTapError(ValueError):
    """Tap and verified quadratures are correlated within a component."""


class EmptySelectionError(RuntimeError):
    """Post-selection keeps nothing (weight underflow)."""


@dataclass(frozen=True)
class DetectorModel:
    """Detector quantum efficiency, modeled as a loss beam splitter mixing in vacuum."""

    efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in (0, 1], got {self.efficiency}")


@dataclass(frozen=True)
class TapSplitter:
    """Beam splitter diverting a fraction ``reflectance`` into the tap arm."""

    transmittance: float
    reflectance: float

    def __post_init__(self):
        if not (self.transmittance > 0.0 and self.reflectance > 0.0):
            raise ValueError(
                f"T and R must be strictly positive, got T={self.transmittance}, "
                f"R={self.reflectance}"
            )
        if abs(self.transmittance + self.reflectance - 1.0) > 1e-12:
            raise ValueError(
                f"T + R must equal 1, got {self.transmittance + self.reflectance!r}"
            )

    @classmethod
    def from_reflectance(cls, reflectance: float) -> "TapSplitter":
        return cls(1.0 - reflectance, reflectance)

    @classmethod
    def from_transmittance(cls, transmittance: float) -> "TapSplitter":
        return cls(transmittance, 1.0 - transmittance)


@dataclass(frozen=True)
class PostSelectionRule:
    """Keep the signal when the tap quadrature falls on ``keep_side`` of ``threshold``."""

    tap_angle: QuadratureAngle
    threshold: float
    keep_side: KeepSide = "above"

    def __post_init__(self):
        object.__setattr__(self, "tap_angle", as_angle(self.tap_angle))
        if self.keep_side not in ("above", "below"):
            raise ValueError(f"keep_side must be 'above' or 'below', got {self.keep_side!r}")


@dataclass(frozen=True)
class DistillationResult:
    """Post-selected signal statistics.

    ``standard_error`` is the 1-sigma uncertainty of ``distilled_variance``;
    it is 0 for analytic results.
    """

    distilled_mean: float
    distilled_variance: float
    success_probability: float
    standard_error: float = 0.0

    def __post_init__(self):
        if not self.distilled_variance > 0.0:
            raise ValueError(f"distilled variance must be positive, got {self.distilled_variance}")
        if not 0.0 <= self.success_probability <= 1.0:
            raise ValueError(f"success probability must lie in [0, 1], got {self.success_probability}")


def split_component_stats(
    component: GaussianComponent, splitter: TapSplitter
) -> tuple[GaussianComponent, GaussianComponent, float, float]:
    """Beam-splitter transform of one component, mixing in vacuum on the open port.

    Signal output: x_s = sqrt(T) x + sqrt(R) x_v; tap output:
    x_t = sqrt(R) x - sqrt(T) x_v (and the same for p).  Returns the signal
    component, the tap component, and the cross covariances between the two
    ports per quadrature, sqrt(T R) (V - 1).
    """
    t, r = splitter.transmittance, splitter.reflectance
    st, sr = math.sqrt(t), math.sqrt(r)
    signal = GaussianComponent(
        st * component.mean_x,
        st * component.mean_p,
        t * component.var_x + r,
        t * component.var_p + r,
    )
    tap = GaussianComponent(
        sr * component.mean_x,
        sr * component.mean_p,
        r * component.var_x + t,
        r * component.var_p + t,
    )
    cross_x = st * sr * (component.var_x - 1.0)
    cross_p = st * sr * (component.var_p - 1.0)
    return signal, tap, cross_x, cross_p


def apply_detector(component: GaussianComponent, detector: DetectorModel) -> GaussianComponent:
    """Loss-model detector: mix with vacuum at efficiency eta."""
    eta = detector.efficiency
    se = math.sqrt(eta)
    return GaussianComponent(
        se * component.mean_x,
        se * component.mean_p,
        eta * component.var_x + (1.0 - eta),
        eta * component.var_p + (1.0 - eta),
    )


def transmitted_state(
    state: MixtureState, splitter: TapSplitter, detector: DetectorModel | None = None
) -> MixtureState:
    """Mixture seen by the verification detector in the signal arm (no selection)."""
    detector = detector or DetectorModel()
    components = []
    for comp in state.components:
        signal, _, _, _ = split_component_stats(comp, splitter)
        components.append(apply_detector(signal, detector))
    return MixtureState(components, state.weights)


def filter_weight(
    threshold: float,
    projected_tap_mean: float,
    tap_variance: float,
    keep_side: KeepSide = "above",
) -> float:
    """Probability that a Gaussian tap outcome passes the threshold.

    keep_side='above': (1/2) Erfc[(threshold - mean) / sqrt(2 var)];
    keep_side='below': the complement.
    """
    if tap_variance <= 0.0:
        raise ValueError(f"tap variance must be positive, got {tap_variance}")
    z = (threshold - projected_tap_mean) / math.sqrt(2.0 * tap_variance)
    if keep_side == "above":
        return 0.5 * erfc(z)
    if keep_side == "below":
        return 0.5 * erfc(-z)
    raise ValueError(f"keep_side must be 'above' or 'below', got {keep_side!r}")


def _log_filter_weight(
    threshold: float, tap_mean: float, tap_variance: float, keep_side: KeepSide
) -> float:
    sigma = math.sqrt(tap_variance)
    if keep_side == "above":
        return float(log_ndtr((tap_mean - threshold) / sigma))
    return float(log_ndtr((threshold - tap_mean) / sigma))


def _truncated_moments(
    signal_mean: float,
    signal_variance: float,
    tap_mean: float,
    tap_variance: float,
    cross_covariance: float,
    threshold: float,
    keep_side: KeepSide,
) -> tuple[float, float, float]:
    """Moments of the signal projection conditioned on the tap passing the threshold.

    Returns (mean, variance, log_weight) for one jointly Gaussian
    (signal, tap) pair.  Uses the scaled complementary error function for the
    normal hazard ratio, so extreme thresholds stay finite.
    """
    if signal_variance <= 0.0 or tap_variance <= 0.0:
        raise ValueError("signal and tap variances must be positive")
    cmax = math.sqrt(signal_variance * tap_variance)
    if abs(cross_covariance) > cmax * (1.0 + 1e-12):
        raise ValueError(
            f"cross covariance {cross_covariance} exceeds bound {cmax} "
            "(not a valid joint Gaussian)"
        )
    if math.isinf(threshold):
        kept_all = (threshold < 0) == (keep_side == "above")
        log_w = 0.0 if kept_all else -math.inf
        return signal_mean, signal_variance, log_w

    sigma_t = math.sqrt(tap_variance)
    alpha = (threshold - tap_mean) / sigma_t
    if keep_side == "above":
        log_w = float(log_ndtr(-alpha))
        lam = _SQRT_2_OVER_PI / erfcx(alpha / _SQRT2)  # phi(alpha) / (1 - Phi(alpha))
        mean = signal_mean + (cross_covariance / sigma_t) * lam
        shrink = lam * (lam - alpha)
    else:
        log_w = float(log_ndtr(alpha))
        lam = _SQRT_2_OVER_PI / erfcx(-alpha / _SQRT2)  # phi(alpha) / Phi(alpha)
        mean = signal_mean - (cross_covariance / sigma_t) * lam
        shrink = lam * (lam + alpha)
    variance = signal_variance - (cross_covariance**2 / tap_variance) * shrink
    return float(mean), float(variance), log_w


def conditional_truncated_stats(
    signal_mean: float,
    signal_variance: float,
    tap_mean: float,
    tap_variance: float,
    cross_covariance: float,
    threshold: float,
    keep_side: KeepSide = "above",
) -> tuple[float, float, float]:
    """Truncated-bivariate-Gaussian signal moments for one component.

    Returns (mean, variance, weight) where weight is the probability that
    the tap outcome passes the threshold.  With zero cross covariance the
    mean and variance are unchanged and the weight equals ``filter_weight``.

    Raises
    ------
    EmptySelectionError
        If the selection probability underflows below 1e-300.
    """
    mean, variance, log_w = _truncated_moments(
        signal_mean, signal_variance, tap_mean, tap_variance,
        cross_covariance, threshold, keep_side,
    )
    weight = math.exp(log_w)
    if weight < _WEIGHT_UNDERFLOW:
        raise EmptySelectionError(
            f"selection probability underflows ({log_w=:.6g}); nothing is kept"
        )
    return mean, variance, weight


def _component_projections(
    state: MixtureState,
    splitter: TapSplitter,
    verification_angle: QuadratureAngle | float,
    tap_angle: QuadratureAngle | float,
    detector: DetectorModel,
) -> list[tuple[float, float, float, float, float]]:
    """Per-component (signal mean, signal var, tap mean, tap var, cross cov).

    Projections of the post-splitter, post-detector joint Gaussian onto the
    verified signal quadrature and the measured tap quadrature.  Detector
    loss mixes independent vacuum into each port, so both port variances
    relax toward 1 and the inter-port covariance scales by eta.
    """
    va = as_angle(verification_angle)
    ta = as_angle(tap_angle)
    cv, sv = va.cos(), va.sin()
    cb, sb = ta.cos(), ta.sin()
    eta = detector.efficiency
    out = []
    for comp in state.components:
        signal, tap, cross_x, cross_p = split_component_stats(comp, splitter)
        signal = apply_detector(signal, detector)
        tap = apply_detector(tap, detector)
        mu_s = cv * signal.mean_x + sv * signal.mean_p
        var_s = cv**2 * signal.var_x + sv**2 * signal.var_p
        mu_t = cb * tap.mean_x + sb * tap.mean_p
        var_t = cb**2 * tap.var_x + sb**2 * tap.var_p
        cross = eta * (cv * cb * cross_x + sv * sb * cross_p)
        out.append((mu_s, var_s, mu_t, var_t, cross))
    return out


def _posterior_mixture_stats(
    means: Sequence[float],
    variances: Sequence[float],
    log_posterior_numerators: Sequence[float],
) -> tuple[float, float, float]:
    """Combine per-component selected moments into mixture (mean, var, Pi).

    ``log_posterior_numerators`` holds log(w_i) + log(g_i); the overall
    success probability is their log-sum-exp and the posterior weights the
    corresponding softmax.
    """
    log_pi = float(logsumexp(log_posterior_numerators))
    if log_pi == -math.inf:
        raise EmptySelectionError("post-selection keeps no component")
    post = [math.exp(lw - log_pi) for lw in log_posterior_numerators]
    mean = sum(p * m for p, m in zip(post, means))
    second = sum(p * (v + m * m) for p, m, v in zip(post, means, variances))
    pi = math.exp(log_pi)
    return mean, second - mean * mean, min(pi, 1.0)


def distilled_stats(
    state: MixtureState,
    splitter: TapSplitter,
    rule: PostSelectionRule,
    verification_angle: QuadratureAngle | float,
    detector: DetectorModel | None = None,
) -> DistillationResult:
    """Exact post-selected signal statistics when tap and signal projections
    are independent within every component.

    Selection then acts purely by reweighting: component i survives with the
    Erfc filter weight g_i, the success probability is Pi = sum_i w_i g_i,
    and the posterior component weights are w_i g_i / Pi.  For the
    two-component displacement mixture this reproduces
    Var = Var_signal + T xbar1^2 r / (1 + r)^2 with r = (1-gamma) g_0 / (gamma g_1).

    Raises
    ------
    CorrelatedTapError
        If any component has nonzero covariance between the verified and
        tapped projections; use ``conditional_distilled_stats`` (or
        ``angle_sweep``) for that geometry.
    """
    detector = detector or DetectorModel()
    projections = _component_projections(
        state, splitter, verification_angle, rule.tap_angle, detector
    )
    means, variances, log_num = [], [], []
    for (mu_s, var_s, mu_t, var_t, cross), w in zip(projections, state.weights):
        if abs(cross) > 1e-9 * (1.0 + math.sqrt(var_s * var_t)):
            raise CorrelatedTapError(
                "tap and verification quadratures are correlated within a "
                f"component (cross covariance {cross:.6g}); this geometry needs "
                "the truncated-moment path: conditional_distilled_stats / "
                "conditional_truncated_stats"
            )
        log_g = _log_filter_weight(rule.threshold, mu_t, var_t, rule.keep_side)
        means.append(mu_s)
        variances.append(var_s)
        log_num.append(_log_or_neg_inf(w) + log_g)
    mean, variance, pi = _posterior_mixture_stats(means, variances, log_num)
    return DistillationResult(mean, variance, pi, 0.0)


def conditional_distilled_stats(
    state: MixtureState,
    splitter: TapSplitter,
    rule: PostSelectionRule,
    verification_angle: QuadratureAngle | float,
    detector: DetectorModel | None = None,
) -> DistillationResult:
    """Exact post-selected statistics for arbitrary tap angles.

    General tap angles correlate the tap outcome with the verified signal
    quadrature inside each component, so selection both reweights the
    components and truncates them; each component contributes its
    truncated-bivariate-Gaussian moments.  Reduces to ``distilled_stats``
    when all cross covariances vanish.
    """
    detector = detector or DetectorModel()
    projections = _component_projections(
        state, splitter, verification_angle, rule.tap_angle, detector
    )
    means, variances, log_num = [], [], []
    for (mu_s, var_s, mu_t, var_t, cross), w in zip(projections, state.weights):
        m, v, log_g = _truncated_moments(
            mu_s, var_s, mu_t, var_t, cross, rule.threshold, rule.keep_side
        )
        means.append(m)
        variances.append(v)
        log_num.append(_log_or_neg_inf(w) + log_g)
    mean, variance, pi = _posterior_mixture_stats(means, variances, log_num)
    return DistillationResult(mean, variance, pi, 0.0)


def threshold_sweep(
    state: MixtureState,
    splitter: TapSplitter,
    rule_template: PostSelectionRule,
    verification_angle: QuadratureAngle | float,
    detector: DetectorModel | None,
    thresholds: Sequence[float],
) -> list[tuple[float, DistillationResult]]:
    """``distilled_stats`` over a set of thresholds, ordered by threshold."""
    rows = []
    for t in sorted(float(t) for t in thresholds):
        rule = replace(rule_template, threshold=t)
        rows.append((t, distilled_stats(state, splitter, rule, verification_angle, detector)))
    return rows


def angle_sweep(
    state: MixtureState,
    splitter: TapSplitter,
    threshold: float,
    verification_angle: QuadratureAngle | float,
    detector: DetectorModel | None,
    betas: Sequence[float],
    keep_side: KeepSide = "above",
) -> list[tuple[float, DistillationResult]]:
    """Post-selected statistics versus tap quadrature angle beta.

    Uses the truncated-moment path per component, since a general beta
    correlates the tap with the verified quadrature.  Rows ordered by beta
    (radians, as given).
    """
    rows = []
    for beta in sorted(float(b) for b in betas):
        rule = PostSelectionRule(QuadratureAngle(beta), threshold, keep_side)
        rows.append(
            (beta, conditional_distilled_stats(state, splitter, rule, verification_angle, detector))
        )
    return rows


def _log_or_neg_inf(w: float) -> float:
    return math.log(w) if w > 0.0 else -math.inf
