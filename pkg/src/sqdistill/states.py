"""Gaussian-mixture phase-space states and their exact quadrature statistics.

All variances are in shot-noise units (SNU): the vacuum state has variance 1
in every quadrature, and a squeezed quadrature has variance < 1.  Decibel
values relate to SNU through V_dB = 10*log10(V_SNU) and appear only at I/O
boundaries.

Mixture states are convex combinations of displaced Gaussian components with
diagonal covariance (no x-p correlation inside a component).  Their Wigner
functions are genuine probability densities, which is what makes direct
phase-space sampling and homodyne tomography of these states exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_TWO_PI = 2.0 * math.pi

# Tolerance for the var_x * var_p >= 1 uncertainty check; absorbs rounding of
# dB-converted inputs without admitting genuinely unphysical states.
_UNCERTAINTY_SLACK = 1e-9


def db_to_variance(value_db: float) -> float:
    """Convert a variance in dB relative to shot noise into SNU."""
    return 10.0 ** (value_db / 10.0)


def variance_to_db(variance_snu: float) -> float:
    """Convert a variance in SNU into dB relative to shot noise.

    Raises
    ------
    ValueError
        If ``variance_snu`` is not strictly positive.
    """
    if variance_snu <= 0.0:
        raise ValueError(f"variance must be positive to convert to dB, got {variance_snu}")
    return 10.0 * math.log10(variance_snu)


@dataclass(frozen=True)
class QuadratureAngle:
    """Measurement angle from the amplitude (squeezed) quadrature axis.

    theta = 0 measures x, theta = pi/2 measures p.  Normalized into [0, 2*pi).
    """

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % _TWO_PI)

    @classmethod
    def from_degrees(cls, degrees: float) -> "QuadratureAngle":
        return cls(math.radians(degrees))

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)

    def cos(self) -> float:
        return math.cos(self.theta)

    def sin(self) -> float:
        return math.sin(self.theta)


def as_angle(angle: "QuadratureAngle | float") -> QuadratureAngle:
    """Coerce a float (radians) into a QuadratureAngle."""
    if isinstance(angle, QuadratureAngle):
        return angle
    return QuadratureAngle(float(angle))


@dataclass(frozen=True)
class GaussianComponent:
    """One Gaussian constituent of a mixture: means and variances in SNU."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float

    def __post_init__(self):
        if not (self.var_x > 0.0 and self.var_p > 0.0):
            raise ValueError(
                f"variances must be positive, got var_x={self.var_x}, var_p={self.var_p}"
            )
        if self.var_x * self.var_p < 1.0 - _UNCERTAINTY_SLACK:
            raise ValueError(
                "uncertainty relation violated: "
                f"var_x*var_p = {self.var_x * self.var_p:.6g} < 1"
            )

    def projected_mean(self, angle: QuadratureAngle | float) -> float:
        """Mean of the quadrature x*cos(theta) + p*sin(theta)."""
        a = as_angle(angle)
        return self.mean_x * a.cos() + self.mean_p * a.sin()

    def projected_variance(self, angle: QuadratureAngle | float) -> float:
        """Variance of the quadrature x*cos(theta) + p*sin(theta)."""
        a = as_angle(angle)
        return self.var_x * a.cos() ** 2 + self.var_p * a.sin() ** 2


def vacuum_component() -> GaussianComponent:
    return GaussianComponent(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class MixtureState:
    """Weighted convex combination of Gaussian components."""

    components: tuple[GaussianComponent, ...]
    weights: tuple[float, ...]

    def __init__(self, components, weights):
        components = tuple(components)
        weights = tuple(float(w) for w in weights)
        if not components:
            raise ValueError("mixture needs at least one component")
        if len(components) != len(weights):
            raise ValueError(
                f"{len(components)} components but {len(weights)} weights"
            )
        if any(w < 0.0 or w > 1.0 for w in weights):
            raise ValueError(f"weights must lie in [0, 1], got {weights}")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got sum = {sum(weights)!r}")
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.components)


def vacuum_state() -> MixtureState:
    return MixtureState([vacuum_component()], [1.0])


def make_noisy_state(
    var_sq: float,
    var_anti: float,
    gamma: float,
    displacement_magnitude: float = 0.0,
    displacement_angle: float = 0.0,
) -> MixtureState:
    """Squeezed state corrupted by a probabilistic phase-space displacement.

    Component 0 is the undisplaced squeezed state with weight 1 - gamma;
    component 1 is the same state displaced by ``displacement_magnitude`` at
    ``displacement_angle`` (radians from the x axis) with weight gamma.  Both
    components share (var_sq, var_anti).

    Raises
    ------
    ValueError
        If gamma is outside [0, 1] or the variances violate the uncertainty
        relation var_sq * var_anti >= 1.
    """
    return make_noisy_state_xy(
        var_sq,
        var_anti,
        gamma,
        displacement_magnitude * math.cos(displacement_angle),
        displacement_magnitude * math.sin(displacement_angle),
    )


def make_noisy_state_xy(
    var_sq: float, var_anti: float, gamma: float, displacement_x: float, displacement_p: float
) -> MixtureState:
    """Same as ``make_noisy_state`` with the displacement given per quadrature."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    base = GaussianComponent(0.0, 0.0, var_sq, var_anti)
    displaced = GaussianComponent(displacement_x, displacement_p, var_sq, var_anti)
    return MixtureState([base, displaced], [1.0 - gamma, gamma])


def quadrature_stats(
    state: MixtureState, angle: QuadratureAngle | float
) -> tuple[float, float]:
    """Exact (mean, variance) of the quadrature at ``angle`` for a mixture.

    mean = sum_i w_i m_i(theta);
    variance = sum_i w_i (v_i(theta) + m_i(theta)^2) - mean^2.
    """
    a = as_angle(angle)
    mean = 0.0
    second = 0.0
    for comp, w in zip(state.components, state.weights):
        m = comp.projected_mean(a)
        v = comp.projected_variance(a)
        mean += w * m
        second += w * (v + m * m)
    return mean, second - mean * mean


def wigner_density(state: MixtureState, x, p):
    """Wigner density of the mixture at phase-space point(s) (x, p).

    Accepts scalars or broadcastable numpy arrays.  Non-negative everywhere
    and normalized to unit integral over the plane.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    out = np.zeros(np.broadcast(x, p).shape)
    for comp, w in zip(state.components, state.weights):
        norm = _TWO_PI * math.sqrt(comp.var_x * comp.var_p)
        expo = (
            -((x - comp.mean_x) ** 2) / (2.0 * comp.var_x)
            - ((p - comp.mean_p) ** 2) / (2.0 * comp.var_p)
        )
        out = out + w * np.exp(expo) / norm
    if out.ndim == 0:
        return float(out)
    return out


def marginal_pdf(state: MixtureState, angle: QuadratureAngle | float, q):
    """Probability density of the quadrature at ``angle`` evaluated at q.

    The marginal of a diagonal Gaussian mixture is a 1-D Gaussian mixture
    with component means m_i(theta) and variances v_i(theta).
    """
    a = as_angle(angle)
    q = np.asarray(q, dtype=float)
    out = np.zeros(q.shape)
    for comp, w in zip(state.components, state.weights):
        m = comp.projected_mean(a)
        v = comp.projected_variance(a)
        out = out + w * np.exp(-((q - m) ** 2) / (2.0 * v)) / math.sqrt(_TWO_PI * v)
    if out.ndim == 0:
        return float(out)
    return out
