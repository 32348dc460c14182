"""Experiment configuration: JSON schema, validation, and derived parameters.

A configuration file is a JSON document matching ``ExperimentConfig``;
unknown keys are rejected.  Variances enter in dB relative to shot noise and
are converted to SNU at load time.  The optional ``notes`` mapping is
free-form provenance documentation (which values are measured, derived, or
defaults) and does not affect any computation.

The shipped ``canonical.json`` encodes the reference experiment: -3.1 dB
squeezing with +27 dB anti-squeezing, a 50% displacement probability, the
tap reflectance derived by inverting the +17.5 dB tapped anti-squeezing,
and the x displacement derived by inverting the +1.4 dB corrupted amplitude
variance.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .montecarlo import SimulationConfig
from .protocol import DetectorModel, PostSelectionRule, TapSplitter
from .states import MixtureState, QuadratureAngle, db_to_variance, make_noisy_state_xy


def derive_tap_reflectance(var_anti_snu: float, tap_var_snu: float) -> float:
    """Tap reflectance that maps anti-squeezing ``var_anti`` to the observed
    tap variance: inverts tap_var = R * var_anti + (1 - R)."""
    if var_anti_snu <= 1.0:
        raise ValueError("anti-squeezing must exceed shot noise to derive R")
    return (tap_var_snu - 1.0) / (var_anti_snu - 1.0)


def derive_displacement_x(mix_var_snu: float, var_sq_snu: float, gamma: float) -> float:
    """Displacement size that maps squeezing ``var_sq`` to the observed mixture
    variance: inverts mix_var = var_sq + gamma (1 - gamma) x^2."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly inside (0, 1) to derive the displacement")
    if mix_var_snu < var_sq_snu:
        raise ValueError("mixture variance cannot be below the squeezed variance")
    return math.sqrt((mix_var_snu - var_sq_snu) / (gamma * (1.0 - gamma)))


class Displacement(BaseModel):
    """Phase-space displacement, either per quadrature or as magnitude/angle."""

    model_config = ConfigDict(extra="forbid")

    x: float | None = None
    p: float | None = None
    magnitude: float | None = None
    angle_deg: float | None = None

    @model_validator(mode="after")
    def _one_form(self) -> "Displacement":
        xy = self.x is not None and self.p is not None
        polar = self.magnitude is not None and self.angle_deg is not None
        if xy == polar:
            raise ValueError(
                "displacement needs either both of {x, p} or both of {magnitude, angle_deg}"
            )
        return self

    def to_xy(self) -> tuple[float, float]:
        if self.x is not None:
            return self.x, self.p
        angle = math.radians(self.angle_deg)
        return self.magnitude * math.cos(angle), self.magnitude * math.sin(angle)


class ExperimentConfig(BaseModel):
    """Complete protocol parameter set; see canonical.json for the reference values."""

    model_config = ConfigDict(extra="forbid")

    var_sq_db: float
    var_anti_db: float
    gamma: float = Field(ge=0.0, le=1.0)
    displacement: Displacement
    tap_R: float = Field(gt=0.0, lt=1.0)
    detector_eta: float = Field(default=1.0, gt=0.0, le=1.0)
    tap_angle_deg: float = 90.0
    verification_angle_deg: float = 0.0
    threshold: float
    keep_side: Literal["above", "below"] = "above"
    samples: int = Field(default=100_000, ge=1)
    seed: int = 0
    notes: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _uncertainty(self) -> "ExperimentConfig":
        product = db_to_variance(self.var_sq_db) * db_to_variance(self.var_anti_db)
        if product < 1.0 - 1e-9:
            raise ValueError(
                f"var_sq_db and var_anti_db violate the uncertainty relation "
                f"(product {product:.6g} SNU^2 < 1)"
            )
        return self

    def state(self) -> MixtureState:
        dx, dp = self.displacement.to_xy()
        return make_noisy_state_xy(
            db_to_variance(self.var_sq_db), db_to_variance(self.var_anti_db),
            self.gamma, dx, dp,
        )

    def splitter(self) -> TapSplitter:
        return TapSplitter.from_reflectance(self.tap_R)

    def detector(self) -> DetectorModel:
        return DetectorModel(self.detector_eta)

    def rule(self, threshold: float | None = None) -> PostSelectionRule:
        return PostSelectionRule(
            QuadratureAngle.from_degrees(self.tap_angle_deg),
            self.threshold if threshold is None else threshold,
            self.keep_side,
        )

    def verification_angle(self) -> QuadratureAngle:
        return QuadratureAngle.from_degrees(self.verification_angle_deg)

    def simulation(self, threshold: float | None = None,
                   sample_count: int | None = None) -> SimulationConfig:
        return SimulationConfig(
            state=self.state(),
            splitter=self.splitter(),
            rule=self.rule(threshold),
            verification_angle=self.verification_angle(),
            detector=self.detector(),
            sample_count=self.samples if sample_count is None else sample_count,
            seed=self.seed,
        )


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.model_validate(json.load(fh))


def canonical_config_text() -> str:
    """The shipped canonical configuration, verbatim."""
    return resources.files("sqdistill").joinpath("data/canonical.json").read_text("utf-8")


def canonical_config() -> ExperimentConfig:
    return ExperimentConfig.model_validate(json.loads(canonical_config_text()))
