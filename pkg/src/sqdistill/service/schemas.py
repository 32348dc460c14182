"""Pydantic request/response models for the analysis service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..config import ExperimentConfig
from ..protocol import DistillationResult
from ..states import variance_to_db


class HealthResponse(BaseModel):
    status: str
    version: str


class DistillationSummary(BaseModel):
    """Post-selected statistics in both SNU and dB."""

    distilled_mean_snu: float
    distilled_variance_snu: float
    distilled_variance_db: float
    success_probability: float
    standard_error_snu: float
    method: str
    accepted_count: int | None = None
    sample_count: int | None = None

    @classmethod
    def from_result(
        cls,
        result: DistillationResult,
        method: str,
        accepted_count: int | None = None,
        sample_count: int | None = None,
    ) -> "DistillationSummary":
        return cls(
            distilled_mean_snu=result.distilled_mean,
            distilled_variance_snu=result.distilled_variance,
            distilled_variance_db=variance_to_db(result.distilled_variance),
            success_probability=result.success_probability,
            standard_error_snu=result.standard_error,
            method=method,
            accepted_count=accepted_count,
            sample_count=sample_count,
        )


class AnalyzeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig
    threshold: float | None = None


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig
    threshold: float | None = None
    samples: int | None = Field(default=None, ge=1)
    stderr_method: Literal["bootstrap", "normal"] = "bootstrap"
    bootstrap_resamples: int = Field(default=200, ge=2)
    workers: int = Field(default=1, ge=1, le=64)


class ThresholdSweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig
    min_threshold: float
    max_threshold: float
    steps: int = Field(ge=2, le=10_000)
    monte_carlo: bool = False


class SweepRow(BaseModel):
    threshold_snu: float
    distilled_mean_snu: float | None = None
    distilled_variance_snu: float | None = None
    distilled_variance_db: float | None = None
    success_probability: float | None = None
    standard_error_snu: float | None = None
    accepted_count: int | None = None
    error: str | None = None


class ThresholdSweepResponse(BaseModel):
    rows: list[SweepRow]
    method: str


class AngleSweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig
    threshold: float
    betas_deg: list[float] | None = None
    beta_min_deg: float = 0.0
    beta_max_deg: float = 90.0
    steps: int = Field(default=31, ge=2, le=10_000)


class AngleRow(BaseModel):
    beta_deg: float
    distilled_mean_snu: float
    distilled_variance_snu: float
    distilled_variance_db: float
    success_probability: float


class AngleSweepResponse(BaseModel):
    rows: list[AngleRow]


class TomographyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ExperimentConfig
    mode: Literal["sampled", "postselected", "analytic"] = "sampled"
    n_angles: int = Field(default=128, ge=2, le=4096)
    samples_per_angle: int = Field(default=100_000, ge=100)
    bins: int = Field(default=256, ge=8, le=65_536)
    histogram_range: float | None = Field(default=None, gt=0.0)
    grid_points: int = Field(default=101, ge=2, le=2048)
    grid_extent: float | None = Field(default=None, gt=0.0)
    filter_cutoff: float = Field(default=0.7, gt=0.0, le=1.0)


class TomographyResponse(BaseModel):
    x_axis: list[float]
    p_axis: list[float]
    values: list[list[float]]
    mass: float
    warnings: list[str]
    mode: str


class IngestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    record_text: str
    threshold: float
    keep_side: Literal["above", "below"] = "above"
    modulation_filter: Literal["all", "on_only", "off_only"] = "all"
    permissive: bool = False
    stderr_method: Literal["bootstrap", "normal"] = "bootstrap"


class IngestResponse(BaseModel):
    result: DistillationSummary
    record_count: int
    total_bins: int
    rejected_bins: int


class ReproduceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    figure: int = Field(ge=2, le=5)


class ReproduceResponse(BaseModel):
    files: dict[str, str]
