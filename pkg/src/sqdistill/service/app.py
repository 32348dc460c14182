"""FastAPI service wrapping the distillation library.

Stateless compute endpoints: every request carries a full experiment
configuration and returns the finished result, so runs are reproducible
from the request body alone.  Domain errors (invalid physics, empty
selections, malformed records) map to HTTP 400 with a message naming the
problem; schema violations are FastAPI's usual 422.
"""

from __future__ import annotations

import io
import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..figures import reproduce_figure
from ..ingest import (
    NoCompleteBinsError,
    NoRecordsError,
    bin_and_sync,
    read_record_file,
    records_to_pairs,
)
from ..montecarlo import (
    InsufficientSamplesError,
    mc_sweep,
    postselect_estimate,
    sample_protocol,
)
from ..protocol import (
    CorrelatedTapError,
    EmptySelectionError,
    PostSelectionRule,
    angle_sweep,
    conditional_distilled_stats,
    distilled_stats,
    transmitted_state,
)
from ..states import QuadratureAngle, variance_to_db
from ..tomography import (
    GridSpec,
    analytic_wigner_grid,
    collect_projections,
    default_projection_range,
    inverse_radon,
    protocol_projections,
)
from .schemas import (
    AngleRow,
    AngleSweepRequest,
    AngleSweepResponse,
    AnalyzeRequest,
    DistillationSummary,
    HealthResponse,
    IngestRequest,
    IngestResponse,
    ReproduceRequest,
    ReproduceResponse,
    SimulateRequest,
    SweepRow,
    ThresholdSweepRequest,
    ThresholdSweepResponse,
    TomographyRequest,
    TomographyResponse,
)

app = FastAPI(
    title="sqdistill",
    version=__version__,
    description="Squeezing distillation from non-Gaussian displacement noise: "
    "closed-form analysis, Monte Carlo simulation, tomography, and record ingestion.",
)

@app.exception_handler(ValueError)
@app.exception_handler(EmptySelectionError)
@app.exception_handler(InsufficientSamplesError)
@app.exception_handler(NoCompleteBinsError)
@app.exception_handler(NoRecordsError)
async def _domain_error(request: Request, exc: Exception) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


def _closed_form(config, rule) -> tuple:
    """Independent path when valid, exact conditional path otherwise."""
    try:
        result = distilled_stats(
            config.state(), config.splitter(), rule,
            config.verification_angle(), config.detector(),
        )
        return result, "closed_form_independent"
    except CorrelatedTapError:
        result = conditional_distilled_stats(
            config.state(), config.splitter(), rule,
            config.verification_angle(), config.detector(),
        )
        return result, "closed_form_conditional"


@app.post("/analyze", response_model=DistillationSummary)
def analyze(request: AnalyzeRequest) -> DistillationSummary:
    result, method = _closed_form(request.config, request.config.rule(request.threshold))
    return DistillationSummary.from_result(result, method)


@app.post("/simulate", response_model=DistillationSummary)
def simulate(request: SimulateRequest) -> DistillationSummary:
    sim = request.config.simulation(request.threshold, request.samples)
    samples = sample_protocol(sim, workers=request.workers)
    result = postselect_estimate(
        samples, sim.rule,
        stderr_method=request.stderr_method,
        bootstrap_resamples=request.bootstrap_resamples,
    )
    accepted = round(result.success_probability * len(samples))
    return DistillationSummary.from_result(
        result, "monte_carlo", accepted_count=accepted, sample_count=len(samples)
    )


@app.post("/sweep/threshold", response_model=ThresholdSweepResponse)
def sweep_threshold(request: ThresholdSweepRequest) -> ThresholdSweepResponse:
    config = request.config
    thresholds = np.linspace(request.min_threshold, request.max_threshold, request.steps)
    rows: list[SweepRow] = []
    if request.monte_carlo:
        for row in mc_sweep(config.simulation(), thresholds, stderr_method="normal"):
            if row.result is None:
                rows.append(SweepRow(threshold_snu=row.threshold,
                                     accepted_count=row.accepted_count, error=row.error))
            else:
                rows.append(SweepRow(
                    threshold_snu=row.threshold,
                    distilled_mean_snu=row.result.distilled_mean,
                    distilled_variance_snu=row.result.distilled_variance,
                    distilled_variance_db=variance_to_db(row.result.distilled_variance),
                    success_probability=row.result.success_probability,
                    standard_error_snu=row.result.standard_error,
                    accepted_count=row.accepted_count,
                ))
        return ThresholdSweepResponse(rows=rows, method="monte_carlo")

    method = "closed_form_independent"
    for t in sorted(float(t) for t in thresholds):
        result, method = _closed_form(config, config.rule(t))
        rows.append(SweepRow(
            threshold_snu=t,
            distilled_mean_snu=result.distilled_mean,
            distilled_variance_snu=result.distilled_variance,
            distilled_variance_db=variance_to_db(result.distilled_variance),
            success_probability=result.success_probability,
            standard_error_snu=result.standard_error,
        ))
    return ThresholdSweepResponse(rows=rows, method=method)


@app.post("/sweep/angle", response_model=AngleSweepResponse)
def sweep_angle(request: AngleSweepRequest) -> AngleSweepResponse:
    config = request.config
    if request.betas_deg is not None:
        betas_deg = request.betas_deg
    else:
        betas_deg = np.linspace(request.beta_min_deg, request.beta_max_deg, request.steps).tolist()
    rows = angle_sweep(
        config.state(), config.splitter(), request.threshold,
        config.verification_angle(), config.detector(),
        [math.radians(b) for b in betas_deg],
        keep_side=config.keep_side,
    )
    return AngleSweepResponse(rows=[
        AngleRow(
            beta_deg=math.degrees(beta),
            distilled_mean_snu=res.distilled_mean,
            distilled_variance_snu=res.distilled_variance,
            distilled_variance_db=variance_to_db(res.distilled_variance),
            success_probability=res.success_probability,
        )
        for beta, res in rows
    ])


@app.post("/tomography", response_model=TomographyResponse)
def tomography(request: TomographyRequest) -> TomographyResponse:
    config = request.config
    signal_state = transmitted_state(config.state(), config.splitter(), config.detector())
    histogram_range = request.histogram_range or default_projection_range(signal_state)
    extent = request.grid_extent or histogram_range
    grid = GridSpec.symmetric(extent, request.grid_points)

    if request.mode == "analytic":
        result = analytic_wigner_grid(signal_state, grid)
        warnings: tuple[str, ...] = ()
    else:
        if request.mode == "sampled":
            projections = collect_projections(
                signal_state, request.n_angles, request.samples_per_angle,
                request.bins, histogram_range, seed=config.seed,
            )
        else:
            projections = protocol_projections(
                config.simulation(), request.n_angles, request.samples_per_angle,
                request.bins, histogram_range, postselect=True,
            )
        result = inverse_radon(projections, grid, request.filter_cutoff)
        warnings = projections.warnings
    return TomographyResponse(
        x_axis=result.x_axis.tolist(),
        p_axis=result.p_axis.tolist(),
        values=result.values.tolist(),
        mass=result.mass(),
        warnings=list(warnings),
        mode=request.mode,
    )


@app.post("/ingest", response_model=IngestResponse)
def ingest_records(request: IngestRequest) -> IngestResponse:
    header, tap_raw, signal_raw = read_record_file(io.StringIO(request.record_text))
    binned = bin_and_sync(header, tap_raw, signal_raw, permissive=request.permissive)
    pairs = records_to_pairs(binned.records, request.modulation_filter)
    # Ingested tap values are already projections; the rule's angle is inert.
    rule = PostSelectionRule(QuadratureAngle(0.0), request.threshold, request.keep_side)
    result = postselect_estimate(pairs, rule, stderr_method=request.stderr_method)
    return IngestResponse(
        result=DistillationSummary.from_result(
            result, "monte_carlo",
            accepted_count=round(result.success_probability * len(pairs)),
            sample_count=len(pairs),
        ),
        record_count=len(pairs),
        total_bins=binned.total_bins,
        rejected_bins=binned.rejected_bin_count,
    )


@app.post("/reproduce", response_model=ReproduceResponse)
def reproduce(request: ReproduceRequest) -> ReproduceResponse:
    return ReproduceResponse(files=reproduce_figure(request.figure))
