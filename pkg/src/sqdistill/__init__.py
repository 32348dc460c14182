"""Distillation of squeezing from non-Gaussian displacement noise.

Core pieces: Gaussian-mixture states (``states``), the closed-form
tap-and-post-select theory (``protocol``), Monte Carlo simulation of the
full protocol (``montecarlo``), Wigner reconstruction by filtered
back-projection (``tomography``), measurement-record ingestion
(``ingest``), and a FastAPI service plus thin CLI client on top.
"""

from .config import ExperimentConfig, canonical_config, load_config
from .montecarlo import (
    InsufficientSamplesError,
    PairedSamples,
    SimulationConfig,
    mc_sweep,
    postselect_estimate,
    sample_protocol,
)
from .protocol import (
    CorrelatedTapError,
    DetectorModel,
    DistillationResult,
    EmptySelectionError,
    PostSelectionRule,
    TapSplitter,
    angle_sweep,
    conditional_distilled_stats,
    conditional_truncated_stats,
    distilled_stats,
    filter_weight,
    split_component_stats,
    threshold_sweep,
    transmitted_state,
)
from .states import (
    GaussianComponent,
    MixtureState,
    QuadratureAngle,
    db_to_variance,
    make_noisy_state,
    make_noisy_state_xy,
    marginal_pdf,
    quadrature_stats,
    variance_to_db,
    vacuum_state,
    wigner_density,
)
from .tomography import (
    GridSpec,
    ProjectionSet,
    WignerGrid,
    analytic_wigner_grid,
    collect_projections,
    grid_distance,
    inverse_radon,
)

__version__ = "0.1.0"
