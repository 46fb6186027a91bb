"""Interacting Immediate Neighbour Interpolation (IINI) for gridded geoscientific data."""

from .annealer import (
    AnnealSchedule,
    Checkpoint,
    CheckpointLog,
    accept_probability,
    checkpoint_spacing,
    rmse_between,
    run_annealing,
)
from .dissimilarity import (
    BiasPolicy,
    MetricKind,
    MetricSpec,
    NeighbourView,
    cosine_dissimilarity,
    delta_d,
    square_difference,
    total_energy,
)
from .grid import (
    NormParams,
    PixelGrid,
    Regularity,
    ScatterSet,
    SegmentMap,
    ValueSet,
    denormalize,
    initialize_inference,
    normalize,
    rasterize,
    recommend_pixel_size,
    segment,
)
from .oracle import brute_force_discrete, holdout_rmse, idw_baseline, solve_harmonic
from .pipeline import RunConfig, RunReport, experiment_annealing, experiment_bias, experiment_resolution, interpolate, run
from .relax import RelaxConfig, RelaxMode, optimal_value_cos, optimal_value_sq, relax, relax_unconditional

__version__ = "0.1.0"
