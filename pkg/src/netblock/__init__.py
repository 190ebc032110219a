"""Low-rank estimation of block connectivity matrices from samples of networks.

The penalized estimator fits ``rho * Z B Z^T`` to the mean adjacency matrix
with a nuclear-norm penalty on ``B``, solved by ADMM, with the penalty chosen
by cross-validation over layers.  Comparison estimators, node and layer
clustering, a multilayer pipeline and a simulation harness are included.
"""
from ._backend import BACKEND
from .admm import AdmmConfig, SolveResult, admm_solve, lambda_max, solve_general, solve_path
from .baselines import averaging_estimator, avg_lowrank, spectral_embedding_estimator
from .clustering import (
    adjusted_rand_index,
    align_labels,
    bias_adjusted_spectral,
    gmm_cluster,
    kmeans,
    spectral_cluster,
)
from .errors import DataError, NetblockError, NumericalError
from .experiments import ExperimentConfig, preset, run_experiment, sweep_truncation
from .io import ingest_sample, write_sample
from .model import (
    AveragedAdjacency,
    ConnectivityMatrix,
    MembershipMatrix,
    NetworkSample,
    average_layers,
    sample_mono,
    sample_multi,
)
from .multilayer import multisbm_estimate, reestimate_pipeline
from .tuning import cross_validate, make_lambda_grid, mfold_plan, repeated_splits

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AdmmConfig",
    "SolveResult",
    "admm_solve",
    "lambda_max",
    "solve_general",
    "solve_path",
    "averaging_estimator",
    "avg_lowrank",
    "spectral_embedding_estimator",
    "adjusted_rand_index",
    "align_labels",
    "bias_adjusted_spectral",
    "gmm_cluster",
    "kmeans",
    "spectral_cluster",
    "DataError",
    "NetblockError",
    "NumericalError",
    "ExperimentConfig",
    "preset",
    "run_experiment",
    "sweep_truncation",
    "ingest_sample",
    "write_sample",
    "AveragedAdjacency",
    "ConnectivityMatrix",
    "MembershipMatrix",
    "NetworkSample",
    "average_layers",
    "sample_mono",
    "sample_multi",
    "multisbm_estimate",
    "reestimate_pipeline",
    "cross_validate",
    "make_lambda_grid",
    "mfold_plan",
    "repeated_splits",
]
