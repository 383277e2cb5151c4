"""Budget-constrained logistic regression as Bregman-distance minimization."""
from .auxiliary import CoordWeights, auxiliary_value, coord_argmin, coord_loss, coord_weights, separable_bound
from .barrier import BarrierConfig, SubproblemSpec, SubproblemState, solve_batch, solve_subproblem
from .bregman import (
    ConstraintMatrix,
    DomainError,
    Generator,
    GeneratorKind,
    bregman_distance,
    legendre_transform,
    loss_at_zero,
    model_distribution,
    sigmoid,
)
from .data import DataError, Dataset, ScaleRecord, load_csv, normalize, split, synth_hyperplane
from .oracle import Budget, OracleConfig, l1_project, oracle_solve
from .trainer import ParamVector, TrainConfig, TrainTrace, predict, train

__version__ = "0.1.0"
