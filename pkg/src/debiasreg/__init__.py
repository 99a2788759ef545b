"""Regression with group-mean constraints that counter prediction shrinkage."""

__version__ = "0.1.0"

from .data import Dataset, MeanPartition, TrainTestSplit, partition_by_mean, split_train_test
from .datagen import INTRO, KINDS, ScenarioSpec, generate, signal, signal_matrix
from .errors import (
    BadSize, DebiasRegError, DegeneratePartition, DegenerateVariance, DimensionMismatch,
    EmptyTail, IndexOutOfRange, InfeasibleConstraint, MaxIterExceeded, MissingColumn,
    NonFiniteInput, ParseError, SingularInnerSolve, SingularKKT,
)
from .kernels import GramMatrix, KernelSpec, cross_gram, gram, median_bandwidth, row_slices
from .metrics import (
    EvaluationReport, bias_slope, evaluate, quartiles, residual_correlation, rmse, tail_bias,
)
from .models import (
    KrrFit, LinearFit, cv_krr, cv_lambda_krr, cv_lambda_lasso, fit_constrained_krr,
    fit_constrained_lasso, fit_krr, fit_lasso, fitted_values, group_mean_gaps, penalized_objective, predict,
)
from .solver import (
    EqConstrainedQP, SolveResult, SolverOptions, admm_l1_eq, dual_ascent, soft_threshold,
    solve_kkt,
)
from .theory import (
    BiasTrend, Prop1Result, critical_c, expected_mse_biased, expected_mse_unbiased,
    monte_carlo_prop1,
)
from .harness import ExperimentConfig, ResultTable, load_csv, run_experiment, write_outputs
