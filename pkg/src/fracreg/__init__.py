"""Fractional asymptotical regularization for linear ill-posed problems.

The package provides Mittag-Leffler evaluation, the spectral filters of the
fractional flow, a Galerkin test problem, the Adams-Moulton time stepper with
discrepancy stopping, classical iterative baselines and a benchmark harness.
"""

from .baselines import BaselineConfig, cgne_run, chebyshev_run, landweber_run, nesterov_run, run_baseline
from .far_iter import AMWeights, am_weights, far_run, far_vs_spectral, trapezoid_reference_run
from .mittag_leffler import MLConvergenceError, MLParams, ml_eval, ml_eval_array, ml_eval_with_error, ml_one_param
from .problems import EigenOperator, ProblemInstance, add_noise, assemble_operator, l2_relative_error, make_example
from .runs import DivergenceError, RunRecord
from .spectral import FractionalOrder, IndexFunction, bias_r, c_theta, filter_g, spectral_solve
from .stopping import StoppingRule, w_solve

__version__ = "0.1.0"

__all__ = [
    "AMWeights",
    "BaselineConfig",
    "DivergenceError",
    "EigenOperator",
    "FractionalOrder",
    "IndexFunction",
    "MLConvergenceError",
    "MLParams",
    "ProblemInstance",
    "RunRecord",
    "StoppingRule",
    "add_noise",
    "am_weights",
    "assemble_operator",
    "bias_r",
    "c_theta",
    "cgne_run",
    "chebyshev_run",
    "far_run",
    "far_vs_spectral",
    "filter_g",
    "l2_relative_error",
    "landweber_run",
    "make_example",
    "ml_eval",
    "ml_eval_array",
    "ml_eval_with_error",
    "ml_one_param",
    "nesterov_run",
    "run_baseline",
    "spectral_solve",
    "trapezoid_reference_run",
    "w_solve",
]
