"""Randomized quasi-Monte Carlo sampling with stochastic L-BFGS for variational Bayes."""

from ._backend import BACKEND
from .estimators import (
    GradientSample,
    NonFiniteGradientError,
    hessian_vector_product,
    mean_gradient,
    variance_trace,
)
from .gauss import DiagGaussianParams, inv_normal_cdf, reparameterize, uniform_batch_to_normal
from .lbfgs import LbfgsBuffer, WolfeConfig, two_loop, wolfe_line_search
from .models import (
    CrossedEffectsModel,
    LinRegModel,
    LogRegModel,
    QuadraticProblem,
    generate_synthetic,
    linreg_analytic_optimum,
    make_quadratic,
)
from .optim import FirstOrderConfig, RunRecord, SqnConfig, run_adagrad, run_adam, run_sgd, run_sqn
from .sobol import MCSampler, Randomization, SampleBatch, SobolSampler, load_direction_numbers, make_sampler

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CrossedEffectsModel",
    "DiagGaussianParams",
    "FirstOrderConfig",
    "GradientSample",
    "LbfgsBuffer",
    "LinRegModel",
    "LogRegModel",
    "MCSampler",
    "NonFiniteGradientError",
    "QuadraticProblem",
    "Randomization",
    "RunRecord",
    "SampleBatch",
    "SobolSampler",
    "SqnConfig",
    "WolfeConfig",
    "generate_synthetic",
    "hessian_vector_product",
    "inv_normal_cdf",
    "linreg_analytic_optimum",
    "load_direction_numbers",
    "make_quadratic",
    "make_sampler",
    "mean_gradient",
    "reparameterize",
    "run_adagrad",
    "run_adam",
    "run_sgd",
    "run_sqn",
    "two_loop",
    "uniform_batch_to_normal",
    "variance_trace",
    "wolfe_line_search",
]
