"""Likelihood-free inference by ratio estimation.

Posterior densities for simulator-based models are obtained by fitting
L1-penalized logistic regressions between model-conditional and marginal
simulations, which estimates the ratio p(x|theta)/p(x) and hence the
posterior p(theta|x0) up to normalization.  The package also ships
synthetic-likelihood and rejection-ABC baselines, the four benchmark
simulators, and the evaluation metrics used to compare methods.
"""

__version__ = "0.1.0"
