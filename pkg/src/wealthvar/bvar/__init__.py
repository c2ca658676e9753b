from .diagnostics import convergence_report, rhat_ess
from .gibbs import PosteriorDrawSet, gibbs_sample
from .model import (OlsResult, VarSpec, ar_residual_variances, information_criteria, lag_matrix, ols, ols_xy,
                    prepare_data)
from .priors import ConjugatePriorSpec, DummyObsPriorSpec, NormalWishartPrior, prior_from_dict

__all__ = [
    "convergence_report", "rhat_ess", "PosteriorDrawSet", "gibbs_sample", "OlsResult", "VarSpec",
    "ar_residual_variances", "information_criteria", "lag_matrix", "ols", "ols_xy", "prepare_data",
    "ConjugatePriorSpec", "DummyObsPriorSpec", "NormalWishartPrior", "prior_from_dict",
]
