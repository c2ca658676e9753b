from .counterfactual import TvpCounterfactual, spread_scheme, tvp_spread_counterfactual
from .tvar import (RegimeDraws, TvarDraws, TvarSpec, ar1_coefficients, regimes_for, threshold_logpost,
                   threshold_mh_step, tvar_data, tvar_gibbs, tvar_regime_irf)
from .tvp import TvpDraws, TvpPrior, TvpPriorSpec, build_tvp_prior, omega_from, tvp_gibbs, unit_lower

__all__ = [
    "TvpCounterfactual", "spread_scheme", "tvp_spread_counterfactual", "RegimeDraws", "TvarDraws", "TvarSpec",
    "ar1_coefficients", "regimes_for", "threshold_logpost", "threshold_mh_step", "tvar_data", "tvar_gibbs",
    "tvar_regime_irf",
    "TvpDraws", "TvpPrior", "TvpPriorSpec", "build_tvp_prior", "omega_from", "tvp_gibbs", "unit_lower",
]
