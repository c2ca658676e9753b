from .identification import (Identification, IdentificationScheme, Restriction, SignRestrictionSpec,
                             audit_restrictions, balance_sheet_scheme, candidate_rotation, cholesky_impact,
                             eigen_factor, identify, ump_scheme)
from .responses import (ChannelCounterfactual, apply_offsets, channel_counterfactual, fevd, irf, level_readout,
                        offset_shocks, structural_ma)
from .results import FevdSet, ImpulseResponseSet, ScenarioForecast, bands
from .scenarios import (Condition, CounterfactualSpec, conditional_forecast, minimum_norm_shocks,
                        unconditional_forecast)

__all__ = [
    "Identification", "IdentificationScheme", "Restriction", "SignRestrictionSpec", "audit_restrictions",
    "balance_sheet_scheme", "candidate_rotation", "cholesky_impact", "eigen_factor", "identify", "ump_scheme",
    "ChannelCounterfactual", "apply_offsets", "channel_counterfactual", "fevd", "irf", "level_readout",
    "offset_shocks", "structural_ma", "FevdSet", "ImpulseResponseSet", "ScenarioForecast", "bands",
    "Condition", "CounterfactualSpec", "conditional_forecast", "minimum_norm_shocks", "unconditional_forecast",
]
