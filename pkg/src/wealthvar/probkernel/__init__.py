from .linalg import chol, companion, is_stable, lag_blocks, ma_coefficients, sample_factor, spectral_radius, symmetrize
from .rng import RngStream, as_generator, draw_inverse_gamma, draw_inverse_wishart, draw_mvn
from .statespace import FilterResult, StateSpaceModel, carter_kohn, kalman_filter, kalman_smoother, sample_states

__all__ = [
    "chol", "companion", "is_stable", "lag_blocks", "ma_coefficients", "sample_factor", "spectral_radius",
    "symmetrize", "RngStream", "as_generator", "draw_inverse_gamma", "draw_inverse_wishart", "draw_mvn",
    "FilterResult", "StateSpaceModel", "carter_kohn", "kalman_filter", "kalman_smoother", "sample_states",
]
