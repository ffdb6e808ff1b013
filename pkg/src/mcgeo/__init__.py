"""Information geometry of multivariate Markov chains.

Projections onto product and factorizable chains, Han/Shearer-type
inequalities, spectral and hitting parameters, and the projection sampler
built on the swapping algorithm.
"""
from .errors import DomainError, McgeoError, ShapeError, SizeGuardError
from .state import (
    CoordinateSubset,
    Distribution,
    EdgeMeasure,
    ProductStateSpace,
    StochasticMatrix,
    stationary_distribution,
    tensor_product,
)
from .divergences import DivergenceGenerator, f_div_chains, f_div_measures, kl_rate
from .projections import (
    closest_product_kl,
    coordinate_descent,
    distance_to_independence,
    keep_in,
    leave_out,
    marginal_chain,
    prescribed_projection,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CoordinateSubset",
    "DivergenceGenerator",
    "Distribution",
    "DomainError",
    "EdgeMeasure",
    "McgeoError",
    "ProductStateSpace",
    "ShapeError",
    "SizeGuardError",
    "StochasticMatrix",
    "closest_product_kl",
    "coordinate_descent",
    "distance_to_independence",
    "f_div_chains",
    "f_div_measures",
    "keep_in",
    "kl_rate",
    "leave_out",
    "marginal_chain",
    "prescribed_projection",
    "stationary_distribution",
    "tensor_product",
]
