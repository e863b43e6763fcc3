"""Sparse-grid Faber approximation of mixed-smooth functions and its compilation to ReLU networks."""
from .constructors import (
    CompilerPlan,
    EpsilonTooLarge,
    build_hat_net,
    build_pair_product_net,
    build_product_net,
    build_square_net,
    compile_narrow,
    compile_network,
    plan,
)
from .faber import FaberExpansion, lambda_coefficient
from .index import IndexSet, enumerate_notched, grid_points
from .relunet import ReluNetwork, SpecialNetwork, parallelize, special_to_standard
from .sampling import ApproxConfig, build_R, theorem31_bound

__version__ = "0.1.0"
