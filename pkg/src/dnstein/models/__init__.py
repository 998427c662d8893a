"""Concrete pair models: independent sums and graph colourings."""

from .colouring import ColouringModel, build_colouring_model, colouring_A_matrix
from .graphs import Graph, regular_graph
from .sums import IndependentSumModel, build_sum_model, mineka_tau_tail

__all__ = [
    "ColouringModel", "Graph", "IndependentSumModel", "build_colouring_model",
    "build_sum_model", "colouring_A_matrix", "mineka_tau_tail", "regular_graph",
]
