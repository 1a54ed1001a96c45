"""Exact spectral certification and sampling for Swendsen-Wang, heat-bath and single-bond dynamics."""

from .graph import Graph, PlanarEmbedding, build_dual, make_standard, parse_builtin
from .kernels import KernelSpec, TransitionMatrix, build_matrix
from .measures import EnumeratedMeasure, ModelParams, potts_measure, rc_measure
from .spectral import SpectralReport, spectral_gap

__all__ = [
    "EnumeratedMeasure",
    "Graph",
    "KernelSpec",
    "ModelParams",
    "PlanarEmbedding",
    "SpectralReport",
    "TransitionMatrix",
    "build_dual",
    "build_matrix",
    "make_standard",
    "parse_builtin",
    "potts_measure",
    "rc_measure",
    "spectral_gap",
]
