"""One cut-point phase-type distributions for reliability data."""

from .cutpoint import OcpErlangSpec, OneCutPoint, expand_ocp_erlang, homogeneous
from .data import Dataset
from .phasetype import ErlangSpec, PhaseType, erlang_rep, validate

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "ErlangSpec",
    "OcpErlangSpec",
    "OneCutPoint",
    "PhaseType",
    "erlang_rep",
    "expand_ocp_erlang",
    "homogeneous",
    "validate",
]
