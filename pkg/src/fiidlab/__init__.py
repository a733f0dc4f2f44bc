"""Simulation and verification toolkit for factor-of-iid percolation on
random regular multigraphs."""

from . import kernels
from .factors import BlockFactor, make_factor, tuned_nibble
from .graphs import (RegularMultigraph, enumerate_pairings, from_text,
                     neighborhood, sample_configuration_model)
from .labels import LabelField, sample_labels
from .rng import derive_rng

__version__ = "0.1.0"

__all__ = [
    "BlockFactor",
    "LabelField",
    "RegularMultigraph",
    "derive_rng",
    "enumerate_pairings",
    "from_text",
    "kernels",
    "make_factor",
    "neighborhood",
    "sample_configuration_model",
    "sample_labels",
    "tuned_nibble",
    "__version__",
]
