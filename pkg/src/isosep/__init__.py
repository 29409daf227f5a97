"""Isoperimetric separation on sampled metric manifolds."""
from .metric_core import FiniteMetricSpace, ManifoldSpec, estimate_doubling, generate
from .measure import SampleSet, hausdorff_estimate, separation_radius
from .simplicial import SimplicialComplex, betti_z2

__version__ = "0.1.0"

__all__ = ["FiniteMetricSpace", "ManifoldSpec", "SampleSet", "SimplicialComplex",
           "betti_z2", "estimate_doubling", "generate", "hausdorff_estimate", "separation_radius"]
