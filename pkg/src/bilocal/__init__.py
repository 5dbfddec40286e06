"""Certified lower bounds for the quantum bilocal causal compatibility problem.

Two SDP hierarchies are provided: the polarization hierarchy, which imposes
A-C factorization through polarized quartic constraints on four copies, and
the inflation hierarchy, which imposes it through independent permutations
of the source copies.
"""
from .scenario import Distribution, Scenario, parse_distribution, serialize_distribution

__all__ = ["Scenario", "Distribution", "parse_distribution", "serialize_distribution"]
__version__ = "0.1.0"
