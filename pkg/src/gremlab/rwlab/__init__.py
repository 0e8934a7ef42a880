"""Exact grid-convolution walk laboratory.

Carries the one-dimensional walk computations: discretized step laws
(:mod:`gridlaw`), barrier-constrained convolution dynamic programming
(:mod:`dp`), renewal-function numerics (:mod:`renewal`), and the quantitative
checks of the walk estimates (:mod:`checks`).
"""
from .gridlaw import GridLaw, gaussian_step, level_kernel, tilted_fine_step, two_point_step
from .dp import BarrierSpec, DPResult, dp_barrier_prob, survival_curve
from .renewal import RenewalTable, renewal_L, harmonic_check
from . import checks

__all__ = [
    "GridLaw", "gaussian_step", "level_kernel", "tilted_fine_step", "two_point_step",
    "BarrierSpec", "DPResult", "dp_barrier_prob", "survival_curve",
    "RenewalTable", "renewal_L", "harmonic_check", "checks",
]
