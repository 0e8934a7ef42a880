"""Desk-scale laboratory for the extremal process of a coarse-grained
branching random walk: calibration, keyed simulation, tilted-walk
estimators, exact grid convolutions, and statistical verdicts."""

__version__ = "0.1.0"
