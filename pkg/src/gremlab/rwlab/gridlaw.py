"""Discretized step laws on a uniform grid.

A GridLaw stores the probability mass of one walk step per grid cell.  Cells
are centred at integer multiples of the grid step h: cell j covers
[j h - h/2, j h + h/2).  Masses come from exact CDF differences, so the only
approximations downstream are cell-width discretization and range truncation,
both tracked explicitly (``lost_mass``).

Level kernels (the b_n-fold convolution of a fine step) are built by a single
FFT power, not b_n successive convolutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.special import ndtr

from ..calibration import lambda_prime
from ..errors import BudgetError
from ..model import DisplacementLaw

MAX_CELLS = 4_000_000


@dataclass(frozen=True)
class GridLaw:
    """One step of a walk, discretized: mass ``weights[i]`` in cell ``jmin + i``.

    Cell centres sit at (j + offset) h; offset 0.5 puts 0 on a cell edge,
    which the ladder construction uses to avoid fractional boundary cells.
    """

    h: float
    jmin: int
    weights: np.ndarray
    lost_mass: float
    lattice: bool = False
    offset: float = 0.0

    @property
    def jmax(self) -> int:
        return self.jmin + len(self.weights) - 1

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.jmin, self.jmax + 1) + self.offset) * self.h

    @property
    def mean(self) -> float:
        return float(np.dot(self.centers, self.weights))

    @property
    def variance(self) -> float:
        mu = self.mean
        return float(np.dot((self.centers - mu) ** 2, self.weights))

    def flipped(self) -> "GridLaw":
        """The law of -step (offset grids flip to -offset)."""
        return GridLaw(h=self.h, jmin=-self.jmax, weights=self.weights[::-1].copy(),
                       lost_mass=self.lost_mass, lattice=self.lattice,
                       offset=-self.offset)


def _from_cdf(cdf, h: float, lo: float, hi: float, lattice: bool = False,
              offset: float = 0.0) -> GridLaw:
    jmin = int(math.floor(lo / h - offset))
    jmax = int(math.ceil(hi / h - offset))
    if jmax - jmin + 1 > MAX_CELLS:
        raise BudgetError(f"step kernel needs {jmax - jmin + 1} cells > {MAX_CELLS}")
    edges = (np.arange(jmin, jmax + 2) + offset - 0.5) * h
    cdf_vals = cdf(edges)
    w = np.diff(cdf_vals)
    w = np.clip(w, 0.0, None)
    return GridLaw(h=h, jmin=jmin, weights=w, lost_mass=float(1.0 - w.sum()),
                   lattice=lattice, offset=offset)


def gaussian_step(h: float, var: float = 1.0, trunc_sd: float = 12.0,
                  offset: float = 0.0) -> GridLaw:
    sd = math.sqrt(var)
    return _from_cdf(lambda x: ndtr(x / sd), h, -trunc_sd * sd, trunc_sd * sd,
                     offset=offset)


def two_point_step(h: float) -> GridLaw:
    """Atoms at +/-1 with probability 1/2; h must divide 1 exactly."""
    j1 = round(1.0 / h)
    if abs(j1 * h - 1.0) > 1e-12:
        raise ValueError("two-point grid law needs h dividing 1")
    w = np.zeros(2 * j1 + 1)
    w[0] = 0.5
    w[-1] = 0.5
    return GridLaw(h=h, jmin=-j1, weights=w, lost_mass=0.0, lattice=True)


def tilted_fine_step(law: DisplacementLaw, theta: float, h: float,
                     trunc_sd: float = 12.0) -> GridLaw:
    """Recentred tilted fine step: density e^(theta y - L(theta)) f(y), shifted
    by -L'(theta) so the mean is zero.  Exact CDFs per preset."""
    v = lambda_prime(law, theta)
    p = law.preset
    if p == "standard_gaussian":
        # tilt of N(0,1) is N(theta, 1); recentred back to N(0,1)
        return gaussian_step(h, var=1.0, trunc_sd=trunc_sd)
    if p == "uniform_centered":
        s3 = math.sqrt(3.0)
        if abs(theta) < 1e-12:
            def cdf(x):
                return np.clip((np.asarray(x) + v + s3) / (2 * s3), 0.0, 1.0)
        else:
            denom = math.exp(theta * s3) - math.exp(-theta * s3)

            def cdf(x):
                y = np.clip(np.asarray(x) + v, -s3, s3)
                return (np.exp(theta * y) - math.exp(-theta * s3)) / denom
        return _from_cdf(cdf, h, -s3 - v, s3 - v)
    if p == "shifted_exponential":
        rate = 1.0 - theta
        if rate <= 0:
            raise ValueError("tilt outside MGF domain of the shifted exponential")

        def cdf(x):
            y = np.asarray(x) + v
            return np.where(y >= -1.0, -np.expm1(-rate * (y + 1.0)), 0.0)

        hi = -1.0 - v + 50.0 / rate  # e^-50 tail
        return _from_cdf(cdf, h, -1.0 - v, hi)
    raise ValueError(f"no tilted grid law for preset {p!r} (lattice laws are oracle-only)")


def level_kernel(fine: GridLaw, b_n: int, trunc_sd: float = 12.0) -> GridLaw:
    """b_n-fold self-convolution of a fine step via one FFT power."""
    if b_n == 1:
        return fine
    sd = math.sqrt(max(fine.variance, 1e-300) * b_n)
    half = int(math.ceil(trunc_sd * sd / fine.h)) + 2 * max(abs(fine.jmin), fine.jmax)
    half = min(half, b_n * max(abs(fine.jmin), fine.jmax))
    n_cells = 2 * half + 1
    if n_cells > MAX_CELLS:
        raise BudgetError(f"level kernel needs {n_cells} cells > {MAX_CELLS}")
    L = next_fast_len(n_cells + 2 * max(abs(fine.jmin), fine.jmax))
    buf = np.zeros(L)
    for j, w in zip(range(fine.jmin, fine.jmax + 1), fine.weights):
        buf[j % L] += w
    spec = rfft(buf)
    out = irfft(spec ** b_n, L)
    idx = np.arange(-half, half + 1) % L
    w = out[idx]
    neg = w < 0
    w = np.where(neg, 0.0, w)
    lost = float(1.0 - w.sum())
    return GridLaw(h=fine.h, jmin=-half, weights=w, lost_mass=max(lost, 0.0),
                   lattice=fine.lattice)


def level_step_for(law: DisplacementLaw, theta: float, b_n: int,
                   h: float | None = None, trunc_sd: float = 12.0) -> GridLaw:
    """Grid law of the recentred tilted level step (variance b_n sigma^2)."""
    if h is None:
        h = math.sqrt(b_n) / 64.0
    if law.preset == "standard_gaussian":
        return gaussian_step(h, var=float(b_n), trunc_sd=trunc_sd)
    fine = tilted_fine_step(law, theta, h, trunc_sd=trunc_sd)
    return level_kernel(fine, b_n, trunc_sd=trunc_sd)


def free_sum_density(fine: GridLaw, n_steps: int, trunc_sd: float = 14.0) -> GridLaw:
    """Unconstrained n-step sum: same FFT power, used by the local-limit checks."""
    return level_kernel(fine, n_steps, trunc_sd=trunc_sd)
