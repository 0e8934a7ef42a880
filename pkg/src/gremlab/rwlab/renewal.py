"""Renewal function of the walk's descending ladder heights.

L(x) counts the expected number of times the walk sets a new running minimum
while staying above -x.  Equivalently it is the renewal function of the
ladder-height process, which is how it is computed here:

1. a barrier DP accumulates the overshoot-below-zero profile epoch by epoch,
   giving the ladder height law G on the grid (exit mass per cell);
2. the mass still alive after the epoch budget (a first-passage tail of order
   1/sqrt(epochs); exactly binom(2k,k)4^-k for continuous symmetric steps) is
   completed with the late-epoch overshoot profile, whose shape has converged
   long before the mass has;
3. the renewal equation L = 1 + G * L is solved forward on the grid.

L(0) = 1 holds exactly by construction: heights are strictly positive, so the
zero-cell exit mass is treated at its true sub-cell location h/4 through
linear interpolation rather than being lumped at 0.

The per-x error estimate is the epoch-halving difference (doubled) plus a
floor; it is validated by refinement tests, not certified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..errors import ConvergenceError
from .dp import ladder_exit_profiles
from .gridlaw import GridLaw, gaussian_step


def stay_nonnegative_exact(k: int) -> float:
    """P(first k partial sums all >= 0) for continuous symmetric steps:
    binom(2k, k) 4^-k, distribution-free (Sparre Andersen)."""
    return math.exp(gammaln(2 * k + 1) - 2 * gammaln(k + 1) - 2 * k * math.log(2.0))


@dataclass
class RenewalTable:
    """L on a uniform grid with linear interpolation and asymptote extension."""

    h: float
    values: np.ndarray           # L at x = 0, h, 2h, ...
    err: np.ndarray              # per-cell error estimate
    epochs: int
    completed_mass: float
    c0: float                    # fitted slope of L at the top of the grid
    lost_mass: float

    @property
    def x(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.h

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        top = (len(self.values) - 1) * self.h
        inside = np.interp(np.clip(x, 0.0, top), self.x, self.values)
        out = np.where(x > top, self.values[-1] + self.c0 * (x - top), inside)
        return out if out.ndim else float(out)

    def err_at(self, x) -> float:
        j = min(int(round(float(x) / self.h)), len(self.err) - 1)
        return float(self.err[max(j, 0)])


def _complete_heights(profiles: np.ndarray, upto: int) -> tuple[np.ndarray, float]:
    """Ladder-height cell masses from the first ``upto`` epochs, with the
    still-alive mass placed on the late-epoch profile shape."""
    g = profiles[:upto].sum(axis=0)
    alive = 1.0 - g.sum()
    late = profiles[upto // 2: upto].sum(axis=0)
    s = late.sum()
    if s > 0 and alive > 0:
        g = g + alive * (late / s)
    return g, max(alive, 0.0)


def _solve_renewal(g: np.ndarray, n_cells: int) -> np.ndarray:
    """Forward solve of L(x) = 1 + E[L(x - H)] on the cell grid.

    Heights live on the half-offset grid (i + 1/2) h, strictly positive, so
    L(0) = 1 holds exactly.  L is tabulated at integer multiples of h; the
    half-shifted argument x - H interpolates linearly between neighbours:

        L_i (1 - g_0/2) = 1 + (g_0/2) L_{i-1}
                          + sum_{j=1}^{i-1} g_j (L_{i-j-1} + L_{i-j}) / 2.
    """
    g0 = float(g[0]) if g.shape[0] else 0.0
    L = np.empty(n_cells)
    L[0] = 1.0
    denom = 1.0 - 0.5 * g0
    for i in range(1, n_cells):
        m = min(i - 1, g.shape[0] - 1)
        acc = 1.0 + 0.5 * g0 * L[i - 1]
        if m > 0:
            lo = L[i - 2:: -1][:m]   # L_{i-j-1}, j = 1..m
            hi = L[i - 1: 0: -1][:m]  # L_{i-j},   j = 1..m
            acc += float(np.dot(g[1: m + 1], 0.5 * (lo + hi)))
        L[i] = acc / denom
    return L


def renewal_L(kernel: GridLaw | None = None,
              x_max: float = 48.0,
              eps_tail: float = 0.05,
              epochs: int = 8192,
              h: float | None = None) -> RenewalTable:
    """Build the renewal table for a centred unit-variance grid law.

    Defaults to the standard Gaussian step.  ``eps_tail`` bounds the accepted
    error estimate at the top of the x-grid; the epoch budget doubles once
    before giving up with ConvergenceError.
    """
    if kernel is None:
        kernel = gaussian_step(h if h is not None else 1.0 / 32.0)
    var = kernel.variance
    if abs(var - 1.0) > 0.05:
        raise ValueError(f"renewal table expects a unit-variance step, got var={var:.4f}")
    n_cells = int(math.ceil(x_max / kernel.h)) + 1

    for attempt in range(2):
        prof = ladder_exit_profiles(kernel, epochs)
        g_full, alive = _complete_heights(prof["profiles"], epochs)
        g_half, _ = _complete_heights(prof["profiles"], epochs // 2)
        L_full = _solve_renewal(g_full, n_cells)
        L_half = _solve_renewal(g_half, n_cells)
        err = 2.0 * np.abs(L_full - L_half) + 1e-9
        if err[-1] <= eps_tail:
            break
        epochs *= 2
    if err[-1] > eps_tail:
        raise ConvergenceError(
            f"renewal tail estimate {err[-1]:.3g} > eps_tail={eps_tail} at {epochs} epochs"
        )

    q = max(2, n_cells // 4)
    xs = np.arange(n_cells - q, n_cells) * kernel.h
    c0 = float(np.polyfit(xs, L_full[-q:], 1)[0])
    return RenewalTable(h=kernel.h, values=L_full, err=err, epochs=epochs,
                        completed_mass=alive, c0=c0, lost_mass=prof["lost"])


def harmonic_check(table: RenewalTable, xs, kernel: GridLaw | None = None) -> list[dict]:
    """Check L(x) = E[L(x + B(1)); x + B(1) >= 0] against the table.

    The expectation is a cell sum against the step law (default: Gaussian at
    the table's own grid step); its discretization error is estimated by
    re-summing at double the step.
    """
    if kernel is None:
        kernel = gaussian_step(table.h)
    coarse = gaussian_step(2 * table.h)

    def _rhs(law: GridLaw, x: float) -> float:
        y = x + law.centers
        frac = np.clip((y + 0.5 * law.h) / law.h, 0.0, 1.0)
        return float(np.dot(law.weights * frac, table(np.clip(y, 0.0, None))))

    rows = []
    for x in np.atleast_1d(np.asarray(xs, dtype=float)):
        rhs = _rhs(kernel, float(x))
        rhs2 = _rhs(coarse, float(x))
        lhs = float(table(x))
        err = table.err_at(x) + table.err_at(x + 3.0) + abs(rhs - rhs2) + kernel.lost_mass
        rows.append({"x": float(x), "lhs": lhs, "rhs": rhs,
                     "abs_diff": abs(lhs - rhs), "err_bound": err})
    return rows
