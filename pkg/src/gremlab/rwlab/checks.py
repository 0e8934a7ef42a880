"""Quantitative checks of the random-walk estimates.

Each check compares an exact grid-DP (or FFT-power) evaluation of a walk
functional against the displayed asymptotic form, and reports rows of
(parameters, lhs, rhs, ratio, error bound).  Limits without rates are
verified as monotone trends plus a last-point tolerance; nothing here claims
proof-grade error control.

Throughout, the walk is the recentred tilted level walk: steps of variance
b_n sigma^2, Gaussian under the H1 presets.  ``n`` is taken as k_n b_n when a
check is parameterized by (k_n, b_n).
"""
from __future__ import annotations

import math

import numpy as np

from ..model import DisplacementLaw
from .dp import BarrierSpec, dp_barrier_prob, survival_curve
from .gridlaw import free_sum_density, gaussian_step, level_step_for, tilted_fine_step
from .renewal import RenewalTable, stay_nonnegative_exact

C1_GAUSS = 1.0 / math.sqrt(math.pi)


def _a_n(theta: float, n: int, b_n: int) -> float:
    return -1.5 / theta * math.log(n) + math.log(b_n) / theta


def ballot_asymptotic_check(table: RenewalTable, y: float = 0.0,
                            ks: tuple[int, ...] = (256, 512, 1024, 2048, 4096),
                            h: float = 1.0 / 64.0) -> list[dict]:
    """P(min_{j<=k} B(j) >= -y) against C1 L(y)/sqrt(k), C1 = 1/sqrt(pi).

    One DP run to max(ks) with the survival probability recorded at each k;
    at y = 0 the exact reflection value binom(2k,k)4^-k is reported too.
    """
    kernel = gaussian_step(h)
    K = max(ks)
    # stay >= -y for the walk == stay <= y for the flipped walk
    curve, lost = survival_curve(kernel.flipped(), BarrierSpec.constant(y, K), K)
    Ly = float(table(y))
    rows = []
    for k in ks:
        p = float(curve[k - 1])
        rhs = C1_GAUSS * Ly / math.sqrt(k)
        rows.append({
            "k": k, "y": y, "dp_prob": p, "limit": rhs, "ratio": p / rhs,
            "exact_reflection": stay_nonnegative_exact(k) if y == 0.0 else float("nan"),
            "lost_mass": lost,
        })
    return rows


def envelope_check(y: float = 1.0, eps: float = 0.1,
                   ks: tuple[int, ...] = (256, 512, 1024, 2048),
                   h: float = 1.0 / 64.0) -> list[dict]:
    """P(B(j) >= -(j^(1/2-eps) + y), j <= k) <= C (1+y)/sqrt(k): the fitted C
    should stay bounded across k doublings."""
    kernel = gaussian_step(h).flipped()
    K = max(ks)
    barrier = BarrierSpec.from_callable(lambda j: j ** (0.5 - eps) + y, K)
    curve, lost = survival_curve(kernel, barrier, K)
    rows = []
    for k in ks:
        p = float(curve[k - 1])
        rows.append({"k": k, "y": y, "dp_prob": p,
                     "fitted_C": p * math.sqrt(k) / (1.0 + y), "lost_mass": lost})
    return rows


def stone_llt_check(law: DisplacementLaw, theta: float, k_n: int, b_n: int,
                    f_window: tuple[float, float] = (0.0, 1.0),
                    xs: tuple[float, ...] | None = None,
                    h: float | None = None) -> list[dict]:
    """Free local limit: E f(T-bar_{k_n} - a_n + x) e^{-theta T-bar_{k_n}}
    against e^{theta x} n^{3/2} / (b_n sqrt(2 pi sigma^2 k_n b_n)) * int f e^{-theta y} dy.

    The walk density comes from one FFT power of the tilted fine step, so no
    barrier is involved; n = k_n b_n.
    """
    n = k_n * b_n
    if h is None:
        h = 1.0 / 64.0
    if law.preset == "standard_gaussian":
        fine = gaussian_step(h)
        sigma2 = 1.0
    else:
        fine = tilted_fine_step(law, theta, h)
        sigma2 = fine.variance
    dens = free_sum_density(fine, n)
    a_n = _a_n(theta, n, b_n)
    if xs is None:
        r_n = math.sqrt(k_n) / math.log(k_n)
        xs = (-r_n, -r_n / 2.0, 0.0, r_n / 2.0, r_n)
    a, b = f_window
    integral = (math.exp(-theta * a) - math.exp(-theta * b)) / theta
    centers = dens.centers
    rows = []
    for x in xs:
        z = centers - a_n + x
        in_win = np.clip((np.minimum(z + 0.5 * h, b) - np.maximum(z - 0.5 * h, a)) / h, 0.0, 1.0)
        lhs = float(np.dot(dens.weights * in_win, np.exp(-theta * centers)))
        rhs = (math.exp(theta * x) * n ** 1.5
               / (b_n * math.sqrt(2.0 * math.pi * sigma2 * k_n * b_n)) * integral)
        rows.append({"k_n": k_n, "b_n": b_n, "x": float(x), "lhs": lhs, "rhs": rhs,
                     "ratio": lhs / rhs, "lost_mass": dens.lost_mass})
    return rows


def _stone_barrier_lhs(law: DisplacementLaw, theta: float, k_n: int, b_n: int,
                       f_window: tuple[float, float], x: float,
                       h: float | None) -> tuple[float, float]:
    """DP value of E[h(T-bar_{k_n} - a_n + x); T-bar_k <= (k/k_n) a_n - x for all k]
    with h(z) = e^{-theta z} f(z); returns (value, lost_mass)."""
    n = k_n * b_n
    a_n = _a_n(theta, n, b_n)
    kernel = level_step_for(law, theta, b_n, h=h)
    barrier = BarrierSpec.from_callable(lambda k: (k / k_n) * a_n - x, k_n)
    a, b = f_window

    def terminal_weight(centers: np.ndarray) -> np.ndarray:
        z = centers - a_n + x
        hh = kernel.h
        frac = np.clip((np.minimum(z + 0.5 * hh, b) - np.maximum(z - 0.5 * hh, a)) / hh,
                       0.0, 1.0)
        return frac * np.exp(-theta * z)

    res = dp_barrier_prob(kernel, barrier, k_n, weight=terminal_weight)
    return res.value, res.lost_mass


def stone_barrier_check(law: DisplacementLaw, theta: float, k_n: int, b_n: int,
                        table: RenewalTable,
                        f_window: tuple[float, float] = (-1.0, 0.0),
                        x: float = 0.0,
                        h: float | None = None) -> dict:
    """Barrier local limit at one (k_n, b_n): DP against
    L(-x/sqrt(b_n)) / (k_n^{3/2} sqrt(2 pi sigma^2 b_n)) * int_{-inf}^0 h(y) dy."""
    if law.preset == "standard_gaussian":
        sigma2 = 1.0
    else:
        sigma2 = tilted_fine_step(law, theta, 1.0 / 64.0).variance
    lhs, lost = _stone_barrier_lhs(law, theta, k_n, b_n, f_window, x, h)
    a, b = f_window
    b_eff = min(b, 0.0)
    # int_a^{b_eff} e^{-theta z} f(z) dz with f = 1 on the window
    integral = (math.exp(-theta * a) - math.exp(-theta * b_eff)) / theta if a < b_eff else 0.0
    Lx = float(table(-x / math.sqrt(b_n)))
    rhs = Lx * integral / (k_n ** 1.5 * math.sqrt(2.0 * math.pi * sigma2 * b_n))
    return {"k_n": k_n, "b_n": b_n, "x": x, "lhs": lhs, "rhs": rhs,
            "ratio": lhs / rhs if rhs else float("nan"), "lost_mass": lost}


def stone_barrier_scaling(law: DisplacementLaw, theta: float,
                          k_pair: tuple[int, int] = (256, 512), b_n: int = 16,
                          f_window: tuple[float, float] = (-1.0, 0.0),
                          x: float = 0.0, h: float | None = None) -> dict:
    """k_n doubling should scale the barrier local-limit LHS by 2^{-3/2}."""
    k1, k2 = k_pair
    v1, lost1 = _stone_barrier_lhs(law, theta, k1, b_n, f_window, x, h)
    v2, lost2 = _stone_barrier_lhs(law, theta, k2, b_n, f_window, x, h)
    ratio = v2 / v1
    return {"k_small": k1, "k_big": k2, "b_n": b_n, "lhs_small": v1, "lhs_big": v2,
            "ratio": ratio, "expected": 2.0 ** -1.5,
            "rel_dev": abs(ratio / 2.0 ** -1.5 - 1.0),
            "lost_mass": max(lost1, lost2)}


def bridge_barrier_check(k_n: int, b_n: int = 4, a: float = 1.0, x: float = 0.0,
                         h: float | None = None) -> dict:
    """Discrete bridge below the logarithmic barrier: probability <= C/k_n.

    The bridge is the Gaussian level walk pinned to end at 0; pinning is done
    by terminal conditioning of the forward DP on a small window around 0.
    """
    if h is None:
        h = math.sqrt(b_n) / 64.0
    kernel = gaussian_step(h, var=float(b_n))
    sb = math.sqrt(b_n)

    def barrier(k: int) -> float:
        if k == 0 or k == k_n:
            return x
        return a * math.log(min(k, k_n - k) * b_n + 1.0) + x

    bar = BarrierSpec.from_callable(barrier, k_n)
    win = max(2.0 * h, 0.02 * sb)
    num = dp_barrier_prob(kernel, bar, k_n, terminal=(-win, win))
    free = free_sum_density(kernel, k_n)
    z = free.centers
    hh = free.h
    frac = np.clip((np.minimum(z + 0.5 * hh, win) - np.maximum(z - 0.5 * hh, -win)) / hh, 0, 1)
    den = float(np.dot(free.weights, frac))
    p = num.value / den if den > 0 else float("nan")
    return {"k_n": k_n, "b_n": b_n, "a": a, "x": x, "bridge_prob": p,
            "fitted_C": p * k_n, "lost_mass": num.lost_mass + free.lost_mass}


def excursion_check(k: int, k_n: int | None = None, b_n: int = 4,
                    alpha: float | None = None, x: float = 0.0,
                    window: tuple[float, float] = (-1.0, 0.0),
                    theta: float | None = None,
                    h: float | None = None) -> dict:
    """Walk below the decreasing log-barrier f_n, endpoint near the barrier:
    P(T-bar_k - f_n(k) in [a,b], T-bar_j <= f_n(j) + x for j <= k)
    <= C (b-a)(1 + x/sqrt(b_n))^2 / (sqrt(b_n) k^{3/2})."""
    if theta is None:
        theta = math.sqrt(2.0 * math.log(2.0))
    if alpha is None:
        alpha = 1.5 / theta
    if k_n is None:
        k_n = 2 * k
    if h is None:
        h = math.sqrt(b_n) / 64.0
    kernel = gaussian_step(h, var=float(b_n))

    def f_n(j: int) -> float:
        return alpha * math.log(((k_n - j) * b_n + 1.0) / (k_n * b_n))

    bar = BarrierSpec.from_callable(lambda j: f_n(j) + x, k)
    a, b = window
    res = dp_barrier_prob(kernel, bar, k, terminal=(f_n(k) + a, f_n(k) + b))
    scaled = res.value * k ** 1.5 * math.sqrt(b_n)
    return {"k": k, "k_n": k_n, "b_n": b_n, "alpha": alpha, "x": x,
            "prob": res.value, "scaled": scaled, "lost_mass": res.lost_mass}


def renewal_ratio_check(table: RenewalTable, b_ns: tuple[int, ...] = (256, 1024, 4096),
                        x_top_mult: float = 40.0) -> list[dict]:
    """sup over x >= c_n of |L((x - c_n)/sqrt(b_n)) / L(x/sqrt(b_n)) - 1|
    with c_n = b_n^{1/4}; the sup should fall along the b_n grid."""
    rows = []
    for b in b_ns:
        c = b ** 0.25
        sb = math.sqrt(b)
        xs = np.linspace(c, x_top_mult * sb, 4000)
        ratio = table((xs - c) / sb) / table(xs / sb)
        sup = float(np.max(np.abs(ratio - 1.0)))
        rows.append({"b_n": b, "c_n": c, "sup_dev": sup})
    return rows
