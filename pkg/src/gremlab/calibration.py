"""Tilt calibration: log-MGF, theta*, speed, variance, centering, barriers.

The tilt parameter theta* solves

    theta* L'(theta*) - L(theta*) = log(m),      L = log-MGF of one fine step,

which makes the per-fine-step speed v = L'(theta*) = (log m + L(theta*))/theta*
and the tilted-step variance sigma^2 = L''(theta*).  The centering of the
extremal process is

    m_n = k_n b_n v - (3 / (2 theta*)) log(n) + log(b_n) / theta*.

Note log(n), not log(k_n b_n): the two differ when k_n does not divide n.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NoRootError, ScheduleWarning
from .model import DisplacementLaw, ModelSpec, OffspringLaw, Schedule

BETA_C = math.sqrt(2.0 * math.log(2.0))

SOLVER_TOL = 1e-12
QUAD_TOL = 1e-12


def _check_domain(law: DisplacementLaw, theta: float) -> None:
    lo, hi = law.mgf_domain
    if not (lo < theta < hi):
        raise DomainError(
            f"theta={theta!r} outside the MGF domain ({lo!r}, {hi!r}) of {law.preset}"
        )


def lambda_(law: DisplacementLaw, theta: float,
            density: Callable[[float], float] | None = None,
            support: tuple[float, float] | None = None) -> float:
    """Log-MGF of one fine step at theta.

    Presets use closed forms; a caller-supplied density falls back to
    adaptive quadrature (absolute tolerance 1e-12).
    """
    _check_domain(law, theta)
    if density is not None:
        lo, hi = support if support is not None else (-np.inf, np.inf)
        val, _ = quad(lambda y: math.exp(theta * y) * density(y), lo, hi,
                      epsabs=QUAD_TOL, epsrel=1e-13, limit=400)
        return math.log(val)
    p = law.preset
    if p == "standard_gaussian":
        return 0.5 * theta * theta
    if p == "uniform_centered":
        u = math.sqrt(3.0) * theta
        if abs(u) < 1e-4:
            # series of log(sinh(u)/u) near 0
            return u * u / 6.0 - u ** 4 / 180.0
        return math.log(math.sinh(u) / u)
    if p == "shifted_exponential":
        return -theta - math.log1p(-theta)
    if p == "two_point_lattice":
        return math.log(math.cosh(theta))
    raise DomainError(f"no log-MGF rule for preset {p!r}")


def lambda_prime(law: DisplacementLaw, theta: float) -> float:
    _check_domain(law, theta)
    p = law.preset
    if p == "standard_gaussian":
        return theta
    if p == "uniform_centered":
        u = math.sqrt(3.0) * theta
        if abs(u) < 1e-4:
            return u / 3.0 * math.sqrt(3.0) - math.sqrt(3.0) * u ** 3 / 45.0
        return math.sqrt(3.0) * (1.0 / math.tanh(u)) - 1.0 / theta
    if p == "shifted_exponential":
        return -1.0 + 1.0 / (1.0 - theta)
    if p == "two_point_lattice":
        return math.tanh(theta)
    raise DomainError(f"no log-MGF rule for preset {p!r}")


def lambda_second(law: DisplacementLaw, theta: float) -> float:
    _check_domain(law, theta)
    p = law.preset
    if p == "standard_gaussian":
        return 1.0
    if p == "uniform_centered":
        u = math.sqrt(3.0) * theta
        if abs(u) < 1e-4:
            return 1.0 - u * u / 15.0
        return 1.0 / (theta * theta) - 3.0 / math.sinh(u) ** 2
    if p == "shifted_exponential":
        return 1.0 / (1.0 - theta) ** 2
    if p == "two_point_lattice":
        return 1.0 / math.cosh(theta) ** 2
    raise DomainError(f"no log-MGF rule for preset {p!r}")


def _g(law: DisplacementLaw, theta: float) -> float:
    """Legendre-type function g(theta) = theta L'(theta) - L(theta), increasing."""
    return theta * lambda_prime(law, theta) - lambda_(law, theta)


def solve_theta_star(offspring: OffspringLaw, law: DisplacementLaw) -> float:
    """Solve g(theta*) = log(m) by bracketing + a safeguarded root finder.

    Raises NoRootError (reporting sup g) when the supremum of g over the MGF
    domain stays below log(m) -- e.g. the two-point lattice step with m >= 2,
    where sup g = log(2).
    """
    logm = math.log(offspring.mean)
    lo = 1e-8
    _, hi_dom = law.mgf_domain
    if math.isinf(hi_dom):
        hi = 1.0
        while _g(law, hi) < logm:
            hi *= 2.0
            if hi > 1e8:
                # g has plateaued: treat its large-theta value as the supremum
                sup = _g(law, hi)
                raise NoRootError(
                    f"g(theta) saturates at {sup:.12g} < log m = {logm:.12g} "
                    f"for {law.preset}; tilt equation has no root",
                    supremum=sup,
                )
    else:
        # approach the pole geometrically: theta_hi = hi_dom - gap
        gap = max(hi_dom - lo, 1.0)
        hi = hi_dom - gap
        while _g(law, hi) < logm:
            gap *= 0.5
            hi = hi_dom - gap
            if gap < 1e-14:
                sup = _g(law, hi)
                raise NoRootError(
                    f"sup g = {sup:.12g} < log m = {logm:.12g} near the MGF pole",
                    supremum=sup,
                )
    if _g(law, lo) > logm:
        raise DomainError("g(theta_lo) already exceeds log m; m too close to 1 for the bracket")
    theta = brentq(lambda t: _g(law, t) - logm, lo, hi, xtol=SOLVER_TOL, rtol=8.9e-16)
    # assumption check: the MGF must stay finite slightly beyond theta*
    delta = 1e-3 * theta
    lo_dom, hi_dom = law.mgf_domain
    if not (theta + delta < hi_dom):
        raise DomainError(
            f"log-MGF not finite at theta*+delta={theta + delta!r}; "
            "exponential-moment margin fails"
        )
    lambda_(law, theta + delta)
    return float(theta)


@dataclass(frozen=True)
class CalibratedParams:
    """Everything downstream modules need: tilt, speed, variance, centering."""

    theta_star: float
    v: float
    sigma2: float
    m_n: float
    a_n: float
    c_n: float
    d_n: float
    beta_c: float = BETA_C

    def to_json(self) -> dict:
        return {
            "theta_star": self.theta_star,
            "v": self.v,
            "sigma2": self.sigma2,
            "m_n": self.m_n,
            "a_n": self.a_n,
            "c_n": self.c_n,
            "d_n": self.d_n,
        }


def sequences_cn_dn(schedule: Schedule,
                    c_n: float | None = None,
                    d_n: float | None = None) -> tuple[float, float]:
    """Default slack sequences.

    c_n = max(1, b_n^(1/4)) grows to infinity while c_n/sqrt(b_n) -> 0.
    d_n = log(n) (1 + log log n) dominates log(n); d_n^2/b_n -> 0 only for
    schedules with fast-growing b_n, so a violation at the requested n is a
    warning, not an error.
    """
    if c_n is None:
        c_n = max(1.0, schedule.b_n ** 0.25)
    if d_n is None:
        n = max(schedule.n, 3)
        d_n = math.log(n) * (1.0 + math.log(math.log(n)))
    if d_n * d_n >= schedule.b_n:
        warnings.warn(
            f"d_n^2 = {d_n * d_n:.3g} >= b_n = {schedule.b_n}; "
            "H2 diagnostics degrade at this n",
            category=ScheduleWarning,
            stacklevel=2,
        )
    return float(c_n), float(d_n)


def centering(theta_star: float, v: float, schedule: Schedule) -> tuple[float, float]:
    """(m_n, a_n) with a_n = m_n - k_n b_n v.

    a_n = -(3/(2 theta*)) log(n) + log(b_n)/theta*; m_n is defined from a_n so
    the identity m_n - k_n b_n v = a_n is exact in floating point.
    """
    sched = schedule
    a_n = -1.5 / theta_star * math.log(sched.n) + math.log(sched.b_n) / theta_star
    m_n = sched.k_n * sched.b_n * v + a_n
    return m_n, a_n


def calibrate(spec: ModelSpec,
              c_n: float | None = None,
              d_n: float | None = None,
              theta_override: float | None = None) -> CalibratedParams:
    """Full calibration for a validated spec.

    ``theta_override`` supplies the tilt directly for oracle-only laws where
    the tilt equation has no root (any theta in the MGF domain gives a valid
    change of measure; only the asymptotics need the canonical theta*).  The
    speed is then v = (log m + L(theta))/theta, which coincides with
    L'(theta) exactly at the canonical root.
    """
    law = spec.displacement
    if theta_override is not None:
        theta = float(theta_override)
        _check_domain(law, theta)
        v = (math.log(spec.offspring.mean) + lambda_(law, theta)) / theta
    else:
        theta = solve_theta_star(spec.offspring, law)
        v = lambda_prime(law, theta)
    sigma2 = lambda_second(law, theta)
    m_n, a_n = centering(theta, v, spec.schedule)
    cn, dn = sequences_cn_dn(spec.schedule, c_n=c_n, d_n=d_n)
    return CalibratedParams(theta_star=theta, v=v, sigma2=sigma2,
                            m_n=m_n, a_n=a_n, c_n=cn, d_n=dn)


@dataclass(frozen=True)
class Barrier:
    """A level-indexed bound k -> barrier(k), k = 0..k_n."""

    kind: str
    values: tuple[float, ...]

    def __call__(self, k):
        return np.asarray(self.values)[k] if np.ndim(k) else self.values[int(k)]

    @property
    def k_n(self) -> int:
        return len(self.values) - 1


def barrier_R(params: CalibratedParams, schedule: Schedule) -> Barrier:
    """High-probability envelope: no particle exceeds it at any level, up to o(1).

    R_n(k) = k b_n v - (3/(2 theta*)) log((k_n b_n + 1)/((k_n - k) b_n + 1)) + c_n
    """
    kn, bn = schedule.k_n, schedule.b_n
    th, v, cn = params.theta_star, params.v, params.c_n
    ks = np.arange(kn + 1, dtype=float)
    vals = ks * bn * v - 1.5 / th * np.log((kn * bn + 1.0) / ((kn - ks) * bn + 1.0)) + cn
    return Barrier(kind="R", values=tuple(float(x) for x in vals))


def barrier_F(params: CalibratedParams, schedule: Schedule) -> Barrier:
    """Localization line of extremal paths.

    F_n(k) = k b_n v + (k/k_n) a_n - c_n 1{k != 0, k_n}; the indicator drops
    the c_n notch at both endpoints, so F(0) = 0 and F(k_n) = m_n exactly.
    """
    kn, bn = schedule.k_n, schedule.b_n
    v, an, cn = params.v, params.a_n, params.c_n
    vals = []
    for k in range(kn + 1):
        x = k * bn * v + (k / kn) * an
        if k not in (0, kn):
            x -= cn
        vals.append(x)
    return Barrier(kind="F", values=tuple(vals))
