"""Numba-fused level expansion for deterministic offspring counts.

One pass per tree level: derive each child's key, draw its edge displacement
through the keyed stream, and emit its position.  Elementwise-pure, so the
prange schedule cannot affect values and results are bitwise identical at any
thread count.  The generic numpy path in ``simulate`` produces the same
numbers; a test pins the two against each other.

The inverse normal CDF is Wichura's PPND16 (AS 241), accurate to ~1e-15 and
cross-checked against scipy.special.ndtri in the test suite.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange, vectorize

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_GOLD2 = np.uint64(0xC2B2AE3D27D4EB4F)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TAG_DISP = np.uint64(0x646973706C616365)
_U53 = 1.0 / 9007199254740992.0

PRESET_GAUSSIAN = 0
PRESET_UNIFORM = 1
PRESET_SHIFTED_EXP = 2
PRESET_TWO_POINT = 3

_SQRT3 = np.sqrt(3.0)


@njit(inline="always")
def _fin(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _u01(w):
    return ((w >> np.uint64(11)) + 0.5) * _U53


@njit(cache=True)
def _ppnd16(p):
    """AS 241 inverse normal CDF, double precision."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                    + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                  + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
                + 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0)
        den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                    + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                  + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
                + 4.2313330701600911252e+1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r
                  + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r
                + 4.63033784615654529590e+0) * r + 1.42343711074968357734e+0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r
                + 2.05319162663775882187e+0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r
                + 5.46378491116411436990e+0) * r + 6.65790464350110377720e+0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    if q < 0.0:
        return -val
    return val


@njit(inline="always")
def _step_value(u, preset):
    if preset == PRESET_UNIFORM:
        return (2.0 * u - 1.0) * _SQRT3
    if preset == PRESET_SHIFTED_EXP:
        return -np.log(u) - 1.0
    # two-point +/-1
    if u < 0.5:
        return -1.0
    return 1.0


@njit(cache=True, parallel=True)
def expand_level(parent_keys, parent_pos, c, b, preset, scale, store_keys):
    """Expand one level: every parent spawns exactly c children.

    Returns (child_keys, child_pos); child_keys is empty when store_keys is
    false (leaf level, keys never consumed again).
    """
    n_par = parent_keys.shape[0]
    n = n_par * c
    out_pos = np.empty(n, dtype=np.float64)
    if store_keys:
        out_keys = np.empty(n, dtype=np.uint64)
    else:
        out_keys = np.empty(0, dtype=np.uint64)
    for i in prange(n):
        p = i // c
        j = i - p * c
        ck = _fin(parent_keys[p] ^ (_GOLD2 * np.uint64(j + 1)))
        if preset == PRESET_GAUSSIAN:
            w = _fin((ck ^ _TAG_DISP) + _GOLD)
            disp = scale * _ppnd16(_u01(w))
        else:
            acc = 0.0
            for r in range(b):
                w = _fin((ck ^ _TAG_DISP) + _GOLD * np.uint64(r + 1))
                acc += _step_value(_u01(w), preset)
            disp = acc
        out_pos[i] = parent_pos[p] + disp
        if store_keys:
            out_keys[i] = ck
    return out_keys, out_pos


@vectorize(["float64(float64)"], cache=True)
def ppnd16(p):
    """Inverse normal CDF as a ufunc; the single Gaussian transform used by
    both the fused kernel and the generic numpy path."""
    return _ppnd16(p)


@vectorize(["float64(float64)"], cache=True)
def uniform_step(u):
    return (2.0 * u - 1.0) * _SQRT3


@vectorize(["float64(float64)"], cache=True)
def shifted_exp_step(u):
    return -np.log(u) - 1.0


@vectorize(["float64(float64)"], cache=True)
def two_point_step(u):
    if u < 0.5:
        return -1.0
    return 1.0
