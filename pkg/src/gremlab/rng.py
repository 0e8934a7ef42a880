"""Counter-based keyed random numbers.

Every tree node owns a 64-bit key derived purely from
(master_seed, replicate_id, path), so draws attached to a node never depend
on traversal order, pruning decisions, or the parallelism degree.  Keys and
draws are SplitMix64-style finalizer chains, fully vectorized over numpy
uint64 arrays.

Layout of the key space:

    rep_key    = word(master_seed, TAG_REPLICATE, replicate_id)
    root key   = rep_key
    child key  = fin(parent_key XOR GOLD2 * (child_index + 1))
    draws      = word(key, TAG, counter)  for TAG in {DISP, OFFSPRING, ...}

``word`` is the SplitMix64 output function, a bijection of the 64-bit state
``(key XOR tag) + GOLD * (counter + 1)``.
"""
from __future__ import annotations

import numpy as np

GOLD = np.uint64(0x9E3779B97F4A7C15)
GOLD2 = np.uint64(0xC2B2AE3D27D4EB4F)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

TAG_REPLICATE = np.uint64(0x7265706C69636174)
TAG_DISP = np.uint64(0x646973706C616365)
TAG_OFFSPRING = np.uint64(0x6F6666737072696E)
TAG_SPINE = np.uint64(0x7370696E65737465)

_U53 = np.float64(1.0 / 9007199254740992.0)  # 2**-53


def fin(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer; bijective on uint64 (wrapping is intentional)."""
    z = np.uint64(z) if np.isscalar(z) or np.ndim(z) == 0 else np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def word(key, tag, counter):
    """Counter-indexed 64-bit draw from a keyed stream."""
    key = np.asarray(key, dtype=np.uint64)
    counter = np.asarray(counter, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return fin((key ^ np.uint64(tag)) + GOLD * (counter + np.uint64(1)))


def replicate_key(master_seed: int, replicate_id: int) -> np.uint64:
    return word(np.uint64(master_seed), TAG_REPLICATE, np.uint64(replicate_id))


def child_keys(parent_keys, child_index):
    """Keys of the children; child_index counts from 0 under each parent."""
    parent_keys = np.asarray(parent_keys, dtype=np.uint64)
    idx = np.asarray(child_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return fin(parent_keys ^ (GOLD2 * (idx + np.uint64(1))))


def u01(words) -> np.ndarray:
    """Map 64-bit words to doubles in the open interval (0, 1)."""
    w = np.asarray(words, dtype=np.uint64)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def normals(key, tag, counter) -> np.ndarray:
    """Standard normals via the inverse normal CDF (deterministic, vectorized).

    Uses the same jitted AS 241 transform as the fused level kernel, so the
    generic path and the fast path agree bit for bit.
    """
    from ._fastpath import ppnd16

    return ppnd16(u01(word(key, tag, counter)))


def uniforms(key, tag, counter) -> np.ndarray:
    return u01(word(key, tag, counter))
