"""Replicate generation: keyed tree expansion with barrier pruning.

A replicate expands the k_n-level tree breadth-first.  All randomness is a
pure function of (master_seed, replicate_id, node path) through the keyed
streams in :mod:`gremlab.rng`, so pruning never perturbs surviving particles
and batches are reproducible at any parallelism degree.

Two expansion paths share the same keyed draws:

* deterministic offspring: a fused numba kernel (`_fastpath.expand_level`)
  emits child keys and positions in one pass; leaf ordinals are recovered
  arithmetically, so no per-level bookkeeping survives the expansion;
* random offspring: a generic numpy path that also tracks per-level parent
  pointers for ancestry reconstruction.

Pruning is an upper cut: a node at level k is expanded only when its position
is at most barrier(k) + margin.  Mass above the localization barrier carries
no extremal mass in the limit, so with the default margin the recorded point
set matches the unpruned run (checked exhaustively at small n in the tests).
Leaf counts stay exact under pruning: closed form per pruned subtree for
deterministic offspring, and a count-only keyed completion pass otherwise.
"""
from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _fastpath as fp
from . import rng
from .calibration import Barrier, CalibratedParams, barrier_F, barrier_R
from .errors import CapacityError
from .model import ModelSpec, OffspringLaw

DEFAULT_FRONTIER_BUDGET = 80_000_000
DEFAULT_CHILD_CAP = 2 ** 31
_OFFSPRING_GEN_STRIDE = np.uint64(2 ** 33)

_PRESET_IDS = {
    "standard_gaussian": fp.PRESET_GAUSSIAN,
    "uniform_centered": fp.PRESET_UNIFORM,
    "shifted_exponential": fp.PRESET_SHIFTED_EXP,
    "two_point_lattice": fp.PRESET_TWO_POINT,
}


def default_window(params: CalibratedParams) -> float:
    """Window floor -6/theta*: keeps all but e^-6 of the limit intensity mass."""
    return -6.0 / params.theta_star


@dataclass(frozen=True)
class PruneConfig:
    """Upper-barrier prune: expand node at level k only if x <= barrier(k) + margin."""

    enabled: bool = True
    margin: float = 0.0
    reference: str = "F"  # F | R | none

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("prune margin must be >= 0")
        if self.reference not in ("F", "R", "none"):
            raise ValueError(f"unknown prune reference {self.reference!r}")

    @staticmethod
    def disabled() -> "PruneConfig":
        return PruneConfig(enabled=False, reference="none")

    @staticmethod
    def default(params: CalibratedParams, b_n: int, a_win: float) -> "PruneConfig":
        # slack covers the window depth plus one level-edge fluctuation
        margin = abs(a_win) + 3.0 / params.theta_star + 5.0 * math.sqrt(params.sigma2 * b_n)
        return PruneConfig(enabled=True, margin=margin, reference="F")


@dataclass
class RunResult:
    """Extremal records of one replicate.

    ``points`` are recentred leaf positions (S_u - m_n) at or above the
    window floor; ``point_paths`` holds each recorded leaf's child-index path
    (u_1..u_{k_n}); ``extremal_pair_overlaps`` lists |u ^ v| (split level)
    for every unordered pair of recorded points, in row-major pair order.
    """

    replicate_id: int
    seed: int
    a_win: float
    points: np.ndarray
    point_paths: np.ndarray
    leaf_count: int
    W: float
    max_recentred: float
    violated_R: bool
    extremal_pair_overlaps: np.ndarray
    pruned_mass_bound: float

    def n_points(self) -> int:
        return int(self.points.shape[0])


def _preset_id(spec: ModelSpec) -> int:
    return _PRESET_IDS[spec.displacement.preset]


def _gw_counts(keys: np.ndarray, offspring: OffspringLaw, b_n: int,
               cap: int = DEFAULT_CHILD_CAP) -> np.ndarray:
    """Galton-Watson population at time b_n for each keyed node (vectorized).

    Generation g draws for individual i of a node use offspring-stream
    counter g * 2^33 + i, so pruned/unpruned/count-only passes agree.
    """
    n = keys.shape[0]
    support = np.asarray(offspring.support, dtype=np.int64)
    cum = np.cumsum(np.asarray(offspring.probs, dtype=np.float64))
    cum[-1] = 1.0  # guard the top cell against rounding
    z = np.ones(n, dtype=np.int64)
    for g in range(b_n):
        total = int(z.sum())
        if total == 0:
            break
        owner = np.repeat(np.arange(n, dtype=np.int64), z)
        starts = np.cumsum(z) - z
        within = np.arange(total, dtype=np.int64) - np.repeat(starts, z)
        ctr = np.uint64(g) * _OFFSPRING_GEN_STRIDE + within.astype(np.uint64)
        u = rng.u01(rng.word(keys[owner], rng.TAG_OFFSPRING, ctr))
        draws = support[np.searchsorted(cum, u, side="left")]
        z = np.bincount(owner, weights=draws, minlength=n).astype(np.int64)
        if z.max(initial=0) > cap:
            raise OverflowError(
                f"offspring count {int(z.max())} exceeds per-node cap {cap}; "
                "schedule too large for desk scale"
            )
    return z


def sample_offspring_count(offspring: OffspringLaw, b_n: int, node_key,
                           cap: int = DEFAULT_CHILD_CAP) -> int:
    """Number of children of one node: a GW process run for b_n generations."""
    if offspring.is_deterministic:
        r = offspring.support[0]
        count = r ** b_n
        if count > cap:
            raise OverflowError(f"deterministic count {count} exceeds per-node cap {cap}")
        return count
    z = _gw_counts(np.asarray([node_key], dtype=np.uint64), offspring, b_n, cap=cap)
    return int(z[0])


def _edge_displacements(preset: int, b_n: int, child_keys: np.ndarray) -> np.ndarray:
    """Displacement of each child edge, from the child's own keyed stream."""
    if preset == fp.PRESET_GAUSSIAN:
        u = rng.u01(rng.word(child_keys, rng.TAG_DISP, np.uint64(0)))
        return math.sqrt(b_n) * fp.ppnd16(u)
    acc = np.zeros(child_keys.shape[0], dtype=np.float64)
    step_fn = {fp.PRESET_UNIFORM: fp.uniform_step,
               fp.PRESET_SHIFTED_EXP: fp.shifted_exp_step,
               fp.PRESET_TWO_POINT: fp.two_point_step}[preset]
    for r in range(b_n):
        u = rng.u01(rng.word(child_keys, rng.TAG_DISP, np.uint64(r)))
        acc += step_fn(u)
    return acc


def sample_edge_displacement(spec: ModelSpec, child_key) -> float:
    """One edge displacement, distributed as a length-b_n walk."""
    keys = np.asarray([child_key], dtype=np.uint64)
    return float(_edge_displacements(_preset_id(spec), spec.schedule.b_n, keys)[0])


def _count_only_completion(keys: np.ndarray, levels_left: int,
                           offspring: OffspringLaw, b_n: int,
                           budget: int, cap: int) -> int:
    """Exact leaf total under pruned nodes: offspring draws only, same streams."""
    total = 0
    frontier = keys
    for depth in range(levels_left):
        z = _gw_counts(frontier, offspring, b_n, cap=cap)
        n_children = int(z.sum())
        if depth == levels_left - 1:
            total += n_children
            break
        if n_children > budget:
            raise CapacityError(
                f"count-only completion frontier {n_children} exceeds budget {budget}"
            )
        owner = np.repeat(np.arange(frontier.shape[0], dtype=np.int64), z)
        starts = np.cumsum(z) - z
        within = np.arange(n_children, dtype=np.int64) - np.repeat(starts, z)
        frontier = rng.child_keys(frontier[owner], within.astype(np.uint64))
    return total


def _paths_from_ordinals(ordinals: list[int], c: int, k_n: int) -> np.ndarray:
    """Child-index path (u_1..u_{k_n}) of each leaf ordinal in the full c-ary tree."""
    out = np.empty((len(ordinals), k_n), dtype=np.int64)
    for i, o in enumerate(ordinals):
        for j in range(k_n - 1, -1, -1):
            out[i, j] = o % c
            o //= c
    return out


def _pair_overlaps(paths: np.ndarray) -> np.ndarray:
    """|u ^ v| for all unordered pairs (row-major order): common prefix length."""
    npts = paths.shape[0]
    if npts < 2:
        return np.zeros(0, dtype=np.int64)
    eq = paths[:, None, :] == paths[None, :, :]
    prefix = np.cumprod(eq, axis=2)
    ov = prefix.sum(axis=2)
    iu = np.triu_indices(npts, k=1)
    return ov[iu].astype(np.int64)


def run_replicate(spec: ModelSpec, params: CalibratedParams,
                  prune: PruneConfig | None = None,
                  a_win: float | None = None,
                  master_seed: int = 0, replicate_id: int = 0,
                  frontier_budget: int = DEFAULT_FRONTIER_BUDGET,
                  child_cap: int = DEFAULT_CHILD_CAP) -> RunResult:
    """Simulate one replicate and collect its extremal records."""
    sched = spec.schedule
    k_n, b_n = sched.k_n, sched.b_n
    if a_win is None:
        a_win = default_window(params)
    if prune is None:
        prune = PruneConfig.default(params, b_n, a_win)

    preset = _preset_id(spec)
    R_bar = barrier_R(params, sched)
    prune_bar: Barrier | None = None
    if prune.enabled and prune.reference != "none":
        prune_bar = barrier_F(params, sched) if prune.reference == "F" else R_bar

    offspring = spec.offspring
    deterministic = offspring.is_deterministic
    root_key = rng.replicate_key(master_seed, replicate_id)

    if deterministic:
        r = offspring.support[0]
        c = r ** b_n
        if c > child_cap:
            raise OverflowError(f"deterministic children per node {c} exceeds cap {child_cap}")
        if sched.n_eff * math.log2(r) > 62:
            raise CapacityError("leaf ordinals would overflow; schedule beyond desk scale")
        result = _run_deterministic(spec, params, prune, prune_bar, R_bar, a_win,
                                    root_key, c, preset, frontier_budget)
    else:
        result = _run_random(spec, params, prune, prune_bar, R_bar, a_win,
                             root_key, preset, frontier_budget, child_cap)

    points, paths, leaf_count, max_rec, violated, pruned_mass = result
    order = np.argsort(points, kind="stable")
    points = points[order]
    paths = paths[order]
    m = offspring.mean
    if deterministic:
        W = float(Fraction(leaf_count, offspring.support[0] ** sched.n_eff))
    else:
        W = leaf_count / float(m) ** sched.n_eff
    return RunResult(
        replicate_id=replicate_id,
        seed=master_seed,
        a_win=a_win,
        points=points,
        point_paths=paths,
        leaf_count=leaf_count,
        W=W,
        max_recentred=max_rec,
        violated_R=violated,
        extremal_pair_overlaps=_pair_overlaps(paths),
        pruned_mass_bound=pruned_mass,
    )


def _run_deterministic(spec, params, prune, prune_bar, R_bar, a_win,
                       root_key, c, preset, budget):
    sched = spec.schedule
    k_n, b_n = sched.k_n, sched.b_n
    scale = math.sqrt(b_n)
    keys = np.asarray([root_key], dtype=np.uint64)
    pos = np.zeros(1, dtype=np.float64)
    ords: list[int] | np.ndarray = np.zeros(1, dtype=np.int64)

    violated = False
    pruned_leaves = 0  # exact, python int
    for k in range(k_n):
        if k > 0:
            violated = violated or bool(pos.size and pos.max() > R_bar.values[k])
        if prune_bar is not None:
            keep = pos <= prune_bar.values[k] + prune.margin
            n_cut = int(keep.size - keep.sum())
            if n_cut:
                pruned_leaves += n_cut * c ** (k_n - k)
                keys, pos, ords = keys[keep], pos[keep], ords[keep]
        n_children = keys.shape[0] * c
        if n_children > budget:
            raise CapacityError(f"frontier {n_children} exceeds budget {budget}")
        store_keys = (k + 1) < k_n
        parent_ords = ords
        keys, pos = fp.expand_level(keys, pos, c, b_n, preset, scale, store_keys)
        if store_keys:
            ords = np.repeat(parent_ords * c, c) + np.tile(
                np.arange(c, dtype=np.int64), parent_ords.shape[0])
        else:
            ords = parent_ords  # leaf ordinals derived on demand below

    violated = violated or bool(pos.size and pos.max() > R_bar.values[k_n])
    leaf_count = int(pos.size) + pruned_leaves
    m_n = params.m_n
    recent = pos - m_n
    max_rec = float(recent.max()) if recent.size else -math.inf
    rec_idx = np.nonzero(recent >= a_win)[0]
    points = recent[rec_idx].copy()
    leaf_ords = [int(ords[i // c]) * c + int(i % c) for i in rec_idx]
    paths = _paths_from_ordinals(leaf_ords, c, k_n)
    total = c ** k_n
    pruned_mass = float(Fraction(pruned_leaves, total))
    return points, paths, leaf_count, max_rec, violated, pruned_mass


def _run_random(spec, params, prune, prune_bar, R_bar, a_win,
                root_key, preset, budget, child_cap):
    sched = spec.schedule
    k_n, b_n = sched.k_n, sched.b_n
    offspring = spec.offspring
    m = offspring.mean

    keys = np.asarray([root_key], dtype=np.uint64)
    pos = np.zeros(1, dtype=np.float64)
    # per-level ancestry: parent index within the previous surviving arrays,
    # and own child index under that parent
    parent_ptr: list[np.ndarray] = []
    child_j: list[np.ndarray] = []

    violated = False
    pruned_mass = 0.0
    extra_leaves = 0
    for k in range(k_n):
        if k > 0:
            violated = violated or bool(pos.size and pos.max() > R_bar.values[k])
        if prune_bar is not None and pos.size:
            keep = pos <= prune_bar.values[k] + prune.margin
            cut_idx = np.nonzero(~keep)[0]
            if cut_idx.size:
                pruned_mass += cut_idx.size * float(m) ** (-k * b_n)
                extra_leaves += _count_only_completion(
                    keys[cut_idx], k_n - k, offspring, b_n, budget, child_cap)
                keep_idx = np.nonzero(keep)[0]
                keys, pos = keys[keep_idx], pos[keep_idx]
                if k > 0:
                    parent_ptr[-1] = parent_ptr[-1][keep_idx]
                    child_j[-1] = child_j[-1][keep_idx]
        if pos.size == 0:
            parent_ptr.append(np.zeros(0, dtype=np.int64))
            child_j.append(np.zeros(0, dtype=np.int64))
            keys = np.zeros(0, dtype=np.uint64)
            pos = np.zeros(0, dtype=np.float64)
            continue
        z = _gw_counts(keys, offspring, b_n, cap=child_cap)
        n_children = int(z.sum())
        if n_children > budget:
            raise CapacityError(f"frontier {n_children} exceeds budget {budget}")
        owner = np.repeat(np.arange(keys.shape[0], dtype=np.int64), z)
        starts = np.cumsum(z) - z
        within = np.arange(n_children, dtype=np.int64) - np.repeat(starts, z)
        ck = rng.child_keys(keys[owner], within.astype(np.uint64))
        disp = _edge_displacements(preset, b_n, ck)
        pos = pos[owner] + disp
        keys = ck
        parent_ptr.append(owner)
        child_j.append(within)

    violated = violated or bool(pos.size and pos.max() > R_bar.values[k_n])
    leaf_count = int(pos.size) + extra_leaves
    recent = pos - params.m_n
    max_rec = float(recent.max()) if recent.size else -math.inf
    rec_idx = np.nonzero(recent >= a_win)[0]
    points = recent[rec_idx].copy()
    paths = np.empty((rec_idx.size, k_n), dtype=np.int64)
    for row, leaf in enumerate(rec_idx):
        i = int(leaf)
        for lvl in range(k_n - 1, -1, -1):
            paths[row, lvl] = child_j[lvl][i]
            i = int(parent_ptr[lvl][i])
    return points, paths, leaf_count, max_rec, violated, pruned_mass


def _replicate_worker(args):
    (spec_json, params, prune, a_win, master_seed, rep_id, budget, cap) = args
    spec = ModelSpec.from_json(spec_json)
    return run_replicate(spec, params, prune=prune, a_win=a_win,
                         master_seed=master_seed, replicate_id=rep_id,
                         frontier_budget=budget, child_cap=cap)


def run_batch(spec: ModelSpec, params: CalibratedParams, replicates: int,
              master_seed: int = 0,
              prune: PruneConfig | None = None,
              a_win: float | None = None,
              parallelism: int = 1,
              frontier_budget: int = DEFAULT_FRONTIER_BUDGET,
              child_cap: int = DEFAULT_CHILD_CAP) -> list[RunResult]:
    """Independent replicates 0..R-1, ordered by replicate_id.

    Results are a pure function of (spec, params, seeds); the parallelism
    degree only affects wall-clock time.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    ids = range(replicates)
    if parallelism <= 1:
        return [run_replicate(spec, params, prune=prune, a_win=a_win,
                              master_seed=master_seed, replicate_id=i,
                              frontier_budget=frontier_budget, child_cap=child_cap)
                for i in ids]
    args = [(spec.to_json(), params, prune, a_win, master_seed, i,
             frontier_budget, child_cap) for i in ids]
    # spawn: forking a process that has touched numba's OpenMP layer is unsafe
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=parallelism, mp_context=ctx) as pool:
        out = list(pool.map(_replicate_worker, args,
                            chunksize=max(1, replicates // (8 * parallelism))))
    return out
