"""Monte Carlo engine for multiplicative cascades.

Iterates of the cascade map are represented by empirical pools (population
dynamics): a pool approximating ``T mu`` is obtained by repeatedly applying
the smoothing transform to a pool that starts at the constant 1, drawing
the weights from ``mu`` and the children by resampling the previous round.
Pool ``k`` then serves as the weight source for pool ``k + 1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _backend
from .errors import DomainError, InputError
from .laws import POOL, Dirac1, WeightLaw, validate_for_cascade
from .moments import Domain
from .parallel import Workers
from .rng import CounterRNG, Tag, derive_keys
from .words import check_size, level_labels

log = logging.getLogger(__name__)

MIN_POOL = 1000


@dataclass(frozen=True, eq=False)
class SamplePool:
    """Empirical stand-in for a law with mean one."""

    values: np.ndarray
    b: int
    generation: int
    inner_iterations: int
    source: str
    seed: int | None = None
    renormalized: bool = True

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise InputError("empty pool")
        if np.any(values < 0):
            raise InputError("pool values must be nonnegative")
        drift = abs(math.fsum(values) / values.size - 1.0)
        if drift > 5.0 / math.sqrt(values.size):
            log.warning("pool mean drifted by %.3g from 1 (P=%d)", drift, values.size)

    @property
    def pool_size(self) -> int:
        return self.values.size

    def moment(self, p: int) -> float:
        return float(np.mean(self.values**p))

    def meta(self) -> dict:
        return {
            "b": self.b,
            "generation": self.generation,
            "pool_size": self.pool_size,
            "inner_iterations": self.inner_iterations,
            "source": self.source,
            "seed": self.seed,
            "renormalized": self.renormalized,
        }


WeightSource = Union[WeightLaw, SamplePool]


def _source_args(source):
    if isinstance(source, SamplePool):
        return POOL, 0.0, source.values
    if isinstance(source, WeightLaw):
        return source.code, source.param, None
    raise InputError(f"weight source must be a WeightLaw or SamplePool, not {type(source).__name__}")


def _describe(source):
    if isinstance(source, SamplePool):
        return f"pool(generation={source.generation})"
    params = {k: v for k, v in source.spec().items() if k != "law"}
    return source.name + ("(" + ", ".join(f"{k}={v}" for k, v in params.items()) + ")" if params else "")


def check_cascade_domain(law: WeightLaw, b: int) -> Domain:
    """Refuse laws on which the cascade map cannot be iterated.

    The unit mass at 1 is accepted as the trivial fixed point.
    """
    if isinstance(law, Dirac1):
        return Domain.OUTSIDE
    cls = validate_for_cascade(law, b)
    if cls is Domain.OUTSIDE:
        raise DomainError(
            f"{_describe(law)} has m2 = {law.moment(2):.6g}, outside P_b "
            f"(requires 1 < m2 < b-1 = {b - 1})",
            classification=cls,
        )
    return cls


# -- the martingale Y_n --------------------------------------------------------

def _yn_chunk(start, stop, rep_keys, b, n, code, param, wpool):
    levels = np.arange(1, n + 1, dtype=np.uint64)
    wkeys = derive_keys(rep_keys[start:stop, None], Tag.LEVEL, levels[None, :])
    wkeys = np.ascontiguousarray(wkeys.reshape(stop - start, n))
    return _backend.kernels().tree_mean(wkeys, b, code, param, wpool)


def sample_Yn(law: WeightSource, b: int, n: int, rng: CounterRNG) -> float:
    """One exact draw of ``b^-n sum_{|w|=n} prod_k W(w|k)``."""
    check_size(b, n)
    code, param, wpool = _source_args(law)
    return float(_yn_chunk(0, 1, np.array([rng.key], dtype=np.uint64), b, n, code, param, wpool)[0])


def sample_Yn_batch(law: WeightSource, b: int, n: int, rng: CounterRNG, replicas: int,
                    workers: int = 1) -> np.ndarray:
    """Replica r equals ``sample_Yn(law, b, n, rng.child(Tag.REPLICA, r))``."""
    check_size(b, n)
    code, param, wpool = _source_args(law)
    rep_keys = rng.child_keys(Tag.REPLICA, np.arange(replicas))
    with Workers(workers) as pool:
        parts = pool.map_ranges(_yn_chunk, replicas, rep_keys, b, n, code, param, wpool)
    return np.concatenate(parts)


def second_moment_Yn(m2: float, b: int, n: int) -> float:
    """Exact ``E[Y_n^2]`` from ``e_{k+1} = (m2 e_k + b - 1) / b``, ``e_0 = 1``."""
    e = 1.0
    for _ in range(n):
        e = (m2 * e + b - 1) / b
    return e


# -- pools ---------------------------------------------------------------------

def _round_chunk(start, stop, key_w, key_y, b, code, param, wpool, prev):
    return _backend.kernels().pool_round(key_w, key_y, start, stop - start, b, code, param, wpool, prev)


def fixed_point_pool(weight_source: WeightSource, b: int, P: int, K: int, rng: CounterRNG, *,
                     renormalize: bool = True, workers: int = 1, generation: int = 1,
                     seed: int | None = None) -> SamplePool:
    """Approximate the fixed point of the smoothing transform for *weight_source*.

    Starts from the constant pool and applies K rounds; round r reads its
    weights and resampling picks from ``rng.child(Tag.ROUND_WEIGHT, r)`` and
    ``rng.child(Tag.ROUND_PICK, r)``. With *renormalize* each round is
    divided by its exact mean: the target has mean one, and without this the
    pool mean performs a random walk whose drift exceeds the sampling error
    of the moments after a few rounds.
    """
    if P < MIN_POOL:
        raise InputError(f"pool size must be >= {MIN_POOL}, got {P}")
    if K < 1:
        raise InputError(f"need at least one round, got K={K}")
    if b < 2:
        raise InputError(f"b must be >= 2, got {b}")
    code, param, wpool = _source_args(weight_source)
    prev = np.ones(P)
    with Workers(workers) as pool:
        for r in range(K):
            key_w = rng.child(Tag.ROUND_WEIGHT, r).key
            key_y = rng.child(Tag.ROUND_PICK, r).key
            parts = pool.map_ranges(_round_chunk, P, key_w, key_y, b, code, param, wpool, prev)
            new = np.concatenate(parts)
            if renormalize:
                new = new / (math.fsum(new) / P)
            prev = new
    return SamplePool(prev, b, generation, K, _describe(weight_source), seed, renormalize)


def iterate_T_pools(law: WeightLaw, b: int, n: int, P: int, K: int, rng: CounterRNG, *,
                    renormalize: bool = True, workers: int = 1,
                    seed: int | None = None) -> list[SamplePool]:
    """Pools approximating the first *n* iterates of the cascade map.

    Generation g is built from ``rng.child(Tag.GENERATION, g)``, with the law
    as weight source for g = 1 and pool g - 1 afterwards.
    """
    check_cascade_domain(law, b)
    pools = []
    source: WeightSource = law
    for g in range(1, n + 1):
        pool = fixed_point_pool(source, b, P, K, rng.child(Tag.GENERATION, g),
                                renormalize=renormalize, workers=workers, generation=g, seed=seed)
        pools.append(pool)
        source = pool
    return pools


def sample_Z(pool: SamplePool | np.ndarray, sigma: float) -> np.ndarray:
    """Standardised values ``(x - 1) / sigma``."""
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    values = pool.values if isinstance(pool, SamplePool) else np.asarray(pool, dtype=np.float64)
    return (values - 1.0) / sigma


# -- cascade paths --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IncrementPath:
    """Increments over the depth-j b-adic intervals, lexicographic order."""

    b: int
    depth: int
    increments: np.ndarray
    kind: str = "raw"
    sigma: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if inc.shape != (self.b**self.depth,):
            raise InputError(f"expected {self.b ** self.depth} increments, got shape {inc.shape}")
        if self.kind not in ("raw", "normalized"):
            raise InputError(f"unknown path kind {self.kind!r}")
        if self.kind == "raw" and np.any(inc < 0):
            raise InputError("raw cascade increments must be nonnegative")
        object.__setattr__(self, "increments", inc)

    @property
    def total(self) -> float:
        return math.fsum(self.increments)

    def rows(self):
        return list(zip(level_labels(self.b, self.depth), self.increments))


def _leaf_pool(leaf_source):
    if isinstance(leaf_source, SamplePool):
        return leaf_source.values
    if isinstance(leaf_source, Dirac1):
        return np.ones(1)
    values = np.asarray(leaf_source, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise InputError("leaf source must be a nonempty pool")
    return values


def _path_chunk(start, stop, rep_keys, b, j, code, param, wpool, lpool):
    levels = np.arange(1, j + 1, dtype=np.uint64)
    keys = rep_keys[start:stop]
    wkeys = np.ascontiguousarray(derive_keys(keys[:, None], Tag.WEIGHT, levels[None, :]).reshape(stop - start, j))
    lkeys = derive_keys(keys, Tag.LEAF)
    return _backend.kernels().cascade_increments(wkeys, lkeys, b, code, param, wpool, lpool, float(b) ** -j)


def cascade_path(weight_source: WeightSource, leaf_source, b: int, j: int,
                 rng: CounterRNG) -> IncrementPath:
    """Increments ``b^-j Y(w) prod_k W(w|k)`` of one cascade function at depth j.

    With weights from pool n-1 (or the law for n = 1) and leaves from pool n
    this samples the iterate-n cascade function on the depth-j grid.
    """
    check_size(b, j)
    code, param, wpool = _source_args(weight_source)
    inc = _path_chunk(0, 1, np.array([rng.key], dtype=np.uint64), b, j, code, param, wpool,
                      _leaf_pool(leaf_source))[0]
    return IncrementPath(b, j, inc, "raw")


def cascade_paths(weight_source: WeightSource, leaf_source, b: int, j: int, rng: CounterRNG,
                  replicas: int, workers: int = 1) -> np.ndarray:
    """Array (replicas, b**j); row r equals the path drawn with ``rng.child(Tag.REPLICA, r)``."""
    check_size(b, j)
    code, param, wpool = _source_args(weight_source)
    lpool = _leaf_pool(leaf_source)
    rep_keys = rng.child_keys(Tag.REPLICA, np.arange(replicas))
    with Workers(workers) as pool:
        parts = pool.map_ranges(_path_chunk, replicas, rep_keys, b, j, code, param, wpool, lpool)
    return np.concatenate(parts)


def normalize_increments(increments, b: int, j: int, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    return (np.asarray(increments, dtype=np.float64) - float(b) ** -j) / sigma


def normalize_path(path: IncrementPath, sigma: float) -> IncrementPath:
    """Increments of ``(h - Id) / sigma`` over the same intervals."""
    if path.kind != "raw":
        raise InputError("path is already normalized")
    inc = normalize_increments(path.increments, path.b, path.depth, sigma)
    return IncrementPath(path.b, path.depth, inc, "normalized", sigma, dict(path.meta))
