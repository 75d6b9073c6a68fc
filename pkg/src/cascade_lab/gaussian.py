"""Gaussian limit objects on the b-ary tree.

The standard normals attached to tree nodes are read from a counter-based
field: the value at a word of length d is entry ``rank(word)`` of the
stream keyed by ``(field key, XI, d)``. Refining the depth therefore never
changes values already drawn, and any subtree can be regenerated on its own.

Two increment generators are provided. The marginal one reproduces the
exact limit covariance at a single depth. The consistent one truncates the
descendant series at a finite depth L, which keeps the measure exactly
additive across depths at the cost of a documented variance deficit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import _backend
from .errors import InputError
from .parallel import Workers
from .rng import CounterRNG, Tag, derive_keys, seed_key
from .words import MAX_NODES, Word, check_size, level, level_labels

# Dense covariance matrices are limited to this many rows.
MAX_COV_ROWS = 4096


# -- node field -----------------------------------------------------------------

def _level_key(key, depth):
    return derive_keys(np.asarray(key, dtype=np.uint64), Tag.XI, depth)


class XiField:
    """Standard normals indexed by nonempty words of length at most ``max_depth``."""

    def __init__(self, b: int, max_depth: int, seed: int | None = None, *, key: int | None = None):
        if (seed is None) == (key is None):
            raise InputError("give exactly one of seed or key")
        check_size(b, max_depth)
        self.b = b
        self.max_depth = max_depth
        self.seed = seed
        self.key = seed_key(seed) if key is None else int(key)
        self._levels: dict[int, np.ndarray] = {}

    def _check_depth(self, d):
        if not 1 <= d <= self.max_depth:
            raise InputError(f"depth {d} outside [1, {self.max_depth}]")

    def level(self, d: int) -> np.ndarray:
        """All values at depth d in lexicographic order (cached, read-only)."""
        self._check_depth(d)
        if d not in self._levels:
            keys = np.atleast_1d(_level_key(self.key, d))
            values = _backend.kernels().normal_block(keys, 0, self.b**d)[0]
            values.setflags(write=False)
            self._levels[d] = values
        return self._levels[d]

    def __call__(self, word: Word) -> float:
        if word.base != self.b:
            raise InputError(f"word base {word.base} does not match field base {self.b}")
        self._check_depth(len(word))
        if len(word) in self._levels:
            return float(self._levels[len(word)][word.rank])
        keys = np.atleast_1d(_level_key(self.key, len(word)))
        return float(_backend.kernels().normal_block(keys, word.rank, 1)[0, 0])


def branching_walk(field: XiField, n: int) -> np.ndarray:
    """``S(w) = sum_{k<=n} xi(w|k)`` for every word of length n."""
    s = np.zeros(1)
    for d in range(1, n + 1):
        s = np.repeat(s, field.b) + field.level(d)
    return s


# -- exact covariance -------------------------------------------------------------

def exact_cov(b: int, j: int, w: Word, w2: Word) -> float:
    """Limit covariance of the increments over the intervals of w and w2."""
    if len(w) != j or len(w2) != j:
        raise InputError(f"both words must have length {j}, got {len(w)} and {len(w2)}")
    if w.base != b or w2.base != b:
        raise InputError(f"words must be over base {b}")
    scale = float(b) ** (-2 * j)
    if w == w2:
        return scale * (1 + (b - 1) * j)
    shared = 0
    for x, y in zip(w.digits, w2.digits):
        if x != y:
            break
        shared += 1
    return scale * (b - 1) * shared


def _digits(b, j):
    ranks = np.arange(b**j)
    return np.stack([(ranks // b ** (j - 1 - k)) % b for k in range(j)], axis=1) if j else np.zeros((1, 0), int)


def shared_prefix_matrix(b: int, j: int) -> np.ndarray:
    """Lengths of common prefixes of all pairs of length-j words."""
    dg = _digits(b, j)
    same = dg[:, None, :] == dg[None, :, :]
    return np.cumprod(same, axis=2).sum(axis=2)


def exact_cov_matrix(b: int, j: int) -> np.ndarray:
    size = check_size(b, j)
    if size > MAX_COV_ROWS:
        raise InputError(f"covariance matrix with {size} rows exceeds {MAX_COV_ROWS}")
    m = shared_prefix_matrix(b, j).astype(np.float64)
    out = (b - 1) * m
    out[np.diag_indices(size)] += 1.0
    return out * float(b) ** (-2 * j)


# -- paths --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianPath:
    """Increments over depth-j intervals plus optional coarser levels."""

    b: int
    depth: int
    increments: np.ndarray
    mode: str
    truncation: int | None = None
    levels: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if inc.shape != (self.b**self.depth,):
            raise InputError(f"expected {self.b ** self.depth} increments, got shape {inc.shape}")
        object.__setattr__(self, "increments", inc)

    @property
    def variance_deficit(self) -> float:
        """Per-increment variance missing relative to the limit covariance."""
        if self.truncation is None:
            return 0.0
        return float(self.b) ** (-2 * self.depth) * float(self.b) ** (-(self.truncation - self.depth))

    def grid(self) -> np.ndarray:
        return integrate_path(self)

    def rows(self):
        return list(zip(level_labels(self.b, self.depth), self.increments))

    def meta(self) -> dict:
        return {"b": self.b, "depth": self.depth, "mode": self.mode,
                "truncation": self.truncation, "variance_deficit": self.variance_deficit}


def integrate_path(path) -> np.ndarray:
    """Grid values ``X(k b^-j)``, k = 0..b^j, as running sums from 0."""
    inc = path.increments if hasattr(path, "increments") else np.asarray(path, dtype=np.float64)
    out = np.empty(inc.size + 1)
    out[0] = 0.0
    np.cumsum(inc, out=out[1:])
    return out


def _marginal(levels, zeta, b, j):
    # levels[d-1] has shape (R, b^d); zeta has shape (R, b^j)
    walk = np.zeros((zeta.shape[0], 1))
    for d in range(1, j + 1):
        walk = np.repeat(walk, b, axis=1) + levels[d - 1]
    return (zeta + math.sqrt(b - 1) * walk) * float(b) ** -j


def marginal_increments(b: int, j: int, field: XiField, rng: CounterRNG) -> GaussianPath:
    """Increments ``b^-j (zeta(w) + sqrt(b-1) S(w))`` with zeta drawn from *rng*.

    Their covariance equals :func:`exact_cov_matrix` exactly.
    """
    size = check_size(b, j)
    if j > field.max_depth:
        raise InputError(f"depth {j} exceeds the field depth {field.max_depth}")
    levels = [field.level(d)[None, :] for d in range(1, j + 1)]
    zeta = rng.normal_at(0, size)[None, :]
    return GaussianPath(b, j, _marginal(levels, zeta, b, j)[0], "marginal")


def _marginal_chunk(start, stop, rep_keys, b, j):
    keys = rep_keys[start:stop]
    ker = _backend.kernels()
    levels = [ker.normal_block(_level_key(keys, d), 0, b**d) for d in range(1, j + 1)]
    zeta = ker.normal_block(derive_keys(keys, Tag.ZETA), 0, b**j)
    return _marginal(levels, zeta, b, j)


def marginal_increments_batch(b: int, j: int, rng: CounterRNG, replicas: int,
                              workers: int = 1) -> np.ndarray:
    """Array (replicas, b**j).

    Row r equals ``marginal_increments(b, j, XiField(b, j, key=k), CounterRNG(key=k).child(Tag.ZETA))``
    with ``k = rng.child(Tag.REPLICA, r).key``.
    """
    size = check_size(b, j)
    if replicas * size > MAX_NODES * 4:
        raise InputError(f"{replicas} replicas of {size} increments is too large for one batch")
    rep_keys = rng.child_keys(Tag.REPLICA, np.arange(replicas))
    with Workers(workers) as pool:
        parts = pool.map_ranges(_marginal_chunk, replicas, rep_keys, b, j)
    return np.concatenate(parts)


# -- coefficient schemes ------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientScheme:
    """Per-node weights for the general additive construction.

    ``alpha_level(b, d)`` and ``beta_level(b, d)`` return the coefficients of
    all depth-d words in lexicographic order; depth 0 is the root.
    """

    name: str
    alpha_level: Callable[[int, int], np.ndarray]
    beta_level: Callable[[int, int], np.ndarray]
    p: float = 2.0

    def __post_init__(self):
        if not 1.0 < self.p <= 2.0:
            raise InputError(f"summability exponent must lie in (1, 2], got {self.p}")

    def alpha(self, w: Word) -> float:
        return float(self.alpha_level(w.base, len(w))[w.rank])

    def beta(self, w: Word) -> float:
        return float(self.beta_level(w.base, len(w))[w.rank])

    @classmethod
    def from_functions(cls, name, alpha: Callable[[Word], float], beta: Callable[[Word], float], p=2.0):
        """Wrap word-level functions (evaluated word by word; fine for small trees)."""
        def lift(fn):
            return lambda b, d: np.array([fn(w) for w in level(b, d)], dtype=np.float64)
        return cls(name, lift(alpha), lift(beta), p)


def canonical_scheme() -> CoefficientScheme:
    return CoefficientScheme(
        "canonical",
        lambda b, d: np.full(b**d, float(b) ** -d),
        lambda b, d: np.full(b**d, math.sqrt(b - 1)),
    )


def geometric_scheme(theta: float) -> CoefficientScheme:
    """Weights ``b^-|w|`` with node factors ``theta^|w|``; summable iff theta^2 < b."""
    return CoefficientScheme(
        f"geometric(theta={theta})",
        lambda b, d: np.full(b**d, float(b) ** -d),
        lambda b, d: np.full(b**d, float(theta) ** d),
    )


@dataclass(frozen=True)
class SchemeReport:
    ok: bool
    max_consistency_residual: float
    level_sums: tuple
    message: str = ""


def validate_scheme(scheme: CoefficientScheme, b: int, L: int, tol: float = 1e-12) -> SchemeReport:
    """Check parent/child consistency of the weights and decay of the level sums."""
    check_size(b, L)
    worst = 0.0
    alpha_prev = np.asarray(scheme.alpha_level(b, 0), dtype=np.float64)
    for d in range(1, L + 1):
        alpha = np.asarray(scheme.alpha_level(b, d), dtype=np.float64)
        resid = np.abs(alpha_prev - alpha.reshape(-1, b).sum(axis=1))
        worst = max(worst, float(resid.max()))
        bad = np.flatnonzero(resid > tol)
        if bad.size:
            w = Word.from_rank(int(bad[0]), d - 1, b)
            return SchemeReport(False, worst, (), f"weights at word {str(w)!r} differ from the sum over "
                                                  f"its children by {resid[bad[0]]:.3g}")
        alpha_prev = alpha
    sums = []
    for d in range(1, L + 1):
        ab = np.abs(np.asarray(scheme.alpha_level(b, d)) * np.asarray(scheme.beta_level(b, d)))
        sums.append(math.fsum(ab**scheme.p))
    for d in range(1, len(sums)):
        if sums[d] > 0 and not sums[d] < sums[d - 1]:
            return SchemeReport(False, worst, tuple(sums),
                                f"level sum at depth {d + 1} ({sums[d]:.3g}) does not decrease "
                                f"from depth {d} ({sums[d - 1]:.3g})")
    return SchemeReport(True, worst, tuple(sums))


def _general_levels(b, L, xi_levels, alpha, beta):
    """Measure of every word of length 0..L.

    tail(w) = sum_l [alpha(wl) beta(wl) xi(wl) + tail(wl)] collects the
    descendants; head(w) = head(parent) + beta(w) xi(w) the ancestors.
    """
    tails = [None] * (L + 1)
    tails[L] = np.zeros(b**L)
    for d in range(L, 0, -1):
        x = (alpha[d] * beta[d] * xi_levels[d] + tails[d]).reshape(-1, b)
        acc = x[:, 0].copy()
        for c in range(1, b):
            acc += x[:, c]
        tails[d - 1] = acc
    out = []
    head = np.zeros(1)
    for d in range(0, L + 1):
        if d:
            head = np.repeat(head, b) + beta[d] * xi_levels[d]
        out.append(tails[d] + alpha[d] * head)
    return out


def generalized_levels(scheme: CoefficientScheme, b: int, L: int, field: XiField,
                       validate: bool = True) -> list[np.ndarray]:
    if L > field.max_depth:
        raise InputError(f"truncation depth {L} exceeds the field depth {field.max_depth}")
    if field.b != b:
        raise InputError(f"field base {field.b} does not match b = {b}")
    if validate:
        report = validate_scheme(scheme, b, L)
        if not report.ok:
            raise InputError(f"scheme {scheme.name} rejected: {report.message}")
    xi = [None] + [field.level(d) for d in range(1, L + 1)]
    alpha = [np.asarray(scheme.alpha_level(b, d), dtype=np.float64) for d in range(L + 1)]
    beta = [np.asarray(scheme.beta_level(b, d), dtype=np.float64) for d in range(L + 1)]
    return _general_levels(b, L, xi, alpha, beta)


def generalized_measure(scheme: CoefficientScheme, b: int, j: int, L: int, field: XiField) -> GaussianPath:
    """Additive measure of the depth-j intervals for a general weight scheme."""
    if not 0 <= j <= L:
        raise InputError(f"need 0 <= j <= L, got j={j}, L={L}")
    levels = generalized_levels(scheme, b, L, field)
    mode = "consistent" if scheme.name == "canonical" else "general"
    return GaussianPath(b, j, levels[j], mode, L, {d: levels[d] for d in range(j + 1)})


def consistent_levels(b: int, L: int, field: XiField) -> list[np.ndarray]:
    return generalized_levels(canonical_scheme(), b, L, field, validate=False)


def consistent_measure(b: int, j: int, L: int, field: XiField) -> GaussianPath:
    """Exactly additive measure from the descendant series truncated at depth L."""
    if not 0 <= j <= L:
        raise InputError(f"need 0 <= j <= L, got j={j}, L={L}")
    levels = consistent_levels(b, L, field)
    return GaussianPath(b, j, levels[j], "consistent", L, {d: levels[d] for d in range(j + 1)})


def zeta_trunc_batch(b: int, word: Word, L: int, field_keys) -> np.ndarray:
    """``sum_{k=1}^{L-|w|} b^-k sum_{|v|=k} xi(wv)`` for one word across many fields.

    Streams the descendant values level by level without storing them.
    """
    depth = len(word)
    if depth > L:
        raise InputError(f"word longer than truncation depth {L}")
    check_size(b, L)
    keys = np.atleast_1d(np.asarray(field_keys, dtype=np.uint64))
    ker = _backend.kernels()
    total = np.zeros(keys.size)
    for k in range(1, L - depth + 1):
        count = b**k
        s = ker.normal_block_sum(_level_key(keys, depth + k), word.rank * count, count)
        total += s * float(b) ** -k
    return total


def zeta_trunc(field: XiField, word: Word, L: int) -> float:
    return float(zeta_trunc_batch(field.b, word, L, [field.key])[0])
