"""Estimators used to compare simulations with exact values.

Every estimator is a pure function of its input arrays. Scalar reductions
use exactly rounded summation so results do not depend on the order in
which partial sums are combined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, special

from .errors import InputError

DEFAULT_CENTERS = np.round(np.arange(-14, 15) * 0.1, 10)
DEFAULT_Q = np.round(np.arange(-40, 41) * 0.05, 10)


def empirical_moments(samples, p: int) -> tuple[float, float]:
    """Mean of ``x**p`` and its standard error."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise InputError(f"need at least 2 samples, got {x.size}")
    xp = x**p
    mean = math.fsum(xp) / xp.size
    var = math.fsum((xp - mean) ** 2) / (xp.size - 1)
    return mean, math.sqrt(var / xp.size)


def normal_cdf(x):
    return special.ndtr(x)


def ks_normal(samples) -> float:
    """Kolmogorov-Smirnov distance between the empirical law and N(0, 1)."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 100:
        raise InputError(f"need at least 100 samples, got {n}")
    cdf = normal_cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def ks_critical(n: int, level: float = 0.01) -> float:
    """Asymptotic one-sample critical value (1.63/sqrt(n) at 1 %)."""
    table = {0.01: 1.63, 0.05: 1.36, 0.10: 1.22}
    if level not in table:
        raise InputError(f"level must be one of {sorted(table)}")
    return table[level] / math.sqrt(n)


@dataclass(frozen=True, eq=False)
class CovEstimate:
    cov: np.ndarray
    se: np.ndarray
    replicas: int

    def z_scores(self, exact) -> np.ndarray:
        exact = np.asarray(exact, dtype=np.float64)
        diff = self.cov - exact
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.se > 0, diff / self.se, np.where(diff == 0, 0.0, np.inf))
        return z

    def distance(self, exact) -> float:
        """Frobenius norm of the difference."""
        return float(np.linalg.norm(self.cov - np.asarray(exact)))


def _as_matrix(paths):
    if isinstance(paths, np.ndarray):
        x = np.asarray(paths, dtype=np.float64)
    else:
        paths = list(paths)
        depths = {(p.b, p.depth) for p in paths}
        if len(depths) > 1:
            raise InputError(f"paths have different shapes: {sorted(depths)}")
        x = np.stack([p.increments for p in paths]) if paths else np.zeros((0, 0))
    if x.ndim != 2:
        raise InputError("expected a (replicas, increments) array")
    if x.shape[0] < 2:
        raise InputError("need at least 2 paths")
    return x


def empirical_cov(paths) -> CovEstimate:
    """Sample covariance with entrywise standard errors.

    The standard error of entry (i, k) is the standard deviation of the
    centred products divided by sqrt(R).
    """
    x = _as_matrix(paths)
    r, m = x.shape
    xc = x - x.mean(axis=0)
    cov = np.empty((m, m))
    se = np.empty((m, m))
    for i in range(m):
        prod = xc[:, i : i + 1] * xc
        cov[i] = prod.sum(axis=0) / (r - 1)
        se[i] = prod.std(axis=0, ddof=1) / math.sqrt(r)
    return CovEstimate(cov, se, r)


@dataclass(frozen=True)
class ModulusRow:
    m: int
    delta: float
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def grid_modulus(f, window: int) -> float:
    """Largest ``|f(s) - f(t)|`` over grid points at most *window* steps apart."""
    f = np.asarray(f, dtype=np.float64)
    size = min(window + 1, f.size)
    hi = ndimage.maximum_filter1d(f, size, mode="nearest")
    lo = ndimage.minimum_filter1d(f, size, mode="nearest")
    return float(np.max(hi - lo))


def modulus_bound_check(f, b: int, j: int) -> list[ModulusRow]:
    """Grid modulus of continuity at scale ``b^-m`` against the increment bound.

    The bound is ``2(b-1) sum_{i=m..j} max_w |increment over I_w at level i|``,
    with absolute increments.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (b**j + 1,):
        raise InputError(f"expected {b ** j + 1} grid values, got shape {f.shape}")
    level_max = {i: float(np.max(np.abs(np.diff(f[:: b ** (j - i)])))) for i in range(j + 1)}
    rows = []
    for m in range(1, j + 1):
        lhs = grid_modulus(f, b ** (j - m))
        rhs = 2 * (b - 1) * math.fsum(level_max[i] for i in range(m, j + 1))
        rows.append(ModulusRow(m, float(b) ** -m, lhs, rhs))
    return rows


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Box-counting estimate of the dimension of level sets of ``S(w)/n``."""

    b: int
    n: int
    centers: np.ndarray
    eps: float
    counts: np.ndarray
    legendre: np.ndarray | None = None

    @property
    def dim_est(self) -> np.ndarray:
        """``log_b count / n``; NaN marks an empty bin."""
        with np.errstate(divide="ignore"):
            d = np.log(self.counts.astype(np.float64)) / (self.n * math.log(self.b))
        return np.where(self.counts > 0, d, np.nan)

    @property
    def dim_theory(self) -> np.ndarray:
        return 1.0 - self.centers**2 / (2.0 * math.log(self.b))

    def populated(self) -> np.ndarray:
        return self.counts > 0

    def at(self, alpha: float) -> float:
        idx = int(np.argmin(np.abs(self.centers - alpha)))
        if abs(self.centers[idx] - alpha) > 1e-9:
            raise InputError(f"no bin centred at {alpha}")
        return float(self.dim_est[idx])

    def rows(self):
        leg = self.legendre if self.legendre is not None else np.full(self.centers.size, np.nan)
        return [(a, int(c), d, t, l) for a, c, d, t, l in
                zip(self.centers, self.counts, self.dim_est, self.dim_theory, leg)]


def ratio_values(values, b: int, n: int, kind: str = "walk") -> np.ndarray:
    """Per-word exponents: ``S(w)/n``, or the same from interval increments."""
    x = np.asarray(values, dtype=np.float64)
    if x.shape != (b**n,):
        raise InputError(f"expected values for all {b ** n} words, got shape {x.shape}")
    if kind == "walk":
        return x / n
    if kind == "increment":
        return x * float(b) ** n / (n * math.sqrt(b - 1))
    raise InputError(f"unknown value kind {kind!r}")


def coarse_spectrum(values, b: int, n: int, centers=None, eps: float = 0.1, kind: str = "walk",
                    q_grid=None) -> SpectrumEstimate:
    """Count words with ``|S(w)/n - alpha| <= eps`` for each bin centre.

    The Legendre upper bound of the same data over *q_grid* is attached.
    """
    if n < 1:
        raise InputError("depth must be >= 1")
    ratio = ratio_values(values, b, n, kind)
    centers = DEFAULT_CENTERS if centers is None else np.asarray(centers, dtype=np.float64)
    srt = np.sort(ratio)
    # small tolerance so that bins on the 0.1 lattice include their edges
    tol = 1e-12
    lo = np.searchsorted(srt, centers - eps - tol, side="left")
    hi = np.searchsorted(srt, centers + eps + tol, side="right")
    counts = (hi - lo).astype(np.int64)
    q = DEFAULT_Q if q_grid is None else np.asarray(q_grid, dtype=np.float64)
    beta = partition_beta(ratio * n, b, n, q)
    legendre = np.array([legendre_upper(q, beta, a, b) for a in centers])
    return SpectrumEstimate(b, n, centers, eps, counts, legendre)


def partition_beta(values, b: int, n: int, q_grid) -> np.ndarray:
    """``-(1/n) log_b sum_w exp(q S(w))`` per q, via a shifted log-sum-exp."""
    s = np.asarray(values, dtype=np.float64)
    if s.shape != (b**n,):
        raise InputError(f"expected values for all {b ** n} words, got shape {s.shape}")
    out = []
    for q in np.asarray(q_grid, dtype=np.float64):
        e = q * s
        top = float(np.max(e))
        mean = math.fsum(np.exp(e - top)) / s.size
        # log_b(b^n * mean * e^top) / n = 1 + (top + log mean) / (n log b)
        out.append(-1.0 - (top + math.log(mean)) / (n * math.log(b)))
    return np.array(out)


def beta_lower_curve(q, b: int) -> np.ndarray:
    return -1.0 - np.asarray(q, dtype=np.float64) ** 2 / (2.0 * math.log(b))


def legendre_upper(q_grid, beta, alpha: float, b: int) -> float:
    """``min_q (-alpha q / log b - beta(q))`` over the grid."""
    q = np.asarray(q_grid, dtype=np.float64)
    return float(np.min(-alpha * q / math.log(b) - np.asarray(beta, dtype=np.float64)))


def concavity_defect(values) -> float:
    """Largest discrete second difference (should be <= 0 for concave data)."""
    v = np.asarray(values, dtype=np.float64)
    return float(np.max(v[2:] - 2 * v[1:-1] + v[:-2])) if v.size >= 3 else 0.0


@dataclass(frozen=True)
class ZygmundRow:
    n: int
    h: float
    stat: float
    lil: float


def zygmund_stat(X, b: int, n_list) -> list[ZygmundRow]:
    """``|X(t+h) + X(t-h) - 2X(t)| / h`` at ``t = 1/b``, ``h = b^-n``.

    The companion column divides by ``sqrt(2 n log log n)`` (NaN for n < 3);
    it is a trend diagnostic only.
    """
    X = np.asarray(X, dtype=np.float64)
    size = X.size - 1
    depth = round(math.log(size, b)) if size > 0 else -1
    if size < 1 or b**depth != size:
        raise InputError(f"grid must have b**N + 1 points, got {X.size}")
    centre = size // b
    rows = []
    for n in n_list:
        if not 1 <= n <= depth:
            raise InputError(f"grid depth {depth} too coarse for n = {n}")
        step = b ** (depth - n)
        h = float(b) ** -n
        stat = abs(X[centre + step] + X[centre - step] - 2 * X[centre]) / h
        lil = stat / math.sqrt(2 * n * math.log(math.log(n))) if n >= 3 else math.nan
        rows.append(ZygmundRow(n, h, stat, lil))
    return rows
