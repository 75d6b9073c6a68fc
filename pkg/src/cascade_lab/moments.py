"""Closed-form moment dynamics of the cascade map and the bounds built on them.

Everything here is deterministic float64 arithmetic. ``u_n`` and ``v_n`` are
the second and third moments of the n-th iterate of the weight law under the
cascade map, ``sigma_n**2 = u_n - 1`` its variance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import DivergenceError, DomainError, InputError


class Domain(str, enum.Enum):
    IN_D_B = "IN_D_b"
    IN_P_B_ONLY = "IN_P_b_ONLY"
    OUTSIDE = "OUTSIDE"


def _check_base(b):
    if int(b) != b or b < 3:
        raise DomainError(f"b must be an integer >= 3, got {b}")


def _w2_rational(b):
    return b * (b**4 - 4 * b**2 + 12 * b - 8) / (b**4 + 8 * b**2 - 12 * b + 4)


def w2_bound(b: int) -> float:
    """Upper limit on the second moment for the third-moment domain."""
    _check_base(b)
    return min(b - 1.0, _w2_rational(b))


def w3_bound(b: int, t: float) -> float:
    """Upper limit on the third moment given second moment ``t``."""
    _check_base(b)
    if not 1.0 < t < w2_bound(b):
        raise DomainError(f"t = {t} outside (1, w2({b}) = {w2_bound(b)})")
    radicand = (b * (b**4 - 4 * b**2 + 12 * b - 8) - t * (b**4 + 8 * b**2 - 12 * b + 4)) / (b - t)
    if radicand < 0:
        raise ArithmeticError(f"negative radicand {radicand} at b={b}, t={t}")
    return b * b / 2.0 + 0.5 * math.sqrt(radicand)


@dataclass(frozen=True)
class DomainBounds:
    b: int

    @property
    def w2(self) -> float:
        return w2_bound(self.b)

    def w3_at(self, t: float) -> float:
        return w3_bound(self.b, t)


def check_moments(m1, m2, m3, tol=1e-12):
    if abs(m1 - 1.0) > tol:
        raise InputError(f"first moment must be 1, got {m1}")
    if m2 < 1.0:
        raise InputError(f"second moment {m2} < 1 is impossible with mean 1")
    if m3 < m2 * m2 * (1.0 - 1e-15):
        raise InputError(f"third moment {m3} < m2**2 = {m2 * m2} violates Cauchy-Schwarz")


def classify_domain(b: int, m1: float, m2: float, m3: float) -> Domain:
    """Place a law with moments (m1, m2, m3) relative to P_b and D_b.

    P_b: ``1 < m2 < b-1``. D_b additionally needs ``m2 < w2(b)`` and
    ``m3 < w3(b, m2)``.
    """
    _check_base(b)
    check_moments(m1, m2, m3)
    if 1.0 < m2 < w2_bound(b) and m3 < w3_bound(b, m2):
        return Domain.IN_D_B
    if 1.0 < m2 < b - 1:
        return Domain.IN_P_B_ONLY
    return Domain.OUTSIDE


def domain_violations(b: int, m2: float, m3: float) -> list[str]:
    """Human-readable list of the moment conditions a law fails."""
    _check_base(b)
    out = []
    if not m2 > 1.0:
        out.append(f"m2 = {m2:.6g} must exceed 1 (non-degenerate weights)")
    if not m2 < b - 1:
        out.append(f"m2 = {m2:.6g} >= b-1 = {b - 1}: the second-moment condition 1 < m2 < b-1 "
                   "for iterating the cascade map fails")
    w2 = w2_bound(b)
    if not m2 < w2:
        out.append(f"m2 = {m2:.6g} >= w2({b}) = {w2:.6g}: third-moment domain needs m2 < w2(b)")
    elif m2 > 1.0 and not m3 < w3_bound(b, m2):
        out.append(f"m3 = {m3:.6g} >= w3({b}, m2) = {w3_bound(b, m2):.6g}: third-moment domain "
                   "needs m3 < w3(b, m2)")
    return out


@dataclass(frozen=True)
class MomentTrajectory:
    b: int
    u: np.ndarray
    v: np.ndarray
    s2: np.ndarray | None = None

    @property
    def sigma2(self) -> np.ndarray:
        """``u - 1``, carried by its own recursion to avoid cancellation near 1."""
        return self.u - 1.0 if self.s2 is None else self.s2

    @property
    def scaled_sigma(self) -> np.ndarray:
        """``(b-1)**(n/2) * sigma_n`` for each n."""
        n = np.arange(self.u.size)
        return (self.b - 1.0) ** (n / 2.0) * np.sqrt(self.sigma2)

    def rows(self):
        """Rows ``(n, u, v, sigma2, scaled_sigma)`` for CSV export."""
        return list(zip(range(self.u.size), self.u, self.v, self.sigma2, self.scaled_sigma))


def iterate_moments(b: int, u0: float, v0: float, n: int) -> MomentTrajectory:
    if not 1.0 <= u0 < b:
        raise DomainError(f"u0 = {u0} outside [1, {b})")
    if not 0.0 < v0 < b * b:
        raise DomainError(f"v0 = {v0} outside (0, {b * b})")
    u = np.empty(n + 1)
    v = np.empty(n + 1)
    s = np.empty(n + 1)
    u[0], v[0], s[0] = u0, v0, u0 - 1.0
    for k in range(n):
        if u[k] >= b:
            raise DivergenceError(f"u_{k} = {u[k]} >= b", step=k)
        if v[k] >= b * b:
            raise DivergenceError(f"v_{k} = {v[k]} >= b**2", step=k)
        u[k + 1] = (b - 1) / (b - u[k])
        v[k + 1] = (b - 1) * (3 * u[k] * u[k + 1] + b - 2) / (b * b - v[k])
        # u_{k+1} - 1 = (u_k - 1) / (b - u_k)
        s[k + 1] = s[k] / (b - 1 - s[k])
    return MomentTrajectory(b, u, v, s)


def _check_sigma0(b, sigma0_sq):
    if not 0.0 <= sigma0_sq < b - 2:
        raise DomainError(f"sigma0^2 = {sigma0_sq} outside [0, b-2 = {b - 2})")


def sigma_step(b: int, sigma_sq: float) -> float:
    """One application of ``s -> s / (b - 1 - s)``."""
    return sigma_sq / (b - 1 - sigma_sq)


def sigma_iterate(b: int, sigma0_sq: float, n: int) -> np.ndarray:
    """``sigma_k**2`` for k = 0..n by repeated :func:`sigma_step`."""
    _check_sigma0(b, sigma0_sq)
    out = np.empty(n + 1)
    out[0] = sigma0_sq
    for k in range(n):
        out[k + 1] = sigma_step(b, out[k])
    return out


def sigma_closed_form(b: int, sigma0_sq: float, n: int) -> float:
    """``sigma_n**2`` solved from ``s_n/(b-2-s_n) = s_0/(b-2-s_0) (b-1)^-n``."""
    _check_sigma0(b, sigma0_sq)
    c = sigma0_sq / (b - 2 - sigma0_sq) * (b - 1.0) ** (-n)
    return (b - 2) * c / (1.0 + c)


def sigma_limit(b: int, sigma0_sq: float) -> float:
    """Limit of ``(b-1)**(n/2) * sigma_n``."""
    _check_sigma0(b, sigma0_sq)
    return math.sqrt(sigma0_sq * (b - 2) / (b - 2 - sigma0_sq))


def rn_squared(b: int, sigma_prev_sq: float, sigma_sq: float) -> float:
    """Second moment of the remainder term linking consecutive levels."""
    if sigma_prev_sq <= 0 or sigma_sq <= 0:
        raise DomainError("variances must be positive")
    ratio = math.sqrt(sigma_prev_sq) / math.sqrt(sigma_sq)
    return (sigma_prev_sq + (ratio - math.sqrt(b - 1.0)) ** 2) / b


def t1_variance_bounds(b: int, sigma2, n_max: int | None = None) -> np.ndarray:
    """Upper bounds on ``E[T_{1,n}^2]**0.5`` for n = 1..n_max.

    ``sigma2[m]`` is ``sigma_m**2``; the bound for n uses ``r_m**2`` for
    m = 1..n, so ``sigma2`` must reach index n_max. Entry n-1 of the result
    is the bound for n. The inner binomial sums for all n are evaluated as
    one lower-triangular matrix product.
    """
    s = np.asarray(sigma2, dtype=np.float64)
    if n_max is None:
        n_max = s.size - 1
    if s.size < n_max + 1:
        raise InputError(f"need sigma2 up to index {n_max}, have {s.size - 1}")
    if np.any(s[: n_max + 1] <= 0):
        raise DomainError("variances must be positive")
    ratio = np.sqrt(s[:n_max]) / np.sqrt(s[1 : n_max + 1])
    r2 = np.zeros(n_max + 1)
    r2[1:] = (s[:n_max] + (ratio - math.sqrt(b - 1.0)) ** 2) / b
    kk = np.arange(n_max)
    jj = np.arange(n_max)
    # coef[k, j] = C(k, j) b^k (b-1)^j  (zero for j > k)
    coef = comb(kk[:, None], jj[None, :]) * float(b) ** kk[:, None] * (b - 1.0) ** jj[None, :]
    nn = np.arange(1, n_max + 1)
    idx = nn[None, :] - jj[:, None]
    # R[j, n] = r_{n-j}^2, zero when n - j < 1
    rmat = np.where(idx >= 1, r2[np.clip(idx, 0, n_max)], 0.0)
    inner = coef @ rmat
    weights = float(b) ** (-kk[:, None]) * (kk[:, None] < nn[None, :])
    return (weights * np.sqrt(inner)).sum(axis=0)


def t1_variance_bound(b: int, sigma_trajectory, n: int) -> float:
    return float(t1_variance_bounds(b, sigma_trajectory, n)[n - 1])


def lindeberg_bound(b: int, p: float, n: int, sup_zp: float) -> float:
    """``(((b-1)**(p/2) + 1) / b**(p-1))**n * sup_zp``, the epsilon-free factor."""
    if p <= 2:
        raise DomainError(f"p must exceed 2, got {p}")
    if sup_zp < 0:
        raise InputError("sup_zp must be nonnegative")
    return (((b - 1.0) ** (p / 2.0) + 1.0) / b ** (p - 1.0)) ** n * sup_zp


def third_moment_rhs(b: int, m3_w: float, z3_w: float, r: float) -> float:
    """Explicit bound on ``E|Z_{n+1}|^3`` from ``E W_n^3``, ``E|Z_n|^3`` and ``r = sigma_n/sigma_{n+1}``."""
    if m3_w >= b * b:
        raise DomainError(f"m3 = {m3_w} >= b**2")
    if z3_w < 0 or r <= 0:
        raise InputError("need z3 >= 0 and r > 0")
    bm1 = b - 1.0
    t0 = bm1 * (4 * b - 5)
    t1 = (b * b - 1.0) ** (2.0 / 3.0) * z3_w ** (1.0 / 3.0) + 2 * bm1**1.5 + bm1 * (2 * b - 3)
    t2 = (b * b - 1.0) ** (1.0 / 3.0) * z3_w ** (2.0 / 3.0) + 2 * bm1**1.5 + bm1**2
    t3 = b * b - 1.0
    num = r**3 * z3_w + t0 + 3 * r * t1 + 3 * r * r * t2 + r**3 * t3
    return num / (b * b - m3_w)


def third_moment_bounds(b: int, u0: float, v0: float, n: int, z0: float = 10.0) -> np.ndarray:
    """Iterate :func:`third_moment_rhs` along the exact trajectory from ``z0``.

    Returns ``z_0..z_n`` where ``z_k`` bounds ``E|Z_k|^3`` whenever
    ``z0 >= E|Z_0|^3``.
    """
    traj = iterate_moments(b, u0, v0, n)
    s = traj.sigma2
    z = np.empty(n + 1)
    z[0] = z0
    for k in range(n):
        r = math.sqrt(s[k] / s[k + 1])
        z[k + 1] = third_moment_rhs(b, traj.v[k], z[k], r)
    return z
