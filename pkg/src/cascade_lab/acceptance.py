"""Acceptance suite: ten end-to-end checks with fixed seeds and tolerances.

Each check returns a :class:`CriterionResult`. Stochastic checks also return
their output tables, which the determinism check regenerates and compares
byte for byte.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (DEFAULT_Q, beta_lower_curve, coarse_spectrum, empirical_cov,
                       empirical_moments, ks_normal, partition_beta)
from .config import ExperimentConfig
from .experiments import (additivity_residual, cascade_cov_samples, pools_for, sigmas, sub_rng,
                          FIELD, COV_PATHS, SPECTRUM, ZETA)
from .gaussian import (XiField, branching_walk, consistent_measure, exact_cov_matrix,
                       marginal_increments_batch, zeta_trunc_batch)
from .io import Outputs, Table
from .laws import TwoPoint
from .moments import (iterate_moments, lindeberg_bound, sigma_iterate, sigma_limit,
                      t1_variance_bounds, third_moment_bounds)
from .rng import Tag
from .sampling_defaults import DEFAULTS
from .words import Word

D = DEFAULTS


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict
    runtime: float
    limit: float
    outputs: Outputs | None = field(default=None, repr=False)

    @property
    def within_time(self) -> bool:
        return self.runtime < self.limit

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:>2} {self.name} ({self.runtime:.3g} s, limit {self.limit:g} s)"


def _min_time(fn, repeats=20):
    best, value = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return value, best


class Suite:
    """Holds shared inputs (the default pools) for one acceptance run."""

    def __init__(self, seed: int = D["seed"], workers: int = 1):
        self.seed = seed
        self.workers = workers
        self.law = TwoPoint(D["a"])
        self.b = D["b"]
        self._pools = None

    def pools(self):
        if self._pools is None:
            self._pools = pools_for(self.law, self.b, 4, D["pool_size"], D["rounds"], self.seed,
                                    workers=self.workers)
        return self._pools

    # 1 ----------------------------------------------------------------------------------
    def sigma_trajectory(self) -> CriterionResult:
        b, s0 = 3, 0.5

        def work():
            s = sigma_iterate(b, s0, 60)
            return (b - 1.0) ** 60 * s[60], sigma_limit(b, s0) ** 2

        (scaled, limit_sq), dt = _min_time(work)
        ok = abs(scaled - 1.0) <= 1e-10 and abs(scaled - limit_sq) <= 1e-10 and abs(limit_sq - 1.0) <= 1e-12
        return CriterionResult(1, "scaled variance trajectory", ok and dt < 1e-3,
                               {"scaled_sigma2_60": scaled, "limit_sq": limit_sq}, dt, 1e-3)

    # 2 ----------------------------------------------------------------------------------
    def moment_fixed_point(self) -> CriterionResult:
        b, u0, v0 = 3, 1.49, 2.47
        traj, dt = _min_time(lambda: iterate_moments(b, u0, v0, 100))
        mono = bool(np.all(np.diff(traj.u) <= 0) and np.all(np.diff(traj.v) <= 0))
        du, dv = abs(traj.u[100] - 1), abs(traj.v[100] - 1)
        ok = mono and du < 1e-12 and dv < 1e-12
        return CriterionResult(2, "moment recursion fixed point", ok and dt < 1e-3,
                               {"monotone": mono, "u100_err": du, "v100_err": dv}, dt, 1e-3)

    # 3 ----------------------------------------------------------------------------------
    def pool_moments(self) -> CriterionResult:
        t0 = time.perf_counter()
        pool = pools_for(self.law, self.b, 1, D["pool_size"], D["rounds"], self.seed, workers=self.workers)[0]
        dt = time.perf_counter() - t0
        m2, s2 = empirical_moments(pool.values, 2)
        m3, s3 = empirical_moments(pool.values, 3)
        u1 = 2 / 1.51
        v1 = iterate_moments(3, 1.49, 2.47, 1).v[1]
        z2, z3 = (m2 - u1) / s2, (m3 - v1) / s3
        ok = abs(z2) <= 4 and abs(z3) <= 4
        out = Outputs(tables={"pool_moments": Table(["p", "estimate", "se", "exact", "z"],
                                                    [(2, m2, s2, u1, z2), (3, m3, s3, v1, z3)])})
        return CriterionResult(3, "fixed-point pool moments", ok and dt < 30,
                               {"m2": m2, "m2_z": z2, "m3": m3, "m3_z": z3}, dt, 30, out)

    # 4 ----------------------------------------------------------------------------------
    def clt(self) -> CriterionResult:
        t0 = time.perf_counter()
        pools = self.pools()
        sig = sigmas(self.law, self.b, 4)
        R = D["clt_samples"]
        ks = [ks_normal((p.values[:R] - 1.0) / sig[n]) for n, p in enumerate(pools, 1)]
        dt = time.perf_counter() - t0
        decreasing = all(ks[i + 1] < ks[i] for i in range(3))
        ok = decreasing and ks[3] < 0.03
        out = Outputs(tables={"ks": Table(["n", "ks"], list(enumerate(ks, 1)))})
        return CriterionResult(4, "standardised iterates approach normal", ok and dt < 120,
                               {"ks": ks, "strictly_decreasing": decreasing}, dt, 120, out)

    # 5 ----------------------------------------------------------------------------------
    def covariance(self) -> CriterionResult:
        t0 = time.perf_counter()
        b, j, R = 3, 2, D["cov_replicas"]
        exact = exact_cov_matrix(b, j)
        x = marginal_increments_batch(b, j, sub_rng(self.seed, COV_PATHS), R, self.workers)
        est = empirical_cov(x)
        zmax = float(np.max(np.abs(est.z_scores(exact))))
        pools = self.pools()
        dist = {}
        for n in (1, 4):
            y = cascade_cov_samples(self.law, pools, b, j, n, self.seed, R, self.workers)
            dist[n] = empirical_cov(y).distance(exact)
        dt = time.perf_counter() - t0
        ok = zmax <= 4 and dist[4] < dist[1]
        out = Outputs(tables={
            "gaussian_cov": Table(["row", "col", "empirical", "se"],
                                  [(i, k, est.cov[i, k], est.se[i, k]) for i in range(9) for k in range(9)]),
            "cascade_distance": Table(["n", "distance"], sorted(dist.items())),
        })
        return CriterionResult(5, "limit covariance", ok and dt < 180,
                               {"gaussian_max_abs_z": zmax, "distance_n1": dist[1], "distance_n4": dist[4]},
                               dt, 180, out)

    # 6 ----------------------------------------------------------------------------------
    def additive_measure(self) -> CriterionResult:
        t0 = time.perf_counter()
        b, j, L, R = 3, 3, 10, D["zeta_fields"]
        field = XiField(b, L, key=sub_rng(self.seed, FIELD).key)
        path = consistent_measure(b, L, L, field)
        resid = additivity_residual(path.levels, b)
        keys = sub_rng(self.seed, ZETA).child_keys(Tag.REPLICA, np.arange(R))
        zeta = math.sqrt(b - 1) * zeta_trunc_batch(b, Word.parse("0" * j, b), L, keys)
        var = float(np.var(zeta, ddof=1))
        centred = (zeta - zeta.mean()) ** 2
        se = float(np.std(centred, ddof=1) / math.sqrt(R))
        target = 1 - float(b) ** -(L - j)
        dt = time.perf_counter() - t0
        ok = resid < 1e-12 and abs(var - target) <= 4 * se
        out = Outputs(tables={"zeta": Table(["variance", "se", "target"], [(var, se, target)]),
                              "measure": Table(["rank", "value"], list(enumerate(path.levels[j])))})
        return CriterionResult(6, "additive Gaussian measure", ok and dt < 60,
                               {"additivity_residual": resid, "zeta_variance": var, "se": se,
                                "target": target}, dt, 60, out)

    # 7 ----------------------------------------------------------------------------------
    def spectrum(self) -> CriterionResult:
        t0 = time.perf_counter()
        b, n = 2, 16
        s = branching_walk(XiField(b, n, key=sub_rng(self.seed, SPECTRUM).key), n)
        spec = coarse_spectrum(s, b, n, eps=D["eps"], q_grid=DEFAULT_Q)
        beta = partition_beta(s, b, n, DEFAULT_Q)
        dt = time.perf_counter() - t0
        d = spec.dim_est
        pop = spec.populated()
        inner = pop & (np.abs(spec.centers) <= 1 + 1e-9)
        outer = np.abs(spec.centers) > 1.18
        qmask = np.abs(DEFAULT_Q) <= 1 + 1e-9
        checks = {
            "dim_at_zero": abs(spec.at(0.0) - 1) < 0.05,
            "theory_band": bool(np.all(np.abs(d[inner] - spec.dim_theory[inner]) < 0.1)),
            "outer_bins": bool(np.all(~pop[outer] | (d[outer] <= 0.1))),
            "beta_at_zero": float(beta[np.argmin(np.abs(DEFAULT_Q))]) == -1.0,
            "beta_lower": bool(np.all(beta[qmask] >= beta_lower_curve(DEFAULT_Q[qmask], b) - 0.05)),
            "legendre": bool(np.all(d[pop] <= spec.legendre[pop] + 0.05)),
        }
        out = Outputs(tables={"spectrum": Table(["alpha", "count", "dim_est", "dim_theory", "legendre_upper"],
                                                spec.rows()),
                              "beta": Table(["q", "beta"], list(zip(DEFAULT_Q, beta)))})
        details = dict(checks, d_hat_zero=spec.at(0.0))
        return CriterionResult(7, "coarse multifractal spectrum", all(checks.values()) and dt < 60,
                               details, dt, 60, out)

    # 8 ----------------------------------------------------------------------------------
    def third_moment(self) -> CriterionResult:
        t0 = time.perf_counter()
        # two-point weights have |W - 1| = a = sigma_0, so E|Z_0|^3 = 1
        z = third_moment_bounds(3, 1.49, 2.47, 50, z0=1.0)
        sup = float(np.max(z))
        pools = self.pools()
        sig = sigmas(self.law, self.b, 3)
        emp = [empirical_moments(np.abs(pools[n - 1].values - 1) / sig[n], 3)[0] for n in (1, 2, 3)]
        dt = time.perf_counter() - t0
        ok = math.isfinite(sup) and all(e < z[n] for n, e in zip((1, 2, 3), emp))
        return CriterionResult(8, "third-moment bound", ok and dt < 60,
                               {"sup_bound": sup, "bounds_1_3": list(z[1:4]), "empirical_1_3": emp}, dt, 60)

    # 9 ----------------------------------------------------------------------------------
    def proof_bounds(self) -> CriterionResult:
        def work():
            s = iterate_moments(3, 1.49, 2.47, 50).sigma2
            t1 = t1_variance_bounds(3, s, 50)
            lind = [lindeberg_bound(3, 3, n, 1.0) for n in range(9, 51)]
            return t1, lind

        (t1, lind), dt = _min_time(work)
        ratios = t1[4:] / t1[3:-1]  # n = 5..50
        ok = bool(np.all(ratios < 1)) and max(lind) < 1e-3
        return CriterionResult(9, "proof-apparatus bounds", ok and dt < 1e-3,
                               {"max_ratio_n_ge_5": float(ratios.max()), "lindeberg_9": lind[0],
                                "rate_factor": math.sqrt(5 / 6)}, dt, 1e-3)

    STOCHASTIC = ("pool_moments", "clt", "covariance", "additive_measure", "spectrum")

    def all(self) -> list[CriterionResult]:
        results = [self.sigma_trajectory(), self.moment_fixed_point()]
        results += [getattr(self, name)() for name in self.STOCHASTIC]
        results += [self.third_moment(), self.proof_bounds()]
        results.append(determinism(self.seed, results, workers=max(2, self.workers)))
        return results


def _bytes(outputs_list, directory) -> dict:
    files = {}
    for idx, out in enumerate(outputs_list):
        sub = Path(directory) / str(idx)
        for p in out.write(sub):
            files[f"{idx}/{p.name}"] = p.read_bytes()
    return files


# 10 -------------------------------------------------------------------------------------
def determinism(seed: int, first: list[CriterionResult], workers: int = 2) -> CriterionResult:
    """Rerun the stochastic checks serially and in parallel and compare files."""
    t0 = time.perf_counter()
    reference = [r.outputs for r in first if r.outputs is not None]
    reruns = {}
    for w in (1, workers):
        suite = Suite(seed, workers=w)
        reruns[w] = [getattr(suite, name)().outputs for name in Suite.STOCHASTIC]
    with tempfile.TemporaryDirectory() as tmp:
        ref = _bytes(reference, Path(tmp) / "ref")
        same = {w: _bytes(outs, Path(tmp) / f"w{w}") == ref for w, outs in reruns.items()}
    dt = time.perf_counter() - t0
    ok = all(same.values()) and len(ref) > 0
    return CriterionResult(10, "byte-identical reruns", ok,
                           {"files": len(ref), "identical_by_workers": same}, dt, math.inf)


def run_suite(seed: int | None = None, workers: int = 1) -> list[CriterionResult]:
    return Suite(D["seed"] if seed is None else seed, workers).all()


def summary_table(results) -> Table:
    return Table(["criterion", "name", "passed", "runtime_s", "details"],
                 [(r.number, r.name, r.passed, r.runtime, _details_text(r.details)) for r in results])


def _details_text(details: dict) -> str:
    parts = []
    for k, v in details.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, (list, tuple)):
            v = "[" + " ".join(f"{x:.6g}" if isinstance(x, float) else str(x) for x in v) + "]"
        parts.append(f"{k}={v}")
    return "; ".join(parts)
