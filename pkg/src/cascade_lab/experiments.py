"""Experiment runners behind the command-line subcommands.

Each runner takes a validated :class:`ExperimentConfig` and returns an
:class:`Outputs` bundle of tables and JSON documents. Random streams are
derived from the seed by fixed tag paths, so every output depends only on
the configuration, never on worker count or call order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .analysis import (DEFAULT_Q, beta_lower_curve, coarse_spectrum, empirical_cov,
                       empirical_moments, ks_critical, ks_normal, modulus_bound_check,
                       partition_beta, zygmund_stat)
from .cascade import (SamplePool, cascade_path, cascade_paths, check_cascade_domain,
                      fixed_point_pool, normalize_increments, sample_Yn_batch, sample_Z,
                      second_moment_Yn)
from .config import ExperimentConfig
from .errors import DomainError
from .gaussian import (XiField, branching_walk, canonical_scheme, consistent_measure,
                       exact_cov_matrix, generalized_measure, geometric_scheme,
                       integrate_path, marginal_increments, marginal_increments_batch,
                       shared_prefix_matrix, validate_scheme)
from .io import Outputs, Table, load_pool, save_pool
from .laws import Dirac1, WeightLaw
from .moments import (Domain, classify_domain, domain_violations, iterate_moments,
                      lindeberg_bound, sigma_closed_form, sigma_limit, t1_variance_bounds,
                      third_moment_bounds, w2_bound, w3_bound)
from .rng import CounterRNG, Tag
from .words import level_labels

log = logging.getLogger(__name__)

# sub-streams of the root seed
POOLS, YN, PATH, COV_PATHS, FIELD, ZETA, SPECTRUM, ZYGMUND = range(1, 9)


def sub_rng(seed: int, stream: int, *more) -> CounterRNG:
    return CounterRNG(seed).child(Tag.SAMPLE, stream, *more)


# -- pools ------------------------------------------------------------------------

def _cache_dir():
    path = os.environ.get("CASCADE_LAB_CACHE")
    return Path(path) if path else None


def _pool_digest(law, b, P, K, seed, renormalize):
    ident = {"law": law.spec(), "b": b, "P": P, "K": K, "seed": seed,
             "renormalize": renormalize, "backend": _backend.backend_name(), "version": __version__}
    return hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:16]


def pools_for(law: WeightLaw, b: int, n: int, P: int, K: int, seed: int, *,
              renormalize: bool = True, workers: int = 1) -> list[SamplePool]:
    """Pools for generations 1..n, reusing the cache directory when configured.

    Generation g depends only on (law, b, P, K, seed, g), so a cached prefix
    can be extended without changing any value.
    """
    check_cascade_domain(law, b)
    rng = sub_rng(seed, POOLS)
    cache = _cache_dir()
    digest = _pool_digest(law, b, P, K, seed, renormalize) if cache else None
    pools = []
    source = law
    for g in range(1, n + 1):
        path = cache / f"pool-{digest}-g{g}.csv" if cache else None
        if path is not None and path.exists() and path.with_suffix(".json").exists():
            pool = load_pool(path)
        else:
            pool = fixed_point_pool(source, b, P, K, rng.child(Tag.GENERATION, g), renormalize=renormalize,
                                    workers=workers, generation=g, seed=seed)
            if path is not None:
                cache.mkdir(parents=True, exist_ok=True)
                save_pool(pool, path)
        pools.append(pool)
        source = pool
    return pools


def law_moments(law: WeightLaw):
    return law.moment(2), law.moment(3)


def sigmas(law: WeightLaw, b: int, n: int) -> np.ndarray:
    """``sigma_k`` for k = 0..n from the closed form."""
    s0 = law.moment(2) - 1.0
    return np.array([math.sqrt(sigma_closed_form(b, s0, k)) for k in range(n + 1)])


# -- moments and domain -----------------------------------------------------------------

def run_moments(cfg: ExperimentConfig) -> Outputs:
    law = cfg.law_obj()
    m2, m3 = law_moments(law)
    n = 100 if cfg.n is None else cfg.n
    cls = classify_domain(cfg.b, 1.0, m2, m3)
    traj = iterate_moments(cfg.b, m2, m3, n)
    out = Outputs()
    out.tables["moments"] = Table(["n", "u", "v", "sigma2", "scaled_sigma"], traj.rows())
    summary = {"b": cfg.b, "law": law.spec(), "classification": cls.value, "n": n,
               "u_final": traj.u[-1], "v_final": traj.v[-1]}
    if cls is not Domain.OUTSIDE and m2 > 1.0:
        summary["sigma_limit"] = sigma_limit(cfg.b, m2 - 1.0)
        t1 = t1_variance_bounds(cfg.b, traj.sigma2, n)
        rows = [(k, t1[k - 1]) for k in range(1, n + 1)]
        header = ["n", "t1_bound"]
        if cls is Domain.IN_D_B:
            z0 = 1.0 if cfg.z0 is None else cfg.z0
            z3 = third_moment_bounds(cfg.b, m2, m3, n, z0)
            sup = float(np.max(z3))
            summary["third_moment_sup"] = sup
            header += ["third_moment_bound", "lindeberg_p3"]
            rows = [r + (z3[r[0]], lindeberg_bound(cfg.b, 3, r[0], sup)) for r in rows]
        out.tables["bounds"] = Table(header, rows)
    out.documents["summary"] = summary
    return out


def run_domain(cfg: ExperimentConfig) -> Outputs:
    law = cfg.law_obj()
    m2, m3 = law_moments(law)
    cls = classify_domain(cfg.b, 1.0, m2, m3)
    w2 = w2_bound(cfg.b)
    summary = {"b": cfg.b, "law": law.spec(), "m1": 1.0, "m2": m2, "m3": m3,
               "w2": w2, "w3_at_m2": w3_bound(cfg.b, m2) if 1.0 < m2 < w2 else None,
               "classification": cls.value, "violations": domain_violations(cfg.b, m2, m3)}
    out = Outputs()
    out.tables["domain"] = Table(["b", "m2", "m3", "w2", "classification"], [(cfg.b, m2, m3, w2, cls.value)])
    out.documents["summary"] = summary
    if cls is Domain.OUTSIDE:
        err = DomainError("; ".join(summary["violations"]), classification=cls)
        err.outputs = out
        raise err
    return out


# -- cascade simulations -------------------------------------------------------------

def _pool_stats(pools, law, b):
    m2, m3 = law_moments(law)
    n = len(pools)
    traj = iterate_moments(b, m2, m3, n) if not isinstance(law, Dirac1) else None
    rows = []
    for g, pool in enumerate(pools, 1):
        e2, s2 = empirical_moments(pool.values, 2)
        e3, s3 = empirical_moments(pool.values, 3)
        u = traj.u[g] if traj is not None else 1.0
        v = traj.v[g] if traj is not None else 1.0
        rows.append((g, e2, s2, u, (e2 - u) / s2 if s2 > 0 else 0.0, e3, s3, v,
                     (e3 - v) / s3 if s3 > 0 else 0.0))
    return Table(["generation", "m2", "m2_se", "u_exact", "m2_z", "m3", "m3_se", "v_exact", "m3_z"], rows)


def run_cascade(cfg: ExperimentConfig) -> Outputs:
    law = cfg.law_obj()
    b = cfg.b
    pools = pools_for(law, b, cfg.n_max, cfg.pool_size, cfg.rounds, cfg.seed,
                      renormalize=cfg.renormalize, workers=cfg.workers)
    out = Outputs()
    out.tables["pool_moments"] = _pool_stats(pools, law, b)
    for pool in pools:
        name = f"pool_{pool.generation}"
        out.tables[name] = Table(["value"], [(v,) for v in pool.values])
        out.documents[name] = pool.meta()
    n = 6 if cfg.n is None else cfg.n
    y = sample_Yn_batch(law, b, n, sub_rng(cfg.seed, YN), cfg.replicas, cfg.workers)
    out.tables["yn"] = Table(["replica", "value"], list(enumerate(y)))
    mean, mean_se = empirical_moments(y, 1)
    sq, sq_se = empirical_moments(y, 2)
    weights = pools[-2] if len(pools) > 1 else law
    path = cascade_path(weights, pools[-1], b, cfg.j, sub_rng(cfg.seed, PATH))
    out.tables["path"] = Table(["word", "increment"], path.rows())
    out.documents["summary"] = {
        "b": b, "law": law.spec(), "generations": cfg.n_max,
        "yn": {"n": n, "replicas": cfg.replicas, "mean": mean, "mean_se": mean_se,
               "second_moment": sq, "second_moment_se": sq_se,
               "second_moment_exact": second_moment_Yn(law.moment(2), b, n)},
        "path": {"generation": cfg.n_max, "depth": cfg.j, "total": path.total},
    }
    return out


def exact_skewness(law: WeightLaw, b: int, n: int) -> float:
    traj = iterate_moments(b, law.moment(2), law.moment(3), n)
    u, v = traj.u[n], traj.v[n]
    return (v - 3 * u + 2) / (u - 1) ** 1.5


def run_clt(cfg: ExperimentConfig) -> Outputs:
    law = cfg.law_obj()
    b = cfg.b
    pools = pools_for(law, b, cfg.n_max, cfg.pool_size, cfg.rounds, cfg.seed,
                      renormalize=cfg.renormalize, workers=cfg.workers)
    sig = sigmas(law, b, cfg.n_max)
    R = min(cfg.replicas, cfg.pool_size)
    rows, samples = [], []
    for n, pool in enumerate(pools, 1):
        z = sample_Z(pool, sig[n])[:R]
        samples.append(z)
        mean, _ = empirical_moments(z, 1)
        var = float(np.var(z, ddof=1))
        abs3, _ = empirical_moments(np.abs(z), 3)
        rows.append((n, sig[n], ks_normal(z), ks_critical(R), mean, var, abs3,
                     exact_skewness(law, b, n)))
    out = Outputs()
    out.tables["ks"] = Table(["n", "sigma", "ks", "ks_critical_1pct", "mean", "variance",
                              "abs_third_moment", "exact_skewness"], rows)
    out.tables["z_samples"] = Table(["index"] + [f"z_{n}" for n in range(1, cfg.n_max + 1)],
                                    [(i,) + tuple(col[i] for col in samples) for i in range(R)])
    out.documents["summary"] = {"b": b, "law": law.spec(), "samples_per_n": R,
                                "ks": [r[2] for r in rows]}
    return out


# -- Gaussian limit ---------------------------------------------------------------------

def _path_outputs(path, doc):
    out = Outputs()
    out.tables["increments"] = Table(["word", "increment"], path.rows())
    grid = integrate_path(path)
    size = grid.size - 1
    out.tables["grid"] = Table(["t", "X"], [(k / size, x) for k, x in enumerate(grid)])
    out.documents["summary"] = doc
    return out


def run_limit(cfg: ExperimentConfig) -> Outputs:
    b, j = cfg.b, cfg.j
    key = sub_rng(cfg.seed, FIELD).key
    if cfg.mode == "marginal":
        path = marginal_increments(b, j, XiField(b, j, key=key), sub_rng(cfg.seed, ZETA))
    else:
        path = consistent_measure(b, j, cfg.L, XiField(b, cfg.L, key=key))
    doc = path.meta()
    if cfg.mode == "consistent":
        doc["additivity_residual"] = additivity_residual(path.levels, b)
    rows = modulus_bound_check(integrate_path(path), b, j) if j >= 1 else []
    out = _path_outputs(path, doc)
    out.tables["modulus"] = Table(["m", "delta", "lhs", "rhs", "holds"],
                                  [(r.m, r.delta, r.lhs, r.rhs, r.holds) for r in rows])
    return out


def additivity_residual(levels: dict, b: int) -> float:
    depths = sorted(levels)
    worst = 0.0
    for d in depths[:-1]:
        worst = max(worst, float(np.max(np.abs(levels[d] - levels[d + 1].reshape(-1, b).sum(axis=1)))))
    return worst


def finite_n_cov(law: WeightLaw, b: int, j: int, n: int) -> np.ndarray:
    """Exact covariance of normalized depth-j increments of the iterate-n cascade function."""
    traj = iterate_moments(b, law.moment(2), law.moment(3), n)
    u_w, u_leaf = traj.u[n - 1], traj.u[n]
    s2 = u_leaf - 1.0
    m = shared_prefix_matrix(b, j)
    cov = u_w ** m.astype(np.float64) - 1.0
    cov[np.diag_indices_from(cov)] = u_leaf * u_w**j - 1.0
    return cov * float(b) ** (-2 * j) / s2


def cascade_cov_samples(law, pools, b, j, n, seed, replicas, workers=1, sigma=None):
    weights = pools[n - 2] if n > 1 else law
    raw = cascade_paths(weights, pools[n - 1], b, j, sub_rng(seed, COV_PATHS, n), replicas, workers)
    sig = sigmas(law, b, n)[n] if sigma is None else sigma
    return normalize_increments(raw, b, j, sig)


def _cov_table(b, j, est, exact, extra=None):
    labels = level_labels(b, j)
    z = est.z_scores(exact)
    rows = []
    for i, wi in enumerate(labels):
        for k, wk in enumerate(labels):
            row = (wi, wk, exact[i, k], est.cov[i, k], est.se[i, k], z[i, k])
            rows.append(row + ((extra[i, k],) if extra is not None else ()))
    header = ["word", "word2", "exact", "empirical", "se", "z"] + (["finite_n"] if extra is not None else [])
    return Table(header, rows)


def run_cov(cfg: ExperimentConfig) -> Outputs:
    b, j = cfg.b, cfg.j
    exact = exact_cov_matrix(b, j)
    extra = None
    if cfg.source == "gaussian":
        x = marginal_increments_batch(b, j, sub_rng(cfg.seed, COV_PATHS), cfg.replicas, cfg.workers)
    else:
        law = cfg.law_obj()
        n = cfg.n_max if cfg.n is None else cfg.n
        pools = pools_for(law, b, n, cfg.pool_size, cfg.rounds, cfg.seed,
                          renormalize=cfg.renormalize, workers=cfg.workers)
        x = cascade_cov_samples(law, pools, b, j, n, cfg.seed, cfg.replicas, cfg.workers)
        extra = finite_n_cov(law, b, j, n)
    est = empirical_cov(x)
    labels = level_labels(b, j)
    out = Outputs()
    out.tables["cov"] = _cov_table(b, j, est, exact, extra)
    out.documents["cov_exact"] = {"labels": labels, "matrix": exact}
    out.documents["cov_empirical"] = {"labels": labels, "matrix": est.cov, "se": est.se,
                                      "replicas": est.replicas}
    out.documents["summary"] = {"source": cfg.source, "b": b, "j": j, "replicas": cfg.replicas,
                                "max_abs_z": float(np.max(np.abs(est.z_scores(exact)))),
                                "distance": est.distance(exact)}
    return out


def spectrum_depth(b: int, depth: int | None) -> int:
    if depth is not None:
        return depth
    return {2: 16, 3: 12}.get(b, max(1, int(16 * math.log(2) / math.log(b))))


def run_spectrum(cfg: ExperimentConfig) -> Outputs:
    b = cfg.b
    n = spectrum_depth(b, cfg.depth)
    field = XiField(b, n, key=sub_rng(cfg.seed, SPECTRUM).key)
    s = branching_walk(field, n)
    spec = coarse_spectrum(s, b, n, eps=cfg.eps, q_grid=DEFAULT_Q)
    beta = partition_beta(s, b, n, DEFAULT_Q)
    out = Outputs()
    out.tables["spectrum"] = Table(["alpha", "count", "dim_est", "dim_theory", "legendre_upper"], spec.rows())
    out.tables["beta"] = Table(["q", "beta", "lower_curve"],
                               list(zip(DEFAULT_Q, beta, beta_lower_curve(DEFAULT_Q, b))))
    out.documents["summary"] = {"b": b, "n": n, "eps": cfg.eps, "dim_at_zero": spec.at(0.0),
                                "beta_at_zero": float(beta[np.argmin(np.abs(DEFAULT_Q))])}
    return out


def zygmund_path(b: int, depth: int, seed: int, mode: str = "consistent", L: int | None = None):
    key = sub_rng(seed, ZYGMUND).key
    if mode == "marginal":
        return marginal_increments(b, depth, XiField(b, depth, key=key), sub_rng(seed, ZYGMUND, 1))
    L = depth if L is None or L < depth else L
    return consistent_measure(b, depth, L, XiField(b, L, key=key))


def run_zygmund(cfg: ExperimentConfig) -> Outputs:
    depth = 14 if cfg.depth is None else cfg.depth
    path = zygmund_path(cfg.b, depth, cfg.seed, cfg.mode, cfg.L)
    rows = zygmund_stat(integrate_path(path), cfg.b, range(1, depth + 1))
    out = Outputs()
    out.tables["zygmund"] = Table(["n", "h", "stat", "lil_scaled"], [(r.n, r.h, r.stat, r.lil) for r in rows])
    out.documents["summary"] = {"b": cfg.b, "depth": depth, "mode": cfg.mode,
                                "max_stat": max(r.stat for r in rows)}
    return out


def run_general(cfg: ExperimentConfig) -> Outputs:
    b = cfg.b
    scheme = canonical_scheme() if cfg.scheme == "canonical" else geometric_scheme(cfg.theta)
    field = XiField(b, cfg.L, key=sub_rng(cfg.seed, FIELD).key)
    path = generalized_measure(scheme, b, cfg.j, cfg.L, field)
    report = validate_scheme(scheme, b, cfg.L)
    doc = path.meta()
    doc.update({"scheme": scheme.name, "additivity_residual": additivity_residual(path.levels, b),
                "consistency_residual": report.max_consistency_residual})
    out = _path_outputs(path, doc)
    out.tables["level_sums"] = Table(["depth", "sum"], [(d, s) for d, s in enumerate(report.level_sums, 1)])
    return out


RUNNERS = {
    "moments": run_moments, "domain": run_domain, "cascade": run_cascade, "clt": run_clt,
    "limit": run_limit, "cov": run_cov, "spectrum": run_spectrum, "zygmund": run_zygmund,
    "general": run_general,
}
