import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from cascade_lab.analysis import (DEFAULT_Q, beta_lower_curve, coarse_spectrum, concavity_defect,
                                  empirical_cov, empirical_moments, grid_modulus, ks_critical,
                                  ks_normal, legendre_upper, modulus_bound_check, partition_beta,
                                  zygmund_stat)
from cascade_lab.cascade import fixed_point_pool
from cascade_lab.errors import InputError
from cascade_lab.experiments import zygmund_path
from cascade_lab.gaussian import (XiField, branching_walk, consistent_measure, exact_cov_matrix,
                                  integrate_path, marginal_increments_batch)
from cascade_lab.laws import TwoPoint
from cascade_lab.rng import CounterRNG


@pytest.fixture(scope="module")
def walk16():
    return branching_walk(XiField(2, 16, seed=7), 16)


# -- moments and KS ------------------------------------------------------------------------------

def test_empirical_moments_examples():
    assert empirical_moments([2.5] * 10, 3) == (2.5**3, 0.0)
    assert empirical_moments([0.0, 2.0], 1) == (1.0, 1.0)
    with pytest.raises(InputError):
        empirical_moments([1.0], 1)


def test_empirical_moments_order_independent():
    x = CounterRNG(1).normal(10_001) * 1e3
    a = empirical_moments(x, 2)
    b = empirical_moments(x[::-1].copy(), 2)
    assert a[0] == b[0]


def test_empirical_moments_on_pool():
    pool = fixed_point_pool(TwoPoint(0.7), 3, 100_000, 20, CounterRNG(3))
    m, se = empirical_moments(pool.values, 2)
    assert abs(m - 2 / 1.51) < 4 * se


def test_ks_degenerate_and_errors():
    assert ks_normal(np.zeros(200)) == 0.5
    with pytest.raises(InputError):
        ks_normal(np.zeros(99))


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_ks_matches_scipy(seed):
    x = np.random.default_rng(seed).standard_t(5, size=500)
    assert ks_normal(x) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)


def test_ks_own_normals():
    assert ks_normal(CounterRNG(77).normal(10_000)) < ks_critical(10_000)
    assert ks_critical(10_000) == pytest.approx(0.0163)


# -- covariance ---------------------------------------------------------------------------------------

def test_cov_identical_paths():
    x = np.tile(np.arange(9.0), (50, 1))
    est = empirical_cov(x)
    assert np.all(est.cov == 0) and np.all(est.se == 0)


def test_cov_gaussian_j1():
    x = marginal_increments_batch(3, 1, CounterRNG(5), 20_000)
    est = empirical_cov(x)
    assert np.all(np.abs(est.z_scores(exact_cov_matrix(3, 1))) < 4)
    assert np.allclose(np.diag(est.cov), 1 / 3, atol=0.02)


def test_cov_against_numpy_and_se():
    x = CounterRNG(6).normal(40_000).reshape(10_000, 4) * np.array([1, 2, 3, 4])
    est = empirical_cov(x)
    assert np.allclose(est.cov, np.cov(x.T), rtol=1e-12, atol=1e-12)
    # for independent normals, SE of a variance estimate is sqrt(2) var / sqrt(R)
    assert est.se[2, 2] == pytest.approx(math.sqrt(2) * 9 / 100, rel=0.05)


def test_cov_errors():
    with pytest.raises(InputError):
        empirical_cov(np.zeros((1, 3)))
    with pytest.raises(InputError):
        empirical_cov(np.zeros(5))


# -- modulus of continuity --------------------------------------------------------------------------------

def test_grid_modulus_bruteforce():
    f = CounterRNG(2).normal(82).cumsum()
    for window in (1, 3, 9, 27, 81):
        brute = max(abs(f[s] - f[t]) for s in range(82) for t in range(s, min(82, s + window + 1)))
        assert grid_modulus(f, window) == brute


def test_modulus_zero_and_identity():
    rows = modulus_bound_check(np.zeros(28), 3, 3)
    assert all(r.lhs == 0 and r.rhs == 0 and r.holds for r in rows)
    b, j = 3, 4
    rows = modulus_bound_check(np.linspace(0, 1, b**j + 1), b, j)
    for r in rows:
        assert r.lhs == pytest.approx(float(b) ** -r.m, rel=1e-12)
        finite = 2 * b * b**-r.m * (1 - float(b) ** -(j - r.m + 1))
        assert r.rhs == pytest.approx(finite, rel=1e-12)
        assert r.holds and r.rhs <= 2 * b * b**-r.m


def test_modulus_uses_absolute_increments():
    rows = modulus_bound_check(-np.linspace(0, 1, 28), 3, 3)
    assert all(r.holds and r.rhs > 0 for r in rows)


@pytest.mark.parametrize("seed", range(20))
def test_modulus_inequality_on_sampled_paths(seed):
    b, j = (2, 10) if seed % 2 else (3, 6)
    p = consistent_measure(b, j, j + 3, XiField(b, j + 3, seed=seed))
    assert all(r.holds for r in modulus_bound_check(integrate_path(p), b, j))
    x = marginal_increments_batch(b, j, CounterRNG(seed), 1)[0]
    assert all(r.holds for r in modulus_bound_check(integrate_path(x), b, j))


# -- spectrum ------------------------------------------------------------------------------------------

def _finite_n_dim(alpha, eps, n, b):
    """log_b of the expected bin count over n: S(w)/n is N(0, 1/n) for each word."""
    sd = 1 / math.sqrt(n)
    p = special.ndtr((alpha + eps) / sd) - special.ndtr((alpha - eps) / sd)
    return 1 + math.log(p) / (n * math.log(b))


def test_spectrum_zero_bin_matches_finite_n_oracle(walk16):
    spec = coarse_spectrum(walk16, 2, 16)
    oracle = _finite_n_dim(0.0, 0.1, 16, 2)
    assert oracle == pytest.approx(0.8946, abs=1e-3)
    assert abs(spec.at(0.0) - oracle) < 0.01


def test_spectrum_populated_bins_match_oracle(walk16):
    spec = coarse_spectrum(walk16, 2, 16)
    for a, count, d in zip(spec.centers, spec.counts, spec.dim_est):
        # tree correlation makes sparse bins noisy, so only dense ones are compared
        if count >= 1000:
            assert abs(d - _finite_n_dim(a, 0.1, 16, 2)) < 0.05, a


def test_spectrum_outer_bins_and_symmetry(walk16):
    spec = coarse_spectrum(walk16, 2, 16)
    d = spec.dim_est
    outer = np.abs(spec.centers) > math.sqrt(2 * math.log(2))
    assert np.all((spec.counts[outer] == 0) | (d[outer] <= 0.1))
    assert np.all(np.isnan(d[spec.counts == 0]))
    pop = spec.counts >= 100
    for i in np.flatnonzero(pop):
        mirror = spec.centers.size - 1 - i
        assert abs(d[i] - d[mirror]) < 0.05


def test_spectrum_range_and_rows(walk16):
    spec = coarse_spectrum(walk16, 2, 16)
    pop = spec.populated()
    assert np.all((spec.dim_est[pop] >= 0) & (spec.dim_est[pop] <= 1))
    row = spec.rows()[14]
    assert row[0] == 0.0 and row[3] == 1.0
    assert spec.dim_theory[0] == pytest.approx(1 - 1.96 / (2 * math.log(2)))


def test_spectrum_increment_input_matches_walk():
    b, n = 2, 12
    f = XiField(b, n + 6, seed=3)
    p = consistent_measure(b, n, n + 6, f)
    via_inc = coarse_spectrum(p.increments, b, n, kind="increment")
    ratio = p.increments * b**n / (n * math.sqrt(b - 1))
    direct = coarse_spectrum(ratio * n, b, n)
    assert np.array_equal(via_inc.counts, direct.counts)


def test_white_noise_negative_control(walk16):
    noise = CounterRNG(4).normal(2**16)
    spec = coarse_spectrum(noise, 2, 16)
    tree = coarse_spectrum(walk16, 2, 16)
    far = np.abs(spec.centers) >= 0.5
    assert np.all(spec.counts[far] == 0)
    assert np.all(tree.counts[far & (np.abs(tree.centers) <= 0.8)] > 0)
    # i.i.d. N(0,1) values: a hit at zero needs |x| < eps * n
    p = special.ndtr(1.6) - special.ndtr(-1.6)
    assert spec.at(0.0) == pytest.approx(1 + math.log2(p) / 16, abs=0.002)


def test_spectrum_errors():
    with pytest.raises(InputError):
        coarse_spectrum(np.zeros(10), 2, 4)
    with pytest.raises(InputError):
        coarse_spectrum(np.zeros(16), 2, 4, kind="bogus")


# -- partition function and Legendre bound ---------------------------------------------------------------

def test_beta_at_zero_exact(walk16):
    beta = partition_beta(walk16, 2, 16, [0.0, 0.5])
    assert beta[0] == -1.0


def test_beta_against_logsumexp_oracle(walk16):
    q = np.array([-1.5, -0.3, 0.7, 2.0])
    oracle = [-special.logsumexp(x * walk16) / (16 * math.log(2)) for x in q]
    assert np.allclose(partition_beta(walk16, 2, 16, q), oracle, rtol=1e-12)


def test_beta_no_overflow():
    s = np.linspace(-1e4, 1e4, 2**10)
    beta = partition_beta(s, 2, 10, [-3.0, 3.0])
    assert np.all(np.isfinite(beta))


def test_beta_concave_and_above_curve(walk16):
    beta = partition_beta(walk16, 2, 16, DEFAULT_Q)
    assert concavity_defect(beta) <= 1e-9
    mask = np.abs(DEFAULT_Q) <= 1 + 1e-12
    assert np.all(beta[mask] >= beta_lower_curve(DEFAULT_Q[mask], 2) - 0.05)


def test_legendre_of_quadratic():
    q = np.linspace(-3, 3, 60001)
    for b in (2, 3):
        beta = beta_lower_curve(q, b)
        for a in (-1.0, -0.4, 0.0, 0.3, 1.1):
            expected = 1 - a * a / (2 * math.log(b))
            assert legendre_upper(q, beta, a, b) == pytest.approx(expected, abs=1e-8)
            # attained at q = alpha
            vals = -a * q / math.log(b) - beta
            assert q[np.argmin(vals)] == pytest.approx(a, abs=1e-4)
    assert legendre_upper(q, beta_lower_curve(q, 2), 0.0, 2) == pytest.approx(1.0)


def test_legendre_dominates_well_populated_bins(walk16):
    spec = coarse_spectrum(walk16, 2, 16)
    pop = spec.counts >= 50
    assert np.all(spec.dim_est[pop] <= spec.legendre[pop] + 0.05)


# -- Zygmund statistic ------------------------------------------------------------------------------------

def test_zygmund_smooth_functions():
    t = np.linspace(0, 1, 2**10 + 1)
    assert all(r.stat == pytest.approx(0, abs=1e-12) for r in zygmund_stat(t, 2, range(1, 11)))
    rows = zygmund_stat(t * t, 2, range(2, 11))
    assert all(r.stat == pytest.approx(2 * r.h, rel=1e-9) for r in rows)


def test_zygmund_errors():
    with pytest.raises(InputError):
        zygmund_stat(np.zeros(2**4 + 1), 2, [5])
    with pytest.raises(InputError):
        zygmund_stat(np.zeros(10), 2, [1])


def test_zygmund_lil_column():
    rows = zygmund_stat(np.linspace(0, 1, 3**5 + 1) ** 3, 3, [1, 2, 3, 5])
    assert math.isnan(rows[0].lil) and math.isnan(rows[1].lil)
    assert rows[2].lil == pytest.approx(rows[2].stat / math.sqrt(6 * math.log(math.log(3))))


def test_zygmund_trend_grows_with_depth():
    def max_stat(seed, depth):
        x = integrate_path(zygmund_path(2, 14, seed))
        return max(r.stat for r in zygmund_stat(x, 2, range(1, depth + 1)))

    shallow = np.median([max_stat(s, 8) for s in range(100)])
    deep = np.median([max_stat(s, 14) for s in range(100)])
    assert deep > shallow
