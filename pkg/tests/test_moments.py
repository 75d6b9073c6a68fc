import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascade_lab.errors import DivergenceError, DomainError, InputError
from cascade_lab.moments import (Domain, DomainBounds, classify_domain, domain_violations,
                                 iterate_moments, lindeberg_bound, rn_squared, sigma_closed_form,
                                 sigma_iterate, sigma_limit, t1_variance_bound, t1_variance_bounds,
                                 third_moment_bounds, third_moment_rhs, w2_bound, w3_bound)


def test_w2_values():
    assert w2_bound(3) == pytest.approx(219 / 121, rel=1e-15)
    assert w2_bound(4) == pytest.approx(928 / 340, rel=1e-15)
    for b in range(3, 40):
        assert w2_bound(b) <= b - 1


def test_w2_rejects_small_base():
    with pytest.raises(DomainError):
        w2_bound(2)


def test_w3_values():
    assert w3_bound(3, 1.5) == 7.0
    assert w3_bound(3, 1 + 1e-12) == pytest.approx(8.0, abs=1e-9)
    # direct evaluation of the defining expression
    t = 1.49
    expected = 4.5 + 0.5 * math.sqrt((219 - t * 121) / (3 - t))
    assert w3_bound(3, t) == pytest.approx(expected, rel=1e-15)
    assert w3_bound(3, t) == pytest.approx(7.0316, abs=5e-5)


def test_w3_domain():
    with pytest.raises(DomainError):
        w3_bound(3, 1.0)
    with pytest.raises(DomainError):
        w3_bound(3, 1.85)


@pytest.mark.parametrize("b", [3, 4, 5, 8])
def test_w3_below_b2_minus_1(b):
    bounds = DomainBounds(b)
    for t in np.linspace(1 + 1e-9, bounds.w2 - 1e-9, 200):
        assert bounds.w3_at(t) < b * b - 1 + 1e-9


def test_classify_examples():
    assert classify_domain(3, 1, 1.49, 2.47) is Domain.IN_D_B
    assert classify_domain(3, 1, 1.9, 4.0) is Domain.IN_P_B_ONLY
    assert classify_domain(3, 1, 1.0, 1.0) is Domain.OUTSIDE
    assert classify_domain(3, 1, 2.5, 7.0) is Domain.OUTSIDE


def test_classify_rejects_inconsistent_moments():
    with pytest.raises(InputError):
        classify_domain(3, 1, 1.5, 2.0)  # m3 < m2^2
    with pytest.raises(InputError):
        classify_domain(3, 1, 0.9, 1.0)
    with pytest.raises(InputError):
        classify_domain(3, 1.1, 1.2, 2.0)


def test_domain_violation_messages():
    assert domain_violations(3, 1.49, 2.47) == []
    msgs = domain_violations(3, math.e, math.exp(3))
    assert any("b-1" in m for m in msgs)


def test_iterate_examples():
    t = iterate_moments(3, 1.49, 2.47, 1)
    assert t.u[1] == pytest.approx(2 / 1.51, rel=1e-15)
    assert t.v[1] == pytest.approx(2 * (3 * 1.49 * (2 / 1.51) + 1) / (9 - 2.47), rel=1e-15)
    assert t.v[1] == pytest.approx(2.119611, abs=1e-6)
    t = iterate_moments(3, 1.0, 1.0, 10)
    assert np.all(t.u == 1) and np.all(t.v == 1)
    t = iterate_moments(3, 1.49, 2.47, 100)
    assert abs(t.u[100] - 1) < 1e-12 and abs(t.v[100] - 1) < 1e-12


def test_iterate_divergence_reports_step():
    with pytest.raises(DivergenceError) as info:
        iterate_moments(3, 2.9, 8.5, 10)
    assert info.value.step >= 0
    with pytest.raises(DomainError):
        iterate_moments(3, 3.5, 2.0, 3)


def test_trajectory_rows_header_order():
    rows = iterate_moments(3, 1.49, 2.47, 2).rows()
    assert rows[0][0] == 0 and rows[0][1] == 1.49 and rows[0][2] == 2.47
    assert rows[0][3] == pytest.approx(0.49)
    assert rows[1][4] == pytest.approx(math.sqrt(2) * math.sqrt(rows[1][3]))


@given(st.integers(3, 8), st.floats(0.01, 0.98), st.integers(0, 200))
@settings(max_examples=60)
def test_closed_form_matches_iteration(b, frac, n):
    s0 = frac * (b - 2)
    it = sigma_iterate(b, s0, n)[n]
    cf = sigma_closed_form(b, s0, n)
    assert cf == pytest.approx(it, rel=1e-13, abs=1e-300)


def test_sigma_examples():
    assert sigma_closed_form(3, 0.5, 1) == pytest.approx(1 / 3, rel=1e-15)
    assert sigma_closed_form(3, 0.5, 0) == 0.5
    assert abs(2.0**60 * sigma_closed_form(3, 0.5, 60) - 1) < 1e-12
    assert sigma_limit(3, 0.5) == 1.0
    assert sigma_limit(4, 1.0) == pytest.approx(math.sqrt(2), rel=1e-15)
    assert sigma_limit(3, 1e-12) == pytest.approx(1e-6, rel=1e-9)
    s = sigma_closed_form(3, 0.5, 60)
    assert abs(2.0**30 * math.sqrt(s) - sigma_limit(3, 0.5)) < 1e-10


def test_sigma_domain():
    with pytest.raises(DomainError):
        sigma_closed_form(3, 1.0, 3)
    with pytest.raises(DomainError):
        sigma_limit(3, 1.2)


@given(st.floats(1.01, 1.8), st.integers(1, 80))
@settings(max_examples=40)
def test_u_minus_one_is_sigma(u0, n):
    t = iterate_moments(3, u0, u0 * u0 + 0.1, n) if u0 * u0 + 0.1 < 9 else None
    if t is None:
        return
    assert t.sigma2[n] == pytest.approx(sigma_closed_form(3, u0 - 1, n), rel=1e-12)
    assert t.u[n] - 1 == pytest.approx(t.sigma2[n], rel=1e-10, abs=1e-14)


def test_cauchy_schwarz_preserved():
    for u0, v0 in [(1.49, 2.47), (1.2, 1.6), (1.7, 3.5)]:
        t = iterate_moments(3, u0, v0, 60)
        assert np.all(t.v >= t.u**2 - 1e-12) and np.all(t.u >= 1)


def test_in_domain_means_monotone():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(400):
        m2 = rng.uniform(1.001, 1.80)
        m3 = rng.uniform(m2 * m2, 8.0)
        if classify_domain(3, 1, m2, m3) is Domain.IN_D_B:
            t = iterate_moments(3, m2, m3, 50)
            assert np.all(np.diff(t.v[1:]) <= 1e-15) and np.all(np.diff(t.u) <= 0)
            checked += 1
    assert checked > 50


def test_first_third_moment_step_can_increase_in_domain():
    # v1 <= v0 needs v0 between both roots of v^2 - b^2 v + (b-1)(3 u0 u1 + b - 2);
    # the domain only imposes the upper one
    b, u0, v0 = 3, 1.77, 3.4845
    assert classify_domain(b, 1, u0, v0) is Domain.IN_D_B
    u1 = (b - 1) / (b - u0)
    lower_root = b * b / 2 - 0.5 * math.sqrt(b**4 - 4 * (b - 1) * (3 * u0 * u1 + b - 2))
    assert v0 < lower_root
    t = iterate_moments(b, u0, v0, 30)
    assert t.v[1] > t.v[0]
    assert np.all(np.diff(t.v[1:]) <= 0)


def test_rn_squared_examples():
    assert rn_squared(3, 0.5, 1 / 3) == pytest.approx((0.5 + (math.sqrt(1.5) - math.sqrt(2)) ** 2) / 3, rel=1e-14)
    assert rn_squared(3, 0.5, 1 / 3) == pytest.approx(0.178633, abs=1e-6)
    assert rn_squared(3, 0.5, 0.25) == pytest.approx(0.5 / 3, rel=1e-14)


def test_rn_squared_geometric_decay():
    s = sigma_iterate(3, 0.5, 61)
    scaled = [rn_squared(3, s[n - 1], s[n]) * 2.0**n for n in range(1, 61)]
    assert max(scaled) < 10 * min(scaled[5:])
    assert np.all(np.isfinite(scaled))


def _t1_oracle(b, s, n):
    r2 = lambda m: rn_squared(b, s[m - 1], s[m])
    return sum(b**-k * math.sqrt(sum(math.comb(k, j) * b**k * (b - 1) ** j * r2(n - j) for j in range(k + 1)))
               for k in range(n))


def test_t1_bound_against_loop_oracle():
    s = sigma_iterate(3, 0.5, 30)
    got = t1_variance_bounds(3, s, 30)
    for n in (1, 2, 5, 17, 30):
        assert got[n - 1] == pytest.approx(_t1_oracle(3, s, n), rel=1e-12)
    assert t1_variance_bound(3, s, 1) == pytest.approx(math.sqrt(rn_squared(3, s[0], s[1])), rel=1e-15)


def test_t1_bound_rate():
    s = sigma_iterate(3, 0.5, 41)
    t = t1_variance_bounds(3, s, 41)
    rate = 1 - 1 / 6
    scaled = [t[n - 1] * rate ** (-n / 2) for n in range(5, 41)]
    assert max(scaled) / min(scaled) < 20
    # nonincreasing from some index on
    assert np.all(np.diff(t[10:]) < 0)


def test_lindeberg_examples():
    assert lindeberg_bound(3, 3, 1, 1) == pytest.approx((2**1.5 + 1) / 9, rel=1e-15)
    assert lindeberg_bound(3, 3, 1, 1) == pytest.approx(0.425381, abs=1e-6)
    assert lindeberg_bound(3, 3, 5, 1) == pytest.approx(0.013928, abs=1e-6)
    assert lindeberg_bound(3, 3, 0, 2.5) == 2.5
    with pytest.raises(DomainError):
        lindeberg_bound(3, 2, 3, 1)


@pytest.mark.parametrize("b", [3, 4, 6, 10])
@pytest.mark.parametrize("p", [2.1, 3.0, 4.5])
def test_lindeberg_vanishes(b, p):
    assert lindeberg_bound(b, p, 400, 1.0) < 1e-6


def test_third_moment_rhs_against_expression():
    r8 = math.sqrt(8)
    expr = (14 + 3 * (2 * r8 + 6) + 3 * (2 * r8 + 4) + 8) / 8
    assert third_moment_rhs(3, 1.0, 0.0, 1.0) == pytest.approx(expr, rel=1e-14)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(1.0, 8.9), st.floats(0.1, 3))
def test_third_moment_rhs_monotone(z1, z2, m3, r):
    lo, hi = sorted((z1, z2))
    assert third_moment_rhs(3, m3, lo, r) <= third_moment_rhs(3, m3, hi, r)


def test_third_moment_rhs_domain():
    with pytest.raises(DomainError):
        third_moment_rhs(3, 9.0, 1.0, 1.0)


def test_third_moment_sequence_bounded():
    z = third_moment_bounds(3, 1.49, 2.47, 200, z0=10.0)
    assert np.all(np.isfinite(z))
    assert np.max(z) < 200
    assert abs(z[-1] - z[-2]) < 1e-6 * z[-1]
