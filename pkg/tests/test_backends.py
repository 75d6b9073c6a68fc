"""The compiled and numpy kernels must agree, bit for bit where promised."""

import numpy as np
import pytest

from cascade_lab import _backend, _pykernels
from cascade_lab.laws import LOGNORMAL, POOL, TWO_POINT, UNIFORM
from cascade_lab.rng import CounterRNG

compiled = pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")


def _keys(n, seed=1):
    return CounterRNG(seed).child_keys(0, np.arange(n))


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        _backend.set_backend("gpu")


def test_python_backend_always_available():
    assert "python" in _backend.available()


@compiled
def test_uniform_and_law_blocks_identical():
    from cascade_lab import _ckernels as ck

    keys = _keys(7)
    assert np.array_equal(ck.uniform_block(keys, 5, 300), _pykernels.uniform_block(keys, 5, 300))
    pool = np.linspace(0.5, 1.5, 1001)
    for code, param in [(TWO_POINT, 0.7), (UNIFORM, 0.4), (POOL, 0.0)]:
        a = ck.law_block(keys, 0, 200, code, param, pool)
        b = _pykernels.law_block(keys, 0, 200, code, param, pool)
        assert np.array_equal(a, b)
    a = ck.law_block(keys, 0, 200, LOGNORMAL, 0.5, None)
    b = _pykernels.law_block(keys, 0, 200, LOGNORMAL, 0.5, None)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


@compiled
def test_normals_agree():
    from cascade_lab import _ckernels as ck

    keys = _keys(3)
    a, b = ck.normal_block(keys, 0, 10_000), _pykernels.normal_block(keys, 0, 10_000)
    assert np.max(np.abs(a - b)) < 1e-13
    assert np.allclose(ck.normal_block_sum(keys, 10, 5000), b[:, 10:5010].sum(axis=1), rtol=1e-12, atol=1e-10)


@compiled
def test_tree_kernels_identical():
    from cascade_lab import _ckernels as ck

    wkeys = np.ascontiguousarray(CounterRNG(2).child_keys(0, np.arange(24)).reshape(6, 4))
    lkeys = _keys(6, 3)
    lpool = np.linspace(0.2, 1.8, 999)
    for code, param, wpool in [(TWO_POINT, 0.7, None), (UNIFORM, 0.9, None), (POOL, 0.0, lpool)]:
        assert np.array_equal(ck.tree_mean(wkeys, 3, code, param, wpool),
                              _pykernels.tree_mean(wkeys, 3, code, param, wpool))
        assert np.array_equal(ck.cascade_increments(wkeys, lkeys, 3, code, param, wpool, lpool, 3.0**-4),
                              _pykernels.cascade_increments(wkeys, lkeys, 3, code, param, wpool, lpool, 3.0**-4))
    prev = np.linspace(0.5, 1.5, 2000)
    assert np.array_equal(ck.pool_round(11, 12, 100, 500, 3, TWO_POINT, 0.7, None, prev),
                          _pykernels.pool_round(11, 12, 100, 500, 3, TWO_POINT, 0.7, None, prev))


def test_tree_mean_brute_force(backend):
    """Recompute the normalized tree sum by explicit enumeration of words."""
    from itertools import product

    ker = _backend.kernels()
    b, n = 3, 3
    wkeys = np.ascontiguousarray(CounterRNG(4).child_keys(0, np.arange(n)).reshape(1, n))
    total = 0.0
    weights = [ker.law_block(wkeys[:, d - 1], 0, b**d, TWO_POINT, 0.7, None)[0] for d in range(1, n + 1)]
    for digits in product(range(b), repeat=n):
        prod, rank = 1.0, 0
        for d, x in enumerate(digits, 1):
            rank = rank * b + x
            prod *= weights[d - 1][rank]
        total += prod
    assert ker.tree_mean(wkeys, b, TWO_POINT, 0.7, None)[0] == pytest.approx(total / b**n, rel=1e-13)
