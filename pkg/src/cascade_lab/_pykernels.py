"""Numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Integer hashing and the order of floating point operations match the
compiled version, so both backends produce bit-identical results for the
laws that do not go through ``log``/``exp`` (Dirac, two-point, uniform,
pool resampling). Normal variates may differ in the last ulp because the
libm and numpy logarithms are not required to agree.
"""

import numpy as np

NAME = "python"

GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_TWO_M53 = 2.0**-53

# elements per temporary block when a kernel has to materialise a tree level
_CHUNK = 1 << 21

# Wichura (1988), algorithm AS241 PPND16: rational approximations of the
# standard normal quantile, relative accuracy about 1e-16.
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
      21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
      5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459,
      0.0151986665636164571966, 5.475938084995344946e-4,
      1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093,
      0.0012426609473880784386, 2.71155556874348757815e-5,
      2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4,
      1.8463183175100546818e-5, 1.4215117583164458887e-7,
      2.04426310338993978564e-15)


def mix64(z):
    """SplitMix64 finaliser on an array of uint64 (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _counter_hash(start, count):
    ctr = np.arange(count, dtype=np.uint64) + np.uint64(start + 1)
    with np.errstate(over="ignore"):
        return mix64(ctr * np.uint64(GOLDEN))


def _horner(coef, r):
    acc = coef[7]
    for c in coef[6::-1]:
        acc = acc * r + c
    return acc


def ndtri(p):
    """Standard normal quantile of *p* in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if central.any():
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def uniform_block(keys, start, count):
    """Uniforms in (0, 1) for counters ``start .. start+count-1`` of each key."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
    inner = _counter_hash(start, count)
    bits = mix64(inner[None, :] ^ keys[:, None])
    return ((bits >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def normal_block(keys, start, count):
    u = uniform_block(keys, start, count)
    return ndtri(u.ravel()).reshape(u.shape)


def normal_block_sum(keys, start, count):
    """Row sums of :func:`normal_block` without holding the whole block."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
    total = np.zeros(keys.size)
    step = max(1, _CHUNK // max(1, keys.size))
    for s in range(0, count, step):
        c = min(step, count - s)
        total += normal_block(keys, start + s, c).sum(axis=1)
    return total


def law_values(code, param, u, pool):
    """Map uniforms to draws of a unit-mean weight law (codes as in ``laws``)."""
    if code == 0:
        return np.ones_like(u)
    if code == 1:
        return np.where(u < 0.5, 1.0 - param, 1.0 + param)
    if code == 2:
        return (1.0 - param) + (2.0 * param) * u
    if code == 3:
        half = 0.5 * param * param
        return np.exp(param * ndtri(u.ravel()).reshape(u.shape) - half)
    if code == 4:
        idx = (u * pool.shape[0]).astype(np.int64)
        return pool[idx]
    raise ValueError(f"unknown law code {code}")


def law_block(keys, start, count, code, param, pool):
    return law_values(code, param, uniform_block(keys, start, count), pool)


def pool_round(key_w, key_y, start, count, b, code, param, wpool, prev):
    """Entries ``start .. start+count-1`` of one smoothing-transform round.

    Entry i is ``(sum_j W(i, j) * prev[I(i, j)]) / b`` with the weight and
    resampling index both read at counter ``i * b + j``.
    """
    kw = np.array([key_w], dtype=np.uint64)
    ky = np.array([key_y], dtype=np.uint64)
    w = law_block(kw, start * b, count * b, code, param, wpool).reshape(count, b)
    uy = uniform_block(ky, start * b, count * b).reshape(count, b)
    y = prev[(uy * prev.shape[0]).astype(np.int64)]
    acc = np.zeros(count)
    for j in range(b):
        acc = acc + w[:, j] * y[:, j]
    return acc / b


def _replica_chunks(n_rep, width):
    step = max(1, _CHUNK // max(1, width))
    for s in range(0, n_rep, step):
        yield s, min(n_rep, s + step)


def tree_mean(wkeys, b, code, param, wpool):
    """Normalised tree sum ``b^-n sum_w prod_k W(w|k)`` per replica.

    ``wkeys`` has shape (R, n): one stream key per replica and tree level.
    Evaluated bottom-up as ``Y(w) = (sum_l W(wl) Y(wl)) / b``.
    """
    wkeys = np.ascontiguousarray(wkeys, dtype=np.uint64)
    n_rep, n = wkeys.shape
    out = np.empty(n_rep)
    for s, e in _replica_chunks(n_rep, b**n):
        y = np.ones((e - s, b**n))
        for k in range(n, 0, -1):
            w = law_block(wkeys[s:e, k - 1], 0, b**k, code, param, wpool)
            wv = w.reshape(e - s, b ** (k - 1), b)
            yv = y.reshape(e - s, b ** (k - 1), b)
            acc = np.zeros((e - s, b ** (k - 1)))
            for j in range(b):
                acc = acc + wv[:, :, j] * yv[:, :, j]
            y = acc / b
        out[s:e] = y[:, 0]
    return out


def cascade_increments(wkeys, lkeys, b, code, param, wpool, lpool, scale):
    """Increments ``((prod_k W(w|k)) * Y(w)) * scale`` over all depth-j words.

    ``wkeys`` (R, j) keys the interior weights per level, ``lkeys`` (R,) the
    leaf draws resampled from ``lpool``.
    """
    wkeys = np.ascontiguousarray(wkeys, dtype=np.uint64)
    lkeys = np.ascontiguousarray(lkeys, dtype=np.uint64).reshape(-1)
    n_rep, j = wkeys.shape
    width = b**j
    out = np.empty((n_rep, width))
    for s, e in _replica_chunks(n_rep, width):
        prod = np.ones((e - s, 1))
        for k in range(1, j + 1):
            w = law_block(wkeys[s:e, k - 1], 0, b**k, code, param, wpool)
            prod = np.repeat(prod, b, axis=1) * w
        leaves = law_block(lkeys[s:e], 0, width, 4, 0.0, lpool)
        out[s:e] = (prod * leaves) * scale
    return out
