# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Keep the arithmetic in step with the numpy module: same hash, same
operation order, no fast-math.
"""

import numpy as np

from libc.math cimport exp, log, sqrt
from libc.stdint cimport int64_t, uint64_t

NAME = "compiled"

cdef uint64_t GOLDEN_C = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.1102230246251565e-16

cdef double A[8]
cdef double B[8]
cdef double C[8]
cdef double D[8]
cdef double E[8]
cdef double F[8]
A[:] = [3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
        13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
        33430.575583588128105, 2509.0809287301226727]
B[:] = [1.0, 42.313330701600911252, 687.1870074920579083, 5394.1960214247511077,
        21213.794301586595867, 39307.89580009271061, 28729.085735721942674,
        5226.495278852545925]
C[:] = [1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
        3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
        0.0227238449892691845833, 7.7454501427834140764e-4]
D[:] = [1.0, 2.05319162663775882187, 1.6763848301838038494,
        0.68976733498510000455, 0.14810397642748007459,
        0.0151986665636164571966, 5.475938084995344946e-4,
        1.05075007164441684324e-9]
E[:] = [6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
        0.29656057182850489123, 0.026532189526576123093,
        0.0012426609473880784386, 2.71155556874348757815e-5,
        2.01033439929228813265e-7]
F[:] = [1.0, 0.59983220655588793769, 0.13692988092273580531,
        0.0148753612908506148525, 7.868691311456132591e-4,
        1.8463183175100546818e-5, 1.4215117583164458887e-7,
        2.04426310338993978564e-15]


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _unit(uint64_t key, uint64_t ctr) noexcept nogil:
    cdef uint64_t bits = _mix64(_mix64((ctr + 1) * GOLDEN_C) ^ key)
    return (<double>(bits >> 11) + 0.5) * TWO_M53


cdef inline double _horner(const double *c, double r) noexcept nogil:
    cdef double acc = c[7]
    cdef int i
    for i in range(6, -1, -1):
        acc = acc * r + c[i]
    return acc


cdef inline double _ndtri(double p) noexcept nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if (q if q >= 0.0 else -q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(A, r) / _horner(B, r)
    r = p if q < 0.0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        val = _horner(C, r) / _horner(D, r)
    else:
        r = r - 5.0
        val = _horner(E, r) / _horner(F, r)
    return -val if q < 0.0 else val


cdef inline double _law(int code, double param, double half, double u,
                        const double[::1] pool) noexcept nogil:
    if code == 0:
        return 1.0
    if code == 1:
        return 1.0 - param if u < 0.5 else 1.0 + param
    if code == 2:
        return (1.0 - param) + (2.0 * param) * u
    if code == 3:
        return exp(param * _ndtri(u) - half)
    return pool[<Py_ssize_t>(u * pool.shape[0])]


def _check_code(int code):
    if code < 0 or code > 4:
        raise ValueError(f"unknown law code {code}")


def _empty_pool():
    return np.ones(1)


def mix64(z):
    cdef const uint64_t[::1] zin = np.ascontiguousarray(np.asarray(z, dtype=np.uint64).reshape(-1))
    out = np.empty(zin.shape[0], dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t i
    for i in range(zin.shape[0]):
        o[i] = _mix64(zin[i])
    return out.reshape(np.shape(z))


def ndtri(p):
    arr = np.ascontiguousarray(np.asarray(p, dtype=np.float64))
    cdef const double[::1] pin = arr.reshape(-1)
    out = np.empty(pin.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(pin.shape[0]):
        o[i] = _ndtri(pin[i])
    return out.reshape(arr.shape)


def uniform_block(keys, int64_t start, Py_ssize_t count):
    cdef const uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
    out = np.empty((k.shape[0], count))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, i
    with nogil:
        for r in range(k.shape[0]):
            for i in range(count):
                o[r, i] = _unit(k[r], <uint64_t>(start + i))
    return out


def normal_block(keys, int64_t start, Py_ssize_t count):
    cdef const uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
    out = np.empty((k.shape[0], count))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, i
    with nogil:
        for r in range(k.shape[0]):
            for i in range(count):
                o[r, i] = _ndtri(_unit(k[r], <uint64_t>(start + i)))
    return out


def normal_block_sum(keys, int64_t start, Py_ssize_t count):
    cdef const uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
    out = np.empty(k.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t r, i
    cdef double acc
    with nogil:
        for r in range(k.shape[0]):
            acc = 0.0
            for i in range(count):
                acc = acc + _ndtri(_unit(k[r], <uint64_t>(start + i)))
            o[r] = acc
    return out


def law_block(keys, int64_t start, Py_ssize_t count, int code, double param, pool):
    _check_code(code)
    cdef const uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64).reshape(-1)
    cdef const double[::1] pl = np.ascontiguousarray(pool if pool is not None else _empty_pool(), dtype=np.float64)
    cdef double half = 0.5 * param * param
    out = np.empty((k.shape[0], count))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, i
    with nogil:
        for r in range(k.shape[0]):
            for i in range(count):
                o[r, i] = _law(code, param, half, _unit(k[r], <uint64_t>(start + i)), pl)
    return out


def pool_round(uint64_t key_w, uint64_t key_y, int64_t start, Py_ssize_t count,
               int b, int code, double param, wpool, prev):
    _check_code(code)
    cdef const double[::1] wp = np.ascontiguousarray(wpool if wpool is not None else _empty_pool(), dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(prev, dtype=np.float64)
    cdef double half = 0.5 * param * param
    cdef Py_ssize_t n_prev = pv.shape[0]
    out = np.empty(count)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef uint64_t c
    cdef double acc, w, y
    with nogil:
        for i in range(count):
            acc = 0.0
            for j in range(b):
                c = <uint64_t>((start + i) * b + j)
                w = _law(code, param, half, _unit(key_w, c), wp)
                y = pv[<Py_ssize_t>(_unit(key_y, c) * n_prev)]
                acc = acc + w * y
            o[i] = acc / b
    return out


def tree_mean(wkeys, int b, int code, double param, wpool):
    _check_code(code)
    cdef const uint64_t[:, ::1] wk = np.ascontiguousarray(wkeys, dtype=np.uint64)
    cdef const double[::1] wp = np.ascontiguousarray(wpool if wpool is not None else _empty_pool(), dtype=np.float64)
    cdef double half = 0.5 * param * param
    cdef Py_ssize_t n_rep = wk.shape[0]
    cdef int n = wk.shape[1]
    cdef Py_ssize_t width = b ** n
    buf = np.empty(width)
    out = np.empty(n_rep)
    cdef double[::1] y = buf
    cdef double[::1] o = out
    cdef Py_ssize_t r, i, j, parents
    cdef int k
    cdef uint64_t key
    cdef double acc
    with nogil:
        for r in range(n_rep):
            for i in range(width):
                y[i] = 1.0
            parents = width
            for k in range(n, 0, -1):
                parents = parents // b
                key = wk[r, k - 1]
                for i in range(parents):
                    acc = 0.0
                    for j in range(b):
                        acc = acc + _law(code, param, half, _unit(key, <uint64_t>(i * b + j)), wp) * y[i * b + j]
                    y[i] = acc / b
            o[r] = y[0]
    return out


def cascade_increments(wkeys, lkeys, int b, int code, double param, wpool, lpool, double scale):
    _check_code(code)
    cdef const uint64_t[:, ::1] wk = np.ascontiguousarray(wkeys, dtype=np.uint64)
    cdef const uint64_t[::1] lk = np.ascontiguousarray(lkeys, dtype=np.uint64).reshape(-1)
    cdef const double[::1] wp = np.ascontiguousarray(wpool if wpool is not None else _empty_pool(), dtype=np.float64)
    cdef const double[::1] lp = np.ascontiguousarray(lpool, dtype=np.float64)
    cdef double half = 0.5 * param * param
    cdef Py_ssize_t n_rep = wk.shape[0]
    cdef int j = wk.shape[1]
    cdef Py_ssize_t width = b ** j
    out = np.empty((n_rep, width))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, i, size
    cdef int k
    cdef uint64_t key
    cdef Py_ssize_t n_leaf = lp.shape[0]
    cdef double leaf
    with nogil:
        for r in range(n_rep):
            o[r, 0] = 1.0
            size = 1
            for k in range(1, j + 1):
                size = size * b
                key = wk[r, k - 1]
                # descending so o[r, i // b] still holds the parent product
                for i in range(size - 1, -1, -1):
                    o[r, i] = o[r, i // b] * _law(code, param, half, _unit(key, <uint64_t>i), wp)
            for i in range(width):
                leaf = lp[<Py_ssize_t>(_unit(lk[r], <uint64_t>i) * n_leaf)]
                o[r, i] = (o[r, i] * leaf) * scale
    return out
