# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the Clebsch-Gordan and D-operator assembly loops."""

import numpy as np
cimport numpy as cnp
from libc.math cimport lgamma, exp, log, sqrt

cnp.import_array()


cdef inline int _iabs(int x) nogil:
    return -x if x < 0 else x


cdef double _cg(int tj1, int tm1, int tj2, int tm2, int tJ, int tM) nogil:
    cdef int a, b, c, k, kmin, kmax
    cdef double log_pref, log_den, total, term
    if tm1 + tm2 != tM:
        return 0.0
    if tJ < _iabs(tj1 - tj2) or tJ > tj1 + tj2 or (tj1 + tj2 + tJ) % 2 != 0:
        return 0.0
    if _iabs(tm1) > tj1 or _iabs(tm2) > tj2 or _iabs(tM) > tJ:
        return 0.0
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tj2 + tJ) // 2
    c = (-tj1 + tj2 + tJ) // 2
    log_pref = 0.5 * (
        log(<double>(tJ + 1)) + lgamma(a + 1) + lgamma(b + 1) + lgamma(c + 1)
        - lgamma((tj1 + tj2 + tJ) // 2 + 2)
        + lgamma((tJ + tM) // 2 + 1) + lgamma((tJ - tM) // 2 + 1)
        + lgamma((tj1 - tm1) // 2 + 1) + lgamma((tj1 + tm1) // 2 + 1)
        + lgamma((tj2 - tm2) // 2 + 1) + lgamma((tj2 + tm2) // 2 + 1)
    )
    kmin = 0
    if (tj2 - tJ - tm1) // 2 > kmin:
        kmin = (tj2 - tJ - tm1) // 2
    if (tj1 - tJ + tm2) // 2 > kmin:
        kmin = (tj1 - tJ + tm2) // 2
    kmax = a
    if (tj1 - tm1) // 2 < kmax:
        kmax = (tj1 - tm1) // 2
    if (tj2 + tm2) // 2 < kmax:
        kmax = (tj2 + tm2) // 2
    total = 0.0
    for k in range(kmin, kmax + 1):
        log_den = (
            lgamma(k + 1) + lgamma(a - k + 1) + lgamma((tj1 - tm1) // 2 - k + 1)
            + lgamma((tj2 + tm2) // 2 - k + 1) + lgamma((tJ - tj2 + tm1) // 2 + k + 1)
            + lgamma((tJ - tj1 - tm2) // 2 + k + 1)
        )
        term = exp(log_pref - log_den)
        if k % 2:
            total -= term
        else:
            total += term
    return total


def cg_float(int tj1, int tm1, int tj2, int tm2, int tJ, int tM):
    """Clebsch-Gordan coefficient in double precision, twice-valued arguments."""
    return _cg(tj1, tm1, tj2, tm2, tJ, tM)


def state_keys(tJ, tmJ, tkJ, tkS, long base):
    off = base // 2
    return ((np.asarray(tJ, dtype=np.int64) * base + (np.asarray(tmJ) + off)) * base
            + (np.asarray(tkJ) + off)) * base + (np.asarray(tkS) + off)


cdef Py_ssize_t _search(const cnp.int64_t[:] keys, cnp.int64_t key) nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0] - 1, mid
    while lo <= hi:
        mid = (lo + hi) // 2
        if keys[mid] == key:
            return mid
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid - 1
    return -1


def d_operator_entries(const cnp.int64_t[:] keys, tJ, tmJ, tkJ, tkS,
                       int tj, int tm, int tk, long base):
    cdef const cnp.int64_t[:] vJ = np.ascontiguousarray(tJ, dtype=np.int64)
    cdef const cnp.int64_t[:] vm = np.ascontiguousarray(tmJ, dtype=np.int64)
    cdef const cnp.int64_t[:] vk = np.ascontiguousarray(tkJ, dtype=np.int64)
    cdef const cnp.int64_t[:] vs = np.ascontiguousarray(tkS, dtype=np.int64)
    cdef Py_ssize_t n = vJ.shape[0]
    cdef Py_ssize_t cap = n * (tj + 1)
    rows_a = np.empty(cap, dtype=np.int64)
    cols_a = np.empty(cap, dtype=np.int64)
    vals_a = np.empty(cap, dtype=np.float64)
    cdef cnp.int64_t[:] rows = rows_a
    cdef cnp.int64_t[:] cols = cols_a
    cdef double[:] vals = vals_a
    cdef Py_ssize_t c, r, count = 0
    cdef int J2, m2, k2, s2, mp, kp, Jp
    cdef long off = base // 2
    cdef cnp.int64_t key
    cdef double v
    with nogil:
        for c in range(n):
            J2 = <int>vJ[c]
            m2 = <int>vm[c]
            k2 = <int>vk[c]
            s2 = <int>vs[c]
            mp = m2 + tm
            kp = k2 + tk
            Jp = _iabs(J2 - tj)
            while Jp <= J2 + tj:
                if _iabs(mp) <= Jp and _iabs(kp) <= Jp:
                    key = ((<cnp.int64_t>Jp * base + mp + off) * base + kp + off) * base + s2 + off
                    r = _search(keys, key)
                    if r >= 0:
                        v = sqrt((J2 + 1.0) / (Jp + 1.0)) * _cg(tj, tm, J2, m2, Jp, mp) * _cg(tj, tk, J2, k2, Jp, kp)
                        if v != 0.0:
                            rows[count] = r
                            cols[count] = c
                            vals[count] = v
                            count += 1
                Jp += 2
    return rows_a[:count].copy(), cols_a[:count].copy(), vals_a[:count].copy()
