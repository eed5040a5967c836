"""Pure-Python versions of the hot loops in ``_ckernels.pyx``.

Same signatures and results as the compiled module; used when the extension
is not built or when ``MAGROTOR_PURE_PYTHON=1``.
"""

import math

import numpy as np


def cg_float(tj1, tm1, tj2, tm2, tJ, tM):
    """Clebsch-Gordan coefficient in double precision, twice-valued arguments."""
    if tm1 + tm2 != tM:
        return 0.0
    if tJ < abs(tj1 - tj2) or tJ > tj1 + tj2 or (tj1 + tj2 + tJ) % 2:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0.0
    lg = math.lgamma
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tj2 + tJ) // 2
    c = (-tj1 + tj2 + tJ) // 2
    log_pref = 0.5 * (
        math.log(tJ + 1) + lg(a + 1) + lg(b + 1) + lg(c + 1) - lg((tj1 + tj2 + tJ) // 2 + 2)
        + lg((tJ + tM) // 2 + 1) + lg((tJ - tM) // 2 + 1)
        + lg((tj1 - tm1) // 2 + 1) + lg((tj1 + tm1) // 2 + 1)
        + lg((tj2 - tm2) // 2 + 1) + lg((tj2 + tm2) // 2 + 1)
    )
    kmin = max(0, (tj2 - tJ - tm1) // 2, (tj1 - tJ + tm2) // 2)
    kmax = min(a, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = 0.0
    for k in range(kmin, kmax + 1):
        log_den = (
            lg(k + 1) + lg(a - k + 1) + lg((tj1 - tm1) // 2 - k + 1) + lg((tj2 + tm2) // 2 - k + 1)
            + lg((tJ - tj2 + tm1) // 2 + k + 1) + lg((tJ - tj1 - tm2) // 2 + k + 1)
        )
        term = math.exp(log_pref - log_den)
        total += -term if k % 2 else term
    return total


def state_keys(tJ, tmJ, tkJ, tkS, base):
    """Encode basis labels as sortable integer keys."""
    off = base // 2
    return ((np.asarray(tJ, dtype=np.int64) * base + (np.asarray(tmJ) + off)) * base
            + (np.asarray(tkJ) + off)) * base + (np.asarray(tkS) + off)


def d_operator_entries(keys, tJ, tmJ, tkJ, tkS, tj, tm, tk, base):
    """Triplets of the D^j_{mk} operator on a basis given by label arrays.

    ``keys`` must be the sorted state keys of the basis (see ``state_keys``).
    Targets that fall outside the basis are dropped.
    """
    lookup = {int(kk): i for i, kk in enumerate(keys)}
    off = base // 2
    rows, cols, vals = [], [], []
    for c in range(len(tJ)):
        J2, m2, k2, s2 = int(tJ[c]), int(tmJ[c]), int(tkJ[c]), int(tkS[c])
        mp, kp = m2 + tm, k2 + tk
        for Jp in range(abs(J2 - tj), J2 + tj + 1, 2):
            if abs(mp) > Jp or abs(kp) > Jp:
                continue
            key = ((Jp * base + mp + off) * base + kp + off) * base + s2 + off
            r = lookup.get(key)
            if r is None:
                continue
            v = math.sqrt((J2 + 1.0) / (Jp + 1.0)) * cg_float(tj, tm, J2, m2, Jp, mp) * cg_float(tj, tk, J2, k2, Jp, kp)
            if v != 0.0:
                rows.append(r)
                cols.append(c)
                vals.append(v)
    return (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=np.float64))
