"""Scalar angular-momentum kernels.

Quantum numbers are carried as :class:`HalfInt` (twice the value stored as an
integer).  Clebsch-Gordan coefficients are computed exactly with the Racah
sum over integer factorials; floats only enter at the final square root.

The Wigner function convention used throughout the package is

    D^j_{mk}(alpha, beta, gamma) = <j k| exp(i gamma Jz) exp(i beta Jy) exp(i alpha Jz) |j m>
                                 = exp(i (m alpha + k gamma)) d^j_{mk}(beta)

with ``d`` the usual real small-d function.  With this choice the rotation
matrix ``Rz(gamma) Ry(beta) Rz(alpha)`` is reproduced entrywise by the
D-matrix combination in :func:`rotation_matrix_from_D`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

Number = Union[int, float, Fraction, "HalfInt"]


class AngularDomainError(ValueError):
    """Raised for quantum numbers outside their allowed range."""


@dataclass(frozen=True, order=True)
class HalfInt:
    """Integer or half-integer number stored as ``twice_value``."""

    twice_value: int

    @classmethod
    def of(cls, x: Number) -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        if isinstance(x, int):
            return cls(2 * x)
        if isinstance(x, Fraction):
            t = 2 * x
            if t.denominator != 1:
                raise AngularDomainError(f"{x} is not a multiple of 1/2")
            return cls(int(t))
        t = 2.0 * float(x)
        if abs(t - round(t)) > 1e-9:
            raise AngularDomainError(f"{x} is not a multiple of 1/2")
        return cls(int(round(t)))

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __add__(self, other: Number) -> "HalfInt":
        return HalfInt(self.twice_value + HalfInt.of(other).twice_value)

    __radd__ = __add__

    def __sub__(self, other: Number) -> "HalfInt":
        return HalfInt(self.twice_value - HalfInt.of(other).twice_value)

    def __rsub__(self, other: Number) -> "HalfInt":
        return HalfInt(HalfInt.of(other).twice_value - self.twice_value)

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice_value)

    def __abs__(self) -> "HalfInt":
        return HalfInt(abs(self.twice_value))

    def __float__(self) -> float:
        return self.twice_value / 2.0

    def as_fraction(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    def __repr__(self) -> str:
        if self.is_integer:
            return f"HalfInt({self.twice_value // 2})"
        return f"HalfInt({self.twice_value}/2)"

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"


def twice(x: Number) -> int:
    """Return ``2x`` as an int, validating that x is a multiple of 1/2."""
    return HalfInt.of(x).twice_value


@dataclass(frozen=True)
class ExactCoeff:
    """A real number stored as ``sign * sqrt(rational_square)``."""

    sign: int
    rational_square: Fraction

    def __post_init__(self):
        if self.rational_square < 0:
            raise ValueError("rational_square must be non-negative")
        if self.rational_square == 0 and self.sign != 0:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def zero(cls) -> "ExactCoeff":
        return cls(0, Fraction(0))

    @classmethod
    def from_rational(cls, q: Fraction | int) -> "ExactCoeff":
        q = Fraction(q)
        return cls((q > 0) - (q < 0), q * q)

    def __mul__(self, other: "ExactCoeff") -> "ExactCoeff":
        return ExactCoeff(self.sign * other.sign, self.rational_square * other.rational_square)

    def square(self) -> Fraction:
        return self.rational_square

    def signed_square(self) -> Fraction:
        return self.sign * self.rational_square

    def __float__(self) -> float:
        return self.sign * math.sqrt(self.rational_square)

    def is_zero(self) -> bool:
        return self.sign == 0


@dataclass(frozen=True)
class EulerAngles:
    """ZYZ Euler angles in radians."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        two_pi = 2.0 * math.pi + 1e-12
        if not (-1e-12 <= self.alpha <= two_pi and -1e-12 <= self.gamma <= two_pi):
            raise AngularDomainError("alpha and gamma must lie in [0, 2pi]")
        if not (-1e-12 <= self.beta <= math.pi + 1e-12):
            raise AngularDomainError("beta must lie in [0, pi]")


def _check_projection(tj: int, tm: int, what: str) -> None:
    if tj < 0:
        raise AngularDomainError(f"{what}: negative angular momentum 2j={tj}")
    if abs(tm) > tj or (tj - tm) % 2:
        raise AngularDomainError(f"{what}: projection 2m={tm} not allowed for 2j={tj}")


@lru_cache(maxsize=None)
def _cg_exact_twice(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int) -> tuple[int, Fraction]:
    """Racah formula on twice-valued arguments; returns (sign, square)."""
    if tm1 + tm2 != tM:
        return 0, Fraction(0)
    if tJ < abs(tj1 - tj2) or tJ > tj1 + tj2 or (tj1 + tj2 + tJ) % 2:
        return 0, Fraction(0)
    f = math.factorial
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tj2 + tJ) // 2
    c = (-tj1 + tj2 + tJ) // 2
    pref = Fraction((tJ + 1) * f(a) * f(b) * f(c), f((tj1 + tj2 + tJ) // 2 + 1))
    pref *= (
        f((tJ + tM) // 2) * f((tJ - tM) // 2)
        * f((tj1 - tm1) // 2) * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2) * f((tj2 + tm2) // 2)
    )
    kmin = max(0, (tj2 - tJ - tm1) // 2, (tj1 - tJ + tm2) // 2)
    kmax = min(a, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            f(k) * f(a - k) * f((tj1 - tm1) // 2 - k) * f((tj2 + tm2) // 2 - k)
            * f((tJ - tj2 + tm1) // 2 + k) * f((tJ - tj1 - tm2) // 2 + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    return (1 if total > 0 else -1), pref * total * total


def clebsch_gordan(j1: Number, m1: Number, j2: Number, m2: Number, J: Number, M: Number) -> ExactCoeff:
    """Exact <j1 m1, j2 m2 | J M> in the Condon-Shortley convention."""
    tj1, tm1, tj2, tm2, tJ, tM = (twice(x) for x in (j1, m1, j2, m2, J, M))
    _check_projection(tj1, tm1, "j1,m1")
    _check_projection(tj2, tm2, "j2,m2")
    _check_projection(tJ, tM, "J,M")
    sign, sq = _cg_exact_twice(tj1, tm1, tj2, tm2, tJ, tM)
    return ExactCoeff(sign, sq)


def cg_value(j1: Number, m1: Number, j2: Number, m2: Number, J: Number, M: Number) -> float:
    """Float value of :func:`clebsch_gordan`."""
    return float(clebsch_gordan(j1, m1, j2, m2, J, M))


def wigner_d(j: Number, m: Number, k: Number, beta: float) -> float:
    """Real small-d function d^j_{mk}(beta)."""
    tj, tm, tk = twice(j), twice(m), twice(k)
    _check_projection(tj, tm, "j,m")
    _check_projection(tj, tk, "j,k")
    f = math.factorial
    jpm, jmm = (tj + tm) // 2, (tj - tm) // 2
    jpk, jmk = (tj + tk) // 2, (tj - tk) // 2
    km = (tk - tm) // 2
    norm = math.sqrt(f(jpm) * f(jmm) * f(jpk) * f(jmk))
    c, s = math.cos(beta / 2.0), math.sin(beta / 2.0)
    # textbook d^j_{m'm} with the relabelling m' -> m, m -> k
    total = 0.0
    for n in range(max(0, km), min(jpk, jmm) + 1):
        a3 = n - km
        term = (-1) ** a3 * norm / (f(jpk - n) * f(n) * f(a3) * f(jmm - n))
        total += term * c ** (tj + km - 2 * n) * s ** (2 * n - km)
    return total


def wigner_D(j: Number, m: Number, k: Number, angles: EulerAngles) -> complex:
    """D^j_{mk}(alpha, beta, gamma) = exp(i(m alpha + k gamma)) d^j_{mk}(beta)."""
    mf, kf = float(HalfInt.of(m)), float(HalfInt.of(k))
    phase = np.exp(1j * (mf * angles.alpha + kf * angles.gamma))
    return complex(phase * wigner_d(j, m, k, angles.beta))


def _rz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def rotation_matrix(angles: EulerAngles) -> np.ndarray:
    """Body-from-lab rotation ``Rz(gamma) @ Ry(beta) @ Rz(alpha)``."""
    return _rz(angles.gamma) @ _ry(angles.beta) @ _rz(angles.alpha)


def rotation_matrix_from_D(angles: EulerAngles) -> np.ndarray:
    """Rebuild the rotation matrix from rank-1 D functions."""
    D = {(m, k): wigner_D(1, m, k, angles) for m in (-1, 0, 1) for k in (-1, 0, 1)}
    r2 = math.sqrt(2.0)
    R = 0.5 * np.array(
        [
            [
                D[1, 1] + D[-1, -1] - D[1, -1] - D[-1, 1],
                -1j * (D[1, 1] - D[-1, -1] + D[-1, 1] - D[1, -1]),
                r2 * (D[0, -1] - D[0, 1]),
            ],
            [
                1j * (D[1, 1] - D[-1, -1] - D[-1, 1] + D[1, -1]),
                D[1, 1] + D[-1, -1] + D[1, -1] + D[-1, 1],
                -1j * r2 * (D[0, -1] + D[0, 1]),
            ],
            [
                r2 * (D[-1, 0] - D[1, 0]),
                1j * r2 * (D[1, 0] + D[-1, 0]),
                2.0 * D[0, 0],
            ],
        ],
        dtype=complex,
    )
    return R


def lab_to_body_transfer(angles: EulerAngles) -> np.ndarray:
    """Numeric T matrix mapping (n_z, n_+, n_-) to (n_3, n_up, n_down).

    ``n_up = n_1 - i n_2`` in the body frame and ``n_pm = n_x +- i n_y`` in the
    lab frame.
    """
    D = {(m, k): wigner_D(1, m, k, angles) for m in (-1, 0, 1) for k in (-1, 0, 1)}
    r2 = math.sqrt(2.0)
    return (1.0 / r2) * np.array(
        [
            [r2 * D[0, 0], D[-1, 0], -D[1, 0]],
            [-2.0 * D[0, 1], -r2 * D[-1, 1], r2 * D[1, 1]],
            [2.0 * D[0, -1], r2 * D[-1, -1], -r2 * D[1, -1]],
        ],
        dtype=complex,
    )


def product_expansion(j1: Number, m1: Number, k1: Number, j2: Number, m2: Number, k2: Number) -> list[tuple[HalfInt, ExactCoeff]]:
    """Expand D^{j1}_{m1 k1} D^{j2}_{m2 k2} into single D functions.

    Returns ``[(J, c)]`` meaning the product equals
    ``sum_J c_J D^J_{m1+m2, k1+k2}``; each ``c_J`` is a product of two CG
    coefficients and is therefore exact.
    """
    tj1, tj2 = twice(j1), twice(j2)
    tM = twice(m1) + twice(m2)
    tK = twice(k1) + twice(k2)
    out = []
    for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2):
        if abs(tM) > tJ or abs(tK) > tJ:
            continue
        c = clebsch_gordan(j1, m1, j2, m2, HalfInt(tJ), HalfInt(tM)) * clebsch_gordan(
            j1, k1, j2, k2, HalfInt(tJ), HalfInt(tK)
        )
        if not c.is_zero():
            out.append((HalfInt(tJ), c))
    return out


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    expected: complex
    residual: float
    points: int
    converged: bool


def _quadrature_grid(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    beta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(n) / n
    wphi = np.full(n, 2.0 * np.pi / n)
    return beta, w, phi, wphi


def _d_on_grid(j: Number, m: Number, k: Number, beta: np.ndarray) -> np.ndarray:
    return np.array([wigner_d(j, m, k, b) for b in beta])


def _integrate(factors, n: int) -> complex:
    """Integrate a product of D functions over SO(3).

    ``factors`` is a list of (j, m, k, conjugate) tuples.
    """
    beta, wb, phi, wphi = _quadrature_grid(n)
    mtot = 0.0
    ktot = 0.0
    dprod = np.ones_like(beta)
    for j, m, k, conj in factors:
        s = -1.0 if conj else 1.0
        mtot += s * float(HalfInt.of(m))
        ktot += s * float(HalfInt.of(k))
        dprod = dprod * _d_on_grid(j, m, k, beta)
    alpha_part = np.sum(wphi * np.exp(1j * mtot * phi))
    gamma_part = np.sum(wphi * np.exp(1j * ktot * phi))
    return complex(np.sum(wb * dprod) * alpha_part * gamma_part)


def _required_points(*ranks: Number) -> int:
    return int(4 * (sum(float(HalfInt.of(q)) for q in ranks) + 1))


def check_D_orthogonality(q1: Number, m1: Number, k1: Number, q2: Number, m2: Number, k2: Number,
                          quadrature_order: int | None = None) -> QuadratureResult:
    """Quadrature check of the SO(3) normalization of two D functions.

    Integrates conj(D^{q1}_{m1k1}) D^{q2}_{m2k2} and compares with
    8 pi^2/(2 q1 + 1) times Kronecker deltas.
    """
    need = _required_points(q1, q2)
    n = quadrature_order if quadrature_order is not None else need
    value = _integrate([(q1, m1, k1, True), (q2, m2, k2, False)], n)
    same = (twice(q1), twice(m1), twice(k1)) == (twice(q2), twice(m2), twice(k2))
    expected = 8.0 * math.pi ** 2 / (2.0 * float(HalfInt.of(q1)) + 1.0) if same else 0.0
    return QuadratureResult(value, expected, abs(value - expected), n, n >= need)


def triple_integral(Lp: Number, mp: Number, kp: Number, q: Number, m: Number, k: Number,
                    L: Number, mL: Number, kL: Number, quadrature_order: int | None = None) -> QuadratureResult:
    """Quadrature value of int conj(D^{L'}_{m'k'}) D^q_{mk} D^L_{mL kL} dOmega.

    The closed form is 8 pi^2/(2L'+1) CG(q m, L mL|L' m') CG(q k, L kL|L' k').
    """
    need = _required_points(Lp, q, L)
    n = quadrature_order if quadrature_order is not None else need
    value = _integrate([(Lp, mp, kp, True), (q, m, k, False), (L, mL, kL, False)], n)
    tLp = twice(Lp)
    if twice(m) + twice(mL) == twice(mp) and twice(k) + twice(kL) == twice(kp):
        cg = cg_value(q, m, L, mL, Lp, mp) * cg_value(q, k, L, kL, Lp, kp)
    else:
        cg = 0.0
    expected = 8.0 * math.pi ** 2 / (tLp + 1.0) * cg
    return QuadratureResult(value, expected, abs(value - expected), n, n >= need)


def cg_orthogonality_residual(j1: Number, j2: Number) -> Fraction:
    """Largest exact deviation of the CG orthogonality sums from the identity.

    Sums over (m1, m2) of CG(..|J M) CG(..|J' M') for every pair of coupled
    states; zero means the relation holds exactly.
    """
    tj1, tj2 = twice(j1), twice(j2)
    coupled = [
        (tJ, tM)
        for tJ in range(abs(tj1 - tj2), tj1 + tj2 + 1, 2)
        for tM in range(-tJ, tJ + 1, 2)
    ]
    worst = Fraction(0)
    for tJ, tM in coupled:
        for tJp, tMp in coupled:
            if tMp != tM:
                continue
            total = _exact_dot(tj1, tj2, tJ, tJp, tM)
            target = 1 if tJ == tJp else 0
            worst = max(worst, abs(total - target))
    return worst


def _exact_dot(tj1: int, tj2: int, tJ: int, tJp: int, tM: int) -> Fraction:
    """Exact sum of products of CG pairs; each product is rational or a
    signed square root of a rational, and the radicals cancel pairwise only
    if they share a squarefree part, so they are grouped by that part."""
    groups: dict[int, Fraction] = {}
    for tm1 in range(-tj1, tj1 + 1, 2):
        tm2 = tM - tm1
        if abs(tm2) > tj2:
            continue
        s1, q1 = _cg_exact_twice(tj1, tm1, tj2, tm2, tJ, tM)
        s2, q2 = _cg_exact_twice(tj1, tm1, tj2, tm2, tJp, tM)
        if s1 == 0 or s2 == 0:
            continue
        prod = q1 * q2
        rat, rad = split_square_root(prod)
        groups[rad] = groups.get(rad, Fraction(0)) + s1 * s2 * rat
    nonzero = {r: v for r, v in groups.items() if v != 0}
    if not nonzero:
        return Fraction(0)
    if set(nonzero) == {1}:
        return nonzero[1]
    # irrational remainder: report it as a large deviation rather than hide it
    return Fraction(10 ** 6)


def squarefree_split(n: int) -> tuple[int, int]:
    """Write n = a^2 * b with b squarefree; returns (a, b)."""
    if n <= 0:
        raise ValueError("n must be positive")
    a, b = 1, 1
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        a *= p ** (e // 2)
        if e % 2:
            b *= p
        p += 1
    b *= n
    return a, b


def split_square_root(q: Fraction) -> tuple[Fraction, int]:
    """Return (r, s) with sqrt(q) = r * sqrt(s), r rational, s squarefree."""
    if q == 0:
        return Fraction(0), 1
    num, den = q.numerator, q.denominator
    a, b = squarefree_split(num * den)
    return Fraction(a, den), b
