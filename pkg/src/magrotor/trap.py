"""Ioffe-Pritchard trap: field, |B| expansion, the bisector vector n and its jets.

Lab components of n are written as (n_z, n_+, n_-) with n_+- = n_x +- i n_y.
Body components (n_3, n_up, n_down) follow from the transfer matrix built
from rank-1 D functions; body tables here are lists of ``((m, k), weight)``
pairs meaning ``sum weight * D^1_{mk}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .config import read_config
from .symbolic import I, ONE, Sym, sqrt, sym


class NonConfiningTrap(ValueError):
    pass


class TrapDomainError(ValueError):
    pass


@dataclass(frozen=True)
class TrapParams:
    B0: float
    Bp: float
    Bpp: float

    def __post_init__(self):
        if not self.B0 > 0:
            raise ValueError("B0 must be positive")

    @property
    def transverse_curvature(self) -> float:
        return (self.Bp ** 2 - self.B0 * self.Bpp / 2) / self.B0

    def check_confining(self) -> None:
        if self.Bpp <= 0:
            raise NonConfiningTrap(f"axial curvature B'' = {self.Bpp} must be positive")
        if self.Bp ** 2 - self.B0 * self.Bpp / 2 <= 0:
            raise NonConfiningTrap(
                f"B'^2 - B0 B''/2 = {self.Bp ** 2 - self.B0 * self.Bpp / 2:.6g} T^2/m^2 must be positive "
                "for transverse confinement")

    @property
    def length_scale(self) -> float:
        """Smallest field length scale, min(B0/B', sqrt(B0/B''))."""
        scales = []
        if self.Bp:
            scales.append(self.B0 / abs(self.Bp))
        if self.Bpp:
            scales.append(math.sqrt(self.B0 / abs(self.Bpp)))
        return min(scales) if scales else math.inf

    @classmethod
    def from_file(cls, path: str | Path) -> "TrapParams":
        v = read_config(path, ["B0_T", "Bp_T_per_m", "Bpp_T_per_m2"])
        return cls(v["B0_T"], v["Bp_T_per_m"], v["Bpp_T_per_m2"])


def field_at(params: TrapParams, r) -> np.ndarray:
    """Field at one point (shape (3,)) or many points (shape (n, 3))."""
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    B0, Bp, Bpp = params.B0, params.Bp, params.Bpp
    bx = Bp * x - 0.5 * Bpp * x * z
    by = -(Bp * y + 0.5 * Bpp * z * y)
    bz = B0 + 0.5 * Bpp * (z * z - 0.5 * (x * x + y * y))
    return np.stack([bx, by, bz], axis=-1)


@dataclass(frozen=True)
class MagnitudeExpansion:
    B0: float
    curvature_x: float
    curvature_y: float
    curvature_z: float

    def magnitude(self, r) -> float:
        x, y, z = r
        return self.B0 + 0.5 * (self.curvature_x * x * x + self.curvature_y * y * y + self.curvature_z * z * z)


def magnitude_expansion(params: TrapParams) -> MagnitudeExpansion:
    """Quadratic expansion of |B| about the trap centre."""
    params.check_confining()
    c = params.transverse_curvature
    return MagnitudeExpansion(params.B0, c, c, params.Bpp)


@dataclass(frozen=True)
class ExpansionValidity:
    """Dimensionless ratios that must be small for the quadratic |B| and
    the Lamb-Dicke expansion.  Both confinement inequalities are reported."""

    axial_ratio: float           # sqrt(<z^2>) / sqrt(B0/B'')
    transverse_ratio: float      # sqrt(<x^2>) / sqrt(B0^2/(B'^2 - B0 B''))
    transverse_ratio_simple: float  # sqrt(<x^2>) / (B0/B')
    curvature_ratios: tuple[float, float, float]  # <r_nu^2> Bbar_nu / B0

    def satisfied(self, threshold: float = 0.1) -> bool:
        vals = [self.axial_ratio, self.transverse_ratio_simple, *self.curvature_ratios]
        if math.isfinite(self.transverse_ratio):
            vals.append(self.transverse_ratio)
        return all(v < threshold for v in vals)


def expansion_validity(params: TrapParams, rms_transverse: float, rms_axial: float) -> ExpansionValidity:
    exp = magnitude_expansion(params)
    denom = params.Bp ** 2 - params.B0 * params.Bpp
    trans = rms_transverse / math.sqrt(params.B0 ** 2 / denom) if denom > 0 else math.inf
    simple = rms_transverse / (params.B0 / abs(params.Bp)) if params.Bp else 0.0
    curv = (rms_transverse ** 2 * abs(exp.curvature_x) / params.B0,
            rms_transverse ** 2 * abs(exp.curvature_y) / params.B0,
            rms_axial ** 2 * abs(exp.curvature_z) / params.B0)
    return ExpansionValidity(rms_axial / math.sqrt(params.B0 / params.Bpp), trans, simple, curv)


def bisector(params: TrapParams, r) -> np.ndarray:
    """Unit vector bisecting e_z and the local field direction."""
    b = field_at(params, r)
    bhat = b / np.linalg.norm(b, axis=-1, keepdims=True)
    s = bhat + np.array([0.0, 0.0, 1.0])
    norm = np.linalg.norm(s, axis=-1, keepdims=True)
    if np.any(norm < 1e-8):
        raise TrapDomainError("field points along -e_z; the bisector is undefined there")
    return s / norm


@dataclass(frozen=True)
class FieldJet:
    """Nonzero lab-frame jet of n at the trap centre.

    ``entries`` maps (component, derivative) to a complex number, with
    component in {"z", "+", "-"} and derivative a sorted string over
    {"x", "y", "z"} (empty for the value itself).
    """

    entries: dict

    def get(self, component: str, derivative: str = "") -> complex:
        return self.entries.get((component, "".join(sorted(derivative))), 0j)


def n_jet(params: TrapParams) -> FieldJet:
    a = params.Bp / (2 * params.B0)
    c = params.Bpp / (4 * params.B0)
    e = {
        ("z", ""): 1.0 + 0j,
        ("+", "x"): a + 0j, ("-", "x"): a + 0j,
        ("+", "y"): -1j * a, ("-", "y"): 1j * a,
        ("z", "xx"): -(a * a) + 0j, ("z", "yy"): -(a * a) + 0j,
        ("+", "xz"): -c + 0j, ("-", "xz"): -c + 0j,
        ("+", "yz"): -1j * c, ("-", "yz"): 1j * c,
    }
    return FieldJet(e)


def numeric_jet(params: TrapParams, component: str, derivative: str, h: Optional[float] = None) -> complex:
    """Central finite-difference jet of the bisector (test oracle)."""
    h = h if h is not None else 1e-4 * params.length_scale
    axis = {"x": 0, "y": 1, "z": 2}

    def comp(v):
        if component == "z":
            return v[2] + 0j
        sign = 1 if component == "+" else -1
        return v[0] + sign * 1j * v[1]

    def f(shifts):
        r = np.zeros(3)
        for ax, s in shifts:
            r[axis[ax]] += s * h
        return comp(bisector(params, r))

    if derivative == "":
        return f([])
    if len(derivative) == 1:
        d = derivative
        return (f([(d, 1)]) - f([(d, -1)])) / (2 * h)
    d1, d2 = derivative
    if d1 == d2:
        return (f([(d1, 1)]) - 2 * f([]) + f([(d1, -1)])) / (h * h)
    return (f([(d1, 1), (d2, 1)]) - f([(d1, 1), (d2, -1)]) - f([(d1, -1), (d2, 1)]) + f([(d1, -1), (d2, -1)])) / (4 * h * h)


def maxwell_residuals(params: TrapParams, points: np.ndarray, rel_step: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """|div B| and |curl B| at each point by central differences, in T/m."""
    h = rel_step * params.length_scale
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    jac = np.empty((len(pts), 3, 3))
    for j in range(3):
        dr = np.zeros(3)
        dr[j] = h
        jac[:, :, j] = (field_at(params, pts + dr) - field_at(params, pts - dr)) / (2 * h)
    div = jac[:, 0, 0] + jac[:, 1, 1] + jac[:, 2, 2]
    curl = np.stack([jac[:, 2, 1] - jac[:, 1, 2], jac[:, 0, 2] - jac[:, 2, 0], jac[:, 1, 0] - jac[:, 0, 1]], axis=-1)
    return np.abs(div), np.linalg.norm(curl, axis=-1)


# ---------------------------------------------------------------------------
# body-frame tables

# Transfer matrix rows (n_3, n_up, n_down) x columns (n_z, n_+, n_-), each
# entry a list of ((m, k), weight) for sum weight * D^1_{mk}.
_R2 = sqrt(2)
_H = sqrt(Fraction(1, 2))
TRANSFER = (
    ([((0, 0), ONE)], [((-1, 0), _H)], [((1, 0), -_H)]),
    ([((0, 1), -_R2)], [((-1, 1), -ONE)], [((1, 1), ONE)]),
    ([((0, -1), _R2)], [((-1, -1), ONE)], [((1, -1), -ONE)]),
)
BODY_COMPONENTS = ("n3", "nup", "ndown")
LAB_COMPONENTS = ("z", "+", "-")


def scaled_jet() -> dict[tuple[str, str], Sym]:
    """Lab jet of n with each derivative d/dr_nu scaled by z_nu/sqrt(S).

    With eta = B' z/(2 B0) and eta' = B'' z^2/(4 B0) (z the transverse zero-
    point length, z_z/z = sqrt(w_T/w_z)) every entry is an exact symbol.
    """
    s_half = sym("S", Fraction(-1, 2))
    eta = sym("eta")
    mixed = sym("etap") * sym("S", -1) * sym("wT", Fraction(1, 2)) * sym("wz", Fraction(-1, 2))
    return {
        ("z", ""): ONE,
        ("+", "x"): eta * s_half, ("-", "x"): eta * s_half,
        ("+", "y"): -I * eta * s_half, ("-", "y"): I * eta * s_half,
        ("z", "xx"): -(eta * eta) * sym("S", -1), ("z", "yy"): -(eta * eta) * sym("S", -1),
        ("+", "xz"): -mixed, ("-", "xz"): -mixed,
        ("+", "yz"): -I * mixed, ("-", "yz"): I * mixed,
    }


def body_frame_n_coefficients(order: int) -> dict[tuple[str, str], list[tuple[tuple[int, int], Sym]]]:
    """Body components of n and its scaled derivatives as D^1 combinations.

    Keys are ``(component, derivative)`` with component in
    {"n3", "nup", "ndown"} and derivative "" (order 0), one axis letter
    (order 1) or a sorted pair (order 2).  Weights use the scaled jet, so a
    first derivative carries eta/sqrt(S).  Entries that vanish are omitted
    (all z first derivatives vanish by axial symmetry).
    """
    if order not in (0, 1, 2):
        raise ValueError("only orders 0, 1 and 2 are available")
    jet = scaled_jet()
    derivs = {0: [""], 1: ["x", "y", "z"], 2: ["xx", "xy", "xz", "yy", "yz", "zz"]}[order]
    out: dict = {}
    for deriv in derivs:
        for row, comp in enumerate(BODY_COMPONENTS):
            acc: dict[tuple[int, int], Sym] = {}
            for col, lab in enumerate(LAB_COMPONENTS):
                w = jet.get((lab, deriv))
                if w is None:
                    continue
                for mk, t in TRANSFER[row][col]:
                    acc[mk] = acc.get(mk, Sym()) + t * w
            entries = [(mk, v) for mk, v in sorted(acc.items()) if v]
            if entries:
                out[(comp, deriv)] = entries
    return out


def printed_first_derivative_y() -> dict[str, list[tuple[tuple[int, int], Sym]]]:
    """y-derivative table exactly as printed in the source derivation,
    kept only so tests can show where it departs from the transfer matrix."""
    eta = sym("eta") * sym("S", Fraction(-1, 2))
    return {
        "n3": [((1, 0), -I * _H * eta), ((-1, 0), I * _H * eta)],
        "nup": [((-1, 1), I * eta), ((1, 1), -I * eta)],
        "ndown": [((1, -1), I * eta), ((-1, -1), -I * eta)],
    }
