"""Frequency-fitted coefficients for the two-stage Gauss family.

Two fitted variants of the classical two-stage Gauss method are provided,
both keyed to the scaled frequency v = omega * h:

* ``G2_PL``: the weight b2 is chosen so the method has zero dispersion at v
  (the amplification factor P(iv) is real, up to sign, after removing the
  exact rotation e^{iv}).
* ``G2_PL_D``: b2 and the trailing diagonal entry a22 are chosen jointly so
  P(iv) = e^{iv} exactly: zero dispersion and zero dissipation at v.

Both reduce to the classical tableau (b2 = 1/2, a22 = 1/4) as v -> 0.

Numerics
--------
The closed forms are ratios of trigonometric polynomials evaluated in the
widest native float (long double where available) and rounded once to
float64. Below ``SERIES_CUTOFF`` the closed forms lose accuracy to
cancellation and Taylor series in v^2 are used instead; the reported
``branch`` on each value records which path produced it. The G2_PL_D pair
is computed as a22 from its own closed form, then b2 by substitution into
the dispersion condition, which is linear in b2; substituting avoids the
catastrophic cancellation the fully expanded b2 expression suffers in
double precision.

Each denominator vanishes on a discrete set of v (the first near 4.27 for
G2_PL, near 5.09 for G2_PL_D). Inside a relative guard band around those
zeros the coefficients exceed ~1e8 and their accuracy degrades, so
``SingularParameter`` is raised rather than returning garbage.

The zero-dissipation condition P(iv) = sigma * e^{iv} has two solution
branches, sigma = +1 and sigma = -1. The closed forms implement sigma = +1,
the branch continuous with the classical limit; after fitting, the
condition is re-checked through the amplification factor and
``BranchFailure`` is raised if it does not hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import analysis
from .tableau import ButcherTableau, gauss2

__all__ = [
    "MethodKind",
    "Branch",
    "CoefficientValue",
    "FittedMethodSpec",
    "FittingError",
    "SingularParameter",
    "BranchFailure",
    "SERIES_CUTOFF",
    "b2_phase_fitted",
    "b2_a22_fitted",
    "series_b2",
    "series_a22",
    "fit_tableau",
]

SERIES_CUTOFF = 1e-2
GUARD_REL = 1e-8

_LD = np.longdouble
_R3 = np.sqrt(_LD(3))
_QUARTER = _LD(1) / 4


class MethodKind(Enum):
    G2_CLASSICAL = "G2"
    G2_PL = "G2-PL"
    G2_PL_D = "G2-PL-D"


class Branch(Enum):
    CLOSED_FORM = "closed_form"
    SERIES = "series"


class FittingError(Exception):
    """Base class for coefficient-fitting failures."""


class SingularParameter(FittingError):
    """v falls in the guard band of a coefficient pole (and outside the
    series validity range), or the fitted tableau fails its own fitting
    condition on re-evaluation."""


class BranchFailure(FittingError):
    """The fitted pair does not satisfy P(iv) = e^{iv}: the solve left the
    branch that continues the classical tableau."""


@dataclass(frozen=True)
class CoefficientValue:
    """A fitted coefficient plus the evaluation path that produced it."""

    value: float
    branch: Branch


@dataclass(frozen=True)
class FittedMethodSpec:
    """A method kind together with the scaled frequency v = omega * h."""

    kind: MethodKind
    v: float


# --- series coefficients, evaluated once in extended precision -------------

def _f(x) -> float:
    return float(x)


# b2 series shared by both fitted kinds through v^8; the v^10 terms differ
_B2_C4 = _f(_LD(1) / 720)
_B2_C6 = _f(_LD(1) / 6720 - _R3 / 8640)
_B2_C8 = _f(_LD(1) / 22680 - _R3 / 45360)
_B2_PL_C10 = _f(_LD(2381) / 239500800 - 127 * _R3 / 21772800)
_B2_PLD_C10 = _f(_LD(4531) / 479001600 - 247 * _R3 / 43545600)

_A22_C4 = _f(_LD(1) / 720 - _R3 / 2160)
_A22_C6 = _f(_LD(1) / 6720 - _R3 / 11340)
_A22_C8 = _f(_LD(17) / 403200 - 29 * _R3 / 1209600)
_A22_C10 = _f(_LD(641) / 68428800 - 1933 * _R3 / 359251200)


def series_b2(v: float, kind: MethodKind) -> float:
    """Taylor expansion of the fitted b2 about v = 0 (through v^10)."""
    if kind is MethodKind.G2_CLASSICAL:
        return 0.5
    c10 = _B2_PL_C10 if kind is MethodKind.G2_PL else _B2_PLD_C10
    w = v * v
    return 0.5 + w * w * (_B2_C4 + w * (_B2_C6 + w * (_B2_C8 + w * c10)))


def series_a22(v: float) -> float:
    """Taylor expansion of the G2_PL_D a22 about v = 0 (through v^10)."""
    w = v * v
    return 0.25 + w * w * (_A22_C4 + w * (_A22_C6 + w * (_A22_C8 + w * _A22_C10)))


# --- closed forms -----------------------------------------------------------

def _b2_pl_parts(v: float):
    v = _LD(v)
    s = np.sin(v)
    c = np.cos(v)
    v2 = v * v
    v3 = v2 * v
    v4 = v2 * v2
    num = (
        (_R3 - 1) * v4 * s
        + 6 * (_R3 - 1) * v3 * c
        + (24 - 12 * _R3) * v2 * s
        + 72 * v * c
        - 144 * s
    )
    den = (
        2 * _R3 * v4 * s
        + 12 * (1 + _R3) * v3 * c
        - (72 + 24 * _R3) * v2 * s
        - 144 * v * c
    )
    return num, den


def _a22_pld_parts(v: float):
    v = _LD(v)
    s = np.sin(v)
    c = np.cos(v)
    v2 = v * v
    v3 = v2 * v
    num = (
        -v3 * s
        - (12 + 2 * _R3) * v2 * c
        - (36 - 14 * _R3) * v2
        + (24 * _R3 + 48) * v * s
        + 96 * _R3 * c
        - 96 * _R3
    )
    den = 12 * v * (v2 * s + (2 * _R3 + 4) * v * c - (4 - 2 * _R3) * v - 8 * _R3 * s)
    return num, den


def _b2_pld_substituted(v: float, a22):
    # dispersion condition, linear in b2 once a22 is known
    v = _LD(v)
    s = np.sin(v)
    c = np.cos(v)
    return a22 - _QUARTER + s / v - v * s * (a22 / 4 + _LD(1) / 48) - c * (a22 + _QUARTER)


def _guard(num, den, what: str, v: float) -> None:
    scale = max(1.0, abs(float(num)))
    if abs(float(den)) < GUARD_REL * scale:
        raise SingularParameter(
            f"{what} denominator vanishes near v = {v:.8g} "
            f"(|den| = {abs(float(den)):.3e}, guard scale = {scale:.3e}); "
            f"the fitted coefficient is unusable this close to a pole"
        )


def b2_phase_fitted(v: float) -> CoefficientValue:
    """Weight b2 giving zero dispersion at v (G2_PL), with a22 = 1/4.

    Even in v. Uses the v^2 series below SERIES_CUTOFF; raises
    SingularParameter inside the guard band of a denominator zero.
    """
    v = float(v)
    if not np.isfinite(v):
        raise ValueError(f"v must be finite, got {v!r}")
    if abs(v) < SERIES_CUTOFF:
        return CoefficientValue(series_b2(v, MethodKind.G2_PL), Branch.SERIES)
    num, den = _b2_pl_parts(v)
    _guard(num, den, "phase-fit", v)
    return CoefficientValue(float(num / den), Branch.CLOSED_FORM)


def b2_a22_fitted(v: float) -> tuple[CoefficientValue, CoefficientValue]:
    """Pair (b2, a22) giving zero dispersion and zero dissipation at v.

    Even in v; sigma = +1 branch (see module docstring). Uses the series
    below SERIES_CUTOFF; raises SingularParameter in a pole guard band.
    """
    v = float(v)
    if not np.isfinite(v):
        raise ValueError(f"v must be finite, got {v!r}")
    if abs(v) < SERIES_CUTOFF:
        return (
            CoefficientValue(series_b2(v, MethodKind.G2_PL_D), Branch.SERIES),
            CoefficientValue(series_a22(v), Branch.SERIES),
        )
    num, den = _a22_pld_parts(v)
    _guard(num, den, "dissipation-fit", v)
    a22 = num / den
    b2 = _b2_pld_substituted(v, a22)
    return (
        CoefficientValue(float(b2), Branch.CLOSED_FORM),
        CoefficientValue(float(a22), Branch.CLOSED_FORM),
    )


# --- tableau assembly -------------------------------------------------------

def _check_dispersion(t: ButcherTableau, v: float) -> None:
    p = analysis.amplification(t, 1j * v).value
    w = p * complex(np.cos(v), -np.sin(v))
    if abs(w.imag) > 1e-9 * max(1.0, abs(w)):
        raise SingularParameter(
            f"fitted tableau fails the dispersion condition at v = {v:.8g}: "
            f"Im(P e^-iv) = {w.imag:.3e} at |P| = {abs(p):.3e}"
        )


def _check_branch(t: ButcherTableau, v: float) -> None:
    p = analysis.amplification(t, 1j * v).value
    w = p * complex(np.cos(v), -np.sin(v))
    if abs(w - 1.0) > 1e-6 * max(1.0, abs(w)):
        raise BranchFailure(
            f"fitted pair leaves the classical branch at v = {v:.8g}: "
            f"P e^-iv = {w!r}, expected 1"
        )


def fit_tableau(spec: FittedMethodSpec) -> ButcherTableau:
    """Build the tableau for a fitted-method spec.

    G2_CLASSICAL ignores v and returns the classical Gauss tableau. The
    fitted kinds modify only b2 (G2_PL) or b2 and a22 (G2_PL_D); c and the
    remaining entries of A are those of the classical method. The fitting
    condition is re-verified on the assembled tableau.
    """
    if not isinstance(spec, FittedMethodSpec):
        raise TypeError(f"expected FittedMethodSpec, got {type(spec).__name__}")
    g = gauss2()
    v = float(spec.v)
    if spec.kind is MethodKind.G2_CLASSICAL:
        return g
    if spec.kind is MethodKind.G2_PL:
        cv = b2_phase_fitted(v)
        t = ButcherTableau(c=g.c, A=g.A, b=(0.5, cv.value))
        if v != 0.0:
            _check_dispersion(t, v)
        return t
    if spec.kind is MethodKind.G2_PL_D:
        cb, ca = b2_a22_fitted(v)
        t = ButcherTableau(
            c=g.c,
            A=(g.A[0], (g.A[1][0], ca.value)),
            b=(0.5, cb.value),
        )
        if v != 0.0:
            _check_branch(t, v)
        return t
    raise TypeError(f"unknown method kind: {spec.kind!r}")
