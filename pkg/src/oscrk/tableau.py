"""Butcher tableau container, the fixed reference methods, and a text format.

The container is deliberately dumb: coefficients are stored as immutable
tuples of Python floats so instances are hashable and safe to use as cache
keys. Consistency conditions (row sums, weight sum) are *not* enforced on
construction because frequency-fitted tableaus violate them by design;
``load_tableau`` emits non-fatal warnings instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "ButcherTableau",
    "TableauFormatError",
    "TableauConsistencyWarning",
    "gauss2",
    "radau1",
    "lobatto3c",
    "load_tableau",
    "serialize",
]

ROW_SUM_TOL = 1e-12


class TableauFormatError(ValueError):
    """Tableau text that cannot be parsed."""


class TableauConsistencyWarning(UserWarning):
    """Non-fatal: parsed tableau fails a classical consistency check."""


@dataclass(frozen=True)
class ButcherTableau:
    """Runge-Kutta coefficients (c, A, b) for an s-stage method."""

    c: tuple[float, ...]
    A: tuple[tuple[float, ...], ...]
    b: tuple[float, ...]

    def __post_init__(self):
        s = len(self.c)
        if s == 0:
            raise ValueError("tableau needs at least one stage")
        if len(self.A) != s or len(self.b) != s:
            raise ValueError(
                f"inconsistent stage counts: len(c)={s}, len(A)={len(self.A)}, len(b)={len(self.b)}"
            )
        for i, row in enumerate(self.A):
            if len(row) != s:
                raise ValueError(f"A row {i} has {len(row)} entries, expected {s}")
        flat = list(self.c) + list(self.b) + [x for row in self.A for x in row]
        if not all(np.isfinite(flat)):
            raise ValueError("tableau coefficients must be finite")

    @property
    def s(self) -> int:
        return len(self.c)

    @property
    def implicit(self) -> bool:
        """True if any entry on or above the diagonal of A is nonzero."""
        return any(
            self.A[i][j] != 0.0 for i in range(self.s) for j in range(i, self.s)
        )

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fresh float64 ndarray copies of (c, A, b)."""
        return (
            np.array(self.c, dtype=np.float64),
            np.array(self.A, dtype=np.float64),
            np.array(self.b, dtype=np.float64),
        )


def gauss2() -> ButcherTableau:
    """Two-stage Gauss collocation method, order 4, A-stable, symplectic.

    Irrational entries are evaluated in the widest native float and rounded
    once to float64.
    """
    ld = np.longdouble
    r = np.sqrt(ld(3)) / 6
    return ButcherTableau(
        c=(float(ld(0.5) - r), float(ld(0.5) + r)),
        A=(
            (0.25, float(ld(0.25) - r)),
            (float(ld(0.25) + r), 0.25),
        ),
        b=(0.5, 0.5),
    )


def radau1() -> ButcherTableau:
    """Two-stage Radau IA method, order 3 (collocation at the left endpoint)."""
    return ButcherTableau(
        c=(0.0, 2.0 / 3.0),
        A=((0.25, -0.25), (0.25, 5.0 / 12.0)),
        b=(0.25, 0.75),
    )


def lobatto3c() -> ButcherTableau:
    """Three-stage Lobatto IIIC method, order 4, L-stable."""
    sixth = 1.0 / 6.0
    return ButcherTableau(
        c=(0.0, 0.5, 1.0),
        A=(
            (sixth, -1.0 / 3.0, sixth),
            (sixth, 5.0 / 12.0, -1.0 / 12.0),
            (sixth, 2.0 / 3.0, sixth),
        ),
        b=(sixth, 2.0 / 3.0, sixth),
    )


def _parse_entry(tok: str, where: str) -> float:
    # rationals like 5/12 are parsed exactly, then rounded once
    if "/" in tok:
        try:
            return float(Fraction(tok))
        except (ValueError, ZeroDivisionError) as exc:
            raise TableauFormatError(f"bad rational {tok!r} in {where}") from exc
    try:
        return float(tok)
    except ValueError as exc:
        raise TableauFormatError(f"bad number {tok!r} in {where}") from exc


def load_tableau(source: str) -> ButcherTableau:
    """Parse tableau text.

    Format: first line is the stage count s, the next s lines each hold
    ``c[i]`` followed by the s entries of row i of A, and the last line holds
    the s weights b. Entries may be decimal literals or rationals ``p/q``.
    ``#`` starts a comment; blank lines are skipped.

    Warns (``TableauConsistencyWarning``) when a row sum deviates from c[i]
    or the weights do not sum to 1 by more than 1e-12. Both checks are
    non-fatal: fitted methods fail them legitimately.
    """
    lines = []
    for raw in source.splitlines():
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append(body)
    if not lines:
        raise TableauFormatError("empty tableau text")
    try:
        s = int(lines[0])
    except ValueError:
        raise TableauFormatError(
            f"first line must be the stage count, got {lines[0]!r}"
        ) from None
    if s < 1:
        raise TableauFormatError(f"stage count must be positive, got {s}")
    if len(lines) != s + 2:
        raise TableauFormatError(
            f"expected {s + 2} content lines for s={s}, got {len(lines)}"
        )

    c = []
    A = []
    for i in range(s):
        toks = lines[1 + i].split()
        if len(toks) != s + 1:
            raise TableauFormatError(
                f"stage line {i} has {len(toks)} entries, expected {s + 1}"
            )
        c.append(_parse_entry(toks[0], f"c[{i}]"))
        A.append(
            tuple(_parse_entry(t, f"A[{i}][{j}]") for j, t in enumerate(toks[1:]))
        )
    btoks = lines[s + 1].split()
    if len(btoks) != s:
        raise TableauFormatError(
            f"weight line has {len(btoks)} entries, expected {s}"
        )
    b = tuple(_parse_entry(t, f"b[{j}]") for j, t in enumerate(btoks))

    tab = ButcherTableau(c=tuple(c), A=tuple(A), b=b)
    for i in range(s):
        gap = abs(sum(tab.A[i]) - tab.c[i])
        if gap > ROW_SUM_TOL:
            warnings.warn(
                f"row {i}: |sum(A[{i}]) - c[{i}]| = {gap:.3e}",
                TableauConsistencyWarning,
                stacklevel=2,
            )
    wgap = abs(sum(tab.b) - 1.0)
    if wgap > ROW_SUM_TOL:
        warnings.warn(
            f"weights: |sum(b) - 1| = {wgap:.3e}",
            TableauConsistencyWarning,
            stacklevel=2,
        )
    return tab


def serialize(t: ButcherTableau) -> str:
    """Render a tableau in the ``load_tableau`` text format.

    Floats are written with ``repr`` (shortest round-trip form), so
    ``load_tableau(serialize(t))`` reproduces t bit for bit.
    """
    out = [str(t.s)]
    for ci, row in zip(t.c, t.A):
        out.append(" ".join([repr(ci)] + [repr(a) for a in row]))
    out.append(" ".join(repr(bj) for bj in t.b))
    return "\n".join(out) + "\n"
