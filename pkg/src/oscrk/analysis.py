"""Linear analysis of Runge-Kutta methods on the oscillatory test equation.

Everything here derives from the amplification factor

    P(z) = det(I - z*B) / det(I - z*A),   B_ij = A_ij - b_j,

which for any RK method coincides with the classical stability function
R(z) = 1 + z*b^T (I - z*A)^{-1} e  (matrix determinant lemma applied to the
rank-one update I - z*B = I - z*A + z*e*b^T).

Conventions that matter:

* ``phase_lag(T, v)`` returns v - arg P(iv) with the argument unwrapped
  continuously along the ray from 0 to v, then reduced modulo pi onto
  (-pi/2, pi/2]. The mod-pi reduction is intrinsic: the dispersion fitting
  condition is a condition on tan(arg P), so a method that is exactly
  in antiphase (P * e^{-iv} real and negative) still has zero phase lag.
* ``dissipation(T, v)`` is 1 - |P(iv)|; negative values mean amplification.
* Residuals are reported as computed minus target, e.g. the first order
  residual is sum(b) - 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .tableau import ButcherTableau

__all__ = [
    "AmplificationFactor",
    "ResidualSet",
    "SingularMatrix",
    "amplification",
    "stability_function",
    "phase_lag",
    "dissipation",
    "order_residuals",
    "symplecticity_residuals",
    "residual_set",
    "stability_region_boundary",
    "stability_polynomials",
]

SINGULAR_DET_FLOOR = 1e-300

# resolution of the argument-continuation ray: step in v kept under pi/16,
# half the pi/8 jump bound, so a doubling retry has headroom
_RAY_STEP = math.pi / 16.0


class SingularMatrix(Exception):
    """det(I - z*A) vanished (to below 1e-300) at the requested point."""


@dataclass(frozen=True)
class AmplificationFactor:
    """Value of P(z) with its real and imaginary parts broken out."""

    value: complex
    re: float
    im: float


@dataclass(frozen=True)
class ResidualSet:
    """Order residuals (8, through order 4) and symplecticity residuals (3)."""

    order: tuple[float, ...]
    symplectic: tuple[float, ...]


def _dets(t: ButcherTableau, z: complex) -> tuple[complex, complex]:
    c, A, b = t.arrays()
    s = t.s
    eye = np.eye(s)
    B = A - b[None, :]
    dn = complex(np.linalg.det(eye - z * B))
    dd = complex(np.linalg.det(eye - z * A))
    return dn, dd


def amplification(t: ButcherTableau, z: complex) -> AmplificationFactor:
    """P(z) = det(I - z*B)/det(I - z*A) with B_ij = A_ij - b_j.

    Raises SingularMatrix when |det(I - z*A)| < 1e-300.
    """
    dn, dd = _dets(t, complex(z))
    if abs(dd) < SINGULAR_DET_FLOOR:
        raise SingularMatrix(f"det(I - z*A) = {dd!r} at z = {z!r}")
    p = dn / dd
    return AmplificationFactor(value=p, re=p.real, im=p.imag)


def stability_function(t: ButcherTableau, z: complex) -> complex:
    """R(z), identical to the amplification factor P(z)."""
    return amplification(t, z).value


def _arg_along_ray(t: ButcherTableau, v: float) -> float:
    """arg P(iv) unwrapped continuously from P(0) = 1 (arg 0)."""
    m = max(32, int(math.ceil(abs(v) / _RAY_STEP)))
    for _ in range(7):
        vs = np.linspace(0.0, v, m + 1)[1:]
        theta = 0.0
        prev = complex(1.0, 0.0)
        ok = True
        for vk in vs:
            try:
                pk = amplification(t, 1j * vk).value
            except SingularMatrix:
                # pole exactly on a sample: nudge by half the local spacing
                pk = amplification(t, 1j * (vk + 0.5 * v / m)).value
            dth = np.angle(pk / prev)
            if abs(dth) > math.pi / 2:
                ok = False
                break
            theta += dth
            prev = pk
        if ok:
            return theta
        m *= 2
    raise ValueError(
        f"argument of P(iv) jumps by more than pi/2 between refined samples "
        f"on [0, {v}]; P passes through or very near zero on the ray"
    )


def phase_lag(t: ButcherTableau, v: float) -> float:
    """Dispersion error v - arg P(iv), reduced mod pi onto (-pi/2, pi/2].

    The argument is continued along the ray 0 -> v, so full turns are
    counted; the final mod-pi reduction then removes the in-phase/antiphase
    distinction, matching the tan-based dispersion condition. Odd in v.
    """
    if v == 0.0:
        return 0.0
    if v < 0.0:
        return -phase_lag(t, -v)
    raw = v - _arg_along_ray(t, v)
    r = math.remainder(raw, math.pi)
    if r <= -math.pi / 2:
        r += math.pi
    return r


def dissipation(t: ButcherTableau, v: float) -> float:
    """Amplitude error 1 - |P(iv)|. Even in v; negative means growth."""
    return 1.0 - abs(amplification(t, 1j * v).value)


def order_residuals(t: ButcherTableau) -> np.ndarray:
    """The eight order conditions through order 4, as computed - target.

    Order of the entries (quadrature conditions first, then the coupled
    ones at each order):

        1: b.e        - 1
        2: b.c        - 1/2
        3: b.c^2      - 1/3
        4: b.(Ac)     - 1/6
        5: b.c^3      - 1/4
        6: b.(c*Ac)   - 1/8
        7: b.(A c^2)  - 1/12
        8: b.(A A c)  - 1/24
    """
    c, A, b = t.arrays()
    Ac = A @ c
    r = np.empty(8)
    r[0] = b.sum() - 1.0
    r[1] = b @ c - 0.5
    r[2] = b @ (c * c) - 1.0 / 3.0
    r[3] = b @ Ac - 1.0 / 6.0
    r[4] = b @ (c * c * c) - 0.25
    r[5] = b @ (c * Ac) - 0.125
    r[6] = b @ (A @ (c * c)) - 1.0 / 12.0
    r[7] = b @ (A @ Ac) - 1.0 / 24.0
    return r


def symplecticity_residuals(t: ButcherTableau) -> np.ndarray:
    """Entries (1,1), (2,2), (1,2) of M_ij = b_i A_ij + b_j A_ji - b_i b_j.

    M = 0 is the symplecticity condition; the returned entries are the
    residuals themselves (target 0).
    """
    if t.s < 2:
        raise ValueError("symplecticity residuals need at least two stages")
    c, A, b = t.arrays()
    bA = b[:, None] * A
    M = bA + bA.T - np.outer(b, b)
    return np.array([M[0, 0], M[1, 1], M[0, 1]])


def residual_set(t: ButcherTableau) -> ResidualSet:
    return ResidualSet(
        order=tuple(order_residuals(t)),
        symplectic=tuple(symplecticity_residuals(t)),
    )


# ---------------------------------------------------------------------------
# stability region


def _principal_minor_sums(M: np.ndarray) -> np.ndarray:
    """e_k = sum of k-by-k principal minors of M, k = 0..s."""
    s = M.shape[0]
    e = np.zeros(s + 1)
    e[0] = 1.0
    for k in range(1, s + 1):
        acc = 0.0
        for idx in itertools.combinations(range(s), k):
            sub = M[np.ix_(idx, idx)]
            if k == 1:
                acc += sub[0, 0]
            elif k == 2:
                acc += sub[0, 0] * sub[1, 1] - sub[0, 1] * sub[1, 0]
            else:
                acc += float(np.linalg.det(sub))
        e[k] = acc
    return e


def stability_polynomials(t: ButcherTableau) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (ascending in z) of det(I - z*B) and det(I - z*A).

    det(I - z*M) = sum_k e_k(M) (-z)^k, so coefficient k is (-1)^k e_k.
    Lets grids evaluate R(z) without a determinant per point.
    """
    c, A, b = t.arrays()
    B = A - b[None, :]
    en = _principal_minor_sums(B)
    ed = _principal_minor_sums(A)
    sign = (-1.0) ** np.arange(len(ed))
    return en * sign, ed * sign


def _polyval_grid(coeffs: np.ndarray, Z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(Z)
    for ck in coeffs[::-1]:
        out = out * Z + ck
    return out


def modulus_field(
    t: ButcherTableau,
    window: tuple[float, float, float, float],
    resolution: int | tuple[int, int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|num| - |den| of R on a grid; same sign as |R| - 1, finite everywhere.

    Returns (x, y, G) with G[j, i] the field at x[i] + i*y[j].
    """
    if isinstance(resolution, int):
        nx = ny = resolution
    else:
        nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 in each direction")
    re0, re1, im0, im1 = window
    if not (re1 > re0 and im1 > im0):
        raise ValueError(f"empty window {window!r}")
    x = np.linspace(re0, re1, nx)
    y = np.linspace(im0, im1, ny)
    Z = x[None, :] + 1j * y[:, None]
    cn, cd = stability_polynomials(t)
    G = np.abs(_polyval_grid(cn.astype(complex), Z)) - np.abs(
        _polyval_grid(cd.astype(complex), Z)
    )
    return x, y, G


def _resolve_method(method) -> ButcherTableau:
    if isinstance(method, ButcherTableau):
        return method
    if hasattr(method, "kind") and hasattr(method, "v"):
        from .fitting import fit_tableau  # deferred to avoid an import cycle

        return fit_tableau(method)
    raise TypeError(
        f"expected a ButcherTableau or a fitted-method spec, got {type(method).__name__}"
    )


def stability_region_boundary(
    method,
    window: tuple[float, float, float, float] = (-20.0, 20.0, -20.0, 20.0),
    resolution: int | tuple[int, int] = 800,
) -> list[np.ndarray]:
    """Polylines of the curve |R(z)| = 1 inside the window.

    Marching squares on the sign field of |num(z)| - |den(z)| (same zero set
    as |R| - 1 but finite at poles of R), cell edges interpolated linearly.
    Each polyline is an (n, 2) array of (Re z, Im z); closed curves repeat
    their first point at the end. Output is deterministic for fixed inputs.

    ``method`` is a ButcherTableau or a fitted-method spec (kind plus v).
    """
    t = _resolve_method(method)
    x, y, G = modulus_field(t, window, resolution)
    segments = _marching_squares(x, y, G)
    return _chain_segments(segments)


def _edge_point(xa, ya, ga, xb, yb, gb):
    # linear zero crossing between corners a and b
    d = ga - gb
    t = 0.5 if d == 0.0 else ga / d
    t = min(1.0, max(0.0, t))
    return (xa + t * (xb - xa), ya + t * (yb - ya))


def _marching_squares(x, y, G):
    """Segments of the zero contour, endpoints keyed by grid edge ids.

    Edge ids: ("h", i, j) is the horizontal edge from (i, j) to (i+1, j),
    ("v", i, j) the vertical edge from (i, j) to (i, j+1), with i the x
    index and j the y index. Exact keys make chaining robust; no float
    rounding is involved.
    """
    nx = len(x)
    ny = len(y)
    inside = G > 0.0
    segs = []

    for j in range(ny - 1):
        for i in range(nx - 1):
            c00 = inside[j, i]
            c10 = inside[j, i + 1]
            c01 = inside[j + 1, i]
            c11 = inside[j + 1, i + 1]
            code = (c00, c10, c11, c01)
            if code == (False, False, False, False) or code == (True, True, True, True):
                continue

            g00 = G[j, i]
            g10 = G[j, i + 1]
            g01 = G[j + 1, i]
            g11 = G[j + 1, i + 1]

            def pt(edge):
                if edge == "bottom":
                    return _edge_point(x[i], y[j], g00, x[i + 1], y[j], g10), ("h", i, j)
                if edge == "top":
                    return _edge_point(x[i], y[j + 1], g01, x[i + 1], y[j + 1], g11), ("h", i, j + 1)
                if edge == "left":
                    return _edge_point(x[i], y[j], g00, x[i], y[j + 1], g01), ("v", i, j)
                return _edge_point(x[i + 1], y[j], g10, x[i + 1], y[j + 1], g11), ("v", i + 1, j)

            crossed = []
            if c00 != c10:
                crossed.append("bottom")
            if c10 != c11:
                crossed.append("right")
            if c01 != c11:
                crossed.append("top")
            if c00 != c01:
                crossed.append("left")

            if len(crossed) == 2:
                (p0, e0), (p1, e1) = pt(crossed[0]), pt(crossed[1])
                segs.append((e0, p0, e1, p1))
            elif len(crossed) == 4:
                # saddle: pair edges by the sign of the cell centre
                centre_inside = (g00 + g10 + g01 + g11) > 0.0
                if centre_inside == c00:
                    pairs = (("bottom", "right"), ("top", "left"))
                else:
                    pairs = (("bottom", "left"), ("top", "right"))
                for ea, eb in pairs:
                    (p0, e0), (p1, e1) = pt(ea), pt(eb)
                    segs.append((e0, p0, e1, p1))
    return segs


def _chain_segments(segs) -> list[np.ndarray]:
    """Join marching-squares segments sharing grid edges into polylines.

    A grid edge carries at most one zero crossing and both adjacent cells
    interpolate it from the same corner pair, so shared endpoints match
    bitwise and closed curves end exactly on their first point.
    """
    by_edge: dict = {}
    for k, (e0, _, e1, _) in enumerate(segs):
        by_edge.setdefault(e0, []).append(k)
        by_edge.setdefault(e1, []).append(k)

    used = [False] * len(segs)
    curves = []

    def grow(edge, pts, append):
        # follow unused segments away from `edge`, collecting points
        while True:
            cands = [j for j in by_edge.get(edge, ()) if not used[j]]
            if not cands:
                return edge, False
            j = cands[0]
            used[j] = True
            a0, q0, a1, q1 = segs[j]
            if edge == a0:
                append(q1)
                edge = a1
            else:
                append(q0)
                edge = a0
            if edge == start_edge:
                return edge, True  # loop closed

    for k in range(len(segs)):
        if used[k]:
            continue
        used[k] = True
        e0, p0, e1, p1 = segs[k]
        pts = [p0, p1]
        start_edge = e0
        _, closed = grow(e1, pts, pts.append)
        if not closed:
            head: list = []
            start_edge = None  # open chain: no closure check on this side
            grow(e0, head, head.append)
            pts = head[::-1] + pts
        curves.append(np.array(pts))
    return curves
