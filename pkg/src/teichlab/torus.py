"""Flat-torus model space: marked unit-area flat tori parametrized by the
upper half plane.

A point tau carries the unit-determinant length form Q with
l_tau(p, q)^2 = (p + q*tau_re)^2 + (q*tau_im)^2, all divided by tau_im.
Both the symmetric (Teichmueller/extremal-length) metric and the Thurston
length-ratio metric reduce to a two-by-two pencil problem, so every metric
quantity here has a closed form; enumerated suprema over curve panels are
kept as an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import Foliation, Slope, foliation, slope_array
from .errors import ConvergenceError, InvalidPointError

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class TorusPoint:
    re: float
    im: float

    def __post_init__(self):
        if not (math.isfinite(self.re) and math.isfinite(self.im) and self.im > 0.0):
            raise InvalidPointError(f"torus point needs finite re and im > 0, got {self.re}, {self.im}")

    @property
    def tau(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def from_complex(cls, z: complex) -> "TorusPoint":
        return cls(float(z.real), float(z.imag))


def _form(x: TorusPoint) -> tuple[float, float, float]:
    """Entries (q00, q01, q11) of the unit-determinant length form."""
    return (1.0 / x.im, x.re / x.im, (x.re * x.re + x.im * x.im) / x.im)


def length_form(x: TorusPoint) -> np.ndarray:
    q00, q01, q11 = _form(x)
    return np.array([[q00, q01], [q01, q11]])


def point_from_form(q00: float, q01: float) -> TorusPoint:
    """Invert _form: the point with given first column of the length form."""
    if q00 <= 0.0:
        raise InvalidPointError("length form must be positive definite")
    return TorusPoint(q01 / q00, 1.0 / q00)


def length(x: TorusPoint, c) -> float:
    """Flat length of a curve class (or transverse measure of a direction)."""
    if isinstance(c, Slope):
        p, q = float(c.p), float(c.q)
    elif isinstance(c, Foliation):
        p, q = c.a, c.b
    else:
        p, q = float(c[0]), float(c[1])
    return math.hypot(p + q * x.re, q * x.im) / math.sqrt(x.im)


def extremal_length(x: TorusPoint, c) -> float:
    return length(x, c) ** 2


def _pencil_cosh(fx, fy) -> float:
    """tr(adj(Qy) Qx) = lambda + 1/lambda for the top ratio of the pencil."""
    x00, x01, x11 = fx
    y00, y01, y11 = fy
    return x00 * y11 + x11 * y00 - 2.0 * x01 * y01


def teich_distance(x: TorusPoint, y: TorusPoint) -> float:
    """Symmetric metric: half the log of the top extremal-length ratio."""
    if x.re == y.re and x.im == y.im:
        return 0.0
    c = _pencil_cosh(_form(x), _form(y))
    return 0.5 * math.acosh(max(c / 2.0, 1.0))


def thurston_metric_exact(x: TorusPoint, y: TorusPoint) -> float:
    """log sup of length ratios l_y/l_x; on this model it is symmetric and
    coincides with the extremal-length metric."""
    if x.re == y.re and x.im == y.im:
        return 0.0
    c = _pencil_cosh(_form(y), _form(x))
    return 0.5 * math.acosh(max(c / 2.0, 1.0))


def _ratio_sq(fx, fy, vecs: np.ndarray) -> np.ndarray:
    p = vecs[:, 0].astype(float)
    q = vecs[:, 1].astype(float)
    x00, x01, x11 = fx
    y00, y01, y11 = fy
    num = y00 * p * p + 2.0 * y01 * p * q + y11 * q * q
    den = x00 * p * p + 2.0 * x01 * p * q + x11 * q * q
    return num / den


def thurston_metric_enumerated(x: TorusPoint, y: TorusPoint, max_height: int) -> float:
    """Truncated sup of log length ratios over the height panel."""
    r = _ratio_sq(_form(x), _form(y), slope_array(max_height))
    return 0.5 * math.log(float(r.max()))


def thurston_metric_enumerated_detail(x: TorusPoint, y: TorusPoint, max_height: int):
    """(value, argmax slope, doubling gap).  Gap compares against the
    half-height panel; ties break toward the earliest enumerated slope."""
    vecs = slope_array(max_height)
    r = _ratio_sq(_form(x), _form(y), vecs)
    i = int(np.argmax(r))
    value = 0.5 * math.log(float(r[i]))
    half = thurston_metric_enumerated(x, y, max(1, max_height // 2))
    return value, Slope(int(vecs[i, 0]), int(vecs[i, 1])), value - half


def _dual_sq(f, w0: float, w1: float) -> float:
    """w^T Q^{-1} w for the unit-determinant form (inverse equals adjugate)."""
    q00, q01, q11 = f
    return q11 * w0 * w0 - 2.0 * q01 * w0 * w1 + q00 * w1 * w1


def horofunction(mu: Foliation, x: TorusPoint, x0: TorusPoint) -> float:
    """Boundary horofunction of the length-ratio metric, basepoint x0.

    sup_alpha i(mu, alpha)/l_x(alpha) is attained over projective directions
    and equals the dual norm of the rotated direction, which gives the closed
    form below; lattice directions are projectively dense so the sup over
    curves agrees.
    """
    w0, w1 = -mu.b, mu.a
    sx = _dual_sq(_form(x), w0, w1)
    s0 = _dual_sq(_form(x0), w0, w1)
    return 0.5 * (math.log(sx) - math.log(s0))


def horofunction_enumerated(mu, x: TorusPoint, x0: TorusPoint, max_height: int) -> float:
    """Same quantity by truncated sup over a curve panel (diagnostic route)."""
    vecs = slope_array(max_height).astype(float)
    a, b = (mu.a, mu.b) if isinstance(mu, Foliation) else (float(mu[0]), float(mu[1]))
    inter = np.abs(a * vecs[:, 1] - b * vecs[:, 0])

    def sup_at(pt):
        f = _form(pt)
        l2 = f[0] * vecs[:, 0] ** 2 + 2.0 * f[1] * vecs[:, 0] * vecs[:, 1] + f[2] * vecs[:, 1] ** 2
        return float(np.max(inter / np.sqrt(l2)))

    return math.log(sup_at(x)) - math.log(sup_at(x0))


def horofunction_interior(z: TorusPoint, x: TorusPoint, x0: TorusPoint) -> float:
    return thurston_metric_exact(x, z) - thurston_metric_exact(x0, z)


@dataclass(frozen=True)
class BoundaryHoro:
    """Horofunction descriptor for a boundary direction."""

    mu: Foliation

    def value(self, x: TorusPoint, x0: TorusPoint) -> float:
        return horofunction(self.mu, x, x0)

    def translate(self, g) -> "BoundaryHoro":
        a, b, c, d = g.a, g.b, g.c, g.d
        return BoundaryHoro(foliation(a * self.mu.a + b * self.mu.b, c * self.mu.a + d * self.mu.b))


@dataclass(frozen=True)
class InteriorHoro:
    """Horofunction descriptor for an interior point."""

    z: TorusPoint

    def value(self, x: TorusPoint, x0: TorusPoint) -> float:
        return horofunction_interior(self.z, x, x0)

    def translate(self, g) -> "InteriorHoro":
        return InteriorHoro(apply_matrix_to_point(g, self.z))


def apply_matrix_to_point(m, x: TorusPoint) -> TorusPoint:
    """Point image under a mapping class, so that curve lengths are preserved:
    l_{m.x}(m.s) = l_x(s).  For [[a,b],[c,d]] this is tau -> (a tau - b)/(d - c tau).

    Entries are rescaled by a power of two before conversion, so arbitrarily
    large exact integer matrices are accepted (the action is projective)."""
    a, b, c, d = m.a, m.b, m.c, m.d
    shift = 0
    if isinstance(a, int):
        shift = max(abs(v).bit_length() for v in (a, b, c, d)) - 53
    if shift > 0:
        a, b, c, d = (_int_to_scaled_float(v, shift) for v in (a, b, c, d))
    else:
        shift = 0
        a, b, c, d = float(a), float(b), float(c), float(d)
    tau = complex(x.re, x.im)
    den = complex(d, 0.0) - c * tau
    img = (a * tau - complex(b, 0.0)) / den
    im = math.ldexp(x.im / (abs(den) ** 2), -2 * shift)
    return TorusPoint(float(img.real), float(im))


def _int_to_scaled_float(n: int, shift: int) -> float:
    """float(n / 2**shift) keeping the top bits, exact sign handling."""
    if shift <= 0:
        return float(n)
    mag = float(abs(n) >> shift)
    return -mag if n < 0 else mag


def scaled_unit_matrix(m) -> tuple[np.ndarray, float]:
    """Float copy of an integer matrix divided by a power of two, plus the log
    of that power.  Safe for arbitrarily large integer entries."""
    ent = [int(m.a), int(m.b), int(m.c), int(m.d)] if hasattr(m, "a") else [int(v) for r in m for v in r]
    bits = max(abs(e).bit_length() for e in ent)
    shift = max(bits - 53, 0)
    vals = [_int_to_scaled_float(e, shift) for e in ent]
    scale = max(abs(v) for v in vals)
    arr = np.array([[vals[0], vals[1]], [vals[2], vals[3]]]) / scale
    return arr, math.log(scale) + shift * LOG2


def _sqrt_spd(f) -> tuple[np.ndarray, np.ndarray]:
    """Square root and inverse square root of a unit-determinant SPD form."""
    q00, q01, q11 = f
    t = math.sqrt(q00 + q11 + 2.0)
    root = np.array([[q00 + 1.0, q01], [q01, q11 + 1.0]]) / t
    inv = np.array([[q11 + 1.0, -q01], [-q01, q00 + 1.0]]) / t
    return root, inv


def translate_distance_scaled(arr: np.ndarray, logscale: float, x0: TorusPoint) -> float:
    """L(x0, m.x0) where m = exp(logscale) * arr (arr a float 2x2)."""
    root, inv = _sqrt_spd(_form(x0))
    b = root @ arr @ inv
    fro2 = float(np.sum(b * b))
    det = float(b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0])
    disc = max(fro2 * fro2 - 4.0 * det * det, 0.0)
    smax_sq = 0.5 * (fro2 + math.sqrt(disc))
    return 0.5 * math.log(smax_sq) + logscale


def translate_distance(m, x0: TorusPoint) -> float:
    """L(x0, m.x0) for an integer mapping class, overflow-free in the entries.

    Equals log of the top singular value of Q^{1/2} m^{-1} Q^{-1/2}; with unit
    determinant this is symmetric in m versus m^{-1}.
    """
    arr, logscale = scaled_unit_matrix(m)
    return translate_distance_scaled(arr, logscale, x0)


def log_length_vector(x: TorusPoint, v) -> float:
    """log l_x(v) for an integer vector with entries of any size."""
    p, q = int(v[0]), int(v[1])
    bits = max(abs(p).bit_length(), abs(q).bit_length())
    shift = max(bits - 53, 0)
    pf = _int_to_scaled_float(p, shift)
    qf = _int_to_scaled_float(q, shift)
    return math.log(length(x, (pf, qf))) + shift * LOG2


def horofunction_at_translate(mu: Foliation, m, x0: TorusPoint) -> float:
    """h_mu(m.x0) with basepoint x0, stable for huge integer entries.

    Uses Q_{m.x0}^{-1} = m Q_{x0}^{-1} m^T, so the dual norm is the norm of
    Q^{-1/2} m^T w."""
    arr, logscale = scaled_unit_matrix(m)
    _, inv = _sqrt_spd(_form(x0))
    w = np.array([-mu.b, mu.a])
    y = inv @ (arr.T @ w)
    s0 = _dual_sq(_form(x0), w[0], w[1])
    return 0.5 * (2.0 * math.log(float(np.hypot(y[0], y[1]))) - math.log(s0)) + logscale


def ray_toward(x0: TorusPoint, mu: Foliation, dist: float) -> TorusPoint:
    """Point at the given metric distance from x0 along the geodesic ray that
    pinches the direction mu (the ray converging to mu at infinity)."""
    if dist < 0.0:
        raise InvalidPointError("ray distance must be nonnegative")
    stretch = math.exp(2.0 * dist)
    if mu.b == 0.0:
        return TorusPoint(x0.re, x0.im * stretch)
    r = -mu.a / mu.b
    # send r to infinity by w = 1/(r - tau), walk straight up, come back
    w = 1.0 / (complex(r, 0.0) - x0.tau)
    w = complex(w.real, w.imag * stretch)
    back = complex(r, 0.0) - 1.0 / w
    return TorusPoint(float(back.real), float(back.imag))


@dataclass(frozen=True)
class GMBoundaryPoint:
    """Limit of normalized square-root extremal lengths along an escaping
    family: E(beta) = lim Ext^{1/2}(beta) * exp(-d(x0, x_t)).

    The limit is stored as the PSD matrix of E^2 (rank one when the family
    follows a ray), plus the values on the three basis slopes as a scale
    record."""

    direction: Foliation
    matrix: tuple[tuple[float, float], tuple[float, float]]
    basis_values: tuple[float, float, float]

    def extremal(self, c) -> float:
        if isinstance(c, Slope):
            p, q = float(c.p), float(c.q)
        elif isinstance(c, Foliation):
            p, q = c.a, c.b
        else:
            p, q = float(c[0]), float(c[1])
        (m00, m01), (_, m11) = self.matrix
        return math.sqrt(max(m00 * p * p + 2.0 * m01 * p * q + m11 * q * q, 0.0))

    def extremal_panel(self, max_height: int) -> np.ndarray:
        vecs = slope_array(max_height).astype(float)
        (m00, m01), (_, m11) = self.matrix
        vals = m00 * vecs[:, 0] ** 2 + 2.0 * m01 * vecs[:, 0] * vecs[:, 1] + m11 * vecs[:, 1] ** 2
        return np.sqrt(np.maximum(vals, 0.0))


def _gm_from_scaled_form(m: np.ndarray) -> GMBoundaryPoint:
    evals, evecs = np.linalg.eigh(m)
    w = evecs[:, int(np.argmax(evals))]
    mu = foliation(float(w[1]), float(-w[0]))  # w is the rotated covector
    basis = []
    for p, q in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
        basis.append(math.sqrt(max(m[0, 0] * p * p + 2.0 * m[0, 1] * p * q + m[1, 1] * q * q, 0.0)))
    return GMBoundaryPoint(
        direction=mu,
        matrix=((float(m[0, 0]), float(m[0, 1])), (float(m[0, 1]), float(m[1, 1]))),
        basis_values=tuple(basis),
    )


def gm_boundary_from_ray(mu: Foliation, x0: TorusPoint, budget: int = 60, tol: float = 1e-8,
                         panel_height: int = 10) -> GMBoundaryPoint:
    """Boundary limit along the ray toward mu, computed numerically with a
    successive-step diagnostic on a curve panel (no limit shape is assumed)."""
    vecs = slope_array(panel_height).astype(float)
    prev_panel = None
    prev_m = None
    for k in range(1, budget + 1):
        d = k * LOG2
        x = ray_toward(x0, mu, d)
        f = _form(x)
        scale = math.exp(-2.0 * d)
        m = np.array([[f[0], f[1]], [f[1], f[2]]]) * scale
        vals = m[0, 0] * vecs[:, 0] ** 2 + 2.0 * m[0, 1] * vecs[:, 0] * vecs[:, 1] + m[1, 1] * vecs[:, 1] ** 2
        panel = np.sqrt(np.maximum(vals, 0.0))
        if prev_panel is not None and float(np.max(np.abs(panel - prev_panel))) < tol:
            return _gm_from_scaled_form(m)
        prev_panel, prev_m = panel, m
    raise ConvergenceError("boundary limit did not settle within budget",
                           partial={"panel": prev_panel, "matrix": prev_m})


def boundary_sup_ratio(point: GMBoundaryPoint, x0: TorusPoint, max_height: int | None = None) -> float:
    """sup over curves of E(alpha) / Ext_{x0}(alpha)^{1/2}; closed form via the
    pencil when max_height is None, truncated sup otherwise."""
    (m00, m01), (_, m11) = point.matrix
    if max_height is None:
        f = _form(x0)
        inv = (f[2], -f[1], f[0])
        # top generalized eigenvalue of the pencil (M, Q) via Q^{-1} M
        a = inv[0] * m00 + inv[1] * m01
        b_ = inv[1] * m00 + inv[2] * m01
        c_ = inv[0] * m01 + inv[1] * m11
        dd = inv[1] * m01 + inv[2] * m11
        tr = a + dd
        det = a * dd - b_ * c_
        lam = 0.5 * (tr + math.sqrt(max(tr * tr - 4.0 * det, 0.0)))
        return math.sqrt(max(lam, 0.0))
    vecs = slope_array(max_height).astype(float)
    e = point.extremal_panel(max_height)
    f = _form(x0)
    l2 = f[0] * vecs[:, 0] ** 2 + 2.0 * f[1] * vecs[:, 0] * vecs[:, 1] + f[2] * vecs[:, 1] ** 2
    return float(np.max(e / np.sqrt(l2)))


def boundary_inf_ratio(point: GMBoundaryPoint, x: TorusPoint, max_height: int = 200) -> float:
    """inf over curves of Ext_x(alpha)^{1/2} / E(alpha), skipping directions
    where E vanishes; equals 1/boundary_sup_ratio at the basepoint."""
    vecs = slope_array(max_height).astype(float)
    e = point.extremal_panel(max_height)
    f = _form(x)
    l2 = f[0] * vecs[:, 0] ** 2 + 2.0 * f[1] * vecs[:, 0] * vecs[:, 1] + f[2] * vecs[:, 1] ** 2
    mask = e > 1e-9
    if not mask.any():
        raise InvalidPointError("boundary function vanishes on the whole panel")
    return float(np.min(np.sqrt(l2[mask]) / e[mask]))


def gm_horofunction(point: GMBoundaryPoint, y: TorusPoint, x0: TorusPoint) -> float:
    """log sup E/Ext_y^{1/2} minus the same sup at the basepoint."""
    return math.log(boundary_sup_ratio(point, y)) - math.log(boundary_sup_ratio(point, x0))
