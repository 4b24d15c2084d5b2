"""Once-punctured-torus model space: complete hyperbolic structures encoded
as Markov trace triples (tx, ty, tz), the traces of the curves of slopes
(0,1), (1,0), (1,1).  Valid triples have all traces > 2 and satisfy
tx^2 + ty^2 + tz^2 = tx*ty*tz.

The trace of any other slope follows from the Farey recursion
t(child) = t(parentA)*t(parentB) - t(coparent); traces grow doubly
exponentially under mapping classes, so arithmetic switches to log scale
above a threshold.  Hyperbolic length is l = 2*arccosh(t/2).

There is no closed form for the Thurston metric here; suprema are enumerated
over slope panels with a doubling diagnostic, which is where the metric's
genuine asymmetry becomes visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .curves import (
    Foliation,
    Slope,
    canonicalize_slope,
    farey_enumerate,
    farey_parents,
    slope_array,
)
from .errors import InvalidCurveError, InvalidMappingClassError, InvalidPointError

LOG2 = math.log(2.0)

# Direct float representation is kept below this; log representation above.
TRACE_SWITCH = 1e8
_LOG_SWITCH = math.log(TRACE_SWITCH)

_S01 = Slope(0, 1)
_S10 = Slope(1, 0)
_S11 = Slope(1, 1)
_SM11 = Slope(-1, 1)


@dataclass(frozen=True)
class LogTrace:
    """A curve trace, tagged by representation: the value itself while it is
    below TRACE_SWITCH, its natural log above."""

    value: float
    is_log: bool

    @property
    def log(self) -> float:
        return self.value if self.is_log else math.log(self.value)

    @property
    def trace(self) -> float:
        """The trace as a float; overflows to inf far beyond the switch."""
        if not self.is_log:
            return self.value
        try:
            return math.exp(self.value)
        except OverflowError:
            return math.inf


def trace_from_value(t: float) -> LogTrace:
    if not (t > 2.0):
        raise InvalidPointError(f"trace must exceed 2, got {t}")
    if t >= TRACE_SWITCH:
        return LogTrace(math.log(t), True)
    return LogTrace(float(t), False)


def trace_from_log(u: float) -> LogTrace:
    if not (u > LOG2):
        raise InvalidPointError(f"log-trace must exceed log 2, got {u}")
    if u >= _LOG_SWITCH:
        return LogTrace(float(u), True)
    return LogTrace(math.exp(u), False)


def combine(a: LogTrace, b: LogTrace, d: LogTrace, mode: str = "hybrid") -> LogTrace:
    """Edge flip t(child) = t(a)*t(b) - t(d) across the Farey edge (a, b).

    When the child is the small root of the edge quadratic the subtraction
    cancels; the conjugate-root identity t(child)*t(d) = t(a)^2 + t(b)^2
    (exact for genuine triangles) gives a stable division form, so the
    computation switches between the two.  mode "hybrid" uses direct floats
    while all operands are direct and log arithmetic otherwise; "direct"
    forces naive float subtraction (overflow- and cancellation-prone, kept
    for dual-path tests); "log" forces log arithmetic throughout.
    """
    if mode == "direct":
        return trace_from_value(a.trace * b.trace - d.trace)
    if mode == "hybrid" and not (a.is_log or b.is_log or d.is_log):
        prod = a.value * b.value
        if d.value <= 0.5 * prod:
            return trace_from_value(prod - d.value)
        return trace_from_value((a.value * a.value + b.value * b.value) / d.value)
    ua, ub, ud = a.log, b.log, d.log
    r = ud - ua - ub
    if r <= -LOG2:
        u = ua + ub + math.log1p(-math.exp(r))
    else:
        m = max(2.0 * ua, 2.0 * ub)
        u = m + math.log1p(math.exp(-abs(2.0 * ua - 2.0 * ub))) - ud
    return trace_from_log(u)


def _as_log_trace(t) -> LogTrace:
    if isinstance(t, LogTrace):
        return t
    return trace_from_value(float(t))


@dataclass(frozen=True)
class FrickePoint:
    """Marked hyperbolic structure as the trace triple of the basis slopes
    (0,1), (1,0), (1,1)."""

    tx: LogTrace
    ty: LogTrace
    tz: LogTrace

    def __post_init__(self):
        for name in ("tx", "ty", "tz"):
            object.__setattr__(self, name, _as_log_trace(getattr(self, name)))

    @classmethod
    def from_traces(cls, tx: float, ty: float, tz: float, tol: float = 1e-6) -> "FrickePoint":
        """Validated constructor: checks the Markov identity to tol (relative)."""
        pt = cls(tx, ty, tz)
        r = markov_residual(pt)
        if r > tol:
            raise InvalidPointError(f"Markov identity violated: relative residual {r:.3e}")
        return pt

    def basis_traces(self) -> tuple[float, float, float]:
        return (self.tx.trace, self.ty.trace, self.tz.trace)


def markov_residual(x: FrickePoint) -> float:
    """|tx^2+ty^2+tz^2 - tx*ty*tz| / (tx*ty*tz), computed from log traces so
    the result stays meaningful for astronomically large traces."""
    ux, uy, uz = x.tx.log, x.ty.log, x.tz.log
    s = ux + uy + uz
    return abs(math.exp(2.0 * ux - s) + math.exp(2.0 * uy - s) + math.exp(2.0 * uz - s) - 1.0)


def from_two_traces(tx: float, ty: float, branch: str = "plus") -> FrickePoint:
    """Solve the Markov identity for tz given tx, ty (quadratic; two branches)."""
    if tx <= 2.0 or ty <= 2.0:
        raise InvalidPointError("basis traces must exceed 2")
    disc = (tx * ty) ** 2 - 4.0 * (tx * tx + ty * ty)
    if disc < 0.0:
        raise InvalidPointError(f"no real solution for tz: discriminant {disc:.3e} < 0")
    root = math.sqrt(disc)
    tz = (tx * ty + root) / 2.0 if branch == "plus" else (tx * ty - root) / 2.0
    return FrickePoint.from_traces(tx, ty, tz, tol=1e-9)


def _base_table(x: FrickePoint, mode: str) -> dict[Slope, LogTrace]:
    return {
        _S01: x.tx,
        _S10: x.ty,
        _S11: x.tz,
        _SM11: combine(x.tx, x.ty, x.tz, mode),
    }


def _walk_state(x: FrickePoint, s: Slope, mode: str, memo: dict | None):
    """Subtractive Stern-Brocot walk to the triangle whose deepest vertex is s.

    Returns ((vL, tL), (vR, tR), (vM, tM)) with vM the vector of s and
    vM = vL + vR; coefficients of the target in the (L, R) frame shrink by
    one subtraction per step (Farey mediant descent).
    """
    if s.p >= 0:
        vL, vR = (0, 1), (1, 0)
        tL, tR, tM = x.tx, x.ty, x.tz
        a, b = s.q, s.p
    else:
        vL, vR = (0, 1), (-1, 0)
        tL, tR = x.tx, x.ty
        tM = combine(x.tx, x.ty, x.tz, mode)
        a, b = s.q, -s.p
    while not (a == 1 and b == 1):
        if a > b:
            vR = (vL[0] + vR[0], vL[1] + vR[1])
            key = canonicalize_slope(vL[0] + vR[0], vL[1] + vR[1])
            # the new mediant L+M has coparent the old R
            if memo is not None and key in memo:
                tnew = memo[key]
            else:
                tnew = combine(tL, tM, tR, mode)
                if memo is not None:
                    memo[key] = tnew
            tR, tM = tM, tnew
            a -= b
        else:
            vL = (vL[0] + vR[0], vL[1] + vR[1])
            key = canonicalize_slope(vL[0] + vR[0], vL[1] + vR[1])
            if memo is not None and key in memo:
                tnew = memo[key]
            else:
                tnew = combine(tR, tM, tL, mode)
                if memo is not None:
                    memo[key] = tnew
            tL, tM = tM, tnew
            b -= a
    return (vL, tL), (vR, tR), ((vL[0] + vR[0], vL[1] + vR[1]), tM)


def trace_of_slope(x: FrickePoint, s: Slope, mode: str = "hybrid", memo: dict | None = None) -> LogTrace:
    """Trace of the curve of slope s via the Farey recursion.

    memo, if given, caches traces keyed by slope across calls within a single
    enclosing operation (the tree makes naive recursion exponential).
    """
    if not isinstance(s, Slope):
        raise InvalidCurveError(f"expected a canonical Slope, got {s!r}")
    base = _base_table(x, mode)
    if s in base:
        return base[s]
    if memo is not None and s in memo:
        return memo[s]
    _, _, (vm, tm) = _walk_state(x, s, mode, memo)
    assert canonicalize_slope(vm[0], vm[1]) == s
    if memo is not None:
        memo[s] = tm
    return tm


def length_of_trace(t: LogTrace) -> float:
    """Hyperbolic length 2*arccosh(t/2), stable in both representations."""
    if not t.is_log:
        return 2.0 * math.acosh(t.value / 2.0)
    u = t.value
    return 2.0 * (u - LOG2 + math.log1p(math.sqrt(max(1.0 - 4.0 * math.exp(-2.0 * u), 0.0))))


def hyp_length(x: FrickePoint, s: Slope, mode: str = "hybrid", memo: dict | None = None) -> float:
    return length_of_trace(trace_of_slope(x, s, mode, memo))


def _matrix_entries(g) -> tuple[int, int, int, int]:
    if hasattr(g, "a"):
        a, b, c, d = int(g.a), int(g.b), int(g.c), int(g.d)
    else:
        (a, b), (c, d) = g
        a, b, c, d = int(a), int(b), int(c), int(d)
    if a * d - b * c != 1:
        raise InvalidMappingClassError(f"mapping class must have determinant +1, got {a*d-b*c}")
    return a, b, c, d


def apply_mapping_class(x: FrickePoint, g, mode: str = "hybrid") -> FrickePoint:
    """Pullback action: the new point has t'(s) = t_x(g^{-1} s) on the basis.

    The three preimage slopes form a Farey triangle, so a single walk to its
    deepest vertex yields a coherent triple (the Markov identity is preserved
    exactly by construction, up to roundoff)."""
    a, b, c, d = _matrix_entries(g)
    inv = ((d, -b), (-c, a))
    pre = []
    for (p, q) in ((0, 1), (1, 0), (1, 1)):
        pre.append(canonicalize_slope(inv[0][0] * p + inv[0][1] * q, inv[1][0] * p + inv[1][1] * q))
    base = _base_table(x, mode)
    if all(s in base for s in pre):
        table = base
    else:
        deepest = max(pre, key=lambda s: s.height)
        tri = farey_parents(deepest)
        if {tri.parent_a, tri.parent_b} != set(pre) - {deepest}:
            raise InvalidMappingClassError("preimage slopes do not form a Farey triangle")
        (vl, tl), (vr, tr), (vm, tm) = _walk_state(x, deepest, mode, None)
        table = {
            canonicalize_slope(*vl): tl,
            canonicalize_slope(*vr): tr,
            canonicalize_slope(*vm): tm,
        }
    return FrickePoint(table[pre[0]], table[pre[1]], table[pre[2]])


@lru_cache(maxsize=4)
def _trace_schedule(max_height: int):
    """Levelized Farey-recursion schedule: per height level, index arrays
    (child, parentA, parentB, coparent) into the enumeration order.  Parents
    and coparents of a height-h child (h >= 2) always sit at strictly smaller
    height, so level-by-level evaluation is well-founded."""
    slopes = tuple(farey_enumerate(max_height))
    index = {s: i for i, s in enumerate(slopes)}
    base = {_S01, _S10, _S11}
    by_height: dict[int, list[tuple[int, int, int, int]]] = {}
    for s in slopes:
        if s in base:
            continue
        tri = farey_parents(s)
        h = s.height
        if h >= 2:
            assert tri.parent_a.height < h and tri.parent_b.height < h and tri.coparent.height < h
        by_height.setdefault(h, []).append(
            (index[s], index[tri.parent_a], index[tri.parent_b], index[tri.coparent])
        )
    levels = []
    for h in sorted(by_height):
        rows = np.array(by_height[h], dtype=np.int64)
        levels.append((rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3]))
    return slopes, index, levels


def log_trace_table(x: FrickePoint, max_height: int) -> np.ndarray:
    """log traces of every slope in farey_enumerate(max_height) order,
    evaluated level-by-level in log arithmetic (vectorized)."""
    slopes, index, levels = _trace_schedule(max_height)
    u = np.empty(len(slopes))
    u[index[_S01]] = x.tx.log
    u[index[_S10]] = x.ty.log
    u[index[_S11]] = x.tz.log
    for ci, ai, bi, di in levels:
        ua, ub, ud = u[ai], u[bi], u[di]
        s = ua + ub
        r = ud - s
        with np.errstate(divide="ignore", invalid="ignore"):
            sub = s + np.log1p(-np.exp(r))
        conj = np.logaddexp(2.0 * ua, 2.0 * ub) - ud
        u[ci] = np.where(r <= -LOG2, sub, conj)
    if not np.all(u > LOG2):
        raise InvalidPointError("trace recursion produced a trace <= 2")
    return u


def length_table(x: FrickePoint, max_height: int) -> np.ndarray:
    """Hyperbolic lengths over the height panel, from the log-trace table."""
    u = log_trace_table(x, max_height)
    return 2.0 * (u - LOG2 + np.log1p(np.sqrt(np.maximum(1.0 - 4.0 * np.exp(-2.0 * u), 0.0))))


@dataclass(frozen=True)
class MetricEstimate:
    """Truncated-sup estimate of log max length ratio, with the argmax slope
    and the change from the half-height panel as a convergence diagnostic."""

    value: float
    argmax: Slope
    gap: float
    status: str

    def __float__(self) -> float:
        return self.value


_GAP_ACCEPT = 1e-3


def thurston_metric_enumerated(x: FrickePoint, y: FrickePoint, max_height: int) -> MetricEstimate:
    """log max over the panel of l_y(alpha)/l_x(alpha).  Ties break toward the
    earliest slope in enumeration order."""
    if max_height < 1:
        raise InvalidCurveError("max_height must be >= 1")
    slopes, _, _ = _trace_schedule(max_height)
    ratios = np.log(length_table(y, max_height)) - np.log(length_table(x, max_height))
    i = int(np.argmax(ratios))
    value = float(ratios[i])
    n_half = len(farey_enumerate(max(1, max_height // 2)))
    half = float(np.max(ratios[:n_half]))
    gap = value - half
    return MetricEstimate(value, slopes[i], gap, "ok" if gap < _GAP_ACCEPT else "unconverged")


@dataclass(frozen=True)
class HoroEstimate:
    value: float
    gap: float
    status: str

    def __float__(self) -> float:
        return self.value


def horofunction_estimate(mu, x: FrickePoint, x0: FrickePoint, max_height: int) -> HoroEstimate:
    """Boundary horofunction estimate log sup i(mu,.)/l_x - log sup i(mu,.)/l_x0,
    both suprema truncated at the same height.  Scale of mu cancels exactly."""
    vecs = slope_array(max_height).astype(float)
    a, b = (mu.a, mu.b) if isinstance(mu, Foliation) else (float(mu[0]), float(mu[1]))
    inter = np.abs(a * vecs[:, 1] - b * vecs[:, 0])
    n_half = len(farey_enumerate(max(1, max_height // 2)))
    with np.errstate(divide="ignore"):
        rx = np.log(inter) - np.log(length_table(x, max_height))
        r0 = np.log(inter) - np.log(length_table(x0, max_height))
    value = float(np.max(rx) - np.max(r0))
    half = float(np.max(rx[:n_half]) - np.max(r0[:n_half]))
    gap = abs(value - half)
    return HoroEstimate(value, gap, "ok" if gap < _GAP_ACCEPT else "unconverged")


class BoundaryHoroEstimate:
    """Horofunction descriptor for a boundary direction on this model
    (enumerated; carries its truncation height)."""

    def __init__(self, mu: Foliation, max_height: int = 100):
        self.mu = mu
        self.max_height = max_height

    def value(self, x: FrickePoint, x0: FrickePoint) -> float:
        return horofunction_estimate(self.mu, x, x0, self.max_height).value

    def translate(self, g) -> "BoundaryHoroEstimate":
        a, b, c, d = _matrix_entries(g)
        from .curves import foliation

        return BoundaryHoroEstimate(
            foliation(a * self.mu.a + b * self.mu.b, c * self.mu.a + d * self.mu.b), self.max_height
        )


class InteriorHoroEstimate:
    """Horofunction descriptor h_z(x) = L(x,z) - L(x0,z) (enumerated)."""

    def __init__(self, z: FrickePoint, max_height: int = 100):
        self.z = z
        self.max_height = max_height

    def value(self, x: FrickePoint, x0: FrickePoint) -> float:
        return (
            thurston_metric_enumerated(x, self.z, self.max_height).value
            - thurston_metric_enumerated(x0, self.z, self.max_height).value
        )

    def translate(self, g) -> "InteriorHoroEstimate":
        return InteriorHoroEstimate(apply_mapping_class(self.z, g), self.max_height)


@dataclass(frozen=True)
class AsymmetryWitness:
    x: FrickePoint
    y: FrickePoint
    forward: MetricEstimate
    backward: MetricEstimate

    @property
    def witness(self) -> float:
        return self.forward.value - self.backward.value


def find_asymmetry_witness(max_height: int = 100, candidates=None) -> AsymmetryWitness:
    """Search a small deterministic family of thick/thin pairs for a pair
    whose two Thurston distances differ measurably; returns the pair ordered
    so the witness L(x,y) - L(y,x) is positive."""
    x0 = FrickePoint.from_traces(3.0, 3.0, 3.0)
    if candidates is None:
        candidates = [
            from_two_traces(2.1, 9.0, "plus"),
            from_two_traces(2.1, 9.0, "minus"),
            from_two_traces(2.05, 12.0, "plus"),
            from_two_traces(2.2, 6.0, "plus"),
            from_two_traces(2.02, 18.0, "plus"),
        ]
    best = None
    for y in candidates:
        fwd = thurston_metric_enumerated(x0, y, max_height)
        bwd = thurston_metric_enumerated(y, x0, max_height)
        if best is None or abs(fwd.value - bwd.value) > abs(best.witness):
            best = AsymmetryWitness(x0, y, fwd, bwd)
    if best.witness < 0.0:
        best = AsymmetryWitness(best.y, best.x, best.backward, best.forward)
    return best
