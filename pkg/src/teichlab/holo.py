"""Iteration of nonexpansive self-maps of the flat-torus model space.

A SelfMap is a composition of upper-half-plane primitives (Mobius with
positive determinant, affine shrink, Blaschke products transported through
the Cayley identification).  Everything downstream consumes only the
1-Lipschitz property, which is checked empirically at construction.  The
module estimates the escape drift, extracts a boundary limit function along
record subsequences, checks the extremal-length growth bound, and classifies
orbits as bounded or escaping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import Slope, slope_array
from .errors import (
    BoundedOrbitError,
    ConvergenceError,
    ExpansiveMapError,
    InvalidSpecError,
)
from . import torus
from .torus import GMBoundaryPoint, TorusPoint

_LIPSCHITZ_PAIRS = 1000
_LIPSCHITZ_TOL = 1e-9
_LIPSCHITZ_SEED = 1729


@dataclass(frozen=True)
class Mobius:
    """tau -> (a tau + b) / (c tau + d) with real entries and ad - bc > 0."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not (math.isfinite(det) and det > 0.0):
            raise InvalidSpecError(f"mobius determinant must be positive, got {det}")

    def apply(self, tau: complex) -> complex:
        return (self.a * tau + self.b) / (self.c * tau + self.d)


@dataclass(frozen=True)
class AffineShrink:
    """tau -> scale * (tau + offset), 0 < scale <= 1, Im offset >= 0."""

    scale: float
    offset: complex

    def __post_init__(self):
        if not (0.0 < self.scale <= 1.0):
            raise InvalidSpecError(f"shrink scale must lie in (0, 1], got {self.scale}")
        if complex(self.offset).imag < 0.0:
            raise InvalidSpecError("shrink offset needs nonnegative imaginary part")

    def apply(self, tau: complex) -> complex:
        return self.scale * (tau + complex(self.offset))


@dataclass(frozen=True)
class DiskBlaschke:
    """Blaschke-type disk map conjugated to the half-plane by the Cayley map.

    factors is a tuple of ("aut", re, im, theta) disk automorphisms
    z -> e^{i theta} (z - alpha)/(1 - conj(alpha) z) with alpha = re + i im,
    and ("pow", k) power maps z -> z^k with integer k >= 1."""

    factors: tuple

    def __post_init__(self):
        for f in self.factors:
            if f[0] == "aut":
                _, re, im, _ = f
                if math.hypot(re, im) >= 1.0:
                    raise InvalidSpecError("blaschke automorphism center must lie inside the disk")
            elif f[0] == "pow":
                if not (isinstance(f[1], int) and f[1] >= 1):
                    raise InvalidSpecError("blaschke power must be an integer >= 1")
            else:
                raise InvalidSpecError(f"unknown blaschke factor {f[0]!r}")

    def apply(self, tau: complex) -> complex:
        z = (tau - 1j) / (tau + 1j)
        for f in self.factors:
            if f[0] == "aut":
                _, re, im, theta = f
                alpha = complex(re, im)
                z = complex(math.cos(theta), math.sin(theta)) * (z - alpha) / (1.0 - alpha.conjugate() * z)
            else:
                z = z ** f[1]
        return 1j * (1.0 + z) / (1.0 - z)


@dataclass(frozen=True)
class SelfMap:
    """Composition of primitives, applied left to right.

    Construction samples random point pairs and rejects the map if any pair
    expands the metric beyond the tolerance; only nonexpansiveness is relied
    on afterwards."""

    parts: tuple
    label: str = ""

    def __post_init__(self):
        rng = np.random.default_rng(_LIPSCHITZ_SEED)
        res = rng.normal(size=(_LIPSCHITZ_PAIRS, 2)) * 1.5
        ims = np.exp(rng.normal(size=(_LIPSCHITZ_PAIRS, 2)))
        worst = 0.0
        for k in range(_LIPSCHITZ_PAIRS):
            x = TorusPoint(float(res[k, 0]), float(ims[k, 0]))
            y = TorusPoint(float(res[k, 1]), float(ims[k, 1]))
            slack = torus.teich_distance(self.apply(x), self.apply(y)) - torus.teich_distance(x, y)
            worst = max(worst, slack)
        if worst > _LIPSCHITZ_TOL:
            raise ExpansiveMapError(
                f"map expanded a sampled pair by {worst:.3e} (tolerance {_LIPSCHITZ_TOL})"
            )

    def apply_complex(self, tau: complex) -> complex:
        for part in self.parts:
            tau = part.apply(tau)
        return tau

    def apply(self, x: TorusPoint) -> TorusPoint:
        tau = self.apply_complex(complex(x.re, x.im))
        return TorusPoint(float(tau.real), float(tau.imag))

    def __call__(self, x: TorusPoint) -> TorusPoint:
        return self.apply(x)


def _orbit_track(f: SelfMap, x0: TorusPoint, n_max: int):
    """Orbit points and d(x0, f^n x0) for n = 0..n_max, truncated early if the
    orbit leaves the range representable in doubles."""
    taus = np.zeros(n_max + 1, dtype=complex)
    d = np.zeros(n_max + 1)
    tau = complex(x0.re, x0.im)
    taus[0] = tau
    for n in range(1, n_max + 1):
        tau = f.apply_complex(tau)
        if not (math.isfinite(tau.real) and 0.0 < tau.imag < math.inf):
            return taus[:n], d[:n]
        taus[n] = tau
        d[n] = torus.teich_distance(x0, TorusPoint(tau.real, tau.imag))
    return taus, d


def _orbit_distances(f: SelfMap, x0: TorusPoint, n_max: int) -> np.ndarray:
    return _orbit_track(f, x0, n_max)[1]


@dataclass(frozen=True)
class DriftReport:
    value: float
    n_max: int
    ratios: tuple[float, ...]
    tail_delta: float
    tail_value: float


def drift_report(f: SelfMap, x0: TorusPoint, n_max: int = 200) -> DriftReport:
    """Escape rate lim d(f^n x0, x0)/n, estimated as the subadditive minimum
    min_{n <= n_max} d(f^n x0, x0)/n; tail_delta compares the estimates at
    n_max and n_max/2 as a stability diagnostic.

    tail_value is the difference quotient (d_{n_max} - d_{n_max/2}) over the
    half window.  The plain minimum keeps an additive O(1/n_max) bias from
    the distance between the basepoint and the escape track; the difference
    quotient cancels it, so basepoint comparisons should use tail_value."""
    if n_max < 10:
        raise InvalidSpecError("drift needs n_max >= 10")
    d = _orbit_distances(f, x0, n_max)
    n_eff = len(d) - 1
    if n_eff < 10:
        raise ConvergenceError(
            f"orbit left the representable range after {n_eff} steps", partial=d
        )
    ratios = d[1:] / np.arange(1, n_eff + 1)
    value = float(np.min(ratios))
    tail_delta = abs(float(ratios[-1]) - float(ratios[n_eff // 2 - 1]))
    half = n_eff // 2
    tail_value = float(d[n_eff] - d[half]) / float(n_eff - half)
    return DriftReport(value, n_eff, tuple(float(r) for r in ratios), tail_delta, tail_value)


def drift(f: SelfMap, x0: TorusPoint, n_max: int = 200) -> float:
    return drift_report(f, x0, n_max).value


def _running_max_stalled(d: np.ndarray, n: int, window: int, tol: float) -> bool:
    if n < window:
        return False
    r_now = float(np.max(d[: n + 1]))
    r_then = float(np.max(d[: n - window + 1]))
    return r_now - r_then < tol


@dataclass(frozen=True)
class SubsequenceRecord:
    eps: float
    n: int


@dataclass(frozen=True)
class BoundaryExtraction:
    point: GMBoundaryPoint
    subsequence: tuple[SubsequenceRecord, ...]
    drift_value: float


def extract_boundary_point(
    f: SelfMap,
    x0: TorusPoint,
    eps_schedule: tuple[float, ...] | None = None,
    budget: int = 4096,
    e_tol: float = 1e-6,
    panel_height: int = 10,
    stall_window: int = 100,
    stall_tol: float = 1e-6,
) -> BoundaryExtraction:
    """Boundary limit of an escaping orbit along a record subsequence.

    For each eps_i the excess b_i(n) = d(f^n x0, x0) - (l - eps_i) n is
    scanned for record times, and n_i is the first record at least 2^i and
    past n_{i-1}.  The limit function E is read off the normalized extremal
    form exp(-2 d) Q at the last subsequence point, accepted once two
    successive subsequence points agree within e_tol on a slope panel."""
    if eps_schedule is None:
        eps_schedule = tuple(0.5 ** i for i in range(1, 7))
    if any(e2 >= e1 for e1, e2 in zip(eps_schedule, eps_schedule[1:])) or eps_schedule[-1] <= 0.0:
        raise InvalidSpecError("eps schedule must decrease strictly to 0")

    taus, d = _orbit_track(f, x0, budget)
    budget = len(d) - 1
    if budget < 10:
        raise ConvergenceError(
            f"orbit left the representable range after {budget} steps", partial=d
        )
    if _running_max_stalled(d, budget, stall_window, stall_tol):
        raise BoundedOrbitError(
            f"orbit radius settled at {float(np.max(d)):.6f}; no boundary limit to extract"
        )
    l = float(np.min(d[1:] / np.arange(1, budget + 1)))

    records = []
    prev_n = 0
    for i, eps in enumerate(eps_schedule, start=1):
        b = d[1:] - (l - eps) * np.arange(1, budget + 1)
        best = -math.inf
        target = max(2 ** i, prev_n + 1)
        chosen = None
        for n in range(1, budget + 1):
            if b[n - 1] > best:
                best = b[n - 1]
                if n >= target:
                    chosen = n
                    break
        if chosen is None:
            raise ConvergenceError(
                f"no record time >= {target} for eps={eps:g} within budget {budget}",
                partial={"records": tuple(records), "drift": l},
            )
        # the scan guarantees the record property; re-assert it explicitly
        assert b[chosen - 1] > float(np.max(b[: chosen - 1], initial=-math.inf))
        records.append(SubsequenceRecord(eps, chosen))
        prev_n = chosen

    vecs = slope_array(panel_height).astype(float)
    prev_panel = None
    m_last = None
    for rec in records:
        pt = TorusPoint(float(taus[rec.n].real), float(taus[rec.n].imag))
        form = torus._form(pt)
        scale = math.exp(-2.0 * d[rec.n])
        m_last = np.array([[form[0], form[1]], [form[1], form[2]]]) * scale
        vals = (
            m_last[0, 0] * vecs[:, 0] ** 2
            + 2.0 * m_last[0, 1] * vecs[:, 0] * vecs[:, 1]
            + m_last[1, 1] * vecs[:, 1] ** 2
        )
        panel = np.sqrt(np.maximum(vals, 0.0))
        settled = prev_panel is not None and float(np.max(np.abs(panel - prev_panel))) < e_tol
        prev_panel = panel
    if not settled:
        raise ConvergenceError(
            f"boundary values still moving by more than {e_tol:g} between the last "
            "two subsequence points",
            partial={"records": tuple(records), "drift": l},
        )
    return BoundaryExtraction(torus._gm_from_scaled_form(m_last), tuple(records), l)


@dataclass(frozen=True)
class CurveGrowthRow:
    beta: Slope
    e_value: float
    min_margin: float
    final_root: float


@dataclass(frozen=True)
class GrowthBoundReport:
    lam: float
    sup_ratio: float
    rows: tuple[CurveGrowthRow, ...]
    zero_rows: tuple[tuple[Slope, float], ...]
    bound_ok: bool
    kerckhoff_ok: bool


def verify_growth_bound(
    f: SelfMap,
    x0: TorusPoint,
    betas: list[Slope],
    n_max: int = 40,
    extraction: BoundaryExtraction | None = None,
    sup_height: int = 200,
) -> GrowthBoundReport:
    """Check Ext_{f^n x0}(beta) >= (inf_a Ext^{1/2}/E)^2 E(beta)^2 lam^n for
    every supplied beta and n <= n_max, with lam = e^{2l}.

    The infimum is the reciprocal of the enumerated sup of E/Ext^{1/2} at x0.
    Curves with E(beta) > 1e-9 additionally get the n-th root of Ext tracked
    against lam; curves with vanishing E are reported separately with their
    observed root and no bound claim.  The upper estimate
    Ext_{f^n x0}(beta) <= e^{2 d} Ext_{x0}(beta) is asserted alongside."""
    if extraction is None:
        extraction = extract_boundary_point(f, x0)
    point = extraction.point
    l = extraction.drift_value
    lam = math.exp(2.0 * l)
    sup_ratio = torus.boundary_sup_ratio(point, x0, sup_height)
    inf_sq = 1.0 / (sup_ratio * sup_ratio)

    taus, d = _orbit_track(f, x0, n_max)
    if len(d) - 1 < n_max:
        raise ConvergenceError(
            f"orbit left the representable range after {len(d) - 1} steps, need {n_max}",
            partial=d,
        )
    forms = [torus._form(TorusPoint(float(t.real), float(t.imag))) for t in taus]

    rows = []
    zero_rows = []
    bound_ok = True
    kerckhoff_ok = True
    for beta in betas:
        p, q = float(beta.p), float(beta.q)
        e_val = point.extremal(beta)
        ext0 = forms[0][0] * p * p + 2.0 * forms[0][1] * p * q + forms[0][2] * q * q
        min_margin = math.inf
        ext_n = ext0
        for n in range(1, n_max + 1):
            fx = forms[n]
            ext_n = fx[0] * p * p + 2.0 * fx[1] * p * q + fx[2] * q * q
            if ext_n > math.exp(2.0 * d[n]) * ext0 * (1.0 + 1e-12):
                kerckhoff_ok = False
            if e_val > 1e-9:
                bound = inf_sq * e_val * e_val * lam ** n
                margin = (ext_n - bound) / ext_n
                min_margin = min(min_margin, margin)
                if margin < -1e-9:
                    bound_ok = False
        final_root = ext_n ** (1.0 / n_max)
        if e_val > 1e-9:
            rows.append(CurveGrowthRow(beta, e_val, min_margin, final_root))
        else:
            zero_rows.append((beta, final_root))
    return GrowthBoundReport(lam, sup_ratio, tuple(rows), tuple(zero_rows), bound_ok, kerckhoff_ok)


@dataclass(frozen=True)
class StepRow:
    y: TorusPoint
    h_before: float
    h_after: float
    gain: float


@dataclass(frozen=True)
class StepReport:
    """Per-step effect of the map on the boundary horofunction h and on the
    companion quantity inf Ext^{1/2}/E.

    supported records which candidate factor (e^l or e^{2l}) the measured
    gains actually match."""

    l: float
    rows: tuple[StepRow, ...]
    ok: bool
    max_dev_el: float
    max_dev_e2l: float
    supported: str


def verify_step_inequality(
    f: SelfMap,
    x0: TorusPoint,
    point: GMBoundaryPoint,
    test_points: list[TorusPoint],
    l: float | None = None,
    inf_height: int = 200,
    slack_tol: float = 1e-6,
) -> StepReport:
    """Check h(f(y)) <= h(y) - l + tol at each test point, h being the
    boundary horofunction of the extracted limit, and measure the per-step
    gain of inf_a Ext^{1/2}(a)/E(a) against both e^l and e^{2l}."""
    if l is None:
        l = drift(f, x0)
    rows = []
    ok = True
    dev_el = 0.0
    dev_e2l = 0.0
    el = math.exp(l)
    e2l = math.exp(2.0 * l)
    for y in test_points:
        fy = f.apply(y)
        h_before = torus.gm_horofunction(point, y, x0)
        h_after = torus.gm_horofunction(point, fy, x0)
        if h_after > h_before - l + slack_tol:
            ok = False
        gain = torus.boundary_inf_ratio(point, fy, inf_height) / torus.boundary_inf_ratio(
            point, y, inf_height
        )
        dev_el = max(dev_el, abs(gain - el))
        dev_e2l = max(dev_e2l, abs(gain - e2l))
        rows.append(StepRow(y, h_before, h_after, gain))
    if dev_el <= 1e-6 < dev_e2l:
        supported = "e^l"
    elif dev_e2l <= 1e-6 < dev_el:
        supported = "e^{2l}"
    elif dev_el <= 1e-6 and dev_e2l <= 1e-6:
        supported = "both (l = 0)"
    else:
        supported = "neither exactly; closer to " + ("e^l" if dev_el < dev_e2l else "e^{2l}")
    return StepReport(l, tuple(rows), ok, dev_el, dev_e2l, supported)


@dataclass(frozen=True)
class OrbitAnalysis:
    drift: float
    lambda_ext: float
    boundary: GMBoundaryPoint | None
    sup_ratio: float | None
    classification: str
    subsequence: tuple[SubsequenceRecord, ...]
    diagnostics: dict = field(default_factory=dict)


def classify_orbit(
    f: SelfMap,
    x0: TorusPoint,
    window: int = 100,
    budget: int = 2000,
    escape_radius: float = 20.0,
    stall_tol: float = 1e-6,
) -> OrbitAnalysis:
    """Bounded/escaping dichotomy over a finite budget.

    Escaping: the orbit distance exceeds escape_radius while trending up, and
    the boundary limit is then extracted.  Bounded: the running radius moves
    less than stall_tol across the trailing window.  Budgets that settle
    neither way return an explicit Inconclusive analysis."""
    d = np.zeros(budget + 1)
    tau = complex(x0.re, x0.im)
    r_hist = [0.0]
    n_stop = budget
    verdict = None
    for n in range(1, budget + 1):
        tau = f.apply_complex(tau)
        d[n] = torus.teich_distance(x0, TorusPoint(float(tau.real), float(tau.imag)))
        r_hist.append(max(r_hist[-1], d[n]))
        if d[n] > escape_radius and d[n] >= d[max(0, n - window)]:
            verdict = "Escaping"
            n_stop = n
            break
        if n >= window and r_hist[n] - r_hist[n - window] < stall_tol:
            verdict = "Bounded"
            n_stop = n
            break
    ratios = d[1 : n_stop + 1] / np.arange(1, n_stop + 1)
    l = float(np.min(ratios)) if n_stop >= 1 else 0.0
    diagnostics = {
        "n_stop": n_stop,
        "radius": r_hist[n_stop],
        "last_distance": float(d[n_stop]),
        "last_point": TorusPoint(float(tau.real), float(tau.imag)),
        "window_change": r_hist[n_stop] - r_hist[max(0, n_stop - window)],
    }
    if verdict == "Escaping":
        extraction = extract_boundary_point(f, x0)
        l = extraction.drift_value
        return OrbitAnalysis(
            drift=l,
            lambda_ext=math.exp(2.0 * l),
            boundary=extraction.point,
            sup_ratio=torus.boundary_sup_ratio(extraction.point, x0, 200),
            classification="Escaping",
            subsequence=extraction.subsequence,
            diagnostics=diagnostics,
        )
    if verdict == "Bounded":
        return OrbitAnalysis(
            drift=l,
            lambda_ext=math.exp(2.0 * l),
            boundary=None,
            sup_ratio=None,
            classification="Bounded",
            subsequence=(),
            diagnostics=diagnostics,
        )
    return OrbitAnalysis(
        drift=l,
        lambda_ext=math.exp(2.0 * l),
        boundary=None,
        sup_ratio=None,
        classification="Inconclusive",
        subsequence=(),
        diagnostics=diagnostics,
    )
