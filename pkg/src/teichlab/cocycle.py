"""Ergodic cocycles of mapping classes: three stationary sources (iid draws,
a finite-state Markov chain started from its stationary law, and coding of an
irrational rotation), exact partial products Z_n = Z_{n-1} g_n, Kingman drift
estimation with subadditivity checks, stable-direction estimation from the
singular frame of f_n = Z_n^{-1}, the F(g,h) = -h(g^{-1} x0) cocycle, the
backward horofunction drift, and the length-growth sandwich verifier.

Partial products are kept in exact integer arithmetic for the whole run
(arbitrary-precision), with a unit-normalized float stream plus log norms
carried alongside for vectorized distance evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import Foliation, Slope, foliation, slope_array
from .errors import ConvergenceError, InsufficientGapError, InvalidPointError, InvalidSpecError
from .mcg import MappingClass, act_on_point
from . import torus
from . import fricke

GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0


def _as_mapping_classes(gens) -> tuple[MappingClass, ...]:
    out = []
    for g in gens:
        if not isinstance(g, MappingClass):
            raise InvalidSpecError(f"generators must be MappingClass, got {g!r}")
        out.append(g)
    if not out:
        raise InvalidSpecError("at least one generator required")
    return tuple(out)


@dataclass(frozen=True)
class IID:
    """Independent draws from a fixed distribution on the generators."""

    generators: tuple[MappingClass, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "generators", _as_mapping_classes(self.generators))
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if len(w) != len(self.generators):
                raise InvalidSpecError("weights must match generators")
            if min(w) < 0.0 or abs(sum(w) - 1.0) > 1e-12:
                raise InvalidSpecError("weights must be nonnegative and sum to 1 (tol 1e-12)")
            object.__setattr__(self, "weights", w)

    def probabilities(self) -> np.ndarray:
        k = len(self.generators)
        return np.full(k, 1.0 / k) if self.weights is None else np.array(self.weights)


@dataclass(frozen=True)
class MarkovChain:
    """One generator per state; the chain starts from its stationary law."""

    generators: tuple[MappingClass, ...]
    transition: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "generators", _as_mapping_classes(self.generators))
        k = len(self.generators)
        rows = tuple(tuple(float(v) for v in row) for row in self.transition)
        if len(rows) != k or any(len(r) != k for r in rows):
            raise InvalidSpecError("transition matrix must be square over the states")
        for r in rows:
            if min(r) < 0.0 or abs(sum(r) - 1.0) > 1e-12:
                raise InvalidSpecError("transition rows must be stochastic (tol 1e-12)")
        object.__setattr__(self, "transition", rows)

    def stationary(self) -> np.ndarray:
        p = np.array(self.transition)
        k = p.shape[0]
        # solve pi (P - I) = 0 with sum(pi) = 1 as a least-squares system
        a = np.vstack([p.T - np.eye(k), np.ones((1, k))])
        b = np.concatenate([np.zeros(k), [1.0]])
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()


@dataclass(frozen=True)
class RotationCoding:
    """Deterministic ergodic source: code the orbit of x -> x + angle (mod 1)
    by the partition cells [0,b1), [b1,b2), ..., [b_{k-1},1); the start point
    is drawn uniformly (the invariant measure)."""

    generators: tuple[MappingClass, ...]
    breakpoints: tuple[float, ...]
    angle: float = GOLDEN_ROTATION

    def __post_init__(self):
        object.__setattr__(self, "generators", _as_mapping_classes(self.generators))
        bps = tuple(float(b) for b in self.breakpoints)
        if len(bps) != len(self.generators) - 1:
            raise InvalidSpecError("need len(generators) - 1 breakpoints")
        if any(not (0.0 < b < 1.0) for b in bps) or any(
            bps[i] >= bps[i + 1] for i in range(len(bps) - 1)
        ):
            raise InvalidSpecError("breakpoints must be strictly increasing inside (0,1)")
        object.__setattr__(self, "breakpoints", bps)
        if not (0.0 < self.angle < 1.0):
            raise InvalidSpecError("rotation angle must lie in (0,1)")


@dataclass(frozen=True)
class CocycleSpec:
    source: IID | MarkovChain | RotationCoding
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.source, (IID, MarkovChain, RotationCoding)):
            raise InvalidSpecError(f"unknown source {type(self.source).__name__}")

    @property
    def generators(self) -> tuple[MappingClass, ...]:
        return self.source.generators


def _trajectory_rng(spec: CocycleSpec, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(index,)))


def _sample_indices(source, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(source, IID):
        return rng.choice(len(source.generators), size=n, p=source.probabilities())
    if isinstance(source, MarkovChain):
        cum = np.cumsum(np.array(source.transition), axis=1)
        state = int(rng.choice(len(source.generators), p=source.stationary()))
        u = rng.random(n)
        out = np.empty(n, dtype=np.int64)
        for t in range(n):
            out[t] = state
            state = int(np.searchsorted(cum[state], u[t], side="right"))
            state = min(state, cum.shape[0] - 1)
        return out
    if isinstance(source, RotationCoding):
        x = rng.random()
        vals = np.mod(x + source.angle * np.arange(n), 1.0)
        return np.searchsorted(np.array(source.breakpoints), vals, side="right")
    raise InvalidSpecError(f"unknown source {type(source).__name__}")


def default_basepoint(model: str):
    if model == "torus":
        return torus.TorusPoint(0.0, 1.0)
    if model == "fricke":
        return fricke.FrickePoint.from_traces(3.0, 3.0, 3.0)
    raise InvalidPointError(f"unknown model {model!r}")


@dataclass
class TrajectoryRecord:
    """One simulated cocycle path: increment indices, exact partial products,
    a unit-normalized float stream with log norms, orbit points, and the per-n
    forward/backward metric values L(x0, Z_n x0), L(Z_n x0, x0)."""

    spec: CocycleSpec
    index: int
    n: int
    model: str
    x0: object
    indices: np.ndarray
    z_int: list[tuple[int, int, int, int]]
    unit: np.ndarray
    lognorm: np.ndarray
    orbit: list
    forward: np.ndarray
    backward: np.ndarray

    def z(self, k: int) -> MappingClass:
        a, b, c, d = self.z_int[k]
        return MappingClass(a, b, c, d)

    def f(self, k: int) -> MappingClass:
        return self.z(k).inverse()

    def increment(self, k: int) -> MappingClass:
        return self.spec.generators[int(self.indices[k - 1])]


def _torus_metric_stream(unit: np.ndarray, lognorm: np.ndarray, x0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized L(x0, Z_k x0) and L(Z_k x0, x0) from the float stream."""
    root, inv = torus._sqrt_spd(torus._form(x0))

    def smax_log(mats):
        b = np.einsum("ij,njk,kl->nil", root, mats, inv)
        fro2 = np.einsum("nij,nij->n", b, b)
        det = b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
        disc = np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0)
        return 0.5 * np.log(0.5 * (fro2 + np.sqrt(disc)))

    fwd = smax_log(unit) + lognorm
    adj = np.empty_like(unit)
    adj[:, 0, 0] = unit[:, 1, 1]
    adj[:, 0, 1] = -unit[:, 0, 1]
    adj[:, 1, 0] = -unit[:, 1, 0]
    adj[:, 1, 1] = unit[:, 0, 0]
    bwd = smax_log(adj) + lognorm
    fwd[0] = 0.0
    bwd[0] = 0.0
    return fwd, bwd


def sample_trajectory(
    spec: CocycleSpec,
    n: int,
    x0=None,
    model: str = "torus",
    index: int = 0,
    fricke_height: int = 50,
) -> TrajectoryRecord:
    """Simulate one path; deterministic given (spec, n, index)."""
    if n < 1:
        raise InvalidSpecError("n must be >= 1")
    if x0 is None:
        x0 = default_basepoint(model)
    rng = _trajectory_rng(spec, index)
    indices = _sample_indices(spec.source, n, rng)
    gens = spec.generators

    z_int: list[tuple[int, int, int, int]] = [(1, 0, 0, 1)]
    za, zb, zc, zd = 1, 0, 0, 1
    unit = np.empty((n + 1, 2, 2))
    lognorm = np.empty(n + 1)
    unit[0] = np.eye(2)
    lognorm[0] = 0.0
    b_arr = np.eye(2)
    b_log = 0.0
    for k in range(1, n + 1):
        g = gens[int(indices[k - 1])]
        za, zb, zc, zd = (
            za * g.a + zb * g.c,
            za * g.b + zb * g.d,
            zc * g.a + zd * g.c,
            zc * g.b + zd * g.d,
        )
        z_int.append((za, zb, zc, zd))
        b_arr = b_arr @ np.array([[g.a, g.b], [g.c, g.d]], dtype=float)
        nrm = np.max(np.abs(b_arr))
        b_arr = b_arr / nrm
        b_log += math.log(nrm)
        unit[k] = b_arr
        lognorm[k] = b_log

    if model == "torus":
        if not isinstance(x0, torus.TorusPoint):
            raise InvalidPointError("torus model requires a TorusPoint")
        orbit = [x0]
        for k in range(1, n + 1):
            try:
                orbit.append(torus.apply_matrix_to_point(MappingClass(*z_int[k]), x0))
            except InvalidPointError:
                # Beyond translate distance ~350 the image's imaginary part
                # underflows double precision; the exact matrix in z_int stays
                # authoritative and metric values come from the scaled stream.
                orbit.append(None)
        forward, backward = _torus_metric_stream(unit, lognorm, x0)
    elif model == "fricke":
        if not isinstance(x0, fricke.FrickePoint):
            raise InvalidPointError("fricke model requires a FrickePoint")
        orbit = [x0]
        forward = np.zeros(n + 1)
        backward = np.zeros(n + 1)
        for k in range(1, n + 1):
            pt = fricke.apply_mapping_class(x0, MappingClass(*z_int[k]))
            orbit.append(pt)
            forward[k] = fricke.thurston_metric_enumerated(x0, pt, fricke_height).value
            backward[k] = fricke.thurston_metric_enumerated(pt, x0, fricke_height).value
    else:
        raise InvalidPointError(f"unknown model {model!r}")

    return TrajectoryRecord(
        spec, index, n, model, x0, indices, z_int, unit, lognorm, orbit, forward, backward
    )


@dataclass(frozen=True)
class DriftEstimate:
    value: float
    stderr: float
    n: int
    trials: int
    seed: int


def kingman_check(traj: TrajectoryRecord, splits=None, tol: float = 1e-12) -> float:
    """Worst subadditivity slack max(0, L(x0,Z_n x0) - L(x0,Z_k x0) -
    L(x0, (Z_k^{-1} Z_n) x0)) over the sampled split points, computed from the
    exact integer products.  Raises if any slack exceeds tol."""
    n = traj.n
    if splits is None:
        splits = sorted({max(1, n // 4), n // 2, max(1, (3 * n) // 4)})
    if traj.model != "torus":
        raise InvalidPointError("exact Kingman check is a torus-model operation")
    worst = 0.0
    total = torus.translate_distance(traj.z(n), traj.x0)
    for k in splits:
        if not 1 <= k < n:
            continue
        head = torus.translate_distance(traj.z(k), traj.x0)
        shifted = traj.z(k).inverse() @ traj.z(n)
        tail = torus.translate_distance(shifted, traj.x0)
        worst = max(worst, total - head - tail)
    if worst > tol:
        raise ConvergenceError(f"Kingman subadditivity violated by {worst:.3e}", partial=worst)
    return worst


def drift_estimate(
    spec: CocycleSpec,
    x0=None,
    model: str = "torus",
    n: int = 400,
    trials: int = 100,
    check_subadditivity: bool = False,
) -> DriftEstimate:
    """Mean of L(x0, Z_n x0)/n over independent trajectories with its
    standard error; aggregation is in trajectory-index order, so the result
    is bit-identical however the trajectories were scheduled."""
    if n < 1 or trials < 1:
        raise InvalidSpecError("n and trials must be >= 1")
    vals = np.empty(trials)
    for i in range(trials):
        rec = sample_trajectory(spec, n, x0=x0, model=model, index=i)
        vals[i] = rec.forward[n] / n
        if check_subadditivity:
            kingman_check(rec)
    value = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return DriftEstimate(value, stderr, n, trials, spec.seed)


def norm_growth_estimate(spec: CocycleSpec, n: int = 400, trials: int = 100) -> DriftEstimate:
    """Independent oracle: mean of (1/n) log ||Z_n||_F over trajectories."""
    vals = np.empty(trials)
    for i in range(trials):
        rng = _trajectory_rng(spec, i)
        indices = _sample_indices(spec.source, n, rng)
        b_arr = np.eye(2)
        b_log = 0.0
        for k in range(n):
            g = spec.generators[int(indices[k])]
            b_arr = b_arr @ np.array([[g.a, g.b], [g.c, g.d]], dtype=float)
            nrm = np.max(np.abs(b_arr))
            b_arr = b_arr / nrm
            b_log += math.log(nrm)
        vals[i] = (b_log + 0.5 * math.log(float(np.sum(b_arr * b_arr)))) / n
    value = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return DriftEstimate(value, stderr, n, trials, spec.seed)


def estimate_stable_foliation(traj: TrajectoryRecord, gap_threshold: float = 10.0) -> Foliation:
    """Stable direction from the top singular frame of f_n = Z_n^{-1}.

    The top right-singular vector v1 of f_n is the direction the backward
    products stretch most; the foliation that pairs with it under
    i(mu, alpha) = |mu_a q - mu_b p| is its perpendicular, so the returned
    foliation is built from rot90(v1).  Requires a singular gap > threshold
    and agreement of the n and n-1 directions within angle 1e-6."""
    n = traj.n

    def top_right_singular(k):
        m = traj.unit[k]
        adj = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])
        _, s, vh = np.linalg.svd(adj)
        gap = float(s[0] / s[1]) if s[1] > 0.0 else math.inf
        return vh[0], gap

    v1, gap = top_right_singular(n)
    if not gap > gap_threshold:
        raise InsufficientGapError(
            f"singular gap {gap:.3f} below threshold {gap_threshold}",
            diagnostics={"gap": gap, "n": n},
        )
    v_prev, _ = top_right_singular(n - 1)
    angle = math.acos(min(1.0, abs(float(np.dot(v1, v_prev)))))
    mu = foliation(v1[1], -v1[0])
    if angle >= 1e-6:
        raise ConvergenceError(
            f"stable direction not settled: successive angle {angle:.3e}", partial=mu
        )
    return mu


def sup_intersection_over_length(mu, x, model: str = "torus", max_height: int = 200) -> float:
    """sup over the slope panel of i(mu, beta)/l_x(beta) (the reciprocal of
    the sandwich constant C(mu, x)), enumerated."""
    a, b = (mu.a, mu.b) if isinstance(mu, Foliation) else (float(mu[0]), float(mu[1]))
    vecs = slope_array(max_height).astype(float)
    inter = np.abs(a * vecs[:, 1] - b * vecs[:, 0])
    if model == "torus":
        f = torus._form(x)
        l2 = f[0] * vecs[:, 0] ** 2 + 2.0 * f[1] * vecs[:, 0] * vecs[:, 1] + f[2] * vecs[:, 1] ** 2
        return float(np.max(inter / np.sqrt(l2)))
    if model == "fricke":
        lengths = fricke.length_table(x, max_height)
        return float(np.max(inter / lengths))
    raise InvalidPointError(f"unknown model {model!r}")


_C_CONVENTION = (
    "C(mu,x) = 1 / sup_beta i(mu,beta)/l_x(beta), supremum enumerated over the "
    "height-200 slope panel at the supplied basepoint x"
)


@dataclass(frozen=True)
class SandwichReport:
    """Least N past which both growth bounds hold for every supplied curve."""

    n_threshold: int
    cap: int
    violations: tuple
    c_value: float
    lam: float
    eps: float
    status: str
    c_convention: str = _C_CONVENTION


def sandwich_verify(
    traj: TrajectoryRecord,
    mu: Foliation,
    lam: float,
    eps: float,
    alphas: list[Slope],
    x=None,
    model: str = "torus",
    cap: int | None = None,
    c_height: int = 200,
) -> SandwichReport:
    """Check C(mu,x) i(mu,a) (lam-eps)^n <= l_x(f_n a) <= l_x(a) (lam+eps)^n
    for every supplied a and 1 <= n <= length; returns the least N such that
    no violation occurs for n > N.  Runs with lam - eps <= 1 are flagged
    degenerate (the lower bound carries no information)."""
    if eps <= 0.0 or lam < 1.0:
        raise InvalidSpecError("need lam >= 1 and eps > 0")
    if x is None:
        x = traj.x0
    if cap is None:
        cap = traj.n // 2
    if model != "torus":
        raise InvalidPointError("sandwich verification is implemented for the torus model")

    n = traj.n
    k = len(alphas)
    mu_a, mu_b = mu.a, mu.b
    inter = np.array([abs(mu_a * s.q - mu_b * s.p) for s in alphas])
    c_value = 1.0 / sup_intersection_over_length(mu, x, model, c_height)

    f = torus._form(x)

    def log_lengths(w):
        l2 = f[0] * w[0] ** 2 + 2.0 * f[1] * w[0] * w[1] + f[2] * w[1] ** 2
        return 0.5 * np.log(l2)

    w = np.array([[float(s.p) for s in alphas], [float(s.q) for s in alphas]])
    base_log = log_lengths(w)
    gens_adj = {
        i: np.array([[g.d, -g.b], [-g.c, g.a]], dtype=float)
        for i, g in enumerate(traj.spec.generators)
    }
    log_l = np.empty((n + 1, k))
    log_l[0] = base_log
    off = 0.0
    for step in range(1, n + 1):
        w = gens_adj[int(traj.indices[step - 1])] @ w
        nrm = np.max(np.abs(w))
        w = w / nrm
        off += math.log(nrm)
        log_l[step] = off + log_lengths(w)

    tol = 1e-12
    with np.errstate(divide="ignore"):
        log_inter = np.log(inter)
    ns = np.arange(1, n + 1)[:, None]
    lower_ok = np.ones((n, k), dtype=bool)
    positive = inter > 0.0
    if lam - eps > 0.0:
        lhs = math.log(c_value) + log_inter[None, positive] + ns * math.log(lam - eps)
        lower_ok[:, positive] = log_l[1:, positive] >= lhs - tol
    upper_ok = log_l[1:] <= base_log[None, :] + ns * math.log(lam + eps) + tol

    bad = ~(lower_ok & upper_ok)
    if not bad.any():
        n_threshold = 0
    else:
        n_threshold = int(np.nonzero(bad.any(axis=1))[0][-1]) + 1
    violations = []
    if n_threshold > cap:
        rows, cols = np.nonzero(bad)
        for r, c in zip(rows, cols):
            if r + 1 > cap:
                violations.append((int(r + 1), alphas[c]))
    if lam - eps <= 1.0:
        status = "degenerate-sandwich"
    elif n_threshold <= cap:
        status = "ok"
    else:
        status = "cap-exceeded"
    return SandwichReport(n_threshold, cap, tuple(violations), c_value, lam, eps, status)


def F_cocycle(g: MappingClass, h, x0, model: str = "torus") -> float:
    """F(g, h) = -h(g^{-1} x0); h is a horofunction descriptor exposing
    value(x, x0) (and translate(g) for the cocycle identity)."""
    y = act_on_point(g.inverse(), x0)
    return -h.value(y, x0)


@dataclass(frozen=True)
class HoroDriftReport:
    values: tuple[float, ...]
    tail: float


def horo_drift_verify(traj: TrajectoryRecord, mu: Foliation, x0=None, model: str = "torus") -> HoroDriftReport:
    """The sequence -(1/n) h_mu(Z_n x0) for n = 1..length, with the mean of
    its last quarter as the tail summary."""
    if x0 is None:
        x0 = traj.x0
    n = traj.n
    vals = []
    if model == "torus":
        for k in range(1, n + 1):
            vals.append(-torus.horofunction_at_translate(mu, traj.z(k), x0) / k)
    elif model == "fricke":
        est = fricke.BoundaryHoroEstimate(mu)
        for k in range(1, n + 1):
            vals.append(-est.value(traj.orbit[k], x0) / k)
    else:
        raise InvalidPointError(f"unknown model {model!r}")
    tail = vals[(3 * n) // 4 :]
    return HoroDriftReport(tuple(vals), sum(tail) / len(tail))
