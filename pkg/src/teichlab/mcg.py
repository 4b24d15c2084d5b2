"""Mapping classes as unimodular integer 2x2 matrices: trace classification
(Periodic / Reducible / Anosov), dilatation, the isometric action on both
model spaces, and iterated length-growth limits l_x(M^n a)^{1/n}.

Iteration is exact (Python integers), lengths are taken in log scale, and the
limit is extrapolated from the geometric mean of successive length ratios
over the last quarter of the run, which converges geometrically for Anosov
classes instead of the O(1/n) rate of raw n-th roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .curves import Slope, canonicalize_slope, farey_enumerate
from .errors import InvalidMappingClassError, InvalidPointError
from . import torus
from . import fricke


@dataclass(frozen=True)
class MappingClass:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not isinstance(v, int):
                raise InvalidMappingClassError(f"matrix entries must be integers, got {v!r}")
        if self.a * self.d - self.b * self.c != 1:
            raise InvalidMappingClassError(
                f"determinant must be +1, got {self.a * self.d - self.b * self.c}"
            )

    @classmethod
    def identity(cls) -> "MappingClass":
        return cls(1, 0, 0, 1)

    @property
    def trace(self) -> int:
        return self.a + self.d

    def inverse(self) -> "MappingClass":
        return MappingClass(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MappingClass") -> "MappingClass":
        return MappingClass(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __pow__(self, n: int) -> "MappingClass":
        if n < 0:
            return self.inverse() ** (-n)
        result = MappingClass.identity()
        base = self
        while n:
            if n & 1:
                result = result @ base
            base = base @ base
            n >>= 1
        return result

    def apply_to_vector(self, v: tuple[int, int]) -> tuple[int, int]:
        return (self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1])


TWIST_A = MappingClass(1, 1, 0, 1)
TWIST_B = MappingClass(1, 0, 1, 1)


def classify(m: MappingClass) -> str:
    """Trace trichotomy: |tr| < 2 Periodic, |tr| = 2 Reducible (the identity
    itself counts as Periodic), |tr| > 2 Anosov."""
    t = abs(m.trace)
    if t < 2:
        return "Periodic"
    if t == 2:
        if m == MappingClass.identity():
            return "Periodic"
        return "Reducible"
    return "Anosov"


def dilatation(m: MappingClass) -> float:
    """Largest absolute eigenvalue; 1 for the elliptic/parabolic cases."""
    t = abs(m.trace)
    if t < 2:
        return 1.0
    return (t + math.sqrt(float(t * t - 4))) / 2.0


def act_on_point(m: MappingClass, x):
    """The action satisfying length(M.x, M.alpha) = length(x, alpha)."""
    if isinstance(x, torus.TorusPoint):
        return torus.apply_matrix_to_point(m, x)
    if isinstance(x, fricke.FrickePoint):
        return fricke.apply_mapping_class(x, m)
    raise InvalidPointError(f"cannot act on {type(x).__name__}")


def _log_length_sequence(model: str, m: MappingClass, alpha: Slope, x, n_max: int):
    """log l_x(M^n alpha) for n = 0..n_max, exact integer iteration."""
    if model == "torus":
        if not isinstance(x, torus.TorusPoint):
            raise InvalidPointError("torus model requires a TorusPoint")
        v = (alpha.p, alpha.q)
        out = [torus.log_length_vector(x, v)]
        for _ in range(n_max):
            v = m.apply_to_vector(v)
            out.append(torus.log_length_vector(x, v))
        return out
    if model == "fricke":
        if not isinstance(x, fricke.FrickePoint):
            raise InvalidPointError("fricke model requires a FrickePoint")
        memo: dict = {}
        v = (alpha.p, alpha.q)
        out = [math.log(fricke.hyp_length(x, canonicalize_slope(*v), memo=memo))]
        for _ in range(n_max):
            v = m.apply_to_vector(v)
            out.append(math.log(fricke.hyp_length(x, canonicalize_slope(*v), memo=memo)))
        return out
    raise InvalidPointError(f"unknown model {model!r}")


@dataclass(frozen=True)
class SpectralEntry:
    """Length-growth data for one curve: the n-th roots l_x(M^n a)^{1/n},
    the extrapolated limit, the spread of successive ratios over the last
    quarter (a Cauchy diagnostic), and agreement with the dilatation."""

    slope: Slope
    roots: tuple[float, ...]
    limit: float
    ratio_spread: float
    dilatation_gap: float


def spectral_limit(model: str, m: MappingClass, alpha: Slope, x, n_max: int) -> SpectralEntry:
    if n_max < 2:
        raise InvalidMappingClassError("n_max must be >= 2")
    logs = _log_length_sequence(model, m, alpha, x, n_max)
    roots = tuple(math.exp(logs[n] / n) for n in range(1, n_max + 1))
    n0 = max(1, (3 * n_max) // 4)
    limit = math.exp((logs[n_max] - logs[n0]) / (n_max - n0))
    tail = [logs[n + 1] - logs[n] for n in range(n0, n_max)]
    ratio_spread = math.exp(max(tail)) - math.exp(min(tail)) if len(tail) > 1 else 0.0
    return SpectralEntry(alpha, roots, limit, ratio_spread, abs(limit - dilatation(m)))


@dataclass(frozen=True)
class SpectralReport:
    per_curve: dict[Slope, SpectralEntry]
    spectrum: tuple[float, ...]
    classification: str

    @property
    def k(self) -> int:
        return len(self.spectrum)


def spectral_report(
    model: str,
    m: MappingClass,
    x,
    n_max: int,
    alphas=None,
    max_height: int = 5,
    cluster_tol: float = 1e-3,
) -> SpectralReport:
    """Limits over a curve panel, clustered into the distinct-limit spectrum
    (values within cluster_tol merge; representative = cluster mean)."""
    if alphas is None:
        alphas = farey_enumerate(max_height)
    per_curve = {a: spectral_limit(model, m, a, x, n_max) for a in alphas}
    limits = sorted(e.limit for e in per_curve.values())
    spectrum = []
    cluster = [limits[0]]
    for v in limits[1:]:
        if v - cluster[0] > cluster_tol:
            spectrum.append(sum(cluster) / len(cluster))
            cluster = [v]
        else:
            cluster.append(v)
    spectrum.append(sum(cluster) / len(cluster))
    return SpectralReport(per_curve, tuple(spectrum), classify(m))
