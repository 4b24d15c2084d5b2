"""Simple closed curves and projective foliations on the model surfaces.

Curves are primitive integer pairs (p, q); projective measured foliations are
unit direction pairs (a, b).  Intersection numbers and the Stern-Brocot /
Farey structure are exact integer arithmetic whenever both arguments are
slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidCurveError, InvalidMappingClassError


@dataclass(frozen=True)
class Slope:
    """Primitive pair (p, q), canonical: gcd 1 and q > 0, or (p, q) = (1, 0)."""

    p: int
    q: int

    def __post_init__(self):
        if not (isinstance(self.p, int) and isinstance(self.q, int)):
            raise InvalidCurveError(f"slope entries must be int, got ({self.p!r}, {self.q!r})")
        if (self.p, self.q) == (0, 0):
            raise InvalidCurveError("slope (0, 0) is degenerate")
        if math.gcd(self.p, self.q) != 1:
            raise InvalidCurveError(f"slope ({self.p}, {self.q}) is not primitive")
        if self.q < 0 or (self.q == 0 and self.p != 1):
            raise InvalidCurveError(f"slope ({self.p}, {self.q}) is not canonical")

    @property
    def height(self) -> int:
        return max(abs(self.p), abs(self.q))

    def vector(self) -> tuple[int, int]:
        return (self.p, self.q)

    def __iter__(self):
        return iter((self.p, self.q))


def canonicalize_slope(p: int, q: int) -> Slope:
    """Reduce (p, q) to the canonical primitive representative of its class."""
    if (p, q) == (0, 0):
        raise InvalidCurveError("slope (0, 0) is degenerate")
    g = math.gcd(p, q)
    p, q = p // g, q // g
    if q < 0 or (q == 0 and p < 0):
        p, q = -p, -q
    return Slope(p, q)


@dataclass(frozen=True)
class Foliation:
    """Projective direction, normalized to a*a + b*b = 1 with the first
    nonzero coordinate positive."""

    a: float
    b: float

    def __post_init__(self):
        n = math.hypot(self.a, self.b)
        if not (math.isfinite(n) and abs(n - 1.0) <= 1e-9):
            raise InvalidCurveError(f"foliation ({self.a}, {self.b}) is not normalized")
        lead = self.a if self.a != 0.0 else self.b
        if lead < 0.0:
            raise InvalidCurveError(f"foliation ({self.a}, {self.b}) has wrong sign convention")

    def pair(self) -> tuple[float, float]:
        return (self.a, self.b)

    def __iter__(self):
        return iter((self.a, self.b))


def foliation(a: float, b: float) -> Foliation:
    """Normalize a direction pair to its canonical Foliation representative."""
    n = math.hypot(a, b)
    if n == 0.0 or not math.isfinite(n):
        raise InvalidCurveError(f"direction ({a}, {b}) is degenerate")
    a, b = a / n, b / n
    lead = a if a != 0.0 else b
    if lead < 0.0:
        a, b = -a, -b
    return Foliation(a, b)


def foliation_from_slope(s: Slope) -> Foliation:
    return foliation(float(s.p), float(s.q))


def _pair(c) -> tuple[float, float]:
    if isinstance(c, Slope):
        return (float(c.p), float(c.q))
    if isinstance(c, Foliation):
        return (c.a, c.b)
    a, b = c
    return (float(a), float(b))


def intersection(u, v):
    """Geometric intersection number |a*q' - b*p'| of two classes.

    Exact integer when both arguments are Slopes.
    """
    if isinstance(u, Slope) and isinstance(v, Slope):
        return abs(u.p * v.q - u.q * v.p)
    a, b = _pair(u)
    p, q = _pair(v)
    return abs(a * q - b * p)


@lru_cache(maxsize=None)
def farey_enumerate(max_height: int) -> tuple[Slope, ...]:
    """All canonical slopes with max(|p|, |q|) <= max_height.

    Deterministic order: by height, then q, then p.  Height 1 therefore lists
    (1,0), (-1,1), (0,1), (1,1).
    """
    if max_height < 1:
        raise InvalidCurveError("max_height must be >= 1")
    out = [Slope(1, 0)]
    for q in range(1, max_height + 1):
        for p in range(-max_height, max_height + 1):
            if math.gcd(p, q) == 1:
                out.append(Slope(p, q))
    out.sort(key=lambda s: (s.height, s.q, s.p))
    return tuple(out)


@lru_cache(maxsize=None)
def slope_array(max_height: int) -> np.ndarray:
    """farey_enumerate as an (N, 2) int64 array, same order."""
    return np.array([s.vector() for s in farey_enumerate(max_height)], dtype=np.int64)


@dataclass(frozen=True)
class FareyTriple:
    """A slope together with its Farey parents and the opposite mediant."""

    child: Slope
    parent_a: Slope
    parent_b: Slope
    coparent: Slope


_BASIS = {Slope(0, 1), Slope(1, 0)}


def farey_parents(s: Slope) -> FareyTriple:
    """Farey parents of a canonical slope; parents sum to the child and the
    coparent is their difference."""
    if s in _BASIS:
        raise InvalidCurveError(f"slope {s.vector()} has no Farey parents")
    p, q = s.p, s.q
    mirror = p < 0
    if mirror:
        p = -p
    # solve p*sb - q*rb = 1 with 0 <= rb <= p, 0 < sb <= q
    if p == 1:
        rb, sb = 0, 1
    else:
        rb = pow(-q, -1, p)
        sb = (1 + q * rb) // p
    ra, sa = p - rb, q - sb
    if mirror:
        ra, rb = -ra, -rb
    pa = canonicalize_slope(ra, sa)
    pb = canonicalize_slope(rb, sb)
    co = canonicalize_slope(ra - rb, sa - sb)
    assert canonicalize_slope(ra + rb, sa + sb) == s
    return FareyTriple(child=s, parent_a=pa, parent_b=pb, coparent=co)


def _matrix_entries(m) -> tuple[int, int, int, int]:
    if hasattr(m, "a"):
        ent = (m.a, m.b, m.c, m.d)
    else:
        (a, b), (c, d) = m
        ent = (a, b, c, d)
    a, b, c, d = (int(v) for v in ent)
    if a * d - b * c != 1:
        raise InvalidMappingClassError(f"matrix {ent} must have determinant +1")
    return a, b, c, d


def apply_mapping_class_to_slope(m, s: Slope) -> Slope:
    """Image of a slope under an integer mapping class, canonicalized."""
    a, b, c, d = _matrix_entries(m)
    return canonicalize_slope(a * s.p + b * s.q, c * s.p + d * s.q)
