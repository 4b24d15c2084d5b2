"""Slopes, foliations, intersection numbers and the Farey enumeration."""

from __future__ import annotations

import math

import numpy as np
import pytest

from teichlab.curves import (
    FareyTriple,
    Foliation,
    Slope,
    apply_mapping_class_to_slope,
    canonicalize_slope,
    farey_enumerate,
    farey_parents,
    foliation,
    foliation_from_slope,
    intersection,
    slope_array,
)
from teichlab.errors import InvalidCurveError
from teichlab.mcg import MappingClass


def test_slope_canonical_forms():
    # coprime, q >= 0, and q = 0 forces p = 1
    assert canonicalize_slope(2, 4) == Slope(1, 2)
    assert canonicalize_slope(-2, -4) == Slope(1, 2)
    assert canonicalize_slope(3, -6) == Slope(-1, 2)
    assert canonicalize_slope(-5, 0) == Slope(1, 0)
    assert canonicalize_slope(0, -7) == Slope(0, 1)
    with pytest.raises(InvalidCurveError):
        Slope(2, 4)
    with pytest.raises(InvalidCurveError):
        Slope(0, 0)
    with pytest.raises(InvalidCurveError):
        canonicalize_slope(0, 0)


def test_intersection_is_the_determinant():
    assert intersection(Slope(1, 0), Slope(0, 1)) == 1
    assert intersection(Slope(1, 0), Slope(1, 0)) == 0
    assert intersection(Slope(2, 1), Slope(1, 1)) == 1
    assert intersection(Slope(3, 1), Slope(1, 2)) == 5
    # symmetric, and exact on integer input
    rng = np.random.default_rng(11)
    for _ in range(50):
        p1, q1 = int(rng.integers(-9, 10)), int(rng.integers(-9, 10))
        p2, q2 = int(rng.integers(-9, 10)), int(rng.integers(-9, 10))
        if (p1, q1) == (0, 0) or (p2, q2) == (0, 0):
            continue
        a = canonicalize_slope(p1, q1)
        b = canonicalize_slope(p2, q2)
        assert intersection(a, b) == intersection(b, a)
        assert intersection(a, b) == abs(a.p * b.q - a.q * b.p)


def test_foliation_normalization_and_intersection():
    mu = foliation(3.0, 4.0)
    assert math.isclose(math.hypot(mu.a, mu.b), 1.0, rel_tol=0, abs_tol=1e-15)
    nu = foliation_from_slope(Slope(1, 1))
    assert math.isclose(intersection(nu, Slope(-1, 1)) ** 2, 2.0, rel_tol=1e-12)
    # scale invariance of the direction after normalization
    assert foliation(30.0, 40.0) == mu
    with pytest.raises(InvalidCurveError):
        foliation(0.0, 0.0)
    # mixed foliation/slope pairing agrees with the raw cross product
    assert math.isclose(
        intersection(mu, Slope(2, 1)), abs(mu.a * 1 - mu.b * 2), rel_tol=0, abs_tol=1e-15
    )


def test_farey_enumeration_heights_and_uniqueness():
    for h in (1, 2, 5, 12):
        panel = farey_enumerate(h)
        assert len(set(panel)) == len(panel)
        for s in panel:
            assert max(abs(s.p), abs(s.q)) <= h
            assert math.gcd(s.p, s.q) == 1
        # every coprime pair of height <= h shows up
        count = 0
        for p in range(-h, h + 1):
            for q in range(0, h + 1):
                if (p, q) == (0, 0) or math.gcd(abs(p), q) != 1:
                    continue
                if q == 0 and p != 1:
                    continue
                count += 1
        assert len(panel) == count


def test_slope_array_matches_enumeration():
    panel = farey_enumerate(7)
    arr = slope_array(7)
    assert arr.shape == (len(panel), 2)
    for row, s in zip(arr, panel):
        assert int(row[0]) == s.p and int(row[1]) == s.q


def test_farey_parents_recover_mediant():
    for s in farey_enumerate(6):
        if s in (Slope(0, 1), Slope(1, 0)):
            continue
        trip = farey_parents(s)
        assert isinstance(trip, FareyTriple)
        pa, pb = trip.parent_a, trip.parent_b
        assert intersection(pa, pb) == 1
        assert intersection(pa, s) == 1 and intersection(pb, s) == 1
        # up to the projective sign, one of sum/difference of the parents is
        # the child and the other is the coparent
        combos = {
            canonicalize_slope(pa.p + pb.p, pa.q + pb.q),
            canonicalize_slope(pa.p - pb.p, pa.q - pb.q),
        }
        assert combos == {s, trip.coparent}


def test_mapping_class_action_preserves_intersection():
    m = MappingClass(2, 1, 1, 1)
    rng = np.random.default_rng(3)
    for _ in range(40):
        p1, q1 = int(rng.integers(-6, 7)), int(rng.integers(-6, 7))
        p2, q2 = int(rng.integers(-6, 7)), int(rng.integers(-6, 7))
        if (p1, q1) == (0, 0) or (p2, q2) == (0, 0):
            continue
        a = canonicalize_slope(p1, q1)
        b = canonicalize_slope(p2, q2)
        assert intersection(
            apply_mapping_class_to_slope(m, a), apply_mapping_class_to_slope(m, b)
        ) == intersection(a, b)


def test_foliation_is_hashable_and_sign_normalized():
    mu = Foliation(0.6, 0.8)
    assert hash(mu) == hash(Foliation(0.6, 0.8))
    # the normalizer resolves the projective sign
    assert foliation(-0.6, -0.8) == Foliation(0.6, 0.8)
    with pytest.raises(InvalidCurveError):
        Foliation(-0.6, -0.8)
