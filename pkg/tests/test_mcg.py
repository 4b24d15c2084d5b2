"""Integer mapping classes: group arithmetic, the trace trichotomy, and the
per-curve length-growth limits with their cluster summary."""

from __future__ import annotations

import math

import numpy as np
import pytest

from teichlab import fricke, mcg, torus
from teichlab.curves import Slope, farey_enumerate
from teichlab.errors import InvalidMappingClassError
from teichlab.mcg import TWIST_A, TWIST_B, MappingClass
from teichlab.torus import TorusPoint


def test_mapping_class_validation_and_arithmetic():
    with pytest.raises(InvalidMappingClassError):
        MappingClass(1, 1, 1, 1)  # det 0
    with pytest.raises(InvalidMappingClassError):
        MappingClass(2, 0, 0, 1)  # det 2
    with pytest.raises(InvalidMappingClassError):
        MappingClass(1.0, 0, 0, 1)  # floats rejected
    m = MappingClass(2, 1, 1, 1)
    assert m @ m.inverse() == MappingClass.identity()
    assert m ** 0 == MappingClass.identity()
    assert m ** 3 == m @ m @ m
    assert (m ** -2) @ (m ** 2) == MappingClass.identity()
    # exact integer powers: entries are Fibonacci-like and stay exact
    big = m ** 90
    assert big.a * big.d - big.b * big.c == 1


def test_trace_trichotomy():
    assert mcg.classify(MappingClass(2, 1, 1, 1)) == "Anosov"
    assert mcg.classify(TWIST_A) == "Reducible"
    assert mcg.classify(TWIST_B) == "Reducible"
    assert mcg.classify(MappingClass(0, -1, 1, 0)) == "Periodic"
    assert mcg.classify(MappingClass.identity()) == "Periodic"
    assert mcg.classify(MappingClass(-1, 0, 0, -1)) == "Reducible"  # trace -2
    assert mcg.classify(MappingClass(-2, -1, -1, -1)) == "Anosov"  # trace -3


def test_dilatation_closed_form():
    assert mcg.dilatation(MappingClass(0, -1, 1, 0)) == 1.0
    assert mcg.dilatation(TWIST_A) == 1.0
    lam = mcg.dilatation(MappingClass(2, 1, 1, 1))
    assert math.isclose(lam, (3.0 + math.sqrt(5.0)) / 2.0, rel_tol=1e-15)
    # dilatation is a root of x^2 - tr x + 1
    assert abs(lam * lam - 3.0 * lam + 1.0) <= 1e-12


def test_spectral_limit_anosov_matches_eigenvalue():
    x = TorusPoint(0.0, 1.0)
    m = MappingClass(2, 1, 1, 1)
    lam = mcg.dilatation(m)
    for alpha in (Slope(0, 1), Slope(1, 0), Slope(1, 1)):
        entry = mcg.spectral_limit("torus", m, alpha, x, 40)
        assert abs(entry.limit - lam) <= 1e-9
        assert entry.ratio_spread <= 1e-9
        assert entry.dilatation_gap <= 1e-9
        assert len(entry.roots) == 40
        # the n-th roots carry an O(1/n) prefactor bias but sit near the limit
        assert abs(entry.roots[-1] - lam) <= 0.25


def test_spectral_limit_twist_grows_linearly():
    x = TorusPoint(0.0, 1.0)
    entry = mcg.spectral_limit("torus", TWIST_A, Slope(0, 1), x, 400)
    assert abs(entry.limit - 1.0) <= 1e-2
    # the fixed curve does not grow at all
    fixed = mcg.spectral_limit("torus", TWIST_A, Slope(1, 0), x, 50)
    assert fixed.limit == 1.0
    assert fixed.ratio_spread == 0.0


def test_spectral_limit_periodic_is_bounded():
    x = TorusPoint(0.3, 1.2)
    rot = MappingClass(0, -1, 1, 0)
    entry = mcg.spectral_limit("torus", rot, Slope(2, 1), x, 40)
    assert abs(entry.limit - 1.0) <= 1e-9


def test_spectral_report_clusters():
    x = TorusPoint(0.0, 1.0)
    rep = mcg.spectral_report("torus", MappingClass(2, 1, 1, 1), x, 40)
    assert rep.classification == "Anosov"
    assert rep.k == 1
    lam = mcg.dilatation(MappingClass(2, 1, 1, 1))
    assert abs(rep.spectrum[0] - lam) <= 1e-6
    assert set(rep.per_curve) == set(farey_enumerate(5))

    # linear growth needs a long window before the cluster collapses to 1
    rep = mcg.spectral_report("torus", TWIST_A, x, 1500)
    assert rep.classification == "Reducible"
    assert rep.k == 1
    assert abs(rep.spectrum[0] - 1.0) <= 1e-3


def test_spectral_limit_fricke_matches_torus_rate():
    # the growth rate of hyperbolic lengths under an Anosov class equals the
    # dilatation on both models
    m = MappingClass(2, 1, 1, 1)
    xf = fricke.FrickePoint.from_traces(3.0, 3.0, 3.0)
    entry = mcg.spectral_limit("fricke", m, Slope(0, 1), xf, 25)
    assert abs(entry.limit - mcg.dilatation(m)) <= 1e-6


def test_exact_iteration_survives_long_products():
    x = TorusPoint(0.0, 1.0)
    m = MappingClass(2, 1, 1, 1)
    logs = mcg._log_length_sequence("torus", m, Slope(0, 1), x, 120)
    assert len(logs) == 121
    lam = mcg.dilatation(m)
    # slope of the log sequence equals log lam far beyond float matrix range
    assert abs((logs[120] - logs[100]) / 20.0 - math.log(lam)) <= 1e-12


def test_act_on_point_equivariance():
    m = MappingClass(2, 1, 1, 1)
    xt = TorusPoint(0.2, 1.5)
    yt = mcg.act_on_point(m, xt)
    assert isinstance(yt, TorusPoint)
    assert abs(
        torus.thurston_metric_exact(xt, mcg.act_on_point(m.inverse(), yt))
    ) <= 1e-7
    xf = fricke.FrickePoint.from_traces(3.0, 3.0, 3.0)
    yf = mcg.act_on_point(m, xf)
    assert fricke.markov_residual(yf) <= 1e-9
