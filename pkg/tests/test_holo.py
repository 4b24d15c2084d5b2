"""Nonexpanding holomorphic self-maps: primitive validation, drift, boundary
extraction along record subsequences, the curve growth bound, the per-step
horofunction inequality and the bounded/escaping classification."""

from __future__ import annotations

import math

import numpy as np
import pytest

from teichlab import holo, torus
from teichlab.curves import Slope, farey_enumerate, foliation
from teichlab.errors import (
    BoundedOrbitError,
    ConvergenceError,
    ExpansiveMapError,
    InvalidSpecError,
)
from teichlab.holo import AffineShrink, DiskBlaschke, Mobius, SelfMap
from teichlab.torus import TorusPoint

X0 = TorusPoint(0.0, 1.0)
HALF_LOG2 = 0.5 * math.log(2.0)

DOUBLING = SelfMap((Mobius(2.0, 0.0, 0.0, 1.0),), label="2tau")
PARABOLIC = SelfMap((Mobius(1.0, 1.0, 0.0, 1.0),), label="tau+1")
SHRINK_2I = SelfMap((AffineShrink(0.5, 2.0j),), label="(tau+2i)/2")
ELLIPTIC = SelfMap((Mobius(0.0, -1.0, 1.0, 0.0),), label="-1/tau")


def test_primitive_validation():
    with pytest.raises(InvalidSpecError):
        Mobius(1.0, 2.0, 1.0, 2.0)  # zero determinant
    with pytest.raises(InvalidSpecError):
        Mobius(0.0, 1.0, 1.0, 0.0)  # negative determinant
    with pytest.raises(InvalidSpecError):
        AffineShrink(1.5, 0.0)
    with pytest.raises(InvalidSpecError):
        AffineShrink(0.5, -1.0j)
    with pytest.raises(InvalidSpecError):
        DiskBlaschke((("aut", 0.8, 0.8, 0.0),))  # center outside the disk
    with pytest.raises(InvalidSpecError):
        DiskBlaschke((("pow", 0),))
    with pytest.raises(InvalidSpecError):
        DiskBlaschke((("spin", 1),))


def test_expansive_maps_are_rejected():
    class _Stretch:
        def apply(self, tau: complex) -> complex:
            return complex(3.0 * tau.real, tau.imag)

    with pytest.raises(ExpansiveMapError):
        SelfMap((_Stretch(),), label="stretch")
    # isometries and honest contractions pass the sampled check
    SelfMap((Mobius(2.0, 1.0, 3.0, 2.0),))
    SelfMap((AffineShrink(0.7, 1.0 + 1.0j),))
    SelfMap((DiskBlaschke((("pow", 2),)),))


def test_step_distances_never_increase():
    maps = [
        DOUBLING,
        PARABOLIC,
        SHRINK_2I,
        SelfMap((DiskBlaschke((("aut", 0.2, 0.1, 0.9), ("pow", 2))),)),
        SelfMap((Mobius(1.0, 1.0, 0.0, 1.0), AffineShrink(0.9, 0.5j))),
    ]
    worst = 0.0
    for f in maps:
        x = TorusPoint(0.3, 1.2)
        fx = f.apply(x)
        step = torus.teich_distance(x, fx)
        for _ in range(40):
            if step < 1e-7:
                # below this the distance between nearly coincident points is
                # itself noise
                break
            x, fx = fx, f.apply(fx)
            nxt = torus.teich_distance(x, fx)
            worst = max(worst, nxt - step)
            step = nxt
    assert worst <= 1e-12


def test_drift_of_doubling_map():
    rep = holo.drift_report(DOUBLING, X0, n_max=200)
    assert abs(rep.value - HALF_LOG2) <= 1e-12
    assert rep.tail_delta <= 1e-12
    # basepoint independence of the difference-quotient estimate
    rep2 = holo.drift_report(DOUBLING, TorusPoint(1.0, 3.0), n_max=200)
    assert abs(rep.tail_value - rep2.tail_value) <= 1e-6


def test_boundary_extraction_of_doubling_map():
    ext = holo.extract_boundary_point(DOUBLING, X0)
    assert abs(ext.drift_value - HALF_LOG2) <= 1e-12
    # record times land exactly at the dyadic targets for this orbit
    assert tuple((r.eps, r.n) for r in ext.subsequence) == tuple(
        (0.5 ** i, 2 ** i) for i in range(1, 7)
    )
    worst = 0.0
    for beta in farey_enumerate(10):
        worst = max(worst, abs(ext.point.extremal(beta) - abs(beta.q)))
    assert worst <= 1e-6


def test_extraction_is_honest_about_slow_escape():
    # tau + 1 escapes too slowly for the default tolerance
    with pytest.raises(ConvergenceError):
        holo.extract_boundary_point(PARABOLIC, X0)
    # a coarser tolerance and deeper schedule give a rough limit
    ext = holo.extract_boundary_point(
        PARABOLIC,
        X0,
        eps_schedule=tuple(0.5 ** i for i in range(1, 10)),
        e_tol=5e-2,
    )
    assert ext.subsequence[-1].n >= 256
    worst = max(
        abs(ext.point.extremal(beta) - abs(beta.q)) for beta in farey_enumerate(6)
    )
    assert worst <= 5e-2


def test_extraction_rejects_bounded_orbits():
    with pytest.raises(BoundedOrbitError):
        holo.extract_boundary_point(SHRINK_2I, X0)


def test_growth_bound_for_doubling_map():
    betas = list(farey_enumerate(10))
    gb = holo.verify_growth_bound(DOUBLING, X0, betas, n_max=40)
    assert abs(gb.lam - 2.0) <= 1e-12
    assert gb.bound_ok
    assert gb.kerckhoff_ok
    rows = {row.beta: row for row in gb.rows}
    vert = rows[Slope(0, 1)]
    # the vertical curve meets the bound with equality
    assert vert.min_margin >= -1e-9
    assert vert.min_margin <= 1e-12
    assert vert.final_root == 2.0
    for row in gb.rows:
        assert row.min_margin >= -1e-9
        assert row.final_root >= gb.lam - 1e-2
    zero = dict(gb.zero_rows)
    assert set(zero) == {Slope(1, 0)}
    # the horizontal curve decays at rate 1/lam, outside the bound's scope
    assert zero[Slope(1, 0)] == 0.5


def test_growth_bound_degenerate_identity():
    ident = SelfMap((Mobius(1.0, 0.0, 0.0, 1.0),), label="id")
    ext = holo.extract_boundary_point(DOUBLING, X0)
    synthetic = holo.BoundaryExtraction(ext.point, (), 0.0)
    gb = holo.verify_growth_bound(ident, X0, list(farey_enumerate(5)), n_max=20, extraction=synthetic)
    assert gb.lam == 1.0
    assert gb.bound_ok
    assert gb.kerckhoff_ok


def test_step_inequality_doubling_and_identity():
    pts = [
        X0,
        TorusPoint(1.0, 2.0),
        TorusPoint(-0.5, 0.7),
        TorusPoint(0.0, 3.0),
        TorusPoint(0.3, 0.4),
    ]
    ext = holo.extract_boundary_point(DOUBLING, X0)
    rep = holo.verify_step_inequality(DOUBLING, X0, ext.point, pts)
    assert rep.ok
    assert abs(rep.l - HALF_LOG2) <= 1e-12
    assert rep.max_dev_el <= 1e-9
    assert rep.max_dev_e2l > 0.5
    assert rep.supported == "e^l"
    for row in rep.rows:
        assert abs(row.gain - math.sqrt(2.0)) <= 1e-9
        assert row.h_after <= row.h_before - rep.l + 1e-9

    ident = SelfMap((Mobius(1.0, 0.0, 0.0, 1.0),), label="id")
    rep0 = holo.verify_step_inequality(ident, X0, ext.point, pts)
    assert rep0.ok
    assert rep0.l == 0.0
    assert rep0.supported == "both (l = 0)"


def test_classify_orbit_escaping():
    analysis = holo.classify_orbit(DOUBLING, X0)
    assert analysis.classification == "Escaping"
    assert abs(analysis.drift - HALF_LOG2) <= 1e-12
    assert abs(analysis.lambda_ext - 2.0) <= 1e-12
    assert analysis.boundary is not None
    assert analysis.sup_ratio is not None and analysis.sup_ratio >= 1.0
    assert analysis.subsequence


def test_classify_orbit_bounded():
    analysis = holo.classify_orbit(SHRINK_2I, X0)
    assert analysis.classification == "Bounded"
    last = analysis.diagnostics["last_point"]
    assert abs(last.re - 0.0) <= 1e-6 and abs(last.im - 2.0) <= 1e-6

    fixed = holo.classify_orbit(ELLIPTIC, X0)
    assert fixed.classification == "Bounded"
    assert fixed.drift == 0.0
    assert fixed.diagnostics["radius"] == 0.0

    blaschke = holo.classify_orbit(SelfMap((DiskBlaschke((("pow", 2),)),)), X0)
    assert blaschke.classification == "Bounded"
    assert blaschke.diagnostics["radius"] == 0.0

    composite = holo.classify_orbit(
        SelfMap((Mobius(1.0, 1.0, 0.0, 1.0), AffineShrink(0.9, 0.5j))), X0
    )
    assert composite.classification == "Bounded"
    assert composite.diagnostics["radius"] < 3.0


def test_classify_orbit_inconclusive():
    analysis = holo.classify_orbit(PARABOLIC, X0, budget=2000)
    assert analysis.classification == "Inconclusive"
    assert analysis.boundary is None
    assert analysis.diagnostics["n_stop"] == 2000
