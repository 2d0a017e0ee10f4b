import math

import numpy as np
import pytest

from dualbilliards.billiards import (BilliardMap, CausticGeometry, TableCurve, billiard_step, caustic_area_function,
                                     caustic_omega, circle_string_length, string_construction, string_parameter,
                                     tangency_persistence)
from dualbilliards.curve import Curve, constant_profile, ellipse_curve
from dualbilliards.errors import CausticNotVisible, DomainGap, Tangential

UNIT = Curve(constant_profile(1.0), 1.0, 0.0)
TABLE = ellipse_curve(2.0, 1.0)
CONFOCAL = ellipse_curve(math.sqrt(3.5), math.sqrt(0.5))


def circle(r, center=(0.0, 0.0)):
    return Curve(constant_profile(r), r + center[0], center[1])


def test_table_arclength_roundtrip():
    tab = TableCurve(TABLE)
    th = np.linspace(0.0, 2 * np.pi, 37)
    assert np.allclose(tab.theta_of(tab.t_of(th)), th, atol=1e-12)
    assert tab.perimeter == pytest.approx(9.688448220547675, rel=1e-12)


def test_circle_step_closed_form():
    bmap = BilliardMap(UNIT)
    for om in (0.3, 1.0, 2.5):
        t1, om1 = bmap.step(0.2, om)
        assert t1 - 0.2 == pytest.approx(2 * om, abs=1e-12)
        assert om1 == pytest.approx(om, abs=1e-12)


def test_diameter_is_two_periodic():
    bmap = BilliardMap(TABLE)
    o = bmap.orbit(0.0, math.pi / 2, 2)
    assert o[1, 0] == pytest.approx(TableCurve(TABLE).perimeter / 2, abs=1e-10)
    assert o[2, 0] == pytest.approx(TableCurve(TABLE).perimeter, abs=1e-10)
    assert o[2, 1] == pytest.approx(math.pi / 2, abs=1e-10)


def test_tangential_rejected():
    with pytest.raises(Tangential):
        billiard_step(UNIT, 0.0, 0.0)
    with pytest.raises(Tangential):
        billiard_step(UNIT, 0.0, math.pi)


def test_reflection_law(rng):
    bmap = BilliardMap(TABLE)
    tab = bmap.table
    for _ in range(10):
        t, om = rng.uniform(0, tab.perimeter), rng.uniform(0.1, 3.0)
        t1, om1 = bmap.step(t, om)
        t2, _ = bmap.step(t1, om1)
        p0, p1, p2 = tab.point(np.array([t, t1, t2]))
        T1 = tab.tangent(t1)
        din = (p1 - p0) / np.hypot(*(p1 - p0))
        dout = (p2 - p1) / np.hypot(*(p2 - p1))
        # angle of incidence equals angle of reflection
        assert din @ T1 == pytest.approx(dout @ T1, abs=1e-10)


def test_generating_function_partials(rng):
    bmap = BilliardMap(TABLE)
    h = 1e-6
    for _ in range(10):
        t0 = rng.uniform(0, 9)
        t1 = t0 + rng.uniform(0.5, 8)
        h1, h2 = bmap.h_partials(t0, t1)
        assert h1 == pytest.approx((bmap.gen_h(t0 + h, t1) - bmap.gen_h(t0 - h, t1)) / (2 * h), abs=1e-8)
        assert h2 == pytest.approx((bmap.gen_h(t0, t1 + h) - bmap.gen_h(t0, t1 - h)) / (2 * h), abs=1e-8)


def test_step_consistent_with_generating_function(rng):
    bmap = BilliardMap(TABLE)
    for _ in range(10):
        t, om = rng.uniform(0, 9), rng.uniform(0.2, 2.9)
        t1, om1 = bmap.step(t, om)
        h1, h2 = bmap.h_partials(t, t1)
        assert h1 == pytest.approx(math.cos(om), abs=1e-10)
        assert h2 == pytest.approx(-math.cos(om1), abs=1e-10)


def test_twist_coordinates_area_preserving(rng):
    bmap = BilliardMap(TABLE)
    h = 1e-5
    for _ in range(5):
        t, y = rng.uniform(0, 9), rng.uniform(-0.8, 0.8)
        a = np.subtract(bmap.step_twist(t + h, y), bmap.step_twist(t - h, y))
        b = np.subtract(bmap.step_twist(t, y + h), bmap.step_twist(t, y - h))
        assert (a[0] * b[1] - a[1] * b[0]) / (4 * h * h) == pytest.approx(1.0, abs=1e-7)


def test_tangency_points_on_circle():
    geo = CausticGeometry(circle(0.5))
    x = np.array([[1.0, 0.0]])
    phi1, phi2 = geo.tangency(x)
    # tangents from (1, 0) to the radius-1/2 circle touch at normal angles +-pi/3
    got = np.sort(np.mod(np.array([phi1[0], phi2[0]]) + np.pi, 2 * np.pi) - np.pi)
    assert got == pytest.approx([-math.pi / 3, math.pi / 3], abs=1e-12)
    with pytest.raises(CausticNotVisible):
        geo.tangency(np.array([[0.1, 0.0]]))


def test_string_parameter_circle_closed_form():
    t = np.linspace(0, 2 * np.pi, 40)
    L = string_parameter(UNIT, circle(0.5), t)
    assert np.ptp(L) < 1e-10
    assert L[0] == pytest.approx(circle_string_length(1.0, 0.5), abs=1e-12)


def test_string_parameter_confocal():
    tab = TableCurve(TABLE)
    L = string_parameter(tab, CONFOCAL, np.linspace(0, tab.perimeter, 64))
    assert np.ptp(L) < 1e-8


def test_string_parameter_shifted_caustic():
    tab = TableCurve(TABLE)
    L = string_parameter(tab, ellipse_curve(math.sqrt(3.5), math.sqrt(0.5), center=(0.05, 0.05)),
                         np.linspace(0, tab.perimeter, 64))
    assert np.ptp(L) > 1e-3


def test_tangency_persists():
    rep = tangency_persistence(TABLE, CONFOCAL, 0.3, 100)
    assert rep.max_defect < 1e-6


def test_caustic_omega_circle():
    # chord tangent to the radius-r circle makes angle arccos(r) with the unit circle's tangent
    assert caustic_omega(UNIT, circle(0.5), 1.0) == pytest.approx(math.acos(0.5), abs=1e-12)


def test_area_function_equals_string_minus_perimeter():
    bmap = BilliardMap(TABLE)
    for t in (0.0, 1.3, 4.0):
        a = caustic_area_function(bmap, CONFOCAL, t)
        assert a.value == pytest.approx(a.string_minus_perimeter, abs=1e-10)
    vals = [caustic_area_function(bmap, CONFOCAL, t).value for t in np.linspace(0, 9, 6)]
    assert np.ptp(vals) < 1e-8


def test_point_sample_caustic():
    # polygon samples: exact up to the support fit for a circle, second order in the sample count otherwise
    tab = TableCurve(TABLE)
    spreads = []
    for n in (200, 400, 800):
        ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
        pts = np.stack([math.sqrt(3.5) * np.cos(ang), math.sqrt(0.5) * np.sin(ang)], axis=1)
        spreads.append(np.ptp(string_parameter(tab, pts, np.linspace(0, tab.perimeter, 32))))
    assert spreads[2] < 1e-5
    assert spreads[0] / spreads[1] > 3 and spreads[1] / spreads[2] > 3
    ang = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    ring = 0.5 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert np.ptp(string_parameter(UNIT, ring, np.linspace(0, 6, 32))) < 1e-8


def test_string_construction_circle():
    length = 7.0
    st = string_construction(circle(0.5), length)
    radius = np.hypot(*st.points.T)
    assert np.ptp(radius) < 1e-10
    assert circle_string_length(radius[0], 0.5) == pytest.approx(length, abs=1e-10)


def test_string_construction_reproduces_length():
    st = string_construction(CONFOCAL, 10.0)
    tab = TableCurve(st.curve)
    L = string_parameter(tab, CONFOCAL, np.linspace(0, tab.perimeter, 32))
    assert np.max(np.abs(L - 10.0)) < 1e-8
    assert tangency_persistence(st.curve, CONFOCAL, 0.0, 20).max_defect < 1e-8


def test_string_too_short():
    with pytest.raises(DomainGap):
        string_construction(circle(0.5), 3.0)
