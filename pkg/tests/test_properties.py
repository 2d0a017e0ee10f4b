import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualbilliards.billiards import BilliardMap
from dualbilliards.curve import Curve, builtin_curves, constant_profile, ellipse_curve, trig_profile
from dualbilliards.dualmap import DualBilliardMap, LiftedPoint
from dualbilliards.impact import GapDynamics, OscState
from dualbilliards.twistcore import rotation_number

CURVES = builtin_curves()
MAPS = {k: DualBilliardMap(v) for k, v in CURVES.items()}
SMOOTH = ["circle", "ellipse", "trig"]
ALL = sorted(MAPS)
FAST = settings(max_examples=40, deadline=None)

angle = st.floats(0.0, 2 * math.pi, allow_nan=False)
level = st.floats(-3.0, 1.0).map(lambda e: 10.0 ** e)


@FAST
@given(angle, level)
def test_circle_conserves_gamma(x, g):
    q = MAPS["circle"].step_envelope(LiftedPoint(x, g))
    assert q.gamma == pytest.approx(g, rel=1e-10)
    assert q.x - x == pytest.approx(2 * math.atan(math.sqrt(2 * g)), abs=1e-10)


@FAST
@given(st.sampled_from(ALL), angle, level)
def test_inverse_undoes_step(name, x, g):
    m = MAPS[name]
    back = m.step_inverse(m.step_envelope(LiftedPoint(x, g)))
    assert back.x == pytest.approx(x, abs=1e-10)
    assert back.gamma == pytest.approx(g, rel=1e-8)


@FAST
@given(st.sampled_from(ALL), angle, level)
def test_gap_in_allowable_range(name, x, g):
    q = MAPS[name].step_envelope(LiftedPoint(x, g))
    assert 0 < q.x - x < math.pi


@FAST
@given(st.sampled_from(SMOOTH), angle, st.floats(0.05, 3.0))
def test_area_preservation(name, x, g):
    assert MAPS[name].jacobian(LiftedPoint(x, g)).det == pytest.approx(1.0, abs=1e-9)


@FAST
@given(st.sampled_from(ALL), angle, st.floats(0.01, 3.1))
def test_mixed_partial_negative(name, x, d):
    assert MAPS[name].gen_partials(x, x + d, second=False).h1 < 0
    assert MAPS[name].chords(x, x + d).L > 0


@FAST
@given(st.sampled_from(SMOOTH), angle, level, st.floats(1.01, 3.0))
def test_twist_monotone(name, x, g, factor):
    m = MAPS[name]
    assert m.step_envelope(LiftedPoint(x, g * factor)).x > m.step_envelope(LiftedPoint(x, g)).x


@FAST
@given(st.sampled_from(ALL), angle, st.floats(-2.0, 1.0).map(lambda e: 10.0 ** e))
def test_conjugacy(name, x, g):
    m = MAPS[name]
    q = LiftedPoint(x, g)
    z = m.from_envelope(q)
    w = m.step_euclidean(z)
    assert np.max(np.abs(w - m.from_envelope(m.step_envelope(q)))) < 1e-9 * (1 + np.hypot(*z))


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(ALL), angle, st.floats(-4.0, 3.0).map(lambda e: 10.0 ** e))
def test_rotation_in_range(name, x, g):
    r = rotation_number(MAPS[name], LiftedPoint(x, g), 50).value
    assert -1e-9 <= r <= 0.5 + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(-5, 5), st.floats(-5, 5))
def test_affine_invariance(a, b, zx, zy):
    z = np.array([zx, zy])
    if np.hypot(*z) < 1.05:
        return
    A = np.diag([a, b])
    img = DualBilliardMap(ellipse_curve(1.0, 1.0)).step_euclidean(z)
    assert np.allclose(A @ img, DualBilliardMap(ellipse_curve(a, b)).step_euclidean(A @ z), atol=1e-9)


coeff = st.floats(-0.15, 0.15)


@settings(max_examples=25, deadline=None)
@given(coeff, coeff, coeff, coeff, coeff, coeff)
def test_support_ode(c2, s2, c3, s3, c4, s4):
    prof = trig_profile([1.0, 0.0, 0.0, c2, s2, c3, s3, c4, s4])
    c = Curve.centered(prof)
    th = np.linspace(0.1, 6.0, 30)
    h = 1e-4
    p = lambda t: c.support(t)[0]
    assert np.max(np.abs((p(th + h) - 2 * p(th) + p(th - h)) / h ** 2 + p(th) - c.rho(th))) < 1e-6
    assert prof.closure_defect() < 1e-12


@FAST
@given(st.sampled_from(ALL), angle, st.floats(0.01, 3.0))
def test_collision_rule(name, t, v):
    ev = GapDynamics(CURVES[name].profile).flight(OscState(t, 0.0, v))
    assert ev.v_after == -ev.v_before and ev.v_after > 0
    assert 0 < ev.t_c - t < math.pi


TABLE = BilliardMap(ellipse_curve(2.0, 1.0))
UNIT = BilliardMap(Curve(constant_profile(1.0), 1.0, 0.0))


@settings(max_examples=25, deadline=None)
@given(angle, st.floats(0.05, 3.09))
def test_billiard_circle_angle_conserved(t, om):
    _, om1 = UNIT.step(t, om)
    assert om1 == pytest.approx(om, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 9.0), st.floats(0.05, 3.09))
def test_billiard_time_reversal(t, om):
    t1, om1 = TABLE.step(t, om)
    # launching back along the incoming chord returns to the start with the supplementary angle
    t2, om2 = TABLE.step(t1, math.pi - om1)
    p = TABLE.table.perimeter
    assert abs((t2 - t + 0.5 * p) % p - 0.5 * p) < 1e-9
    assert om2 == pytest.approx(math.pi - om, abs=1e-9)
