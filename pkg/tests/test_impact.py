import math

import numpy as np
import pytest

from dualbilliards.curve import Piece, RadiusProfile, trig_profile
from dualbilliards.dualmap import DualBilliardMap, LiftedPoint
from dualbilliards.errors import DomainGap, NoCollision
from dualbilliards.impact import (GapDynamics, OscState, action_integral, boundary_velocity, flight, return_map,
                                  simulate, wall_position, write_events_csv)


def test_stationary_wall(curves):
    c = curves["circle"]
    p, dp = wall_position(c.profile, 1.0, 0.0, np.linspace(0, 10, 7))
    assert np.allclose(p, 1.0, atol=1e-14) and np.allclose(dp, 0.0, atol=1e-14)


def test_wall_cos2_particular():
    prof = trig_profile([1.0, 0.0, 0.0, 0.1, 0.0])
    t = np.linspace(-3, 9, 25)
    p, _ = wall_position(prof, 1 - 0.1 / 3, 0.0, t)
    assert np.max(np.abs(p - (1 - 0.1 / 3 * np.cos(2 * t)))) < 1e-13


@pytest.mark.parametrize("name", ["ellipse", "jump", "trig", "flatpoint"])
def test_wall_matches_support(curves, name):
    c = curves[name]
    t = np.linspace(0, 2 * np.pi, 1000)
    p, dp = wall_position(c.profile, c.p0, c.q0, t)
    sp, sdp = c.support(t)
    assert np.max(np.abs(p - sp)) < 1e-12
    assert np.max(np.abs(dp - sdp)) < 1e-12


def test_constant_forcing_flight(curves):
    dyn = GapDynamics(curves["circle"].profile)
    for v in (0.01, 0.5, 3.0):
        ev = dyn.flight(OscState(0.4, 0.0, v))
        assert ev.t_c - 0.4 == pytest.approx(2 * math.atan(v), abs=1e-13)
        assert ev.v_after == pytest.approx(v, abs=1e-12)
        assert ev.v_after + ev.v_before == 0.0


def test_small_velocity_short_flight(curves):
    ev = flight(curves["ellipse"].profile, OscState(0.0, 0.0, 1e-6))
    assert 0 < ev.t_c < 1e-4


def test_flight_preconditions(curves):
    with pytest.raises(DomainGap):
        flight(curves["circle"].profile, OscState(0.0, 0.1, 1.0))
    with pytest.raises(DomainGap):
        return_map(curves["circle"].profile, 0.0, 0.0)


def test_non_sub_sine_wall_rejected():
    # negative forcing pushes the gap away from the wall: no return within half a period
    prof = RadiusProfile([Piece(0.0, 2 * np.pi, poly=(-0.5,))])
    with pytest.raises(NoCollision):
        GapDynamics(prof).flight(OscState(0.0, 0.0, 1.0))


def test_return_velocity_two_routes(curves):
    # closed-form velocity at the collision versus a difference quotient of the gap
    dyn = GapDynamics(curves["trig"].profile)
    t0, v = 0.7, 0.8
    ev = dyn.flight(OscState(t0, 0.0, v))
    h = 1e-6
    ym, _ = dyn.propagate(t0, 0.0, v, ev.t_c - h)
    yp, _ = dyn.propagate(t0, 0.0, v, ev.t_c + h)
    assert (yp - ym) / (2 * h) == pytest.approx(ev.v_before, abs=1e-9)


@pytest.mark.parametrize("name", ["circle", "ellipse", "jump", "trig", "flatpoint"])
def test_return_map_equals_envelope_step(curves, maps, rng, name):
    dyn = GapDynamics(curves[name].profile)
    m = maps[name]
    for _ in range(20):
        t, w = rng.uniform(0, 2 * np.pi), 10 ** rng.uniform(-3, 0.5)
        t2, w2 = return_map(dyn, t, w)
        q = m.step_envelope(LiftedPoint(t, w))
        assert t2 == pytest.approx(q.x, abs=1e-10)
        assert w2 == pytest.approx(q.gamma, abs=1e-10)


def test_boundary_velocity_consistent_with_flight(curves):
    dyn = GapDynamics(curves["ellipse"].profile)
    ev = dyn.flight(OscState(1.0, 0.0, 0.9))
    v, vret = boundary_velocity(dyn, 1.0, ev.t_c)
    assert v == pytest.approx(0.9, abs=1e-10)
    assert vret == pytest.approx(ev.v_before, abs=1e-10)


def test_action_circle_closed_form(curves):
    for d in (0.3, 1.5, 2.8):
        assert action_integral(curves["circle"].profile, 0.0, d) == pytest.approx(-(math.tan(d / 2) - d / 2), abs=1e-12)


def test_action_identity(curves, maps, rng):
    for name in ("ellipse", "trig", "jump"):
        dyn = GapDynamics(curves[name].profile)
        for _ in range(10):
            t1 = rng.uniform(0, 2 * np.pi)
            t2 = t1 + rng.uniform(0.05, 3.0)
            assert action_integral(dyn, t1, t2) + maps[name].gen_h(t1, t2) == pytest.approx(0.0, abs=1e-10)


def test_action_derivative(curves):
    dyn = GapDynamics(curves["ellipse"].profile)
    t1, t2, h = 0.5, 2.0, 1e-5
    fd = (action_integral(dyn, t1, t2 + h) - action_integral(dyn, t1, t2 - h)) / (2 * h)
    _, vret = boundary_velocity(dyn, t1, t2)
    assert fd == pytest.approx(-0.5 * vret ** 2, abs=1e-6)
    with pytest.raises(DomainGap):
        action_integral(dyn, 0.0, 3.5)


def test_return_map_area_preserving(curves, rng):
    dyn = GapDynamics(curves["trig"].profile)
    h = 1e-5
    for _ in range(5):
        t, w = rng.uniform(0, 2 * np.pi), rng.uniform(0.1, 2)
        a = np.array(return_map(dyn, t + h, w)) - np.array(return_map(dyn, t - h, w))
        b = np.array(return_map(dyn, t, w + h)) - np.array(return_map(dyn, t, w - h))
        det = (a[0] * b[1] - a[1] * b[0]) / (4 * h * h)
        assert det == pytest.approx(1.0, abs=1e-7)


def test_simulate_and_csv(curves, tmp_path):
    ev = simulate(curves["ellipse"].profile, 0.0, 0.5, 20)
    assert len(ev) == 20
    assert all(e.v_after > 0 and e.v_after == -e.v_before for e in ev)
    assert all(0 < b.t_c - a.t_c < math.pi for a, b in zip(ev, ev[1:]))
    f = tmp_path / "ev.csv"
    write_events_csv(ev, f)
    lines = f.read_text().splitlines()
    assert lines[0] == "n,t_c,v_before,v_after,w"
    assert len(lines) == 21


def test_launch_just_before_piece_boundary(curves):
    # a nearly empty first piece must not be mistaken for a collision
    ev = GapDynamics(curves["circle"].profile).flight(OscState(2 * math.pi - 1e-15, 0.0, 0.125))
    assert ev.t_c - (2 * math.pi - 1e-15) == pytest.approx(2 * math.atan(0.125), abs=1e-13)
    assert ev.v_after > 0
