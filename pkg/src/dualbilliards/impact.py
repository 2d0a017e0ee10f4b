"""Impact oscillator: a harmonic particle bouncing elastically off a driven wall.

The wall moves by p'' + p = rho(t); the gap eta = x - p between particle and
wall obeys eta'' + eta = -rho(t) in flight.  Flights are propagated exactly
piece by piece (homogeneous solution plus a particular solution of each
piece's forcing), without using the dual-billiards chord formulas.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq

from .curve import TWO_PI, Piece, RadiusProfile
from .errors import DomainGap, NoCollision

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
GRAZE_TOL = 1e-14
_FLIGHT_STEP = 0.05


@dataclass(frozen=True)
class OscState:
    t: float
    eta: float
    eta_dot: float


@dataclass(frozen=True)
class CollisionEvent:
    t_c: float
    v_before: float
    v_after: float

    @property
    def w(self) -> float:
        return 0.5 * self.v_after ** 2


# -- per-piece exact solutions ----------------------------------------------------

class _PieceForcing:
    """Particular solution of y'' + y = -rho on one piece (lifted by ``base``)."""

    def __init__(self, piece: Piece, base: float):
        self.piece = piece
        self.base = base
        # polynomial part: y_p = -(P - P'' + P'''' - ...)
        if piece.poly:
            coeffs = np.array(piece.poly, float)
            acc = np.zeros_like(coeffs)
            term, sign = coeffs, 1.0
            while term.size and np.any(term):
                acc[:term.size] += sign * term
                term = P.polyder(term, 2)
                sign = -sign
            self.poly = -acc
            self.dpoly = P.polyder(self.poly) if self.poly.size > 1 else np.zeros(1)
        else:
            self.poly = None
        if piece.trig:
            t = np.asarray(piece.trig, float)
            self.c0 = t[0]
            self.m = np.arange(1, (len(t) - 1) // 2 + 1, dtype=float)
            self.a = t[1::2]
            self.b = t[2::2]
        else:
            self.c0 = None

    def __call__(self, s):
        """(y_p, y_p') at lifted times s."""
        s = np.asarray(s, float)
        loc = s - self.base
        y = np.zeros_like(loc)
        dy = np.zeros_like(loc)
        if self.poly is not None:
            u = loc - self.piece.start
            y += P.polyval(u, self.poly)
            dy += P.polyval(u, self.dpoly)
        if self.c0 is not None:
            y -= self.c0
            for m, a, b in zip(self.m, self.a, self.b):
                if a == 0.0 and b == 0.0:
                    continue
                c, sn = np.cos(m * loc), np.sin(m * loc)
                if m == 1.0:
                    # resonant forcing: y'' + y = -(a cos + b sin)
                    y += -0.5 * a * loc * sn + 0.5 * b * loc * c
                    dy += -0.5 * a * (sn + loc * c) + 0.5 * b * (c - loc * sn)
                else:
                    k = 1.0 / (1.0 - m * m)
                    y -= k * (a * c + b * sn)
                    dy -= k * m * (-a * sn + b * c)
        return y, dy


class _PieceFlow:
    """Exact solution of y'' + y = -rho on a piece from a given state."""

    def __init__(self, forcing: _PieceForcing, s0: float, y0: float, dy0: float):
        self.f = forcing
        self.s0 = s0
        yp, dyp = forcing(s0)
        self.r = y0 - float(yp)
        self.dr = dy0 - float(dyp)

    def __call__(self, s):
        s = np.asarray(s, float)
        c, sn = np.cos(s - self.s0), np.sin(s - self.s0)
        yp, dyp = self.f(s)
        return self.r * c + self.dr * sn + yp, -self.r * sn + self.dr * c + dyp


class GapDynamics:
    """Flight and collision machinery for one forcing profile."""

    def __init__(self, profile: RadiusProfile):
        self.profile = profile
        self.rho_max = float(np.max(profile.rho(np.linspace(0, TWO_PI, 4096, endpoint=False))))
        self._forcing: dict[tuple[int, int], _PieceForcing] = {}

    def _piece_at(self, t: float) -> tuple[int, float]:
        """Index of the piece containing t (right-continuous) and its lift base."""
        k = math.floor(t / TWO_PI)
        base = k * TWO_PI
        loc = t - base
        j = int(np.searchsorted(self.profile.starts, loc, side="right") - 1)
        j = min(max(j, 0), len(self.profile.pieces) - 1)
        if loc >= self.profile.ends[j] and j + 1 < len(self.profile.pieces):
            j += 1
        return j, base

    def _forcing_for(self, j: int, base: float) -> _PieceForcing:
        key = (j, int(round(base / TWO_PI)))
        if key not in self._forcing:
            self._forcing[key] = _PieceForcing(self.profile.pieces[j], base)
        return self._forcing[key]

    def _segments(self, t0: float, t1: float):
        """Pieces covering [t0, t1] as (lo, hi, forcing)."""
        j, base = self._piece_at(t0)
        lo = t0
        while lo < t1:
            piece = self.profile.pieces[j]
            hi = min(base + piece.end, t1)
            yield lo, hi, self._forcing_for(j, base)
            lo = base + piece.end
            j += 1
            if j == len(self.profile.pieces):
                j = 0
                base += TWO_PI

    def propagate(self, t0: float, y0: float, dy0: float, t1: float) -> tuple[float, float]:
        y, dy = y0, dy0
        for lo, hi, f in self._segments(t0, t1):
            flow = _PieceFlow(f, lo, y, dy)
            y, dy = (float(v) for v in flow(hi))
        return y, dy

    def flight(self, state: OscState) -> CollisionEvent:
        """Launch from the wall and find the next collision within half a period."""
        if state.eta != 0.0 or not state.eta_dot > 0:
            raise DomainGap("flight starts at the wall with positive gap velocity",
                            eta=state.eta, eta_dot=state.eta_dot)
        v = state.eta_dot
        t0 = state.t
        horizon = t0 + math.pi
        # comparison with constant forcing rho_max: the gap stays positive up to t0 + 2 atan(v / rho_max)
        first = t0 + math.atan(v / max(self.rho_max, 1e-12))
        # with rho >= 0 the gap is concave while positive and cannot return above 0 within pi of its
        # first zero, so any sample spacing below pi brackets that zero
        grid = np.concatenate([[first], np.arange(first + _FLIGHT_STEP, horizon, _FLIGHT_STEP), [horizon]])
        y, dy = 0.0, v
        for lo, hi, f in self._segments(t0, horizon):
            flow = _PieceFlow(f, lo, y, dy)
            inner = grid[(grid > lo) & (grid < hi)]
            ts = np.concatenate([[lo], inner, [hi]])
            ys, _ = flow(ts)
            # nonpositive samples before ``first`` are rounding (the gap is positive there)
            neg = np.nonzero((ys <= 0.0) & (ts >= first))[0]
            if len(neg):
                i = int(neg[0])
                a, b = ts[i - 1] if i > 0 else lo, ts[i]
                if ys[i] == 0.0:
                    tc = b
                else:
                    tc = brentq(lambda s: float(flow(s)[0]), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                vb = float(flow(tc)[1])
                if abs(vb) <= GRAZE_TOL * max(1.0, v):
                    raise NoCollision("grazing return (double root of the gap)", t=tc)
                return CollisionEvent(tc, vb, -vb)
            y, dy = (float(u) for u in flow(hi))
        raise NoCollision("no return to the wall within half a period (forcing is not sub-sine)",
                          t0=t0, v=v)


# -- public operations ------------------------------------------------------------

def wall_position(profile: RadiusProfile, p0: float, q0: float, t):
    """(p, p') of the wall: p = p0 cos t + q0 sin t + integral of sin(t - s) rho(s) over [0, t]."""
    t = np.atleast_1d(np.asarray(t, float))
    p = np.empty_like(t)
    dp = np.empty_like(t)
    for i, ti in enumerate(t):
        lo, hi = (0.0, ti) if ti >= 0 else (ti, 0.0)
        m = profile.moment(ti, lo, hi)
        sgn = 1.0 if ti >= 0 else -1.0
        # integral of exp(i(s - t)) rho: imaginary part is -integral of sin(t - s) rho
        p[i] = p0 * math.cos(ti) + q0 * math.sin(ti) - sgn * m.imag
        dp[i] = -p0 * math.sin(ti) + q0 * math.cos(ti) + sgn * m.real
    return (p, dp) if p.size > 1 else (float(p[0]), float(dp[0]))


def flight(profile: RadiusProfile | GapDynamics, state: OscState) -> CollisionEvent:
    dyn = profile if isinstance(profile, GapDynamics) else GapDynamics(profile)
    return dyn.flight(state)


def return_map(profile: RadiusProfile | GapDynamics, t: float, w: float) -> tuple[float, float]:
    """(t, w) -> (t', w') with w = eta_dot^2 / 2 at launch and after the next collision."""
    if not w > 0:
        raise DomainGap("w must be positive", w=w)
    dyn = profile if isinstance(profile, GapDynamics) else GapDynamics(profile)
    ev = dyn.flight(OscState(t, 0.0, math.sqrt(2.0 * w)))
    return ev.t_c, 0.5 * ev.v_after ** 2


def simulate(profile: RadiusProfile | GapDynamics, t0: float, w0: float, n: int) -> list[CollisionEvent]:
    dyn = profile if isinstance(profile, GapDynamics) else GapDynamics(profile)
    events = []
    t, v = t0, math.sqrt(2.0 * w0)
    for _ in range(n):
        ev = dyn.flight(OscState(t, 0.0, v))
        events.append(ev)
        t, v = ev.t_c, ev.v_after
    return events


def write_events_csv(events: list[CollisionEvent], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "t_c", "v_before", "v_after", "w"])
        for i, ev in enumerate(events):
            wr.writerow([i, repr(ev.t_c), repr(ev.v_before), repr(ev.v_after), repr(ev.w)])


def boundary_velocity(profile: RadiusProfile | GapDynamics, t1: float, t2: float) -> tuple[float, float]:
    """Launch velocity of the flight from the wall at t1 that returns at t2, and the return velocity."""
    if not 0 < t2 - t1 < math.pi:
        raise DomainGap("need 0 < t2 - t1 < pi", t1=t1, t2=t2)
    dyn = profile if isinstance(profile, GapDynamics) else GapDynamics(profile)
    forced, dforced = dyn.propagate(t1, 0.0, 0.0, t2)
    v = -forced / math.sin(t2 - t1)
    return v, v * math.cos(t2 - t1) + dforced


def action_integral(profile: RadiusProfile | GapDynamics, t1: float, t2: float) -> float:
    """Integral of eta'^2/2 - eta^2/2 - eta rho along the flight with eta(t1) = eta(t2) = 0."""
    dyn = profile if isinstance(profile, GapDynamics) else GapDynamics(profile)
    v, _ = boundary_velocity(dyn, t1, t2)
    total = 0.0
    y, dy = 0.0, v
    for lo, hi, f in dyn._segments(t1, t2):
        flow = _PieceFlow(f, lo, y, dy)
        npan = max(1, int(math.ceil((hi - lo) / 0.25)))
        edges = np.linspace(lo, hi, npan + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            s = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
            eta, deta = flow(s)
            loc = s - f.base
            rho = f.piece.value(loc)
            total += 0.5 * (b - a) * float(np.sum(_GL_W * (0.5 * deta ** 2 - 0.5 * eta ** 2 - eta * rho)))
        y, dy = (float(u) for u in flow(hi))
    return total
