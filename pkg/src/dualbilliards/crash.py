"""Orbits that converge to a boundary point, and the diagnostic that rules them out.

The crash profile is piecewise constant near the angle 0: on [b_{n-1}, a_n)
it is 1 - c s_n and on [a_n, b_n) it is 1 + c s_n, with a_n = -n^b,
b_n the midpoint of [a_n, a_{n+1}] and s_n = |a_n|^k ("abs") or -|a_n|^k
("odd").  The sequence a_n is a subsolution of the chord recursion from
some index on; a greedy supersolution and the monotone solver then produce
an orbit segment squeezed toward 0.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .curve import TWO_PI, Curve, Piece, RadiusProfile
from .dualmap import DualBilliardMap, LiftedPoint
from .errors import InvalidParams, SandwichFailed
from .twistcore import Configuration, angenent_solve

ORBIT_TOL = 1e-12
CLOSURE_REGION = (math.pi / 2, 3 * math.pi / 2)


@dataclass(frozen=True)
class CrashProfileParams:
    b: float = -0.5
    k: float = 1.5
    c: float = 5e-4
    N: int = 40
    sign: str = "auto"     # "odd", "abs" or "auto" (try odd, fall back to abs)
    strict: bool = True    # enforce 0 < c < 0.001

    def validate(self) -> None:
        if not self.b < 0:
            raise InvalidParams("b must be negative", b=self.b)
        if not self.k > 1:
            raise InvalidParams("k must exceed 1", k=self.k)
        if not self.k * self.b > -1:
            raise InvalidParams("need k b > -1", kb=self.k * self.b)
        if not self.c >= 0:
            raise InvalidParams("c must be nonnegative", c=self.c)
        if self.strict and not self.c < 1e-3:
            raise InvalidParams("c must lie in [0, 0.001) (pass strict=False to relax)", c=self.c)
        if self.c >= 1:
            raise InvalidParams("c >= 1 makes rho negative", c=self.c)
        if self.N < 2:
            raise InvalidParams("N must be at least 2", N=self.N)
        if self.sign not in ("odd", "abs", "auto"):
            raise InvalidParams("sign must be odd, abs or auto", sign=self.sign)


def crash_sequence(b: float, n_max: int) -> np.ndarray:
    """a_n = -n^b for n = 0 .. n_max + 1 (entry 0 is unused and set to nan)."""
    n = np.arange(n_max + 2, dtype=float)
    a = np.full(n_max + 2, np.nan)
    a[1:] = -n[1:] ** b
    return a


def _amplitudes(a: np.ndarray, k: float, sign: str) -> np.ndarray:
    mag = np.abs(a) ** k
    return -mag if sign == "odd" else mag


def build_crash_profile(params: CrashProfileParams, n_pieces: int, sign: str | None = None,
                        smooth: bool = False) -> RadiusProfile:
    """Radius profile of the construction with pieces for n = 1 .. n_pieces.

    Beyond b_{n_pieces} rho is 1.  Closure is restored by a first-harmonic
    correction on an arc far from the accumulation point.  With ``smooth``
    every jump is replaced by a C^1 cubic ramp of width min(delta)/10.
    """
    params.validate()
    sign = sign or ("odd" if params.sign == "auto" else params.sign)
    a = crash_sequence(params.b, n_pieces)
    delta = 0.5 * (a[2:] - a[1:-1])              # delta_n for n = 1 .. n_pieces
    bnd = a[1:-1] + delta                         # b_n
    b0 = a[1] - delta[0]
    amp = params.c * _amplitudes(a[1:-1], params.k, sign)
    # breakpoints and values on [b0, 0), shifted into [0, 2pi)
    edges = [b0]
    vals = []
    for n in range(n_pieces):
        edges += [a[n + 1], bnd[n]]
        vals += [1.0 - amp[n], 1.0 + amp[n]]
    if edges[-1] < 0:
        edges.append(0.0)
        vals.append(1.0)
    else:
        edges[-1] = 0.0
    base = [Piece(0.0, CLOSURE_REGION[0], poly=(1.0,)),
            Piece(CLOSURE_REGION[0], CLOSURE_REGION[1], poly=(1.0,)),
            Piece(CLOSURE_REGION[1], TWO_PI + b0, poly=(1.0,))]
    pieces = list(base)
    if smooth:
        w = float(np.min(delta)) / 10.0
        pieces += _smoothed_pieces(edges, vals, w)
    else:
        for lo, hi, v in zip(edges[:-1], edges[1:], vals):
            pieces.append(Piece(TWO_PI + lo, TWO_PI + hi, poly=(float(v),)))
    prof = RadiusProfile(pieces, f"crash(b={params.b:g},k={params.k:g},c={params.c:g})")
    return prof.project_closure(CLOSURE_REGION)


def _smoothed_pieces(edges, vals, w):
    """Constant segments joined by C^1 cubic ramps of width w, shifted into [0, 2pi).

    The first ramp (from 1) starts at edges[0], the last (back to 1) ends at 0,
    and every interior jump gets a ramp centred on it.
    """
    h = 0.5 * w
    ramps = [(edges[0], edges[0] + w, 1.0, vals[0])]
    for i in range(1, len(edges) - 1):
        ramps.append((edges[i] - h, edges[i] + h, vals[i - 1], vals[i]))
    ramps.append((edges[-1] - w, edges[-1], vals[-1], 1.0))
    out = []
    pos = edges[0]
    level = 1.0
    for lo, hi, v0, v1 in ramps:
        if lo > pos:
            out.append(Piece(TWO_PI + pos, TWO_PI + lo, poly=(level,)))
        d = v1 - v0
        out.append(Piece(TWO_PI + lo, TWO_PI + hi, poly=(v0, 0.0, 3.0 * d / w ** 2, -2.0 * d / w ** 3)))
        pos, level = hi, v1
    return out


def chord_residuals(dmap: DualBilliardMap, x: np.ndarray) -> np.ndarray:
    """R(x_i, x_{i+1}) - L(x_{i-1}, x_i) at interior indices."""
    x = np.asarray(x, float)
    return np.array([dmap.chords(x[i], x[i + 1]).R - dmap.chords(x[i - 1], x[i]).L
                     for i in range(1, len(x) - 1)])


@dataclass
class SandwichReport:
    sub: Configuration
    sup: Configuration
    indices: np.ndarray            # construction index n of each window entry
    sub_residuals: np.ndarray      # chord residuals at interior entries
    sup_residuals: np.ndarray
    sign: str
    escape_steps: int              # steps for the forward orbit from a_N to pass 0

    def to_dict(self) -> dict:
        return {"indices": self.indices.tolist(), "sub": self.sub.x.tolist(), "super": self.sup.x.tolist(),
                "sub_residuals": self.sub_residuals.tolist(), "super_residuals": self.sup_residuals.tolist(),
                "sign": self.sign, "escape_steps": self.escape_steps}


def subsolution_residuals(params: CrashProfileParams, n_max: int, sign: str) -> np.ndarray:
    """Closed-form R_n - L_{n-1} for n = 2 .. n_max on the piecewise-constant profile."""
    a = crash_sequence(params.b, n_max + 1)
    amp = params.c * _amplitudes(a, params.k, sign)
    d = 0.5 * (a[2:] - a[1:-1])                  # delta_n, n = 1 .. n_max + 1

    def r(x):
        return (np.cos(x) - np.cos(2 * x)) / np.sin(2 * x)

    def s(x):
        return (1 - np.cos(x)) / np.sin(2 * x)

    n = np.arange(2, n_max + 1)
    dn, dm = d[n - 1], d[n - 2]
    R = (1 + amp[n]) * r(dn) + (1 - amp[n + 1]) * s(dn)
    L = (1 + amp[n - 1]) * s(dm) + (1 - amp[n]) * r(dm)
    return R - L


def verify_sandwich(dmap: DualBilliardMap, params: CrashProfileParams, window: int, back: int = 6,
                    sign: str | None = None, max_escape: int = 200000) -> SandwichReport:
    """Build the sub- and supersolution on indices N - back .. N + window and check their signs."""
    N = params.N
    sign = sign or ("odd" if params.sign == "auto" else params.sign)
    back = min(back, N - 1)
    a = crash_sequence(params.b, N + window + 1)
    gamma_N = 0.5 * dmap.chords(a[N - 1], a[N]).L ** 2
    q = LiftedPoint(float(a[N]), gamma_N)

    # subsolution: backward orbit then the sequence itself
    backward = [q]
    for _ in range(back):
        backward.append(dmap.step_inverse(backward[-1]))
    sub = np.array([p.x for p in reversed(backward)] + list(a[N + 1:N + window + 1]))
    idx = np.arange(N - back, N + window + 1)

    # supersolution: forward orbit until it passes 0, shifted so that w_N is that point
    v = [q]
    while v[-1].x <= 0:
        if len(v) > max_escape:
            raise SandwichFailed("forward orbit from a_N does not pass 0", steps=len(v))
        v.append(dmap.step_envelope(v[-1]))
    i0 = len(v) - 1
    orbit = [p.x for p in reversed(backward[1:])] + [p.x for p in v]   # indices -back .. i0
    sup = list(orbit[i0: i0 + back + 1])          # w_{N-back} .. w_N
    wN = sup[-1]
    for j in range(window):
        w_prev, w_n = sup[-2], sup[-1]
        # R = theta_j L with theta_j -> 1: gaps decay like 1/j^2 instead of geometrically
        target = ((j + 1) / (j + 2)) ** 2 * dmap.chords(w_prev, w_n).L
        bound = wN + sum(2.0 ** -(i + 3) for i in range(j + 2))
        room = min(bound - w_n, math.pi * (1 - 1e-9))
        hi = min(room, math.pi * (1 - 1e-9))

        def f(g):
            return dmap.chords(w_n, w_n + g).R - target

        lo = hi * 1e-9
        if f(hi) > 0 and f(lo) < 0:
            g = brentq(f, lo, hi, xtol=1e-18, rtol=1e-14)
        else:
            g = 0.5 * room
        sup.append(w_n + g)
    sup = np.array(sup)

    sub_res = chord_residuals(dmap, sub)
    sup_res = chord_residuals(dmap, sup)
    interior = idx[1:-1]
    for n, r in zip(interior, sub_res):
        if n < N and abs(r) > ORBIT_TOL:
            raise SandwichFailed(f"backward orbit residual {r:.3e} at index {n}", index=int(n), residual=r)
        if n >= N and r < -ORBIT_TOL:
            raise SandwichFailed(f"subsolution residual {r:.3e} < 0 at index {n}", index=int(n), residual=r,
                                 sign=sign)
    for n, r in zip(interior, sup_res):
        if r > ORBIT_TOL:
            raise SandwichFailed(f"supersolution residual {r:.3e} > 0 at index {n}", index=int(n), residual=r)
    if np.any(sub > sup):
        n = int(idx[np.argmax(sub > sup)])
        raise SandwichFailed(f"subsolution above supersolution at index {n}", index=n)
    return SandwichReport(Configuration(sub), Configuration(sup), idx, sub_res, sup_res, sign, i0)


def choose_sign(params: CrashProfileParams, n_max: int) -> str:
    """The sign convention whose closed-form residuals are nonnegative on N .. n_max."""
    options = ("odd", "abs") if params.sign == "auto" else (params.sign,)
    for s in options:
        res = subsolution_residuals(params, n_max, s)
        if np.all(res[params.N - 2:] >= 0):
            return s
    return options[-1] if params.sign != "auto" else options[0]


@dataclass
class CrashOrbit:
    params: CrashProfileParams
    sign: str
    indices: np.ndarray
    x: np.ndarray
    gamma: np.ndarray
    x_limit: float
    residual: float
    sandwich: SandwichReport
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": 1, "params": asdict(self.params), "sign": self.sign,
                "indices": self.indices.tolist(), "x": self.x.tolist(), "gamma": self.gamma.tolist(),
                "x_limit": self.x_limit, "residual": self.residual,
                "sandwich": self.sandwich.to_dict(), **self.meta}


def crash_setup(params: CrashProfileParams, window: int, n_pieces: int | None = None
                ) -> tuple[DualBilliardMap, str]:
    n_pieces = n_pieces or params.N + 2 * window + 4
    sign = choose_sign(params, n_pieces - 2)
    prof = build_crash_profile(params, n_pieces, sign)
    curve = Curve.centered(prof, prof.name)
    return DualBilliardMap(curve), sign


def construct_crash_orbit(params: CrashProfileParams, window: int, back: int = 6,
                          dmap: DualBilliardMap | None = None, sign: str | None = None) -> CrashOrbit:
    """Orbit segment between the sub- and supersolution, with its gamma-sequence."""
    if dmap is None:
        dmap, sign = crash_setup(params, window)
    sw = verify_sandwich(dmap, params, window, back, sign)
    sol = angenent_solve(dmap, sw.sub, sw.sup, tol=1e-10, sign_tol=ORBIT_TOL)
    x = sol.config.x
    if np.any(np.diff(x) <= 0):
        raise SandwichFailed("solution is not increasing")
    gamma = np.array([0.5 * dmap.chords(x[i - 1], x[i]).L ** 2 for i in range(1, len(x))])
    return CrashOrbit(params, sw.sign, sw.indices, x, gamma, power_law_limit(sw.indices, x, params.b),
                      sol.residual, sw,
                      {"sweeps": sol.sweeps, "newton_steps": sol.newton_steps})


def power_law_limit(n: np.ndarray, x: np.ndarray, b: float) -> float:
    """Least-squares x_inf in x_n ~ x_inf - C n^b over the middle third of the window.

    The ends are skipped: the left end is the backward orbit and the right end
    is pinned to the subsolution.
    """
    m = len(x)
    sl = slice(m // 3, 2 * m // 3) if m >= 9 else slice(0, m)
    A = np.stack([np.ones(len(x[sl])), -np.asarray(n[sl], float) ** b], axis=1)
    coef, *_ = np.linalg.lstsq(A, x[sl], rcond=None)
    return float(coef[0])


# -- no-crash diagnostic -------------------------------------------------------------

@dataclass
class NoCrashReport:
    n_iters: int
    ratio_min: float
    ratio_max: float
    tail_ratio_min: float
    tail_ratio_max: float
    proxy_max: float
    proxy_tail_max: float
    partial_sum: float
    min_delta: float
    cauchy: bool               # partial sums settle to 1e-8 over the second half
    linear_growth: bool        # partial sums grow at least like n * min delta

    def to_dict(self) -> dict:
        return {"schema": 1, **asdict(self)}


def no_crash_diagnostic(dmap: DualBilliardMap, x0: float, gamma0: float, n_iters: int,
                        tail: float = 0.5) -> NoCrashReport:
    """Gap statistics along an orbit started near the curve."""
    xs = dmap.orbit(LiftedPoint(x0, gamma0), n_iters)[:, 0]
    d = np.diff(xs)
    ratio = d[1:] / d[:-1]
    mid = 0.5 * (xs[1:-1] + xs[2:])
    rho = np.asarray(dmap.curve.rho(np.mod(mid, TWO_PI)), float)
    proxy = np.abs(0.5 * rho * (ratio - 2.0) / (d[:-1] + d[1:]))
    start = int(len(ratio) * (1 - tail))
    sums = np.cumsum(d)
    half = len(sums) // 2
    cauchy = bool(abs(sums[-1] - sums[half]) < 1e-8)
    growth = bool(sums[-1] >= len(d) * float(np.min(d)) * (1 - 1e-12))
    return NoCrashReport(n_iters, float(ratio.min()), float(ratio.max()),
                         float(ratio[start:].min()), float(ratio[start:].max()),
                         float(proxy.max()), float(proxy[start:].max()),
                         float(sums[-1]), float(d.min()), cauchy, growth)
