"""Invariant circles: non-existence certificates, tumbling tangents, area envelopes."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curve import TWO_PI, Curve, trig_profile
from .dualmap import DualBilliardMap, LiftedPoint, wedge
from .errors import AreaTooLarge, NonSmoothPoint
from .twistcore import CircleGraph, area_function


# -- converse-KAM value --------------------------------------------------------------

def ckam_value(dmap: DualBilliardMap, xm: float, x0: float, xp: float, side: str = "right") -> float:
    """2 rho(x0) - cot(x1 - x0) R(x0, x1) - cot(x0 - x-1) L(x-1, x0).

    Along an invariant circle this is nonnegative almost everywhere; ``side``
    selects the one-sided limit of rho at a jump.
    """
    R = dmap.chords(x0, xp).R
    L = dmap.chords(xm, x0).L
    rho = float(dmap.curve.rho(x0, side))
    return 2.0 * rho - R / math.tan(xp - x0) - L / math.tan(x0 - xm)


def orbit_triple(dmap: DualBilliardMap, x0: float, gamma: float) -> tuple[float, float, float]:
    q = LiftedPoint(x0, gamma)
    return dmap.step_inverse(q).x, x0, dmap.step_envelope(q).x


def _scan_column(args):
    dmap, x0, gammas, side = args
    out = np.empty(len(gammas))
    for j, g in enumerate(gammas):
        xm, _, xp = orbit_triple(dmap, x0, g)
        out[j] = ckam_value(dmap, xm, x0, xp, side)
    return out


@dataclass
class CkamReport:
    j_start: float
    j_end: float
    x_grid: np.ndarray
    gamma_grid: np.ndarray
    values: np.ndarray          # shape (len(x_grid), len(gamma_grid))
    gamma_star: np.ndarray      # per x0: top of the negative run starting at the lowest gamma
    band: float                 # max over J of gamma_star; 0 means empty
    uniform_band: float         # min over J of gamma_star
    global_band: float | None   # uniform band when J covers the whole circle
    side: str = "right"
    meta: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.band > 0

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "grid": {"j_start": self.j_start, "j_end": self.j_end,
                     "x": self.x_grid.tolist(), "gamma": self.gamma_grid.tolist(), "side": self.side},
            "values": self.values.tolist(),
            "gamma_star": self.gamma_star.tolist(),
            "band": self.band,
            "band_angle": float(self.x_grid[int(np.argmax(self.gamma_star))]),
            "uniform_band": self.uniform_band,
            "global_band": self.global_band,
            "certificate_empty": self.empty,
            **self.meta,
        }


def ckam_scan(dmap: DualBilliardMap, j_start: float, j_end: float, gamma_max: float,
              nx: int = 32, ngamma: int = 32, side: str = "right", threads: int | None = 1,
              gamma_min: float | None = None) -> CkamReport:
    """Evaluate the converse-KAM value on a grid over J x (0, gamma_max].

    gamma_star(x0) is the largest grid gamma such that the value is negative at
    every grid gamma up to it.  Every invariant circle crosses every fiber, and
    negativity persists on a neighbourhood of the crossing (the value is
    continuous in x0 from the ``side`` of evaluation), so no invariant circle
    fits inside S^1 x (0, band] with ``band`` = max over J of gamma_star.
    ``uniform_band`` (the min) is the level below which the value is negative
    over all of J.  Special angles (a flat point, a jump) must lie on the grid:
    the grid is linspace(j_start, j_end, nx).
    """
    xs = np.linspace(j_start, j_end, nx)
    lo = gamma_min if gamma_min is not None else gamma_max / ngamma
    gammas = np.geomspace(lo, gamma_max, ngamma) if gamma_min is not None else np.linspace(lo, gamma_max, ngamma)
    tasks = [(dmap, float(x), gammas, side) for x in xs]
    threads = threads or os.cpu_count() or 1
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            cols = list(ex.map(_scan_column, tasks))
    else:
        cols = [_scan_column(t) for t in tasks]
    values = np.array(cols)
    star = np.zeros(nx)
    for i in range(nx):
        pos = np.nonzero(values[i] >= 0)[0]
        k = pos[0] if len(pos) else ngamma
        star[i] = gammas[k - 1] if k > 0 else 0.0
    uniform = float(np.min(star))
    covers = (j_end - j_start) >= TWO_PI * (1 - 1e-12)
    return CkamReport(float(j_start), float(j_end), xs, gammas, values, star, float(np.max(star)),
                      uniform, uniform if covers else None, side)


# -- tumbling tangents ----------------------------------------------------------------

def _line_intersection(p1, d1, p2, d2):
    t = wedge(p2 - p1, d2) / wedge(d1, d2)
    return p1 + t * d1


def tumbling_geometry(dmap: DualBilliardMap, z) -> dict:
    """Curvatures compared by the tumbling criterion at the exterior point z."""
    z = np.asarray(z, float)
    env = dmap.to_envelope(z)
    q = LiftedPoint(env.theta, env.gamma)
    xm, x0, xp = dmap.step_inverse(q).x, q.x, dmap.step_envelope(q).x
    for t in (xm, x0, xp):
        if not dmap.curve.profile.is_continuous_at(t % TWO_PI):
            raise NonSmoothPoint("rho jumps at a tangency angle", theta=t)
    ell = env.ell

    def line(t):
        return dmap.curve.alpha(t), np.array([-math.sin(t), math.cos(t)])

    pm, dm = line(xm)
    pp, dp = line(xp)
    p0, d0 = line(x0)
    P = _line_intersection(pm, dm, pp, dp)
    u0 = np.array([math.cos(x0), math.sin(x0)])
    # signed offset of P beyond the middle line (negative: the outer lines meet on the curve's side)
    d = float((P - p0) @ u0)
    rho = float(dmap.curve.rho(x0))
    kappa_curve = math.inf if rho == 0.0 else 1.0 / rho
    return {"kappa_curve": kappa_curve, "kappa_comparison": d / (ell * ell), "distance": d,
            "ell": ell, "triple": (xm, x0, xp)}


def tumbling_test(dmap: DualBilliardMap, z) -> bool:
    """True iff the vertical tangent at z tumbles (curve curvature beats the comparison curvature)."""
    g = tumbling_geometry(dmap, z)
    return g["distance"] > 0 and g["kappa_curve"] > g["kappa_comparison"]


# -- area envelope --------------------------------------------------------------------

class _ConvexPolygon:
    """Counterclockwise convex polygon with O(log n) half-plane cap areas."""

    def __init__(self, pts: np.ndarray):
        self.pts = np.asarray(pts, float)
        n = len(self.pts)
        nxt = np.roll(self.pts, -1, axis=0)
        cross = self.pts[:, 0] * nxt[:, 1] - self.pts[:, 1] * nxt[:, 0]
        self.n = n
        self.prefix = np.concatenate([[0.0], np.cumsum(np.concatenate([cross, cross]))])
        self.area = 0.5 * float(np.sum(cross))

    def caps(self, u: np.ndarray, c: np.ndarray, kmax: np.ndarray, kmin: np.ndarray):
        """Areas of {z.u >= c} and chord endpoints, vectorized over directions."""
        P = self.pts
        n = self.n
        s_all = None  # projections computed lazily per index

        def proj(idx):
            q = P[idx % n]
            return q[:, 0] * u[:, 0] + q[:, 1] * u[:, 1]

        fwd_len = (kmin - kmax) % n
        bwd_len = (kmax - kmin) % n

        def last_above(direction, length):
            lo = np.zeros_like(kmax)
            hi = length.copy()
            # invariant: proj(kmax + dir*lo) > c, proj(kmax + dir*hi) <= c
            while np.any(hi - lo > 1):
                mid = (lo + hi) // 2
                above = proj(kmax + direction * mid) > c
                lo = np.where(above, mid, lo)
                hi = np.where(above, hi, mid)
            return lo

        f = last_above(1, fwd_len)
        b = last_above(-1, bwd_len)
        a_idx = kmax - b                  # first vertex in the cap (may be negative)
        b_idx = kmax + f                  # last vertex in the cap
        a0 = a_idx % n
        b0 = a0 + (b_idx - a_idx)

        def cut(i, j):
            pi, pj = P[i % n], P[j % n]
            si, sj = proj(i), proj(j)
            t = (si - c) / (si - sj)
            return pi + t[:, None] * (pj - pi)

        E = cut(a_idx, a_idx - 1)
        X = cut(b_idx, b_idx + 1)
        za, zb = P[a0], P[b0 % n]
        inner = self.prefix[b0] - self.prefix[a0]
        area = 0.5 * (inner + (E[:, 0] * za[:, 1] - E[:, 1] * za[:, 0])
                      + (zb[:, 0] * X[:, 1] - zb[:, 1] * X[:, 0])
                      + (X[:, 0] * E[:, 1] - X[:, 1] * E[:, 0]))
        del s_all
        return area, E, X


@dataclass
class AreaEnvelope:
    theta: np.ndarray
    offsets: np.ndarray       # support values of the envelope
    points: np.ndarray        # chord midpoints
    chords: np.ndarray        # shape (k, 2, 2): entry and exit points
    curve: Curve              # fitted envelope
    area: float


def area_envelope(inner, a: float, samples: int = 2048, polygon: int | None = None,
                  modes: int = 64, tol: float = 1e-12) -> AreaEnvelope:
    """Envelope of the lines cutting area ``a`` from the convex curve ``inner``.

    ``inner`` is a Curve or a (k, 2) counterclockwise sample array.  For each of
    ``samples`` directions the offset is bisected until the cap area matches,
    the chord midpoint is recorded, and a trig series with ``modes`` harmonics
    is fitted to the offsets (the support function of the envelope).
    """
    if isinstance(inner, Curve):
        pts = inner.sample(polygon or 2 * samples)
    else:
        pts = np.asarray(inner, float)
    poly = _ConvexPolygon(pts)
    if not 0 < a < poly.area / 2:
        raise AreaTooLarge(f"area {a} not in (0, {poly.area / 2})", area=poly.area)
    theta = np.arange(samples) * TWO_PI / samples
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    proj = u @ pts.T
    kmax = np.argmax(proj, axis=1)
    kmin = np.argmin(proj, axis=1)
    lo = proj[np.arange(samples), kmin].copy()
    hi = proj[np.arange(samples), kmax].copy()
    target = tol * poly.area
    for _ in range(200):
        c = 0.5 * (lo + hi)
        area, E, X = poly.caps(u, c, kmax, kmin)
        big = area > a
        lo = np.where(big, c, lo)
        hi = np.where(big, hi, c)
        if np.all(np.abs(area - a) <= target) or np.all(hi - lo <= 1e-15 * (1 + np.abs(c))):
            break
    mids = 0.5 * (E + X)
    curve = fit_support_curve(theta, c, modes)
    return AreaEnvelope(theta, c, mids, np.stack([E, X], axis=1), curve, float(a))


def fit_support_curve(theta: np.ndarray, p: np.ndarray, modes: int = 64, name: str = "envelope") -> Curve:
    """Least-squares trig fit of a support function on a uniform grid, as a Curve.

    rho = p + p'' has coefficients (1 - m^2) p_m, so the first harmonic drops
    out and the profile closes exactly.
    """
    n = len(p)
    f = np.fft.rfft(p) / n
    mmax = min(modes, (n - 1) // 2)
    pa = 2.0 * f[1:mmax + 1].real
    pb = -2.0 * f[1:mmax + 1].imag
    m = np.arange(1, mmax + 1)
    coeffs = [float(f[0].real)]
    for k in range(mmax):
        w = 1.0 - m[k] ** 2
        coeffs += [w * pa[k], w * pb[k]]
    p0 = f[0].real + np.sum(pa)
    q0 = np.sum(m * pb)
    return Curve(trig_profile(coeffs, name), float(p0), float(q0), name)


# -- invariance checks ----------------------------------------------------------------

class SupportTable:
    """Support function of a curve tabulated on a uniform grid (reused across queries)."""

    def __init__(self, curve: Curve, grid: int = 2048):
        self.curve = curve
        self.theta = np.arange(grid) * TWO_PI / grid
        self.p = curve.support(self.theta)[0]
        self.dirs = np.stack([np.cos(self.theta), np.sin(self.theta)])


def signed_distance(curve, pts: np.ndarray, grid: int = 2048, return_angle: bool = False):
    """max over theta of z.u - p(theta): the signed distance to a convex curve.

    ``curve`` is a Curve or a prebuilt SupportTable.
    """
    table = curve if isinstance(curve, SupportTable) else SupportTable(curve, grid)
    curve = table.curve
    grid = len(table.theta)
    pts = np.atleast_2d(np.asarray(pts, float))
    th, p = table.theta, table.p
    vals = pts @ table.dirs - p[None, :]
    t = th[np.argmax(vals, axis=1)]
    for _ in range(30):
        pt, dpt = curve.support(t)
        rho = np.asarray(curve.rho(t), float)
        g1 = -pts[:, 0] * np.sin(t) + pts[:, 1] * np.cos(t) - dpt
        g2 = -(pts[:, 0] * np.cos(t) + pts[:, 1] * np.sin(t)) - (rho - pt)
        step = np.where(g2 < 0, -g1 / np.where(g2 < 0, g2, -1.0), 0.0)
        step = np.clip(step, -TWO_PI / grid, TWO_PI / grid)
        t = t + step
        # the maximum is stationary in t, so t to 1e-10 gives the value to round-off
        if np.max(np.abs(step)) < 1e-10:
            break
    pt, _ = curve.support(t)
    dist = pts[:, 0] * np.cos(t) + pts[:, 1] * np.sin(t) - pt
    return (dist, t) if return_angle else dist


def circle_graph_of(dmap: DualBilliardMap, candidate: Curve, n: int = 256,
                    interp: str = "fourier") -> CircleGraph:
    """Envelope-coordinate graph gamma = u(theta) of a closed curve around Gamma."""
    th = np.arange(n) * TWO_PI / n
    a = dmap.curve.alpha(th)
    candidate = SupportTable(candidate)
    nv = np.stack([-np.sin(th), np.cos(th)], axis=1)
    lo = np.zeros(n)
    hi = np.ones(n)
    while True:
        dist = signed_distance(candidate, a - hi[:, None] * nv)
        if np.all(dist > 0):
            break
        hi = np.where(dist > 0, hi, 2 * hi)
    # safeguarded Newton; d(dist)/d(ell) = -n.u at the maximizing angle
    ell = 0.5 * (lo + hi)
    for _ in range(60):
        dist, t = signed_distance(candidate, a - ell[:, None] * nv, return_angle=True)
        hi = np.where(dist > 0, ell, hi)
        lo = np.where(dist > 0, lo, ell)
        slope = -(nv[:, 0] * np.cos(t) + nv[:, 1] * np.sin(t))
        new = ell - dist / np.where(slope > 0, slope, np.inf)
        bad = (new < lo) | (new > hi) | ~np.isfinite(new)
        new = np.where(bad, 0.5 * (lo + hi), new)
        done = np.abs(new - ell) <= 1e-15 * ell
        ell = new
        if np.all(done):
            break
    return CircleGraph(0.5 * ell * ell, TWO_PI, interp)


@dataclass
class InvarianceReport:
    defect: float
    area_spread: float | None
    n_points: int
    n_iters: int


def invariance_check(dmap: DualBilliardMap, candidate, n_iters: int = 100, n_points: int = 64,
                     area_points: int = 0, graph_samples: int = 256) -> InvarianceReport:
    """Iterate points of ``candidate`` under the Euclidean map and measure their drift from it.

    ``candidate`` is a Curve or a (k, 2) sample array (closed polygon).  With
    ``area_points`` > 0 the area function of the candidate's envelope graph
    is also evaluated, and its spread (max - min) reported.
    """
    if isinstance(candidate, Curve):
        z = candidate.sample(n_points)
        table = SupportTable(candidate)

        def dist(p):
            return np.abs(signed_distance(table, p))
    else:
        samples = np.asarray(candidate, float)
        z = samples[:: max(1, len(samples) // n_points)]

        def dist(p):
            return _polygon_distance(samples, p)

    worst = 0.0
    for _ in range(n_iters):
        z = dmap.step_euclidean(z)
        worst = max(worst, float(np.max(dist(z))))
    spread = None
    if area_points and isinstance(candidate, Curve):
        graph = circle_graph_of(dmap, candidate, graph_samples)
        xs = np.linspace(0.0, TWO_PI, area_points, endpoint=False)
        vals = [area_function(dmap, graph, float(x)).value for x in xs]
        spread = float(np.ptp(vals))
    return InvarianceReport(worst, spread, len(z), n_iters)


def _polygon_distance(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    out = np.empty(len(pts))
    for i, p in enumerate(np.atleast_2d(pts)):
        t = np.clip(np.sum((p - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        out[i] = float(np.min(np.hypot(*(a + t[:, None] * ab - p).T)))
    return out
