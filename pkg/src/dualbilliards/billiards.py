"""Inner billiards on a convex table, string parameters and caustic checks.

Tables and caustics are Curves (support-function geometry).  The table is
reparameterized by arclength t; billiard coordinates are (t, omega) with
omega the angle between the outgoing ray and the positively oriented tangent.
The chord-length generating function -|beta(t1) - beta(t0)| makes the map
area preserving in (t, -cos omega).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .curve import TWO_PI, Curve, trig_profile
from .errors import CausticNotVisible, DomainGap, NoConvergence, Tangential

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
ANGLE_EPS = 1e-12


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


class TableCurve:
    """Arclength parameterization beta(t) of a convex Curve, t in [0, perimeter)."""

    def __init__(self, curve: Curve, table_size: int = 4096):
        self.curve = curve
        self.perimeter = curve.perimeter()
        self._theta = np.linspace(0.0, TWO_PI, table_size + 1)
        self._s = np.asarray(curve.profile.arclength(self._theta), float)

    def t_of(self, theta):
        return self.curve.profile.arclength(theta)

    def theta_of(self, t):
        """Normal angle at arclength t (lifted: t + perimeter maps to theta + 2 pi)."""
        t = np.asarray(t, float)
        k = np.floor(t / self.perimeter)
        r = t - k * self.perimeter
        j = np.clip(np.searchsorted(self._s, r, side="right") - 1, 0, len(self._s) - 2)
        lo, hi = self._theta[j], self._theta[j + 1]
        slo, shi = self._s[j], self._s[j + 1]
        th = lo + (r - slo) / np.where(shi > slo, shi - slo, 1.0) * (hi - lo)
        for _ in range(60):
            f = np.asarray(self.curve.profile.arclength(th), float) - r
            lo = np.where(f <= 0, th, lo)
            hi = np.where(f > 0, th, hi)
            rho = np.asarray(self.curve.rho(th), float)
            step = np.where(rho > 0, f / np.where(rho > 0, rho, 1.0), np.inf)
            new = th - step
            bad = (new < lo) | (new > hi) | ~np.isfinite(new)
            new = np.where(bad, 0.5 * (lo + hi), new)
            done = np.abs(new - th) <= 1e-15 * (1.0 + np.abs(th))
            th = new
            if np.all(done) or np.all(np.abs(f) <= 2e-16 * self.perimeter):
                break
        out = th + k * TWO_PI
        return out if out.ndim else float(out)

    def point(self, t) -> np.ndarray:
        return self.curve.alpha(self.theta_of(t))

    def tangent(self, t) -> np.ndarray:
        th = np.asarray(self.theta_of(t), float)
        return np.stack([-np.sin(th), np.cos(th)], axis=-1)


# -- billiard map -----------------------------------------------------------------

class BilliardMap:
    """Billiard map of a convex table in (t, omega) coordinates."""

    def __init__(self, table: TableCurve | Curve, scan: int = 256):
        self.table = table if isinstance(table, TableCurve) else TableCurve(table)
        self.scan = scan
        self.gap_max = self.table.perimeter

    def _hit(self, theta0: float, x0: np.ndarray, d: np.ndarray) -> float:
        """Normal angle of the next boundary point on the ray x0 + s d."""
        curve = self.table.curve

        def f(th):
            return float(_cross(d, curve.alpha(th) - x0))

        grid = theta0 + TWO_PI * np.arange(1, self.scan) / self.scan
        vals = _cross(d[None, :], curve.alpha(grid) - x0[None, :])
        pos = np.nonzero(vals > 0)[0]
        if not len(pos):
            raise NoConvergence("ray does not leave the table", theta0=theta0)
        i = int(pos[0])
        hi = grid[i]
        lo = grid[i - 1] if i > 0 else theta0
        if i == 0:
            # short chord: shrink towards theta0 until the cross product is negative
            step = hi - theta0
            while True:
                step *= 0.5
                cand = theta0 + step
                if step < 1e-300:
                    raise Tangential("chord too short to resolve", theta0=theta0)
                if f(cand) < 0:
                    lo = cand
                    break
                hi = cand
        return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def step(self, t: float, omega: float) -> tuple[float, float]:
        if not (ANGLE_EPS < omega < math.pi - ANGLE_EPS):
            raise Tangential("omega must lie in (0, pi) away from the tangent", omega=omega)
        tab = self.table
        th0 = float(tab.theta_of(t))
        x0 = tab.curve.alpha(th0)
        T0 = np.array([-math.sin(th0), math.cos(th0)])
        N0 = np.array([-T0[1], T0[0]])
        d = math.cos(omega) * T0 + math.sin(omega) * N0
        th1 = self._hit(th0, x0, d)
        t1 = t + float(tab.t_of(th1) - tab.t_of(th0))
        T1 = np.array([-math.sin(th1), math.cos(th1)])
        N1 = np.array([-T1[1], T1[0]])
        omega1 = math.atan2(-float(d @ N1), float(d @ T1))
        return t1, omega1

    def orbit(self, t: float, omega: float, n: int) -> np.ndarray:
        out = np.empty((n + 1, 2))
        out[0] = t, omega
        for i in range(n):
            t, omega = self.step(t, omega)
            out[i + 1] = t, omega
        return out

    def gen_h(self, t0: float, t1: float) -> float:
        p = self.table.point(np.array([t0, t1]))
        return -float(np.hypot(*(p[1] - p[0])))

    def h_partials(self, t0: float, t1: float) -> tuple[float, float]:
        """(h1, h2) from the chord direction: (cos omega0, -cos omega1)."""
        p = self.table.point(np.array([t0, t1]))
        T = self.table.tangent(np.array([t0, t1]))
        d = p[1] - p[0]
        d = d / np.hypot(*d)
        return float(d @ T[0]), -float(d @ T[1])

    def h2_many(self, t0: float, t1s: np.ndarray) -> np.ndarray:
        t1s = np.asarray(t1s, float)
        p0 = self.table.point(t0)
        p1 = self.table.point(t1s)
        T1 = self.table.tangent(t1s)
        d = p1 - p0
        d = d / np.hypot(d[..., 0], d[..., 1])[..., None]
        return -np.sum(d * T1, axis=-1)

    def to_twist(self, t: float, omega: float) -> tuple[float, float]:
        return t, -math.cos(omega)

    def step_twist(self, t: float, y: float) -> tuple[float, float]:
        t1, om1 = self.step(t, math.acos(-y))
        return t1, -math.cos(om1)


def billiard_step(table: TableCurve | Curve | BilliardMap, t: float, omega: float) -> tuple[float, float]:
    bmap = table if isinstance(table, BilliardMap) else BilliardMap(table)
    return bmap.step(t, omega)


# -- caustic geometry -------------------------------------------------------------

class CausticGeometry:
    """Tangent lines from exterior points to a convex caustic."""

    def __init__(self, caustic: Curve, grid: int = 1024):
        self.curve = caustic
        self.perimeter = caustic.perimeter()
        self.theta = np.arange(grid) * TWO_PI / grid
        self.p = caustic.support(self.theta)[0]
        self.dirs = np.stack([np.cos(self.theta), np.sin(self.theta)])

    def _g(self, pts, th):
        p, dp = self.curve.support(th)
        c, s = np.cos(th), np.sin(th)
        g = pts[:, 0] * c + pts[:, 1] * s - p
        gp = -pts[:, 0] * s + pts[:, 1] * c - dp
        return g, gp

    def _polish(self, pts, lo, hi):
        sign_lo = np.sign(self._g(pts, lo)[0])
        th = 0.5 * (lo + hi)
        for _ in range(80):
            g, gp = self._g(pts, th)
            same = np.sign(g) == sign_lo
            lo = np.where(same, th, lo)
            hi = np.where(same, hi, th)
            new = th - g / np.where(gp != 0, gp, np.inf)
            bad = (new < lo) | (new > hi) | ~np.isfinite(new)
            new = np.where(bad, 0.5 * (lo + hi), new)
            done = np.abs(new - th) <= 4e-16 * (1.0 + np.abs(th))
            th = new
            if np.all(done | (hi - lo <= 4e-16 * (1.0 + np.abs(th)))):
                break
        return th

    def tangency(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Normal angles (phi1, phi2), phi1 < phi2 < phi1 + 2 pi, bounding the arc visible from pts."""
        pts = np.atleast_2d(np.asarray(pts, float))
        g = pts @ self.dirs - self.p[None, :]
        n = g.shape[1]
        pos = g > 0
        if np.any(~pos.any(axis=1)):
            raise CausticNotVisible("point is inside or on the caustic",
                                    index=int(np.nonzero(~pos.any(axis=1))[0][0]))
        if np.any(pos.all(axis=1)):
            raise CausticNotVisible("caustic is not enclosed")
        nxt = np.roll(pos, -1, axis=1)
        enter = np.argmax(~pos & nxt, axis=1)
        leave = np.argmax(pos & ~nxt, axis=1)
        h = TWO_PI / n
        lo1 = enter * h
        lo2 = leave * h
        lo2 = np.where(lo2 < lo1, lo2 + TWO_PI, lo2)
        phi1 = self._polish(pts, lo1, lo1 + h)
        phi2 = self._polish(pts, lo2, lo2 + h)
        return phi1, phi2

    def string(self, pts):
        """(B, C, D, E): tangent lengths, far arc and near arc."""
        pts = np.atleast_2d(np.asarray(pts, float))
        phi1, phi2 = self.tangency(pts)
        f1 = self.curve.alpha(phi1)
        f2 = self.curve.alpha(phi2)
        B = np.hypot(*(pts - f1).T)
        C = np.hypot(*(pts - f2).T)
        prof = self.curve.profile
        E = np.asarray(prof.arclength(phi2), float) - np.asarray(prof.arclength(phi1), float)
        D = self.perimeter - E
        return B, C, D, E

    def forward_angle(self, pts, tangents):
        """Smaller of the two angles between the tangent direction and the lines to the caustic."""
        pts = np.atleast_2d(np.asarray(pts, float))
        phi1, phi2 = self.tangency(pts)
        out = []
        for phi in (phi1, phi2):
            v = self.curve.alpha(phi) - pts
            out.append(np.arctan2(_cross(tangents, v), np.sum(tangents * v, axis=-1)))
        a = np.stack(out)
        a = np.where(a < 0, a + TWO_PI, a)
        return np.min(a, axis=0)


def _geometry(caustic) -> CausticGeometry:
    return caustic if isinstance(caustic, CausticGeometry) else CausticGeometry(as_curve(caustic))


def as_curve(obj, modes: int = 64, grid: int = 2048) -> Curve:
    """A Curve, or a convex point sample (n, 2) turned into one via its polygon support function."""
    if isinstance(obj, Curve):
        return obj
    pts = np.asarray(obj, float)
    theta = np.arange(grid) * TWO_PI / grid
    p = np.max(pts @ np.stack([np.cos(theta), np.sin(theta)]), axis=0)
    from .circles import fit_support_curve
    return fit_support_curve(theta, p, modes, name="samples")


def string_parameter(table: TableCurve | Curve, caustic, t) -> np.ndarray | float:
    """L(t) = B + C + D at the table point beta(t)."""
    tab = table if isinstance(table, TableCurve) else TableCurve(table)
    geo = _geometry(caustic)
    pts = np.atleast_2d(tab.point(np.atleast_1d(np.asarray(t, float))))
    B, C, D, _ = geo.string(pts)
    L = B + C + D
    return L if np.ndim(t) else float(L[0])


def caustic_omega(table: TableCurve | Curve, caustic, t):
    """Launch angle at beta(t) of the ray tangent to the caustic (counterclockwise motion)."""
    tab = table if isinstance(table, TableCurve) else TableCurve(table)
    geo = _geometry(caustic)
    tt = np.atleast_1d(np.asarray(t, float))
    om = geo.forward_angle(tab.point(tt), tab.tangent(tt))
    return om if np.ndim(t) else float(om[0])


@dataclass(frozen=True)
class CausticArea:
    value: float
    beta: float
    string_minus_perimeter: float


def caustic_area_function(table: TableCurve | Curve | BilliardMap, caustic, t: float,
                          scan: int = 128) -> CausticArea:
    """Area function of the candidate circle y = -cos(omega_c(t)) in (t, -cos omega).

    A(t) = integral of y over [t, beta] - h(t, beta), with beta the first point
    where h2(t, beta) equals the candidate graph.  Reported alongside L(t) - P.
    """
    bmap = table if isinstance(table, BilliardMap) else BilliardMap(table)
    tab = bmap.table
    geo = _geometry(caustic)

    def u(s):
        s = np.atleast_1d(s)
        return -np.cos(geo.forward_angle(tab.point(s), tab.tangent(s)))

    P = tab.perimeter
    ss = t + P * np.arange(1, scan) / scan
    F = bmap.h2_many(t, ss) - u(ss)
    idx = np.nonzero((F[:-1] < 0) & (F[1:] >= 0))[0]
    if not len(idx):
        raise NoConvergence("no crossing of h2 with the candidate graph", t=t)
    k = int(idx[0])
    a, b = ss[k], ss[k + 1]
    if F[k + 1] == 0:
        beta = b
    else:
        beta = brentq(lambda s: float(bmap.h2_many(t, np.array([s]))[0] - u(s)[0]), a, b,
                      xtol=1e-15, rtol=4 * np.finfo(float).eps)
    npan = 8
    edges = np.linspace(t, beta, npan + 1)
    nodes = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * np.diff(edges)[:, None] * _GL_X[None, :]).ravel()
    weights = (0.5 * np.diff(edges)[:, None] * _GL_W[None, :]).ravel()
    integral = float(weights @ u(nodes))
    A = integral - bmap.gen_h(t, beta)
    L = string_parameter(tab, geo, t)
    return CausticArea(A, float(beta), L - geo.perimeter)


def tangency_defect(geo: CausticGeometry, x: np.ndarray, d: np.ndarray) -> float:
    """Offset between the line x + s d and the caustic support line with the same normal."""
    m = np.array([d[1], -d[0]]) / math.hypot(*d)
    phi = math.atan2(m[1], m[0])
    p = float(geo.curve.support(phi)[0])
    return abs(float(m @ x) - p)


@dataclass(frozen=True)
class TangencyReport:
    defects: np.ndarray
    orbit: np.ndarray

    @property
    def max_defect(self) -> float:
        return float(np.max(self.defects))


def tangency_persistence(table: TableCurve | Curve | BilliardMap, caustic, t0: float,
                         n_bounces: int = 100) -> TangencyReport:
    """Launch tangent to the caustic and track the chord-to-caustic offset after each bounce."""
    bmap = table if isinstance(table, BilliardMap) else BilliardMap(table)
    tab = bmap.table
    geo = _geometry(caustic)
    om = caustic_omega(tab, geo, t0)
    orbit = bmap.orbit(t0, om, n_bounces)
    th = np.asarray(tab.theta_of(orbit[:, 0]), float)
    pts = tab.curve.alpha(th)
    T = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    N = np.stack([-T[:, 1], T[:, 0]], axis=-1)
    dirs = np.cos(orbit[:, 1])[:, None] * T + np.sin(orbit[:, 1])[:, None] * N
    defects = np.array([tangency_defect(geo, pts[i], dirs[i]) for i in range(len(orbit))])
    return TangencyReport(defects, orbit)


# -- string construction ----------------------------------------------------------

@dataclass(frozen=True)
class StringTable:
    points: np.ndarray
    normal_angles: np.ndarray
    support: np.ndarray
    length: float
    curve: Curve


def _support_fit(phi: np.ndarray, p: np.ndarray, modes: int, name: str) -> Curve:
    """Least-squares trig fit of support samples at arbitrary normal angles."""
    m = np.arange(1, modes + 1)
    A = np.hstack([np.ones((len(phi), 1)), np.cos(np.outer(phi, m)), np.sin(np.outer(phi, m))])
    sol = np.linalg.lstsq(A, p, rcond=None)[0]
    c0, pa, pb = sol[0], sol[1:modes + 1], sol[modes + 1:]
    w = 1.0 - m ** 2
    coeffs = [float(c0)]
    for k in range(modes):
        coeffs += [float(w[k] * pa[k]), float(w[k] * pb[k])]
    p0 = c0 + np.sum(pa)
    q0 = np.sum(m * pb)
    return Curve(trig_profile(coeffs, name), float(p0), float(q0), name)


def string_construction(caustic, length: float, n: int = 512, modes: int = 48) -> StringTable:
    """Table drawn by a taut closed string of the given length looped around the caustic.

    Points are found along rays from the caustic centroid; the outward normal
    at each point bisects the two tangent lines to the caustic.
    """
    geo = _geometry(caustic)
    if not length > geo.perimeter:
        raise DomainGap("string must be longer than the caustic perimeter",
                        length=length, perimeter=geo.perimeter)
    samples = geo.curve.sample(1024)
    c = samples.mean(axis=0)
    psi = np.arange(n) * TWO_PI / n
    e = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    # radial distance from c to the caustic along each ray, from the support function
    ptilde = geo.p - c @ geo.dirs
    cosd = np.cos(geo.theta[None, :] - psi[:, None])
    ratio = np.where(cosd > 1e-12, ptilde[None, :] / np.where(cosd > 1e-12, cosd, 1.0), np.inf)
    lo = np.min(ratio, axis=1) * (1 + 1e-9)
    hi = lo + length

    def total(r):
        pts = c + r[:, None] * e
        B, C, D, _ = geo.string(pts)
        return B + C + D

    for _ in range(80):
        mid = 0.5 * (lo + hi)
        big = total(mid) > length
        hi = np.where(big, mid, hi)
        lo = np.where(big, lo, mid)
        if np.all(hi - lo <= 2e-16 * hi):
            break
    r = 0.5 * (lo + hi)
    pts = c + r[:, None] * e
    phi1, phi2 = geo.tangency(pts)
    v1 = geo.curve.alpha(phi1) - pts
    v2 = geo.curve.alpha(phi2) - pts
    v1 /= np.hypot(*v1.T)[:, None]
    v2 /= np.hypot(*v2.T)[:, None]
    nrm = -(v1 + v2)
    ang = np.arctan2(nrm[:, 1], nrm[:, 0])
    supp = np.sum(pts * np.stack([np.cos(ang), np.sin(ang)], axis=-1), axis=1)
    curve = _support_fit(ang, supp, modes, "string")
    return StringTable(pts, ang, supp, float(length), curve)


def circle_string_length(R: float, r: float) -> float:
    """String length for a circle caustic of radius r and a concentric circle table of radius R."""
    return 2.0 * math.sqrt(R * R - r * r) + r * (TWO_PI - 2.0 * math.acos(r / R))
