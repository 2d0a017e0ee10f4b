"""The dual (outer) billiards map of a convex curve.

Two coordinate systems are used.  Euclidean points z lie outside the curve.
Envelope (twist-map) coordinates are a lifted support angle x together with
gamma = ell^2 / 2, where ell is the distance from z forward along the support
line to its tangency point.  In those coordinates the map is generated by
h(x, x'), the area enclosed between the curve and the two support lines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import TWO_PI, Curve
from .errors import DomainGap, NoBracket, NonSmoothPoint, OnCurve, Overflow

GAP_EPS = 1e-13
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
_H_PANEL = 0.25
_ENV_GRID = 256


@dataclass(frozen=True)
class EnvelopePoint:
    theta: float
    gamma: float

    @property
    def ell(self) -> float:
        return math.sqrt(2.0 * self.gamma)


@dataclass(frozen=True)
class LiftedPoint:
    x: float
    gamma: float

    @property
    def ell(self) -> float:
        return math.sqrt(2.0 * self.gamma)

    def project(self) -> EnvelopePoint:
        return EnvelopePoint(self.x % TWO_PI, self.gamma)


@dataclass(frozen=True)
class ChordData:
    """Support lines at x < x' meet at a point P; L and R are tangent segment lengths.

    R runs forward from the tangency point at x to P; L runs from P forward to
    the tangency point at x'.
    """

    x: float
    xp: float
    L: float
    R: float

    @property
    def gap(self) -> float:
        return self.xp - self.x


@dataclass(frozen=True)
class Partials:
    h1: float
    h2: float
    h11: float
    h12: float
    h22: float


@dataclass(frozen=True)
class Jacobian:
    """Derivative of one step: envelope-coordinate matrix and Euclidean matrix."""

    envelope: np.ndarray
    euclidean: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.envelope))


def wedge(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


class DualBilliardMap:
    """Dual billiards on a validated convex curve."""

    gap_max = math.pi

    def __init__(self, curve: Curve):
        self.curve = curve
        self.profile = curve.profile
        self._jumps = np.asarray(self.profile.discontinuities())
        # read-only after construction
        self._grid = np.linspace(0.0, TWO_PI, _ENV_GRID, endpoint=False)
        self._grid_alpha = curve.alpha(self._grid)
        self._grid_p = curve.support(self._grid)[0]
        self._sector = self._sector_series()

    # -- chords and generating function ------------------------------------
    def _check_gap(self, x: float, xp: float) -> float:
        d = xp - x
        if not (0.0 < d < math.pi):
            raise DomainGap(f"gap x' - x = {d!r} is outside (0, pi)", x=x, xp=xp)
        return d

    def chords(self, x: float, xp: float) -> ChordData:
        d = self._check_gap(x, xp)
        m = self.profile.moment(x, x, xp)
        s = math.sin(d)
        L = m.imag / s
        R = m.real - m.imag * math.cos(d) / s
        return ChordData(x, xp, L, R)

    def chords_many(self, x: float, xps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """L(x, x'_k), R(x, x'_k) for an array of x' in (x, x + pi)."""
        xps = np.asarray(xps, float)
        d = xps - x
        if np.any(d <= 0) or np.any(d >= math.pi):
            raise DomainGap("gap outside (0, pi)", x=x)
        m = self.profile.moment(x, x, xps)
        s = np.sin(d)
        return m.imag / s, m.real - m.imag * np.cos(d) / s

    def h2_many(self, x: float, xps: np.ndarray) -> np.ndarray:
        """h2(x, x'_k) = L^2 / 2 for an array of x'."""
        L, _ = self.chords_many(x, xps)
        return 0.5 * L * L

    def chord_L(self, x: float, xp: float) -> float:
        return self.chords(x, xp).L

    def chord_R(self, x: float, xp: float) -> float:
        return self.chords(x, xp).R

    def _sector_series(self):
        """Fourier data of p and p * rho when rho is one global trig series, else None.

        Both are band-limited (p to the top mode, the product to twice it), so
        an FFT on a grid of more than four times the top mode is exact.
        """
        pieces = self.profile.pieces
        if len(pieces) != 1:
            return None
        pc = pieces[0]
        if pc.start != 0.0 or abs(pc.end - TWO_PI) > 1e-15 or len(pc.poly) > 1:
            return None
        top = (len(pc.trig) - 1) // 2 if pc.trig else 0
        n = 4 * max(top, 1) + 8
        th = np.arange(n) * TWO_PI / n
        p = self.curve.support(th)[0]

        def series(f):
            F = np.fft.rfft(f) / n
            a = 2.0 * F[1:].real
            b = -2.0 * F[1:].imag
            if n % 2 == 0:
                a[-1] *= 0.5
                b[-1] *= 0.5
            return float(F[0].real), a, b

        k = np.arange(1, n // 2 + 1, dtype=float)
        return k, series(p), series(p * self.curve.rho(th))

    def gen_h(self, x: float, xp: float) -> float:
        """h(x, x'): area between the curve and its support lines at x and x'.

        For a single global trig profile this is the tangent-segment area
        (p(x) R + p(x') L) / 2 minus the sector integral of p rho / 2, in closed
        form; otherwise the defining quadrature ``gen_h_quadrature``.
        """
        if self._sector is None:
            return self.gen_h_quadrature(x, xp)
        c = self.chords(x, xp)
        k, (p0, pa, pb), (s0, sa, sb) = self._sector
        kx = np.multiply.outer(np.array([x, xp]), k)
        cs, sn = np.cos(kx), np.sin(kx)
        px, pxp = p0 + cs @ pa + sn @ pb
        sector = s0 * (xp - x) + float(np.sum((sa * (sn[1] - sn[0]) - sb * (cs[1] - cs[0])) / k))
        return 0.5 * (px * c.R + pxp * c.L) - 0.5 * sector

    def gen_h_quadrature(self, x: float, xp: float) -> float:
        """h(x, x') = 1/2 * integral over y in (x, x') of L(x, y)^2."""
        d = self._check_gap(x, xp)
        # L has a pole at x + pi: grade the mesh geometrically towards xp when the gap is close to pi
        eps = math.pi - d
        graded = []
        k = 1
        while eps * 2 ** k < 0.5 * d and eps * 2 ** k < _H_PANEL:
            graded.append(xp - eps * 2 ** k)
            k += 1
        cuts = sorted(set([x] + self.profile.breakpoints(x, xp) + graded + [xp]))
        nodes, weights = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            npan = max(1, int(math.ceil((b - a) / _H_PANEL)))
            edges = np.linspace(a, b, npan + 1)
            for lo, hi in zip(edges[:-1], edges[1:]):
                nodes.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * _GL_X)
                weights.append(0.5 * (hi - lo) * _GL_W)
        y = np.concatenate(nodes)
        w = np.concatenate(weights)
        m = self.profile.moment(x, x, y)
        L = m.imag / np.sin(y - x)
        return 0.5 * float(np.sum(w * L * L))

    def _smooth_at(self, theta: float) -> bool:
        if not len(self._jumps):
            return True
        t = theta % TWO_PI
        dist = np.abs((t - self._jumps + math.pi) % TWO_PI - math.pi)
        return bool(np.min(dist) > 1e-12)

    def gen_partials(self, x: float, xp: float, second: bool = True) -> Partials:
        c = self.chords(x, xp)
        d = c.gap
        h1, h2 = -0.5 * c.R ** 2, 0.5 * c.L ** 2
        if not second:
            return Partials(h1, h2, math.nan, math.nan, math.nan)
        if not (self._smooth_at(x) and self._smooth_at(xp)):
            raise NonSmoothPoint("second partials requested at a jump of rho", x=x, xp=xp)
        cot = math.cos(d) / math.sin(d)
        R1 = -self.curve.rho(x) + cot * c.R
        L2 = self.curve.rho(xp) - cot * c.L
        h12 = -c.L * c.R / math.sin(d)
        return Partials(h1, h2, -c.R * R1, h12, c.L * L2)

    # -- the map in envelope coordinates -----------------------------------
    def _solve_gap(self, x: float, target: float, forward: bool,
                   guess: float | None = None) -> tuple[float, float]:
        """Solve R(x, x+d) = target (forward) or L(x-d, x) = target for the gap d.

        The residual is increasing in d, so Newton steps are kept inside a
        shrinking bisection bracket on (0, pi).  Returns d and the other chord
        length (L forward, R backward) at the solution.
        """
        lo, hi = GAP_EPS, math.pi - GAP_EPS
        checked_hi = False
        # chords only see x mod 2pi; reducing keeps x + d well resolved on long orbits
        x = x - TWO_PI * math.floor(x / TWO_PI)
        floor = 4.0 * np.finfo(float).eps * (x + math.pi)
        if guess is None:
            r = float(self.curve.rho(x, "right" if forward else "left"))
            guess = 2.0 * math.atan(target / max(r, 1e-3))
        d = min(max(guess, lo), hi)
        for _ in range(300):
            c = self.chords(x, x + d) if forward else self.chords(x - d, x)
            val = (c.R if forward else c.L) - target
            other = c.L if forward else c.R
            slope = other / math.sin(d)
            if val == 0.0:
                return d, other
            if val > 0:
                hi = d
            else:
                lo = d
                if not checked_hi and hi - d < 1e-6:
                    ch = self.chords(x, x + hi) if forward else self.chords(x - hi, x)
                    if (ch.R if forward else ch.L) < target:
                        raise Overflow("gamma too large for the representable gap", x=x, target=target)
                    checked_hi = True
            step = val / slope if slope > 0 else math.inf
            new = d - step
            if not (lo < new < hi):
                new = 0.5 * (lo + hi)
                step = d - new
            if abs(step) <= max(1e-14 * d, floor):
                # first-order update of the other chord length to the final gap
                cot = math.cos(new) / math.sin(new)
                if forward:
                    other += (float(self.curve.rho(x + new)) - cot * other) * (new - d)
                else:
                    other += (float(self.curve.rho(x - new, "left")) - cot * other) * (new - d)
                return new, other
            if hi - lo <= 1e-15 * d:
                return new, other
            d = new
        raise NoBracket("gap solve did not converge", x=x, target=target)

    def step_envelope(self, q: LiftedPoint, guess: float | None = None) -> LiftedPoint:
        if q.gamma <= 0:
            raise DomainGap("gamma must be positive", gamma=q.gamma)
        d, L = self._solve_gap(q.x, math.sqrt(2.0 * q.gamma), True, guess)
        return LiftedPoint(q.x + d, 0.5 * L * L)

    def step_inverse(self, q: LiftedPoint, guess: float | None = None) -> LiftedPoint:
        if q.gamma <= 0:
            raise DomainGap("gamma must be positive", gamma=q.gamma)
        d, R = self._solve_gap(q.x, math.sqrt(2.0 * q.gamma), False, guess)
        return LiftedPoint(q.x - d, 0.5 * R * R)

    def orbit(self, q: LiftedPoint, n: int) -> np.ndarray:
        """Array of shape (n + 1, 2) with rows (x_i, gamma_i)."""
        out = np.empty((n + 1, 2))
        out[0] = q.x, q.gamma
        guess = None
        for i in range(n):
            nxt = self.step_envelope(q, guess)
            guess = nxt.x - q.x
            q = nxt
            out[i + 1] = q.x, q.gamma
        return out

    # -- Euclidean picture --------------------------------------------------
    def from_envelope(self, p) -> np.ndarray:
        x = p.theta if isinstance(p, EnvelopePoint) else p.x
        n = np.array([-math.sin(x), math.cos(x)])
        return self.curve.alpha(x) - math.sqrt(2.0 * p.gamma) * n

    def from_envelope_many(self, x: np.ndarray, gamma: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float)
        n = np.stack([-np.sin(x), np.cos(x)], axis=-1)
        return self.curve.alpha(x) - np.sqrt(2.0 * np.asarray(gamma))[..., None] * n

    def _g(self, z: np.ndarray, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """g = z.u - p and ell = (alpha - z).n at theta (vectorized over points)."""
        a = self.curve.alpha(theta)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        n = np.stack([-u[..., 1], u[..., 0]], axis=-1)
        g = np.sum((z - a) * u, axis=-1)
        ell = np.sum((a - z) * n, axis=-1)
        return g, ell

    def tangency_angles(self, z: np.ndarray, tol: float = 1e-13) -> np.ndarray:
        """Forward support angle theta in [0, 2pi) for each exterior point in z (shape (k, 2))."""
        z = np.atleast_2d(np.asarray(z, float))
        k = len(z)
        g = z @ np.stack([np.cos(self._grid), np.sin(self._grid)]) - self._grid_p[None, :]
        lo = np.empty(k)
        hi = np.empty(k)
        m = len(self._grid)
        step = TWO_PI / m
        for i in range(k):
            row = g[i]
            j = int(np.argmax(row))
            if row[j] <= 0:
                j = self._refine_max(z[i], j)
                if j is None:
                    raise OnCurve("point is on or inside the curve", z=z[i].tolist())
                lo[i], hi[i] = j, j + step
                while self._g(z[i:i + 1], np.array([hi[i]]))[0][0] > 0:
                    hi[i] += step
                continue
            r = np.roll(row, -j)
            neg = np.nonzero(r < 0)[0]
            if not len(neg):
                raise OnCurve("point does not see the curve", z=z[i].tolist())
            lo[i] = self._grid[j] + (neg[0] - 1) * step
            hi[i] = self._grid[j] + neg[0] * step
        theta = 0.5 * (lo + hi)
        for _ in range(100):
            gv, ell = self._g(z, theta)
            lo = np.where(gv > 0, theta, lo)
            hi = np.where(gv > 0, hi, theta)
            newton = theta + gv / np.where(ell > 0, ell, np.inf)
            bad = ~((newton >= lo) & (newton <= hi)) | ~np.isfinite(newton)
            new = np.where(bad, 0.5 * (lo + hi), newton)
            done = np.abs(new - theta) <= tol * (1.0 + np.abs(theta))
            theta = new
            if np.all(done) or np.all(hi - lo < 1e-15):
                break
        return np.mod(theta, TWO_PI)

    def _refine_max(self, z, j):
        """Locate a positive value of g near grid index j (points very close to the curve)."""
        from scipy.optimize import minimize_scalar

        step = TWO_PI / len(self._grid)
        a, b = self._grid[j] - step, self._grid[j] + step
        res = minimize_scalar(lambda t: -float(self._g(z[None, :], np.array([t]))[0][0]),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-15})
        if -res.fun <= 1e-14:
            return None
        return float(res.x)

    def to_envelope(self, z) -> EnvelopePoint:
        z = np.asarray(z, float)
        theta = float(self.tangency_angles(z[None, :])[0])
        a = self.curve.alpha(theta)
        n = np.array([-math.sin(theta), math.cos(theta)])
        ell = float((a - z) @ n)
        if ell <= 0:
            raise OnCurve("point lies on the curve", z=z.tolist())
        return EnvelopePoint(theta, 0.5 * ell * ell)

    def to_envelope_many(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        theta = self.tangency_angles(z)
        _, ell = self._g(np.atleast_2d(z), theta)
        if np.any(ell <= 0):
            raise OnCurve("point lies on the curve")
        return theta, 0.5 * ell * ell

    def step_euclidean(self, z) -> np.ndarray:
        """Reflect z through the tangency point of its forward support line."""
        z = np.asarray(z, float)
        single = z.ndim == 1
        zz = np.atleast_2d(z)
        theta = self.tangency_angles(zz)
        out = 2.0 * self.curve.alpha(theta) - zz
        return out[0] if single else out

    # -- derivatives ------------------------------------------------------------
    def jacobian(self, q: LiftedPoint) -> Jacobian:
        nxt = self.step_envelope(q)
        pp = self.gen_partials(q.x, nxt.x)
        env = np.array([[-pp.h11, -1.0], [pp.h12 ** 2 - pp.h11 * pp.h22, -pp.h22]]) / pp.h12
        return Jacobian(env, self.euclidean_derivative(q.x, q.ell))

    def euclidean_derivative(self, theta: float, ell: float) -> np.ndarray:
        """Matrix of D Phi at the point with tangency angle theta and distance ell."""
        if not self._smooth_at(theta):
            raise NonSmoothPoint("rho jumps at the tangency angle", theta=theta)
        rho = float(self.curve.rho(theta))
        u = np.array([math.cos(theta), math.sin(theta)])
        n = np.array([-u[1], u[0]])
        return -np.eye(2) + (2.0 * rho / ell) * np.outer(n, u)

    def bounce_line_image(self, z, v) -> np.ndarray:
        """Unit direction of D Phi[v] from the bounce-line construction.

        The bounce line runs parallel to the chord z -> Phi(z), offset by
        kappa * ell^2 away from the curve.  The ray from z along v meets it at
        Q, and D Phi[v] points along Q -> Phi(z).
        """
        z = np.asarray(z, float)
        v = np.asarray(v, float)
        env = self.to_envelope(z)
        theta, ell = env.theta, env.ell
        rho = float(self.curve.rho(theta))
        u = np.array([math.cos(theta), math.sin(theta)])
        n = np.array([-u[1], u[0]])
        image = z + 2.0 * ell * n
        vu = float(v @ u)
        scale = float(np.hypot(*v))
        if abs(vu) <= 1e-14 * scale or rho == 0.0:
            # ray meets the bounce line at infinity: the direction is reversed
            w = -v
        else:
            offset = ell * ell / rho
            hit = z + (offset / vu) * v
            w = math.copysign(1.0, vu) * (image - hit)
        return w / np.hypot(*w)

    def bounce_triangle_area(self, z, v) -> float:
        """Area of the triangle z, Phi(z), bounce-line hit point."""
        z = np.asarray(z, float)
        v = np.asarray(v, float)
        env = self.to_envelope(z)
        theta, ell = env.theta, env.ell
        rho = float(self.curve.rho(theta))
        u = np.array([math.cos(theta), math.sin(theta)])
        n = np.array([-u[1], u[0]])
        hit = z + (ell * ell / rho) / float(v @ u) * v
        image = z + 2.0 * ell * n
        return 0.5 * abs(wedge(image - z, hit - z))
