"""Convex curves described by a piecewise radius-of-curvature profile.

A curve is stored through rho(theta), the radius of curvature as a function
of the outward normal angle.  Everything else (support function, tangency
points, arclength) is reconstructed from it by exact per-piece integration.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidProfile, NonPeriodic, NonPositiveSupport

TWO_PI = 2.0 * math.pi
CLOSURE_TOL = 1e-9
RHO_GRID = 4096

# Gauss-Legendre rule used for polynomial pieces; panels are kept short so
# that the rule is exact to rounding for the smooth integrands involved.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_PANEL = 0.5


@dataclass(frozen=True)
class Piece:
    """One smooth stretch of rho on [start, end).

    ``poly`` holds coefficients of a polynomial in (theta - start), lowest
    degree first.  ``trig`` holds [c0, a1, b1, a2, b2, ...] for
    c0 + sum a_m cos(m theta) + b_m sin(m theta).  Either may be empty; a
    piece carrying both arises when a polynomial piece is closure-projected.
    """

    start: float
    end: float
    poly: tuple[float, ...] = ()
    trig: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.end > self.start:
            raise InvalidProfile("piece has non-positive length", start=self.start, end=self.end)
        if self.trig and len(self.trig) % 2 == 0:
            raise InvalidProfile("trig coefficients must have odd length [c0, a1, b1, ...]")
        if not self.poly and not self.trig:
            raise InvalidProfile("piece has no coefficients")
        # exp(i(eta - x)) * trig part = sum_k K_k exp(i(omega_k eta - x)); cached for speed
        if self.trig:
            c0, m, a, b = self._trig_arrays()
            cm = a - 1j * b
            omega = np.concatenate([[1.0], 1.0 + m, 1.0 - m])
            weight = np.concatenate([[c0], 0.5 * cm, 0.5 * np.conj(cm)]).astype(complex)
        else:
            omega = np.zeros(0)
            weight = np.zeros(0, complex)
        object.__setattr__(self, "_omega", omega)
        object.__setattr__(self, "_weight", weight)

    @property
    def kind(self) -> str:
        if self.trig and self.poly:
            return "mixed"
        if self.trig:
            return "trig"
        return "const" if len(self.poly) == 1 else "poly"

    @classmethod
    def from_spec(cls, start: float, end: float, kind: str, coeffs: Iterable[float],
                  extra_trig: Iterable[float] = ()) -> "Piece":
        coeffs = tuple(float(c) for c in coeffs)
        extra = tuple(float(c) for c in extra_trig)
        if kind == "const":
            if len(coeffs) != 1:
                raise InvalidProfile("const piece takes exactly one coefficient")
            return cls(start, end, poly=coeffs, trig=extra)
        if kind == "poly":
            return cls(start, end, poly=coeffs, trig=extra)
        if kind == "trig":
            return cls(start, end, trig=coeffs)
        raise InvalidProfile(f"unknown piece kind {kind!r}")

    def to_spec(self) -> dict:
        if self.kind == "trig":
            return {"start": self.start, "end": self.end, "kind": "trig", "coeffs": list(self.trig)}
        out = {"start": self.start, "end": self.end, "kind": "const" if self.kind == "const" else "poly",
               "coeffs": list(self.poly)}
        if self.trig:
            out["trig"] = list(self.trig)
        return out

    # -- evaluation -------------------------------------------------------
    def _trig_arrays(self):
        t = np.asarray(self.trig, float)
        m = np.arange(1, (len(t) - 1) // 2 + 1, dtype=float)
        return t[0], m, t[1::2], t[2::2]

    def value(self, theta: np.ndarray) -> np.ndarray:
        """rho on this piece; theta is measured in the piece's own period."""
        theta = np.asarray(theta, float)
        out = np.zeros_like(theta)
        if self.poly:
            out = out + np.polynomial.polynomial.polyval(theta - self.start, self.poly)
        if self.trig:
            c0, m, a, b = self._trig_arrays()
            mt = np.multiply.outer(theta, m)
            out = out + c0 + np.cos(mt) @ a + np.sin(mt) @ b
        return out

    def derivative(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, float)
        out = np.zeros_like(theta)
        if len(self.poly) > 1:
            d = np.polynomial.polynomial.polyder(self.poly)
            out = out + np.polynomial.polynomial.polyval(theta - self.start, d)
        if self.trig:
            _, m, a, b = self._trig_arrays()
            mt = np.multiply.outer(theta, m)
            out = out + np.sin(mt) @ (-m * a) + np.cos(mt) @ (m * b)
        return out

    def moment(self, x: float, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Integral of exp(i(eta - x)) rho(eta) over [lo, hi] inside the piece."""
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        out = np.zeros(np.broadcast(lo, hi).shape, complex)
        if len(self.poly) == 1:
            out += self.poly[0] * _window(1.0, mid, half, x)
        elif self.poly:
            out += self._poly_moment(x, lo, hi)
        if self.trig:
            out += _window(self._omega, mid[..., None], half[..., None], x) @ self._weight
        return out

    def cumulative(self, t: np.ndarray) -> np.ndarray:
        """Integral of exp(i eta) rho(eta) over [start, t] (absolute accuracy)."""
        t = np.asarray(t, float)
        if not self.trig:
            return self.moment(0.0, np.full(t.shape, self.start), t)
        out = np.zeros(t.shape, complex)
        if self.poly:
            out += self.moment(0.0, np.full(t.shape, self.start), t) - self._trig_only(t)
        om = self._omega
        zero = om == 0.0
        safe = np.where(zero, 1.0, om)
        et = np.exp(1j * np.multiply.outer(t, om))
        es = np.exp(1j * om * self.start)
        terms = np.where(zero, np.subtract.outer(t, self.start * np.ones_like(om)), (et - es) / (1j * safe))
        return out + terms @ self._weight

    def _trig_only(self, t):
        return _window(self._omega, 0.5 * (t + self.start)[..., None], 0.5 * (t - self.start)[..., None],
                       0.0) @ self._weight

    def moment_scalar(self, x: float, lo: float, hi: float) -> complex:
        """Scalar version of ``moment``."""
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        out = 0j
        if len(self.poly) == 1:
            s = math.sin(half) / half if half else 1.0
            out += self.poly[0] * 2.0 * half * s * complex(math.cos(mid - x), math.sin(mid - x))
        elif self.poly:
            out += complex(self._poly_moment(x, np.asarray(lo), np.asarray(hi)))
        if self.trig:
            arg = self._omega * half
            sinc = np.sinc(arg / math.pi)
            phase = self._omega * mid - x
            w = (2.0 * half) * sinc
            out += complex(np.dot(w * np.cos(phase), self._weight.real) - np.dot(w * np.sin(phase), self._weight.imag),
                           np.dot(w * np.cos(phase), self._weight.imag) + np.dot(w * np.sin(phase), self._weight.real))
        return out

    def _poly_moment(self, x, lo, hi):
        lo, hi = np.broadcast_arrays(lo, hi)
        span = float(np.max(hi - lo)) if lo.size else 0.0
        npan = max(1, int(math.ceil(span / _GL_PANEL)))
        edges = lo[..., None] + (hi - lo)[..., None] * (np.arange(npan + 1) / npan)
        a = edges[..., :-1, None]
        b = edges[..., 1:, None]
        nodes = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
        vals = np.polynomial.polynomial.polyval(nodes - self.start, self.poly)
        vals = vals * np.exp(1j * (nodes - x))
        return np.sum(0.5 * (b - a) * _GL_W * vals, axis=(-2, -1))

    def integral_between(self, lo, hi):
        """Integral of rho over [lo, hi] (both inside the piece's own period)."""
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        total = np.zeros(np.broadcast(lo, hi).shape)
        if self.poly:
            anti = np.polynomial.polynomial.polyint(self.poly)
            P = np.polynomial.polynomial.polyval
            total = total + P(hi - self.start, anti) - P(lo - self.start, anti)
        if self.trig:
            c0, m, a, b = self._trig_arrays()
            total = total + c0 * (hi - lo)
            if len(m):
                mh = np.multiply.outer(hi, m)
                ml = np.multiply.outer(lo, m)
                total = total + (np.sin(mh) - np.sin(ml)) @ (a / m) - (np.cos(mh) - np.cos(ml)) @ (b / m)
        return total

    def integral(self) -> float:
        """Integral of rho over the whole piece (arclength contribution)."""
        return float(self.integral_between(self.start, self.end))

    def minimum(self) -> float:
        """Minimum of rho over the closed piece."""
        if self.kind == "const":
            return self.poly[0]
        candidates = [self.start, self.end]
        if self.kind == "poly":
            d = np.polynomial.polynomial.polyder(self.poly)
            if len(d) > 1:
                for r in np.polynomial.polynomial.polyroots(d):
                    if abs(r.imag) < 1e-12 and 0 < r.real < self.end - self.start:
                        candidates.append(self.start + r.real)
            return float(np.min(self.value(np.asarray(candidates))))
        # trig or mixed: dense sampling, then a bounded polish of the best cell
        grid = np.linspace(self.start, self.end, 2049)
        vals = self.value(grid)
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        best = float(vals[i])
        if hi > lo:
            res = minimize_scalar(lambda t: float(self.value(np.asarray(t))), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            best = min(best, float(res.fun))
        return best


def first_mode_basis(lo: float, hi: float) -> tuple[complex, complex, complex]:
    """Integrals over [lo, hi] of exp(i t) times 1, cos t and sin t."""
    e1 = (np.exp(1j * hi) - np.exp(1j * lo)) / 1j
    e2 = (np.exp(2j * hi) - np.exp(2j * lo)) / 4j
    ec = 0.5 * (hi - lo) + e2
    es = 0.5j * (hi - lo) - 1j * e2
    return complex(e1), complex(ec), complex(es)


def _window(omega, mid, half, x):
    """Integral of exp(i(omega*eta - x)) over [mid - half, mid + half]."""
    return 2.0 * half * np.sinc(omega * half / math.pi) * np.exp(1j * (omega * mid - x))


class RadiusProfile:
    """2pi-periodic piecewise-smooth radius of curvature rho(theta) >= 0."""

    def __init__(self, pieces: Iterable[Piece], name: str = "profile"):
        pieces = sorted(pieces, key=lambda p: p.start)
        if not pieces:
            raise InvalidProfile("profile has no pieces")
        fixed = []
        for i, p in enumerate(pieces):
            start = 0.0 if i == 0 else fixed[-1].end
            if i == 0 and abs(p.start) > 1e-9:
                raise InvalidProfile("pieces must start at 0", start=p.start)
            if i > 0 and abs(p.start - start) > 1e-9:
                raise InvalidProfile("pieces must tile [0, 2pi) without gaps", at=p.start)
            end = TWO_PI if i == len(pieces) - 1 else p.end
            if i == len(pieces) - 1 and abs(p.end - TWO_PI) > 1e-9:
                raise InvalidProfile("pieces must end at 2pi", end=p.end)
            fixed.append(Piece(start, end, p.poly, p.trig))
        self.pieces: tuple[Piece, ...] = tuple(fixed)
        self.name = name
        self.starts = np.array([p.start for p in self.pieces])
        self.ends = np.array([p.end for p in self.pieces])
        first = [p.moment(0.0, np.asarray(p.start), np.asarray(p.end)) for p in self.pieces]
        self._cum = np.concatenate([[0.0], np.cumsum(first)]).astype(complex)

    def __repr__(self) -> str:
        return f"RadiusProfile({self.name!r}, {len(self.pieces)} pieces)"

    # -- pointwise --------------------------------------------------------
    def _locate(self, theta, side="right"):
        t = np.mod(np.asarray(theta, float), TWO_PI)
        if side == "right":
            idx = np.searchsorted(self.starts, t, side="right") - 1
        else:
            t = np.where(t == 0.0, TWO_PI, t)
            idx = np.searchsorted(self.starts, t, side="left") - 1
        return t, np.clip(idx, 0, len(self.pieces) - 1)

    def rho(self, theta, side: str = "right"):
        """rho(theta); at a breakpoint the limit from ``side`` is returned."""
        t, idx = self._locate(theta, side)
        out = np.empty_like(t)
        for j in np.unique(idx):
            mask = idx == j
            out[mask] = self.pieces[j].value(t[mask])
        return out if out.ndim else float(out)

    def rho_prime(self, theta, side: str = "right"):
        t, idx = self._locate(theta, side)
        out = np.empty_like(t)
        for j in np.unique(idx):
            mask = idx == j
            out[mask] = self.pieces[j].derivative(t[mask])
        return out if out.ndim else float(out)

    def discontinuities(self, tol: float = 1e-12) -> list[float]:
        """Breakpoints (in [0, 2pi)) where rho jumps by more than ``tol``."""
        jumps = []
        for s in self.starts:
            if abs(self.rho(s, "left") - self.rho(s, "right")) > tol:
                jumps.append(float(s))
        return jumps

    def is_continuous_at(self, theta: float, tol: float = 1e-12) -> bool:
        t = float(np.mod(theta, TWO_PI))
        return abs(self.rho(t, "left") - self.rho(t, "right")) <= tol

    def breakpoints(self, lo: float, hi: float) -> list[float]:
        """Lifted piece boundaries strictly inside (lo, hi)."""
        out = []
        k = math.floor(lo / TWO_PI)
        while k * TWO_PI < hi:
            for s in self.starts:
                v = k * TWO_PI + s
                if lo < v < hi:
                    out.append(float(v))
            k += 1
        return out

    # -- integrals --------------------------------------------------------
    def moment(self, x: float, lo: float, hi):
        """Integral of exp(i(eta - x)) rho(eta) d eta over lifted [lo, hi].

        The real part is the cosine-kernel integral and the imaginary part the
        sine-kernel integral about ``x``.  ``hi`` may be an array (all >= lo).
        """
        if np.ndim(hi) == 0:
            return self._moment_scalar(float(x), float(lo), float(hi))
        hi_arr = np.asarray(hi, float)
        out = np.zeros(hi_arr.shape, complex)
        if not hi_arr.size:
            return out
        top = float(hi_arr.max())
        k = math.floor(lo / TWO_PI)
        base = k * TWO_PI
        j = int(np.searchsorted(self.starts, lo - base, side="right") - 1)
        j = min(max(j, 0), len(self.pieces) - 1)
        seg = lo
        while seg < top:
            piece = self.pieces[j]
            end = base + piece.end
            b = np.minimum(hi_arr, end)
            mask = b > seg
            if mask.any():
                out[mask] += piece.moment(x - base, np.asarray(seg - base), b[mask] - base)
            seg = end
            j += 1
            if j == len(self.pieces):
                j = 0
                base += TWO_PI
        return out

    def _moment_scalar(self, x: float, lo: float, hi: float) -> complex:
        out = 0j
        if hi <= lo:
            return out
        k = math.floor(lo / TWO_PI)
        base = k * TWO_PI
        starts = self.starts
        if len(starts) == 1:
            j = 0
        else:
            j = int(np.searchsorted(starts, lo - base, side="right") - 1)
            j = min(max(j, 0), len(self.pieces) - 1)
        seg = lo
        npieces = len(self.pieces)
        while seg < hi:
            piece = self.pieces[j]
            end = base + piece.end
            b = min(hi, end)
            if b > seg:
                out += piece.moment_scalar(x - base, seg - base, b - base)
            seg = end
            j += 1
            if j == npieces:
                j = 0
                base += TWO_PI
        return out

    def first_mode(self) -> complex:
        """Integral of exp(i theta) rho(theta) over one period."""
        return complex(self._cum[-1])

    def closure_defect(self) -> float:
        return abs(self.first_mode())

    def perimeter(self) -> float:
        return float(sum(p.integral() for p in self.pieces))

    def cumulative_first_mode(self, theta):
        """Integral of exp(i eta) rho(eta) over [0, theta mod 2pi]."""
        t, idx = self._locate(theta, "right")
        out = np.empty(t.shape, complex)
        for j in np.unique(idx):
            mask = idx == j
            p = self.pieces[j]
            out[mask] = self._cum[j] + p.cumulative(t[mask])
        return out if out.ndim else complex(out)

    def arclength(self, theta):
        """Cumulative integral of rho from 0 to theta (lifted, any real theta)."""
        theta = np.asarray(theta, float)
        k = np.floor(theta / TWO_PI)
        t, idx = self._locate(theta, "right")
        cum = np.concatenate([[0.0], np.cumsum([p.integral() for p in self.pieces])])
        out = np.empty(t.shape)
        for j in np.unique(idx):
            mask = idx == j
            p = self.pieces[j]
            out[mask] = cum[j] + p.integral_between(p.start, t[mask])
        out = out + k * cum[-1]
        return out if out.ndim else float(out)

    # -- validation -------------------------------------------------------
    def min_rho(self) -> float:
        grid = np.linspace(0.0, TWO_PI, RHO_GRID, endpoint=False)
        sampled = float(np.min(self.rho(grid)))
        analytic = min(p.minimum() for p in self.pieces)
        return min(sampled, analytic)

    def with_added_trig(self, a1: float, b1: float, region: tuple[float, float] | None = None
                        ) -> "RadiusProfile":
        """Add a1 cos + b1 sin to every piece (or only to those inside ``region``)."""
        new = []
        for p in self.pieces:
            if region is not None and not (p.start >= region[0] - 1e-12 and p.end <= region[1] + 1e-12):
                new.append(p)
                continue
            trig = list(p.trig) if p.trig else [0.0]
            while len(trig) < 3:
                trig.append(0.0)
            trig[1] += a1
            trig[2] += b1
            poly = p.poly
            if poly and len(poly) == 1 and not p.trig:
                trig[0] += poly[0]
                poly = ()
            new.append(Piece(p.start, p.end, poly, tuple(trig)))
        return RadiusProfile(new, self.name)

    def project_closure(self, region: tuple[float, float] | None = None) -> "RadiusProfile":
        """Remove the first Fourier mode (globally, or using pieces inside ``region``).

        The correction is a1 cos + b1 sin solved so that the first mode of the
        result vanishes; with no region this is the orthogonal projection.
        """
        f = self.first_mode()
        if region is None:
            return self.with_added_trig(-f.real / math.pi, -f.imag / math.pi)
        lo, hi = region
        _, ec, es = first_mode_basis(lo, hi)
        mat = np.array([[ec.real, es.real], [ec.imag, es.imag]])
        a1, b1 = np.linalg.solve(mat, [-f.real, -f.imag])
        return self.with_added_trig(float(a1), float(b1), region)

    def to_spec(self) -> list[dict]:
        return [p.to_spec() for p in self.pieces]


@dataclass(frozen=True)
class SupportFrame:
    """Support data at one normal angle."""

    theta: float
    p: float
    q: float
    alpha: np.ndarray
    u: np.ndarray
    n: np.ndarray


@dataclass
class Curve:
    """A closed convex curve: a radius profile plus the initial data p(0), p'(0)."""

    profile: RadiusProfile
    p0: float
    q0: float
    name: str = ""
    closure_tol: float = CLOSURE_TOL
    validate: bool = True

    def __post_init__(self):
        if not self.name:
            self.name = self.profile.name
        if self.validate:
            self.check()

    def check(self) -> None:
        defect = self.profile.closure_defect()
        if defect > self.closure_tol:
            raise NonPeriodic(f"closure defect {defect:.3e} exceeds {self.closure_tol:.1e}",
                              defect=defect)
        rmin = self.profile.min_rho()
        if rmin < -1e-12:
            raise InvalidProfile(f"rho is negative somewhere (min {rmin:.3e})", rho_min=rmin)
        grid = np.linspace(0.0, TWO_PI, RHO_GRID, endpoint=False)
        p = self.support(grid)[0]
        if np.min(p) <= 0.0:
            raise NonPositiveSupport("support function is not positive; origin not interior",
                                     p_min=float(np.min(p)))

    # -- reconstruction ---------------------------------------------------
    def alpha(self, theta) -> np.ndarray:
        """Tangency point on the curve for outward normal angle theta; shape (..., 2)."""
        w = self.profile.cumulative_first_mode(theta)
        return np.stack([self.p0 - np.imag(w), self.q0 + np.real(w)], axis=-1)

    def support(self, theta):
        """(p, p') at theta."""
        theta = np.asarray(theta, float)
        a = self.alpha(theta)
        c, s = np.cos(theta), np.sin(theta)
        p = a[..., 0] * c + a[..., 1] * s
        dp = -a[..., 0] * s + a[..., 1] * c
        return p, dp

    def frame(self, theta: float) -> SupportFrame:
        theta = float(theta)
        a = self.alpha(theta)
        u = np.array([math.cos(theta), math.sin(theta)])
        n = np.array([-u[1], u[0]])
        return SupportFrame(theta, float(a @ u), float(a @ n), a, u, n)

    def rho(self, theta, side: str = "right"):
        return self.profile.rho(theta, side)

    def perimeter(self) -> float:
        return self.profile.perimeter()

    def area(self) -> float:
        """Enclosed area, 0.5 * integral of p rho."""
        th = np.linspace(0.0, TWO_PI, 8192, endpoint=False)
        pts = self.alpha(th)
        return polygon_area(pts)

    def sample(self, n: int) -> np.ndarray:
        """n points on the curve, equally spaced in normal angle."""
        return self.alpha(np.linspace(0.0, TWO_PI, n, endpoint=False))

    def to_spec(self) -> dict:
        return {"name": self.name, "p0": self.p0, "q0": self.q0, "pieces": self.profile.to_spec()}

    def translated(self, shift) -> "Curve":
        return Curve(self.profile, self.p0 + shift[0], self.q0 + shift[1], self.name,
                     self.closure_tol, self.validate)

    @classmethod
    def centered(cls, profile: RadiusProfile, name: str = "", **kw) -> "Curve":
        """Place the origin at the arclength centroid of the curve."""
        raw = cls(profile, 0.0, 0.0, name, validate=False)
        th = np.linspace(0.0, TWO_PI, RHO_GRID, endpoint=False)
        w = profile.rho(th)
        pts = raw.alpha(th)
        centroid = (pts * w[:, None]).sum(axis=0) / w.sum()
        return cls(profile, -float(centroid[0]), -float(centroid[1]), name, **kw)


def polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


# -- spec-level operations ---------------------------------------------------

def eval_rho(profile: RadiusProfile, theta):
    return profile.rho(theta)


def closure_defect(profile: RadiusProfile) -> float:
    return profile.closure_defect()


def build_support(profile: RadiusProfile, p0: float, q0: float,
                  closure_tol: float = CLOSURE_TOL) -> Curve:
    """Validated curve whose ``frame``/``support`` methods evaluate p, p', alpha."""
    return Curve(profile, p0, q0, closure_tol=closure_tol)


def constant_profile(value: float = 1.0, name: str = "circle") -> RadiusProfile:
    return RadiusProfile([Piece(0.0, TWO_PI, poly=(float(value),))], name)


def trig_profile(coeffs: Iterable[float], name: str = "trig") -> RadiusProfile:
    return RadiusProfile([Piece(0.0, TWO_PI, trig=tuple(float(c) for c in coeffs))], name)


def ellipse_profile(a: float, b: float, tol: float = 1e-15) -> RadiusProfile:
    """Axis-aligned ellipse with semi-axes a (along x) and b.

    rho = a^2 b^2 / p^3 with p the ellipse support function.  rho is analytic,
    so its Fourier series is truncated where coefficients drop below ``tol``
    relative to the mean.
    """
    n = 2048
    th = np.arange(n) * TWO_PI / n
    p = np.sqrt(a * a * np.cos(th) ** 2 + b * b * np.sin(th) ** 2)
    rho = a * a * b * b / p ** 3
    f = np.fft.rfft(rho) / n
    c0 = f[0].real
    am = 2.0 * f[1:].real
    bm = -2.0 * f[1:].imag
    keep = np.nonzero((np.abs(am) > tol * c0) | (np.abs(bm) > tol * c0))[0]
    mmax = int(keep.max()) + 1 if len(keep) else 0
    coeffs = [c0]
    for m in range(mmax):
        coeffs += [am[m], 0.0]
    return trig_profile(coeffs, f"ellipse({a:g},{b:g})")


def ellipse_curve(a: float = 2.0, b: float = 1.0, center=(0.0, 0.0)) -> Curve:
    return Curve(ellipse_profile(a, b), a + center[0], center[1], f"ellipse({a:g},{b:g})")


def ellipse_support(a: float, b: float, theta):
    """Closed-form support function of the axis-aligned ellipse."""
    return np.sqrt(a * a * np.cos(theta) ** 2 + b * b * np.sin(theta) ** 2)


def flatpoint_profile(theta_hat: float = 0.0) -> RadiusProfile:
    """rho = 1 - cos(2 phi)/2 - cos(3 phi)/2 with phi = theta - theta_hat.

    Nonnegative, vanishing only at theta_hat (both cosines equal one only
    there), and free of the first harmonic, so it closes exactly.
    """
    coeffs = [1.0, 0.0, 0.0]
    for m in (2, 3):
        coeffs += [-0.5 * math.cos(m * theta_hat), -0.5 * math.sin(m * theta_hat)]
    return trig_profile(coeffs, "flatpoint")


def jump_profile(theta_hat: float = math.pi / 2, low: float = 1.0, jump: float = 3.0) -> RadiusProfile:
    """rho with exactly one jump, of size ``jump``, at theta_hat.

    rho = low on [0, theta_hat) and a two-harmonic trig piece on
    [theta_hat, 2pi) whose four coefficients (c, a1, b1, a2) are fixed by:
    vanishing first mode (two equations), continuity at 2pi, and
    rho(theta_hat+) = low + jump.
    """
    lo, hi = theta_hat, TWO_PI
    e1, ec, es = first_mode_basis(lo, hi)
    # exp(i t) cos 2t = (exp(3it) + exp(-it)) / 2
    e_c2 = 0.5 * ((np.exp(3j * hi) - np.exp(3j * lo)) / 3j + (np.exp(-1j * hi) - np.exp(-1j * lo)) / -1j)
    first = low * (np.exp(1j * lo) - 1.0) / 1j
    mat = np.array([[e1.real, ec.real, es.real, e_c2.real],
                    [e1.imag, ec.imag, es.imag, e_c2.imag],
                    [1.0, 1.0, 0.0, 1.0],
                    [1.0, math.cos(lo), math.sin(lo), math.cos(2 * lo)]])
    rhs = np.array([-first.real, -first.imag, low, low + jump])
    c, a1, b1, a2 = (float(v) for v in np.linalg.solve(mat, rhs))
    return RadiusProfile([Piece(0.0, lo, poly=(low,)),
                          Piece(lo, hi, trig=(c, a1, b1, a2, 0.0))], "jump")


def builtin_curves() -> dict[str, Curve]:
    """Named fixtures.  ``jump`` is deliberately not C^1 (see its discontinuities())."""
    return {
        "circle": Curve(constant_profile(1.0), 1.0, 0.0, "circle"),
        "ellipse": ellipse_curve(2.0, 1.0),
        "flatpoint": Curve.centered(flatpoint_profile(0.0), "flatpoint"),
        "jump": Curve.centered(jump_profile(), "jump"),
        "trig": Curve.centered(trig_profile([1.0, 0.0, 0.0, 0.1, 0.05, 0.03, -0.02]), "trig"),
    }


# -- file I/O ----------------------------------------------------------------

def _load_toml(text: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    return tomllib.loads(text)


def curve_from_dict(data: Mapping, auto_project: bool = False,
                    closure_tol: float = CLOSURE_TOL) -> Curve:
    try:
        pieces = [Piece.from_spec(float(p["start"]), float(p["end"]), str(p["kind"]), p["coeffs"],
                                  p.get("trig", ()))
                  for p in data["pieces"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProfile(f"malformed curve spec: {exc}") from exc
    name = str(data.get("name", "curve"))
    profile = RadiusProfile(pieces, name)
    if auto_project and profile.closure_defect() > closure_tol:
        warnings.warn(f"closure defect {profile.closure_defect():.3e}; projecting out the first mode",
                      stacklevel=2)
        profile = profile.project_closure()
        if profile.min_rho() < 0:
            raise InvalidProfile("projection made rho negative")
    if "p0" in data and "q0" in data:
        return Curve(profile, float(data["p0"]), float(data["q0"]), name, closure_tol=closure_tol)
    return Curve.centered(profile, name, closure_tol=closure_tol)


def load_curve(path: str | Path, auto_project: bool = False) -> Curve:
    """Read a curve-spec file (JSON or TOML, chosen by extension, then by content)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        data = _load_toml(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = _load_toml(text)
    return curve_from_dict(data, auto_project=auto_project)


def save_curve(curve: Curve, path: str | Path) -> None:
    Path(path).write_text(json.dumps(curve.to_spec(), indent=2))
