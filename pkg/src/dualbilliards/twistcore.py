"""Generic half-cylinder twist-map machinery.

Everything here works with any object exposing the twist-map interface of
:class:`DualBilliardMap`: ``gap_max``, ``gen_h``, ``gen_partials``,
``step_envelope`` and ``step_inverse``.  Maps that also provide
``chords`` get the scale-aware residual R(x0, x1) - L(x-1, x0).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.optimize import brentq, minimize

from .curve import TWO_PI
from .dualmap import LiftedPoint
from .errors import (NoConvergence, NoCrossing, NotAllowable, NotSandwiched,
                     NotSubsolution, NotSupersolution)

log = logging.getLogger(__name__)


class TwistMap(Protocol):
    gap_max: float

    def gen_h(self, x: float, xp: float) -> float: ...
    def gen_partials(self, x: float, xp: float, second: bool = True): ...
    def step_envelope(self, q: LiftedPoint, guess: float | None = None) -> LiftedPoint: ...
    def step_inverse(self, q: LiftedPoint, guess: float | None = None) -> LiftedPoint: ...


@dataclass
class Configuration:
    """Finite window of a monotone configuration.

    With ``period=(p, q)`` the window holds x_0 .. x_{q-1} and is extended by
    x_{i+q} = x_i + 2 pi p (``span`` overrides 2 pi for other cylinders).
    """

    x: np.ndarray
    period: tuple[int, int] | None = None
    span: float = TWO_PI

    def __post_init__(self):
        self.x = np.asarray(self.x, float)

    def __len__(self) -> int:
        return len(self.x)

    def extended(self) -> np.ndarray:
        """Window with the periodic neighbours appended on both sides."""
        if self.period is None:
            return self.x
        p, _ = self.period
        shift = self.span * p
        return np.concatenate([[self.x[-1] - shift], self.x, [self.x[0] + shift]])

    def pairs(self) -> np.ndarray:
        xs = self.extended()
        if self.period is None:
            return np.stack([xs[:-1], xs[1:]], axis=1)
        return np.stack([xs[1:-1], xs[2:]], axis=1)

    def check_allowable(self, gap_max: float) -> None:
        gaps = np.diff(self.extended())
        bad = np.nonzero((gaps <= 0) | (gaps >= gap_max))[0]
        if len(bad):
            raise NotAllowable(f"gap {gaps[bad[0]]!r} at index {int(bad[0])} leaves (0, {gap_max})",
                               index=int(bad[0]))


@dataclass
class CircleGraph:
    """A positive periodic function u sampled on a uniform grid.

    ``interp`` is "linear" (piecewise linear) or "fourier" (trigonometric
    interpolation, spectrally accurate for smooth u).
    """

    values: np.ndarray
    period: float = TWO_PI
    interp: str = "linear"
    _coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if np.any(self.values <= 0):
            raise ValueError("circle graph must be positive")
        self._coef = np.fft.rfft(self.values) / len(self.values)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], n: int, period: float = TWO_PI,
                      interp: str = "fourier") -> "CircleGraph":
        grid = np.arange(n) * period / n
        return cls(fn(grid), period, interp)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.period / len(self.values)

    @property
    def lipschitz(self) -> float:
        h = self.period / len(self.values)
        return float(np.max(np.abs(np.diff(np.append(self.values, self.values[0])))) / h)

    def _freq(self):
        n = len(self.values)
        k = np.arange(len(self._coef))
        w = np.where((k == 0) | ((n % 2 == 0) & (k == n // 2)), 1.0, 2.0)
        return k * TWO_PI / self.period, w

    def __call__(self, x):
        x = np.asarray(x, float)
        if self.interp == "fourier":
            omega, w = self._freq()
            ph = np.multiply.outer(x, omega)
            return (np.cos(ph) @ (w * self._coef.real)) - (np.sin(ph) @ (w * self._coef.imag))
        n = len(self.values)
        h = self.period / n
        s = np.mod(x, self.period) / h
        i = np.floor(s).astype(int) % n
        f = s - np.floor(s)
        return (1 - f) * self.values[i] + f * self.values[(i + 1) % n]

    def integral(self, a: float, b: float) -> float:
        """Integral of u over [a, b] (lifted, a <= b)."""
        if self.interp == "fourier":
            omega, w = self._freq()
            c = w * self._coef
            total = c[0].real * (b - a)
            om = omega[1:]
            total += float(np.sum((c[1:].real * (np.sin(om * b) - np.sin(om * a))
                                   + c[1:].imag * (np.cos(om * b) - np.cos(om * a))) / om))
            return total
        n = len(self.values)
        h = self.period / n
        full = h * float(np.sum(self.values))

        def cum(t):
            k = math.floor(t / self.period)
            r = t - k * self.period
            i = int(r // h)
            f = (r - i * h) / h
            v = np.append(self.values, self.values[0])
            part = h * (0.5 * np.sum(v[:i] + v[1:i + 1]))
            part += h * (f * v[i] + 0.5 * f * f * (v[i + 1] - v[i]))
            return k * full + part

        return cum(b) - cum(a)


# -- action and residuals -------------------------------------------------------

def action(tmap: TwistMap, c: Configuration) -> float:
    """Sum of h over consecutive pairs (per period for periodic configurations)."""
    c.check_allowable(tmap.gap_max)
    return float(sum(tmap.gen_h(a, b) for a, b in c.pairs()))


def _residual_triple(tmap, xm, x0, xp, form: str) -> float:
    if form == "chord":
        return tmap.chords(x0, xp).R - tmap.chords(xm, x0).L
    # h-form: h2(x_-1, x_0) + h1(x_0, x_1); Delta = -(this)
    return tmap.gen_partials(xm, x0, second=False).h2 + tmap.gen_partials(x0, xp, second=False).h1


def default_form(tmap) -> str:
    return "chord" if hasattr(tmap, "chords") else "h"


def stationarity_residuals(tmap: TwistMap, c: Configuration, form: str = "h") -> np.ndarray:
    """Residual at every interior index.

    ``form="h"`` gives h2(x_{i-1}, x_i) + h1(x_i, x_{i+1}); ``form="delta"`` gives
    Delta = -(that); ``form="chord"`` gives R(x_i, x_{i+1}) - L(x_{i-1}, x_i),
    which has the sign of Delta.
    """
    c.check_allowable(tmap.gap_max)
    xs = c.extended()
    if len(xs) < 3:
        raise NotAllowable("window needs at least three points")
    base = "chord" if form == "chord" else "h"
    out = np.array([_residual_triple(tmap, xs[i - 1], xs[i], xs[i + 1], base)
                    for i in range(1, len(xs) - 1)])
    return -out if form == "delta" else out


def delta(tmap: TwistMap, xm: float, x0: float, xp: float) -> float:
    """Delta(x_-1, x_0, x_1) = -(h1(x_0, x_1) + h2(x_-1, x_0))."""
    return -_residual_triple(tmap, xm, x0, xp, "h")


# -- rotation numbers -----------------------------------------------------------

@dataclass(frozen=True)
class RotationEstimate:
    value: float
    bound: float
    iterations: int


def rotation_number(tmap: TwistMap, q: LiftedPoint, n_iters: int, span: float = TWO_PI
                    ) -> RotationEstimate:
    """(x_n - x_0) / (span n) with a bound from the orbit's deviation from uniform advance."""
    if n_iters < 2:
        raise ValueError("need at least two iterations")
    xs = np.empty(n_iters + 1)
    xs[0] = q.x
    guess = None
    for i in range(n_iters):
        nxt = tmap.step_envelope(q, guess)
        guess = nxt.x - q.x
        q = nxt
        xs[i + 1] = q.x
    est = (xs[-1] - xs[0]) / (span * n_iters)
    dev = xs - xs[0] - span * est * np.arange(n_iters + 1)
    bound = (float(np.max(dev) - np.min(dev)) + span) / (span * n_iters)
    return RotationEstimate(float(est), bound, n_iters)


# -- one-dimensional middle solve ---------------------------------------------------

def _solve_middle(tmap, xm: float, xp: float, x0: float | None = None, tol: float = 1e-15) -> float:
    """The y with h2(xm, y) + h1(y, xp) = 0, within the allowable strip."""
    g = tmap.gap_max
    lo = max(xm, xp - g)
    hi = min(xp, xm + g)
    span = hi - lo
    eps = span * 1e-13

    def phi(y):
        return tmap.gen_partials(xm, y, second=False).h2 + tmap.gen_partials(y, xp, second=False).h1

    if hasattr(tmap, "chords"):
        def phi(y):  # noqa: F811 - scale-aware version for chord-based maps
            return tmap.chords(xm, y).L - tmap.chords(y, xp).R

    a, b = lo + eps, hi - eps
    fa, fb = phi(a), phi(b)
    if fa > 0 or fb < 0:
        # the strip ends are asymptotic; step inward until the signs are right
        for k in range(1, 60):
            e = span * 10.0 ** (-13 + k * 0.25)
            if fa > 0:
                a = lo + min(e, 0.49 * span)
                fa = phi(a)
            if fb < 0:
                b = hi - min(e, 0.49 * span)
                fb = phi(b)
            if fa <= 0 <= fb:
                break
        else:
            raise NoConvergence("middle equation has no bracket", xm=xm, xp=xp)
    if fa == 0:
        return a
    if fb == 0:
        return b
    return brentq(phi, a, b, xtol=tol * max(1.0, abs(a)), rtol=4 * np.finfo(float).eps, maxiter=200)


# -- periodic orbits ------------------------------------------------------------------

@dataclass
class PeriodicOrbitResult:
    config: Configuration
    action: float
    residual: float
    sweeps: int
    converged: bool


def _periodic_grad_hess(tmap, x: np.ndarray, shift: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the periodic action and its cyclic tridiagonal Hessian."""
    q = len(x)
    xs = np.concatenate([[x[-1] - shift], x, [x[0] + shift]])
    grad = np.empty(q)
    H = np.zeros((q, q))
    for i in range(q):
        left = tmap.gen_partials(xs[i], xs[i + 1])
        right = tmap.gen_partials(xs[i + 1], xs[i + 2])
        grad[i] = left.h2 + right.h1
        H[i, i] += left.h22 + right.h11
        H[i, (i - 1) % q] += left.h12
        H[i, (i + 1) % q] += right.h12
    return grad, H


def _newton_polish(tmap, x: np.ndarray, shift: float, iters: int = 20, tol: float = 1e-12) -> np.ndarray:
    """Newton on the periodic stationarity system."""
    for _ in range(iters):
        grad, H = _periodic_grad_hess(tmap, x, shift)
        if np.max(np.abs(grad)) < tol:
            break
        x = x + np.linalg.lstsq(H, -grad, rcond=1e-10)[0]
    return x


def _is_local_min(tmap, x: np.ndarray, shift: float) -> bool:
    _, H = _periodic_grad_hess(tmap, x, shift)
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    return bool(eig[0] > -1e-9 * max(1.0, abs(eig[-1])))


def periodic_orbit(tmap: TwistMap, p: int, q: int, max_sweeps: int = 20000, tol: float = 1e-10,
                   phase: float = 0.0, span: float = TWO_PI) -> PeriodicOrbitResult:
    """Action-minimizing periodic configuration of type (p, q).

    A trust-region minimization of the action from equal spacing, finished by
    Newton and accepted only at a local minimum.  If that fails (for example
    at a jump of the second derivatives) cyclic coordinate descent is used,
    each coordinate solving its stationarity equation exactly.
    """
    if q <= 0 or p <= 0 or math.gcd(p, q) != 1:
        raise ValueError("need coprime positive p, q")
    gap = span * p / q
    if not gap < tmap.gap_max:
        raise ValueError(f"rotation number {p}/{q} needs gaps >= the allowable maximum")
    x0 = phase + gap * np.arange(q)
    shift = span * p

    def residuals(x):
        c = Configuration(x, (p, q), span)
        form = default_form(tmap)
        return stationarity_residuals(tmap, c, "chord" if form == "chord" else "h")

    def fun(x):
        return action(tmap, Configuration(x, (p, q), span))

    def polish(x, res):
        try:
            y = _newton_polish(tmap, x.copy(), shift)
            Configuration(y, (p, q), span).check_allowable(tmap.gap_max)
            ry = np.max(np.abs(residuals(y)))
            if ry < res and _is_local_min(tmap, y, shift):
                return y, ry
        except Exception as exc:  # polishing is optional
            log.debug("newton polish failed: %s", exc)
        return x, res

    sweeps = 0
    res = math.inf
    x = x0.copy()
    try:
        opt = minimize(fun, x0, method="trust-exact",
                       jac=lambda y: _periodic_grad_hess(tmap, y, shift)[0],
                       hess=lambda y: _periodic_grad_hess(tmap, y, shift)[1],
                       options={"gtol": 1e-12, "maxiter": 200})
        y = opt.x
        Configuration(y, (p, q), span).check_allowable(tmap.gap_max)
        if _is_local_min(tmap, y, shift):
            x, res = polish(y, np.max(np.abs(residuals(y))))
    except Exception as exc:
        log.debug("trust-region minimization failed: %s", exc)
        x, res = x0.copy(), math.inf

    if res > tol:
        x = x0.copy()
        res = np.max(np.abs(residuals(x)))
        while res > max(tol, 1e-7) and sweeps < max_sweeps:
            for i in range(q):
                xm = x[i - 1] - (shift if i == 0 else 0.0)
                xp = x[i + 1] if i + 1 < q else x[0] + shift
                x[i] = _solve_middle(tmap, xm, xp)
            sweeps += 1
            res = np.max(np.abs(residuals(x)))
        if res > tol:
            x, res = polish(x, res)
    c = Configuration(x, (p, q), span)
    ok = res <= tol
    if not ok:
        log.warning("periodic orbit (%d,%d) stopped at residual %.3e", p, q, res)
    return PeriodicOrbitResult(c, action(tmap, c), float(res), sweeps, ok)


# -- Angenent sandwich solver ------------------------------------------------------

@dataclass
class SandwichResult:
    config: Configuration
    residual: float
    sweeps: int
    newton_steps: int
    history: list[float]


def _interior_deltas(tmap, x: np.ndarray, form: str) -> np.ndarray:
    vals = np.empty(len(x) - 2)
    for i in range(1, len(x) - 1):
        r = _residual_triple(tmap, x[i - 1], x[i], x[i + 1], form)
        vals[i - 1] = r if form == "chord" else -r
    return vals


def check_subsolution(tmap, x: np.ndarray, form: str | None = None, tol: float = 0.0):
    form = form or default_form(tmap)
    d = _interior_deltas(tmap, np.asarray(x, float), form)
    bad = np.nonzero(d < -tol)[0]
    return d, (int(bad[0]) + 1 if len(bad) else None)


def check_supersolution(tmap, x: np.ndarray, form: str | None = None, tol: float = 0.0):
    form = form or default_form(tmap)
    d = _interior_deltas(tmap, np.asarray(x, float), form)
    bad = np.nonzero(d > tol)[0]
    return d, (int(bad[0]) + 1 if len(bad) else None)


def angenent_solve(tmap: TwistMap, sub: Configuration, sup: Configuration, tol: float = 1e-10,
                   max_sweeps: int = 100000, newton_after: float = 1e-7, sign_tol: float = 0.0,
                   pin: str = "sub") -> SandwichResult:
    """Solution of the orbit recursion between a sub- and a supersolution.

    Endpoints are held fixed (taken from ``pin``).  Monotone Gauss-Seidel
    sweeps start from the subsolution and can only move up; once the residual
    drops below ``newton_after`` the tridiagonal Newton iteration takes over,
    with every iterate checked to stay inside the sandwich.
    """
    lo = np.asarray(sub.x, float)
    hi = np.asarray(sup.x, float)
    if lo.shape != hi.shape or len(lo) < 3:
        raise NotSandwiched("windows differ or are too short")
    if np.any(lo > hi):
        i = int(np.nonzero(lo > hi)[0][0])
        raise NotSandwiched(f"sub exceeds super at index {i}", index=i)
    form = default_form(tmap)
    _, bad = check_subsolution(tmap, lo, form, sign_tol)
    if bad is not None:
        raise NotSubsolution(f"Delta < 0 at index {bad}", index=bad)
    _, bad = check_supersolution(tmap, hi, form, sign_tol)
    if bad is not None:
        raise NotSupersolution(f"Delta > 0 at index {bad}", index=bad)

    x = (lo if pin == "sub" else hi).copy()
    x[0] = (lo if pin == "sub" else hi)[0]
    x[-1] = (lo if pin == "sub" else hi)[-1]
    n = len(x)
    history: list[float] = []
    res = float(np.max(np.abs(_interior_deltas(tmap, x, form))))
    history.append(res)
    sweeps = 0
    slack = 1e-12 * (1.0 + np.abs(x))
    while res > max(tol, newton_after) and sweeps < max_sweeps:
        for i in range(1, n - 1):
            x[i] = _solve_middle(tmap, x[i - 1], x[i + 1])
        sweeps += 1
        if np.any(x < lo - slack) or np.any(x > hi + slack):
            raise NotSandwiched("sweep left the sandwich", sweep=sweeps)
        res = float(np.max(np.abs(_interior_deltas(tmap, x, form))))
        history.append(res)
    steps = 0
    while res > tol and steps < 50:
        y = _chain_newton(tmap, x, form)
        if y is None or np.any(y < lo - slack) or np.any(y > hi + slack):
            # fall back to a block of monotone sweeps
            for _ in range(100):
                for i in range(1, n - 1):
                    x[i] = _solve_middle(tmap, x[i - 1], x[i + 1])
                sweeps += 1
            res = float(np.max(np.abs(_interior_deltas(tmap, x, form))))
            history.append(res)
            if sweeps >= max_sweeps:
                break
            continue
        ry = float(np.max(np.abs(_interior_deltas(tmap, y, form))))
        steps += 1
        if ry >= res and ry > tol:
            break
        x, res = y, ry
        history.append(res)
    if res > tol:
        raise NoConvergence(f"sandwich solve stalled at residual {res:.3e}", residual=res)
    return SandwichResult(Configuration(x), res, sweeps, steps, history)


def _chain_newton(tmap, x: np.ndarray, form: str) -> np.ndarray | None:
    """One Newton step on the interior residuals with pinned endpoints."""
    from scipy.linalg import solve_banded

    n = len(x)
    m = n - 2
    f = np.empty(m)
    ab = np.zeros((3, m))
    for k, i in enumerate(range(1, n - 1)):
        if form == "chord":
            cl = tmap.chords(x[i - 1], x[i])
            cr = tmap.chords(x[i], x[i + 1])
            dl, dr = x[i] - x[i - 1], x[i + 1] - x[i]
            f[k] = cr.R - cl.L
            rho = float(tmap.curve.rho(x[i]))
            # dR(x_i, x_{i+1})/dx_i, dR/dx_{i+1}, dL(x_{i-1}, x_i)/dx_{i-1}, dL/dx_i
            R1 = -rho + cr.R / math.tan(dr)
            R2 = cr.L / math.sin(dr)
            L1 = -cl.R / math.sin(dl)
            L2 = float(tmap.curve.rho(x[i], "left")) - cl.L / math.tan(dl)
            diag, lower, upper = R1 - L2, -L1, R2
        else:
            pl = tmap.gen_partials(x[i - 1], x[i])
            pr = tmap.gen_partials(x[i], x[i + 1])
            f[k] = pl.h2 + pr.h1
            diag, lower, upper = pl.h22 + pr.h11, pl.h12, pr.h12
        ab[1, k] = diag
        if k > 0:
            ab[2, k - 1] = lower
        if k < m - 1:
            ab[0, k + 1] = upper
    try:
        dx = solve_banded((1, 1), ab, -f)
    except (np.linalg.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(dx)):
        return None
    y = x.copy()
    y[1:-1] += dx
    if np.any(np.diff(y) <= 0) or np.any(np.diff(y) >= tmap.gap_max):
        return None
    return y


# -- area function ----------------------------------------------------------------

@dataclass(frozen=True)
class AreaValue:
    value: float
    beta: float


def _h2_many(tmap, x: float, xps: np.ndarray) -> np.ndarray:
    if hasattr(tmap, "h2_many"):
        return tmap.h2_many(x, xps)
    return np.array([tmap.gen_partials(x, y, second=False).h2 for y in xps])


def area_function(tmap: TwistMap, circle: CircleGraph, x: float, resolution: float = 1e-3) -> AreaValue:
    """A(x) = integral of u over [x, beta(x)] - h(x, beta(x)).

    beta(x) is the largest x' in (x, x + gap_max) with h2(x, x') = u(x'),
    located by a scan at ``resolution`` followed by root polishing.
    """
    g = tmap.gap_max
    n = max(16, int(math.ceil(g / resolution)))
    ys = x + g * (np.arange(1, n) / n)
    F = _h2_many(tmap, x, ys) - circle(ys)
    sign = np.sign(F)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    if not len(idx):
        raise NoCrossing("h2(x, .) - u(.) does not change sign", x=x)
    k = int(idx[-1])

    def fn(y):
        return float(_h2_many(tmap, x, np.array([y]))[0] - circle(np.array([y]))[0])

    a, b = ys[k], ys[k + 1]
    if F[k] == 0:
        beta = a
    elif F[k + 1] == 0:
        beta = b
    else:
        beta = brentq(fn, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return AreaValue(circle.integral(x, beta) - tmap.gen_h(x, beta), float(beta))
