"""PNG figures for CLI reports (matplotlib, non-interactive backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .curve import TWO_PI, Curve  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _outline(ax, curve: Curve, n: int = 512, **kw):
    pts = curve.sample(n)
    pts = np.vstack([pts, pts[:1]])
    ax.plot(pts[:, 0], pts[:, 1], **kw)


def plot_orbit(curve: Curve, z: np.ndarray, theta: np.ndarray, gamma: np.ndarray, path) -> None:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4.5))
    _outline(a1, curve, color="k", lw=1)
    a1.plot(z[:, 0], z[:, 1], ".", ms=2)
    a1.set_aspect("equal")
    a1.set_title("orbit (plane)")
    a2.plot(np.mod(theta, TWO_PI), gamma, ".", ms=2)
    a2.set_xlabel("theta")
    a2.set_ylabel("gamma")
    a2.set_title("orbit (envelope coordinates)")
    _finish(fig, path)


def plot_ckam(report, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    v = np.asarray(report.values).T
    lim = float(np.max(np.abs(v))) or 1.0
    mesh = ax.pcolormesh(report.x_grid, report.gamma_grid, v, cmap="RdBu", vmin=-lim, vmax=lim, shading="nearest")
    ax.plot(report.x_grid, report.gamma_star, "k-", lw=1, label="negative run top")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("x0")
    ax.set_ylabel("gamma")
    ax.legend(loc="upper right")
    _finish(fig, path)


def plot_envelope(inner: Curve, env, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    _outline(ax, inner, color="k", lw=1, label="inner")
    _outline(ax, env.curve, color="C1", lw=1, label="envelope")
    for e, x in env.chords[:: max(1, len(env.chords) // 48)]:
        ax.plot([e[0], x[0]], [e[1], x[1]], color="C0", lw=0.4)
    ax.set_aspect("equal")
    ax.legend()
    _finish(fig, path)


def plot_crash(orbit, path) -> None:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 4))
    a1.plot(orbit.indices, orbit.x, ".-", ms=3)
    a1.set_xlabel("n")
    a1.set_ylabel("x_n")
    a2.semilogy(orbit.indices[1:], orbit.gamma, ".-", ms=3)
    a2.set_xlabel("n")
    a2.set_ylabel("gamma_n")
    _finish(fig, path)


def plot_impact(ts: np.ndarray, ws: np.ndarray, dev: np.ndarray, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(ts, ws, np.log10(np.maximum(dev.T, 1e-18)), shading="nearest")
    fig.colorbar(mesh, ax=ax, label="log10 deviation")
    ax.set_xlabel("t")
    ax.set_ylabel("w")
    _finish(fig, path)


def plot_caustic(table: Curve, caustic: Curve, points: np.ndarray, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    _outline(ax, table, color="k", lw=1)
    _outline(ax, caustic, color="C1", lw=1)
    ax.plot(points[:, 0], points[:, 1], color="C0", lw=0.4)
    ax.set_aspect("equal")
    _finish(fig, path)
