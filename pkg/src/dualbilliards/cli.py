"""Command-line driver.

Curve arguments take a curve-spec file (JSON or TOML) or ``builtin:NAME``
for one of the bundled fixtures.  Reports are JSON with ``"schema": 1``;
errors go to stderr as JSON with a nonzero exit status.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import billiards, circles, crash, impact
from .curve import (TWO_PI, CLOSURE_TOL, Curve, Piece, RadiusProfile, builtin_curves, curve_from_dict,
                    load_curve, _load_toml)
from .dualmap import DualBilliardMap, LiftedPoint
from .errors import DualBilliardsError, InvalidProfile
from .twistcore import periodic_orbit, rotation_number

SCHEMA = 1
THREADS_ENV = "DUALBILLIARDS_THREADS"


class _Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        return super().default(o)


def _emit(report: dict, out: str | None) -> None:
    report = {"schema": SCHEMA, **report}
    text = json.dumps(report, cls=_Encoder, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _read_spec(path: str) -> dict:
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        cat = builtin_curves()
        if name not in cat:
            raise InvalidProfile(f"unknown builtin curve {name!r}", available=sorted(cat))
        return cat[name].to_spec()
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".toml":
        return _load_toml(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return _load_toml(text)


def _curve(path: str) -> Curve:
    if path.startswith("builtin:"):
        name = path.split(":", 1)[1]
        cat = builtin_curves()
        if name not in cat:
            raise InvalidProfile(f"unknown builtin curve {name!r}", available=sorted(cat))
        return cat[name]
    return load_curve(path)


def _curve_or_samples(path: str):
    """A curve spec, or a JSON point list (bare or under "points")."""
    if not path.startswith("builtin:") and Path(path).suffix.lower() != ".toml":
        data = json.loads(Path(path).read_text())
        if isinstance(data, list) or (isinstance(data, dict) and "points" in data):
            pts = data["points"] if isinstance(data, dict) else data
            return billiards.as_curve(np.asarray(pts, float))
        return curve_from_dict(data)
    return _curve(path)


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like NxM, got {text!r}") from exc


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# -- subcommands ------------------------------------------------------------------

def cmd_validate(args) -> int:
    data = _read_spec(args.curve)
    try:
        pieces = [Piece.from_spec(float(p["start"]), float(p["end"]), str(p["kind"]), p["coeffs"],
                                  p.get("trig", ())) for p in data["pieces"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProfile(f"malformed curve spec: {exc}") from exc
    prof = RadiusProfile(pieces, str(data.get("name", "curve")))
    defect = prof.closure_defect()
    rmin = prof.min_rho()
    problems = []
    if defect > args.tol:
        problems.append("closure")
    if rmin < -1e-12:
        problems.append("negative_rho")
    if not problems:
        try:
            curve_from_dict(data, closure_tol=args.tol)
        except DualBilliardsError as exc:
            problems.append(exc.code)
    report = {"name": prof.name, "closure_defect": defect, "rho_min": rmin,
              "perimeter": prof.perimeter(), "pieces": len(prof.pieces),
              "discontinuities": prof.discontinuities(), "valid": not problems, "problems": problems}
    _emit(report, args.out)
    if problems:
        _error("InvalidCurve", "curve failed validation", problems=problems, closure_defect=defect)
        return 3
    return 0


def cmd_orbit(args) -> int:
    curve = _curve(args.curve)
    dmap = DualBilliardMap(curve)
    orb = dmap.orbit(LiftedPoint(args.x0, args.gamma0), args.iters)
    z = dmap.from_envelope_many(orb[:, 0], orb[:, 1])
    resid = np.zeros(len(orb))
    if len(orb) > 1:
        resid[1:] = np.hypot(*(dmap.step_euclidean(z[:-1]) - z[1:]).T)
    rows = zip(range(len(orb)), orb[:, 0], np.mod(orb[:, 0], TWO_PI), orb[:, 1], z[:, 0], z[:, 1], resid)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        wr = csv.writer(fh)
        wr.writerow(["n", "x", "theta", "gamma", "z_x", "z_y", "residual"])
        for r in rows:
            wr.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    finally:
        if args.out:
            fh.close()
    if args.plot:
        from .plotting import plot_orbit
        plot_orbit(curve, z, orb[:, 0], orb[:, 1], args.plot)
    return 0


def cmd_periodic(args) -> int:
    dmap = DualBilliardMap(_curve(args.curve))
    res = periodic_orbit(dmap, args.p, args.q, phase=args.phase)
    x = res.config.x
    nxt = np.append(x[1:], x[0] + TWO_PI * args.p)
    gamma = [0.5 * dmap.chords(a, b).R ** 2 for a, b in zip(x, nxt)]
    _emit({"p": args.p, "q": args.q, "configuration": x, "gamma": gamma, "action": res.action,
           "residual_max": res.residual, "sweeps": res.sweeps, "converged": res.converged}, args.out)
    return 0


def cmd_rotation(args) -> int:
    dmap = DualBilliardMap(_curve(args.curve))
    est = rotation_number(dmap, LiftedPoint(args.x0, args.gamma0), args.iters)
    _emit({"rotation": est.value, "bound": est.bound, "iterations": est.iterations}, args.out)
    return 0


def cmd_ckam(args) -> int:
    curve = _curve(args.curve)
    dmap = DualBilliardMap(curve)
    nx, ng = args.grid
    rep = circles.ckam_scan(dmap, args.j_start, args.j_end, args.gamma_max, nx, ng, args.side,
                            threads=_threads(args), gamma_min=args.gamma_min)
    d = rep.to_dict()
    d.pop("schema", None)
    d["curve"] = curve.name
    _emit(d, args.out)
    if args.plot:
        from .plotting import plot_ckam
        plot_ckam(rep, args.plot)
    return 0


def cmd_envelope(args) -> int:
    inner = _curve(args.inner)
    env = circles.area_envelope(inner, args.area, samples=args.samples, modes=args.modes)
    inv = circles.invariance_check(DualBilliardMap(env.curve), inner, n_iters=args.iters,
                                   n_points=args.points)
    _emit({"inner": inner.name, "area": args.area, "samples": args.samples, "theta": env.theta,
           "offsets": env.offsets, "midpoints": env.points, "fitted_curve": env.curve.to_spec(),
           "invariance_defect": inv.defect, "iterations": inv.n_iters}, args.out)
    if args.plot:
        from .plotting import plot_envelope
        plot_envelope(inner, env, args.plot)
    return 0


def cmd_crash(args) -> int:
    params = crash.CrashProfileParams(b=args.b, k=args.k, c=args.c, N=args.n_trunc, sign=args.sign,
                                      strict=not args.lenient)
    params.validate()
    dmap, sign = crash.crash_setup(params, args.window)
    orb = crash.construct_crash_orbit(params, args.window, dmap=dmap, sign=sign)
    d = orb.to_dict()
    d.pop("schema", None)
    d["profile"] = dmap.curve.to_spec()
    d["gamma_ratio"] = float(orb.gamma[-1] / orb.gamma[0])
    _emit(d, args.out)
    if args.plot:
        from .plotting import plot_crash
        plot_crash(orb, args.plot)
    return 0


def cmd_impact(args) -> int:
    curve = _curve(args.curve)
    dmap = DualBilliardMap(curve)
    dyn = impact.GapDynamics(curve.profile)
    nt, nw = args.grid
    ts = np.linspace(0.0, TWO_PI, nt, endpoint=False)
    ws = np.linspace(args.w_min, args.w_max, nw)
    dev = np.zeros((nt, nw))
    for i, t in enumerate(ts):
        for j, w in enumerate(ws):
            t2, w2 = impact.return_map(dyn, float(t), float(w))
            q = dmap.step_envelope(LiftedPoint(float(t), float(w)))
            dev[i, j] = max(abs(t2 - q.x), abs(w2 - q.gamma))
    rng = np.random.default_rng(args.seed)
    t1 = rng.uniform(0.0, TWO_PI, args.pairs)
    gap = rng.uniform(0.05, math.pi - 0.05, args.pairs)
    ident = np.array([impact.action_integral(dyn, a, a + g) + dmap.gen_h(a, a + g) for a, g in zip(t1, gap)])
    _emit({"curve": curve.name, "grid": [nt, nw], "max_deviation": float(dev.max()),
           "action_identity_max": float(np.max(np.abs(ident))) if len(ident) else 0.0,
           "pairs": args.pairs, "seed": args.seed}, args.out)
    if args.plot:
        from .plotting import plot_impact
        plot_impact(ts, ws, dev, args.plot)
    return 0


def cmd_caustic(args) -> int:
    table = _curve(args.table)
    caustic = _curve_or_samples(args.caustic)
    tab = billiards.TableCurve(table)
    geo = billiards.CausticGeometry(caustic)
    t = np.linspace(0.0, tab.perimeter, args.samples, endpoint=False)
    L = billiards.string_parameter(tab, geo, t)
    rep = billiards.tangency_persistence(tab, geo, args.t0, args.bounces)
    _emit({"table": table.name, "caustic": caustic.name, "perimeter": geo.perimeter,
           "string_min": float(L.min()), "string_max": float(L.max()), "string_spread": float(np.ptp(L)),
           "tangency_max_defect": rep.max_defect, "bounces": args.bounces}, args.out)
    if args.plot:
        from .plotting import plot_caustic
        pts = tab.point(rep.orbit[:, 0])
        plot_caustic(table, caustic, pts, args.plot)
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualbilliards", description="Dual billiards and twist-map tools.")
    ap.add_argument("--seed", type=int, default=0, help="seed for any randomized check")
    ap.add_argument("--threads", type=int, default=None,
                    help=f"worker processes for scans (default: ${THREADS_ENV} or all cores)")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=fn)
        p.add_argument("--out", help="output file (default: stdout)")
        return p

    p = add("validate", cmd_validate, "check closure and convexity of a curve spec")
    p.add_argument("--curve", required=True)
    p.add_argument("--tol", type=float, default=CLOSURE_TOL)

    p = add("orbit", cmd_orbit, "iterate the envelope map and write a CSV")
    p.add_argument("--curve", required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--gamma0", type=float, required=True)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--plot", help="PNG path")

    p = add("periodic", cmd_periodic, "action-minimizing (p, q) orbit")
    p.add_argument("--curve", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--phase", type=float, default=0.0)

    p = add("rotation", cmd_rotation, "rotation number estimate with bound")
    p.add_argument("--curve", required=True)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--gamma0", type=float, required=True)
    p.add_argument("--iters", type=int, default=1000)

    p = add("ckam-scan", cmd_ckam, "converse-KAM certificate scan")
    p.add_argument("--curve", required=True)
    p.add_argument("--j-start", type=float, default=0.0)
    p.add_argument("--j-end", type=float, default=TWO_PI)
    p.add_argument("--gamma-max", type=float, required=True)
    p.add_argument("--gamma-min", type=float, default=None, help="use a geometric gamma grid from here")
    p.add_argument("--grid", type=_grid, default=(32, 32), help="NxM: angles x gamma levels")
    p.add_argument("--side", choices=("left", "right"), default="right")
    p.add_argument("--plot", help="PNG path")

    p = add("envelope", cmd_envelope, "area envelope and its invariance defect")
    p.add_argument("--inner", required=True)
    p.add_argument("--area", type=float, required=True)
    p.add_argument("--samples", type=int, default=2048)
    p.add_argument("--modes", type=int, default=64)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--plot", help="PNG path")

    p = add("crash", cmd_crash, "orbit approaching the curve on a crash profile")
    p.add_argument("--b", type=float, default=-0.5)
    p.add_argument("--k", type=float, default=1.5)
    p.add_argument("--c", type=float, default=5e-4)
    p.add_argument("--n-trunc", type=int, default=40)
    p.add_argument("--window", type=int, default=60)
    p.add_argument("--sign", choices=("auto", "odd", "abs"), default="auto")
    p.add_argument("--lenient", action="store_true", help="allow parameters outside the strict regime")
    p.add_argument("--plot", help="PNG path")

    p = add("impact-compare", cmd_impact, "impact-oscillator return map against the envelope map")
    p.add_argument("--curve", required=True)
    p.add_argument("--grid", type=_grid, default=(32, 32), help="NxM: times x actions")
    p.add_argument("--w-min", type=float, default=0.05)
    p.add_argument("--w-max", type=float, default=2.0)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--plot", help="PNG path")

    p = add("caustic", cmd_caustic, "string parameter and tangency persistence for a caustic")
    p.add_argument("--table", required=True)
    p.add_argument("--caustic", required=True, help="curve spec or JSON point list")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--bounces", type=int, default=100)
    p.add_argument("--t0", type=float, default=0.3)
    p.add_argument("--plot", help="PNG path")
    return ap


def _error(code: str, message: str, **details) -> None:
    print(json.dumps({"schema": SCHEMA, "error": code, "message": message, "details": details},
                     cls=_Encoder), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DualBilliardsError as exc:
        _error(exc.code, str(exc), **exc.details)
        return 2
    except (OSError, ValueError) as exc:
        _error(type(exc).__name__, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
