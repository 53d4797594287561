"""Command-line front end: solve, gjms, verify and indicial runs with JSON output.

Exit status: 0 on success, 1 on a configuration or validation error, 2 when a
numerical verification fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import sympy as sp

from . import io as aio
from .background import (
    BuildError, ChartSpec, build_background_from_chart, constant_background, heisenberg,
    heisenberg_chart, torus_chart,
)
from .gjms import gjms_apply, gjms_matrix, hermitian_defect
from .indicial import det_product_check, growth_probe
from .series import QI
from .solver import SolveConfig, SolveError, lambda_batch_report, solve, verify

OUT_ENV = "ACHGJMS_OUT"


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a rational number: {text!r}") from exc


def parse_lambdas(text: str) -> list[Fraction]:
    return [_fraction(t) for t in text.split(",") if t.strip()]


def _resolution(text: str | None, default):
    if text is None:
        return default
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or any(p < 1 for p in parts):
        raise ConfigError(f"bad resolution: {text!r}")
    return tuple(parts)


def resolve_background(spec: str, mode: str, resolution: str | None = None, need_grid=False):
    """Build a Background from a built-in name or a chart JSON file."""
    if spec == "heisenberg":
        if need_grid or mode == "float":
            res = _resolution(resolution, (16, 16, 1))
            return build_background_from_chart(heisenberg_chart(), res, derivatives="symbolic")
        return heisenberg()
    if spec.startswith("constant-scal:") or spec.startswith("constant:"):
        if need_grid:
            raise ConfigError("this run needs a grid background")
        body = spec.split(":", 1)[1]
        parts = body.split(":")
        s = _fraction(parts[0])
        a = QI(0)
        if spec.startswith("constant:"):
            if len(parts) != 3:
                raise ConfigError("constant background is constant:<scal>:<re A11>:<im A11>")
            a = QI(_fraction(parts[1]), _fraction(parts[2]))
        bg = constant_background(QI(s), a)
        if mode == "float":
            raise ConfigError("constant backgrounds run in exact mode")
        return bg
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"unknown background {spec!r}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"background file is not JSON: {exc}") from exc
    if d.get("kind") == "constant":
        if mode == "float" or need_grid:
            raise ConfigError("constant backgrounds run in exact mode without a grid")
        a = d.get("a11", [0, 0])
        try:
            return constant_background(QI(_fraction(str(d.get("scal", 0)))),
                                       QI(_fraction(str(a[0])), _fraction(str(a[1]))),
                                       jets=_jets(d.get("jets")), name=d.get("name", path.stem))
        except BuildError as exc:
            raise ConfigError(f"background rejected: {exc}") from exc
    if mode == "exact":
        raise ConfigError("exact mode requires a constant background")
    res = _resolution(resolution, tuple(d.get("resolution", (16, 16, 16))))
    if "torus" in d:
        t = d["torus"]
        chart = torus_chart(str(t.get("upsilon", "0")), str(t.get("mu", "0")))
    else:
        for key in ("periods", "theta", "z"):
            if key not in d:
                raise ConfigError(f"background file lacks key {key!r}")
        chart = ChartSpec(tuple(float(p) for p in d["periods"]), _components(d["theta"], "d"),
                          _components(d["z"], "d_"), name=d.get("name", path.stem))
    try:
        return build_background_from_chart(chart, res, derivatives=d.get("derivatives", "spectral"),
                                           residual_tol=float(d.get("residual_tol", 1e-8)))
    except BuildError as exc:
        raise ConfigError(f"background rejected: {exc}") from exc


def _components(v, prefix):
    """Coordinate components as a list or as {"dx": .., "dy": .., "dt": ..} style keys."""
    if isinstance(v, dict):
        try:
            return tuple(str(v.get(f"{prefix}{c}", v.get(c, "0"))) for c in "xyt")
        except AttributeError as exc:
            raise ConfigError(f"bad chart components {v!r}") from exc
    if len(v) != 3:
        raise ConfigError(f"chart components need three entries: {v!r}")
    return tuple(str(c) for c in v)


def _jets(raw):
    """{"A11,0": [re, im] or "p/q"} -> {key: QI}."""
    if not raw:
        return None
    out = {}
    for key, val in raw.items():
        if isinstance(val, (list, tuple)):
            out[key] = QI(_fraction(str(val[0])), _fraction(str(val[1])))
        else:
            out[key] = QI(_fraction(str(val)))
    return out


def _lam_value(lam: Fraction, exact: bool):
    return QI(lam) if exact else float(lam)


def _out_path(args, stem: str) -> Path:
    if args.out:
        return Path(args.out)
    base = Path(os.environ.get(OUT_ENV, "."))
    return base / f"{stem}.json"


def _write(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, default=str))


def _config_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "out", "csv")}


def _mode(args, spec):
    if args.mode:
        return args.mode
    if spec == "heisenberg" or spec.startswith("constant"):
        return "exact"
    path = Path(spec)
    if path.exists():
        try:
            if json.loads(path.read_text()).get("kind") == "constant":
                return "exact"
        except json.JSONDecodeError:
            pass
    return "float"


def _solve_all(args, need_grid=False):
    mode = _mode(args, args.background)
    bg = resolve_background(args.background, mode, args.resolution, need_grid=need_grid)
    results = []
    for lam in parse_lambdas(args.lam):
        cfg = SolveConfig(order=args.order, lam=_lam_value(lam, bg.exact), tol=args.tol,
                          check_variation=not args.fast, check_cotton=not args.fast)
        results.append(solve(bg, cfg))
    return bg, results


def cmd_solve(args) -> int:
    header = aio.provenance(_config_dict(args))
    bg, results = _solve_all(args)
    status = 0
    runs = []
    for r in results:
        rep = verify(r, args.tol)
        if not (rep["einstein_ok"] and rep["weyl_ok"] and rep["steps_ok"]):
            status = 2
        d = aio.result_to_dict(r)
        d["verify"] = rep
        runs.append(d)
    payload = {"provenance": header, "runs": runs} if len(runs) > 1 else {"provenance": header, **runs[0]}
    path = _out_path(args, f"solve-{header['config_hash']}")
    _write(path, payload)
    if args.csv:
        Path(args.csv).write_text("".join(aio.residual_csv(r) for r in results))
    print(f"wrote {path}")
    return status


def _test_function(expr: str, bg):
    x, y, t = sp.symbols("x y t", real=True)
    try:
        e = sp.sympify(expr, locals={"x": x, "y": y, "t": t})
    except sp.SympifyError as exc:
        raise ConfigError(f"bad test function: {expr!r}") from exc
    f = sp.lambdify((x, y, t), e, "numpy")
    X, Y, T = bg.grid.coords
    return np.broadcast_to(np.asarray(f(X, Y, T), dtype=complex), bg.shape).copy()


def cmd_gjms(args) -> int:
    header = aio.provenance(_config_dict(args))
    if args.order < 2 * args.k + 2:
        raise ConfigError(f"order must be at least 2k + 2 = {2 * args.k + 2}")
    bg, results = _solve_all(args, need_grid=True)
    f = _test_function(args.function, bg)
    runs = []
    for r in results:
        out = gjms_apply(r, args.k, f)
        entry = {"k": args.k, "lambda": aio.dump_scalar(r.lam), "Pf": aio.dump_field(out.value),
                 "recursion": [aio.dump_field(v) for v in out.recursion]}
        if args.selfadjoint:
            X, Y, T = bg.grid.coords
            basis = [np.exp(1j * (a * X + b * Y + c * T)) for a, b, c in
                     ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (-1, 0, 1))]
            entry["selfadjoint_defect"] = hermitian_defect(gjms_matrix(r, args.k, basis))
        runs.append(entry)
    payload = {"provenance": header, "runs": runs} if len(runs) > 1 else {"provenance": header, **runs[0]}
    path = _out_path(args, f"gjms-{header['config_hash']}")
    _write(path, payload)
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    header = aio.provenance(_config_dict(args))
    bg, results = _solve_all(args)
    reports = [verify(r, args.tol) for r in results]
    payload = {"provenance": header, "reports": reports}
    ok = all(rep["einstein_ok"] and rep["weyl_ok"] and rep["evenness_ok"] and rep["steps_ok"]
             for rep in reports)
    if len(results) > 1:
        batch = lambda_batch_report(results, args.tol)
        payload["lambda_batch"] = batch
        ok = ok and batch["degree_bound_ok"]
    path = _out_path(args, f"verify-{header['config_hash']}")
    _write(path, payload)
    print(f"wrote {path}")
    return 0 if ok else 2


def cmd_indicial(args) -> int:
    header = aio.provenance(_config_dict(args))
    rep = det_product_check(args.kmax)
    payload = {"provenance": header, "pencil": rep}
    if args.probe:
        mode = _mode(args, args.probe)
        bg = resolve_background(args.probe, mode, args.resolution)
        r = solve(bg, SolveConfig(order=args.order, check_variation=False, check_cotton=False))
        p = growth_probe(r)
        payload["probe"] = {"ratio": p.ratio, "residual": p.residual, "norms": p.norms,
                            "terminating": p.terminating}
    path = _out_path(args, f"indicial-{header['config_hash']}")
    _write(path, payload)
    print(f"wrote {path}: {rep['matches']} exact matches")
    return 0 if rep["ok"] else 2


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="achgjms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp_, solve_opts=True):
        sp_.add_argument("--out", help=f"output JSON path (default: ${OUT_ENV} or cwd)")
        sp_.add_argument("--mode", choices=("exact", "float"))
        sp_.add_argument("--tol", type=float, default=1e-8)
        sp_.add_argument("--resolution", help="grid resolution n or nx,ny,nt")
        if solve_opts:
            sp_.add_argument("--background", required=True,
                             help="heisenberg, constant-scal:<s>, constant:<s>:<re>:<im>, or chart JSON")
            sp_.add_argument("--order", type=int, default=10)
            sp_.add_argument("--lambda", dest="lam", default="0", help="value or comma list")
            sp_.add_argument("--fast", action="store_true", help="skip Cotton and variation probes")

    s = sub.add_parser("solve", help="order-by-order Einstein solve")
    common(s)
    s.add_argument("--csv", help="residual table CSV path")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gjms", help="apply P_2k to a test function")
    common(g)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--function", default="cos(x) + sin(y)", help="sympy expression in x, y, t")
    g.add_argument("--selfadjoint", action="store_true", help="report the Hermitian defect")
    g.set_defaults(func=cmd_gjms)

    v = sub.add_parser("verify", help="solve and report residual, parity and lambda checks")
    common(v)
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("indicial", help="pencil determinant check and growth probe")
    common(i, solve_opts=False)
    i.add_argument("--kmax", type=int, default=200)
    i.add_argument("--probe", help="background for the growth probe")
    i.add_argument("--order", type=int, default=12)
    i.set_defaults(func=cmd_indicial)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "order", 10) < 9 and args.command != "indicial":
            raise ConfigError("order must be at least 9")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolveError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
