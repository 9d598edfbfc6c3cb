"""Command-line front end.

    h3surf analyze      --graph "x*y/2" --grid 11x11
    h3surf finite-type  --family s1 --a "sqrt(4 - t^2)" --t-range -1.8:1.8 --s-range 0:2
    h3surf beltrami     --family s2 --a "t^3" --u "t"
    h3surf ruled s1     --a "sqrt(9 - t^2)" --t-range -2.7:2.7
    h3surf solve-pde    --equation 3.12 --lam 0,0,0.1 --boundary "x^2 - y^2"
    h3surf geodesic     --point 0,0,0 --dir 1,0,1
    h3surf export       --graph "x^2 + y^2" --out grid.csv

Errors go to stderr as a single line ``error code=<n> kind=<kind> reason=<text>``
with exit codes 2 (usage), 3 (parse) and 4 (numerical).
"""

from __future__ import annotations

import argparse
import configparser
import re
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import plotting
from .charts import Chart, GraphChart, S1Chart, S2Chart
from .core import line_is_geodesic
from .expr import ExprSyntaxError, free_variables, parse, to_text
from .geometry import DegenerateChartError, surface_data
from .jet import JetDomainError
from .laplace import (
    TOL_EIGEN,
    TOL_MINIMAL,
    GridSpec,
    StencilError,
    beltrami_coords,
    beltrami_identity_check,
    finite_type_fit,
)
from .pde import ConvergenceError, PdeProblem, pde_solve
from .report import CSV_COLUMNS, ReportDocument, atomic_write, table_to_csv
from .ruled import (
    ImplicitSolveError,
    S1Params,
    S2Params,
    UMode,
    eq_residual,
    GridFunction,
    ruling_geodesic_check,
    s1_classify,
    s1_closed_form,
    s2_P_Q,
    s2_system_residuals,
)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC = 0, 2, 3, 4

NUMERIC_ERRORS = (
    DegenerateChartError,
    ConvergenceError,
    ImplicitSolveError,
    JetDomainError,
    StencilError,
    ArithmeticError,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ arg types


def _range(text: str) -> tuple[float, float]:
    m = re.fullmatch(r"\s*([^:]+):([^:]+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"range must be lo:hi, got {text!r}")
    try:
        lo, hi = float(m.group(1)), float(m.group(2))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must be lo:hi, got {text!r}") from None
    if not hi > lo:
        raise argparse.ArgumentTypeError(f"range must be increasing, got {text!r}")
    return lo, hi


def _grid(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)[xX](\d+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"grid must be NxM, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _triple(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser, chart: bool = True) -> None:
    if chart:
        g = p.add_argument_group("surface")
        g.add_argument("--graph", help="height function f(x, y) of a graph z = f")
        g.add_argument("--family", choices=("s1", "s2"), help="ruled family")
        g.add_argument("--a", help="profile a(t)")
        g.add_argument("--u", help="direction function u(t) of the S2 family")
        g.add_argument("--c", type=float, help="value of the constant c in expressions")
        g.add_argument("--t-range", type=_range, default=None)
        g.add_argument("--s-range", type=_range, default=None)
    p.add_argument("--x-range", type=_range, default=None)
    p.add_argument("--y-range", type=_range, default=None)
    p.add_argument("--grid", type=_grid, default=None, help="NxM samples")
    p.add_argument("--h", type=_positive, default=None, help="finite-difference step")
    p.add_argument("--tol-eigen", type=_positive, default=None)
    p.add_argument("--tol-minimal", type=_positive, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="report path (stdout if omitted)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--config", type=Path, default=None, help="key = value defaults file")
    p.add_argument("--no-figures", action="store_true", help="skip figures next to --out")
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identity)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="h3surf", description="Surfaces in the Heisenberg group H3")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    for name, helptext in (
        ("analyze", "surface data and mean curvature over a grid"),
        ("finite-type", "fit lap r_i = lambda_i r_i and classify"),
        ("beltrami", "compare the Laplacian of the immersion with 2 H N"),
        ("export", "CSV grid of r, fundamental forms, H and lap r_i"),
    ):
        _add_common(sub.add_parser(name, help=helptext))

    p = sub.add_parser("ruled", help="ruled-family constructors and classification")
    p.add_argument("which", choices=("s1", "s2"))
    _add_common(p)
    p.add_argument("--samples", type=int, default=100, help="random ruling checks")

    p = sub.add_parser("solve-pde", help="damped Newton solve of a second-order S2 equation")
    _add_common(p, chart=False)
    p.add_argument("--equation", choices=("3.9", "3.10", "3.11", "3.12", "3.13"), default="3.12")
    p.add_argument("--lam", type=_triple, default=(0.0, 0.0, 0.0), help="l1,l2,l3")
    p.add_argument("--u", default="0", help="constant u0 or an expression in t")
    p.add_argument("--boundary", default=None, help="Dirichlet data g(x, y)")
    p.add_argument("--coef39", choices=("lambda2", "difference"), default="lambda2")
    p.add_argument("--max-iter", type=int, default=None, help="default 50")
    p.add_argument("--tol", type=_positive, default=None, help="default 1e-10")

    p = sub.add_parser("geodesic", help="is the straight line p + s v a geodesic?")
    p.add_argument("--point", type=_triple, default=None)
    p.add_argument("--dir", type=_triple, default=None)
    p.add_argument("--random", type=int, default=0, help="also check N random lines")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("json",), default=None)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--timing", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    return ap


# ------------------------------------------------------------------ config


CONFIG_TYPES = {
    "grid": _grid,
    "h": _positive,
    "tol_eigen": _positive,
    "tol_minimal": _positive,
    "seed": int,
    "format": str,
    "x_range": _range,
    "y_range": _range,
    "t_range": _range,
    "s_range": _range,
    "max_iter": int,
    "tol": _positive,
}


def read_config(path: Path) -> dict:
    """Plain ``key = value`` lines; '#' starts a comment."""
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",))
    try:
        cp.read_string("[defaults]\n" + path.read_text(encoding="utf-8"))
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if cp.sections() != ["defaults"]:
        raise ConfigError(f"config {path} must hold plain key = value lines, no [sections]")
    out = {}
    for key, raw in cp["defaults"].items():
        key = key.replace("-", "_")
        if key not in CONFIG_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = CONFIG_TYPES[key](raw.strip())
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return out


def _merge_negative_values(argv: list[str]) -> list[str]:
    # let values such as "-1.8:1.8" or "-1,0,0" follow an option
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (
            tok.startswith("--")
            and "=" not in tok
            and i + 1 < len(argv)
            and re.match(r"-[\d.]", argv[i + 1])
        ):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    argv = _merge_negative_values(list(argv))
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None) is not None:
        cfg = read_config(args.config)
        for key, val in cfg.items():
            # flags given explicitly win over the file
            if getattr(args, key, None) is None:
                setattr(args, key, val)
    return args


# ------------------------------------------------------------------ charts


def _constants(args) -> dict:
    return {} if getattr(args, "c", None) is None else {"c": float(args.c)}


def _expr(src: str, allowed: set[str], what: str):
    e = parse(src)
    extra = free_variables(e) - allowed
    if extra:
        raise ExprSyntaxError(f"{what} uses variable(s) {sorted(extra)} not allowed here", src, 0)
    return e


def build_chart(args) -> tuple[Chart, GridSpec]:
    consts = _constants(args)
    allowed_c = {"c"} if consts else set()
    nu, nv = args.grid or (21, 21)
    if args.graph is not None and args.family is not None:
        raise UsageError("give either --graph or --family, not both")
    if args.graph is not None:
        f = _expr(args.graph, {"x", "y"} | allowed_c, "--graph")
        ch = GraphChart(f, consts)
        grid = GridSpec(args.x_range or (-1.0, 1.0), args.y_range or (-1.0, 1.0), nu, nv, args.h)
        return ch, grid
    if args.family is None:
        raise UsageError("a surface is required: --graph EXPR or --family s1|s2")
    if args.a is None:
        raise UsageError(f"--family {args.family} needs --a")
    a = _expr(args.a, {"t"} | allowed_c, "--a")
    tr, sr = args.t_range or (-1.0, 1.0), args.s_range or (0.0, 1.0)
    if args.family == "s1":
        ch = S1Chart(a, consts)
    else:
        if args.u is None:
            raise UsageError("--family s2 needs --u")
        ch = S2Chart(a, _expr(args.u, {"t"} | allowed_c, "--u"), consts)
    return ch, GridSpec(tr, sr, nu, nv, args.h)


def _grid_table(ch: Chart, grid: GridSpec) -> dict[str, np.ndarray]:
    U, V = grid.mesh()
    d = surface_data(ch, U, V)
    lap = beltrami_coords(ch, U, V, grid.step)
    return {
        "u": U, "v": V,
        "x": d.point[..., 0], "y": d.point[..., 1], "z": d.point[..., 2],
        "E": d.E, "F": d.F, "G": d.G, "W2": d.W2, "H": d.H,
        "lap_r1": lap[..., 0], "lap_r2": lap[..., 1], "lap_r3": lap[..., 2],
    }


# ------------------------------------------------------------------ commands


class Outcome:
    """What a command produced: the report, an optional table for CSV output,
    a summary line for the terminal and figure callbacks."""

    def __init__(self, doc: ReportDocument, summary: str, table=None, columns=None, figures=None):
        self.doc = doc
        self.summary = summary
        self.table = table
        self.columns = columns
        self.figures = figures or []


def cmd_analyze(args) -> Outcome:
    ch, grid = build_chart(args)
    grid.check_inside(ch)
    tol = args.tol_minimal or TOL_MINIMAL
    table = _grid_table(ch, grid)
    H = table["H"]
    max_h = float(np.max(np.abs(H)))
    verdict = "minimal" if max_h <= tol else "not minimal"
    res = {
        "surface": {
            "max_abs_H": max_h,
            "mean_H": float(np.mean(H)),
            "min_W2": float(np.min(table["W2"])),
            "max_W2": float(np.max(table["W2"])),
            "H": H,
        },
        "verdict": {"minimal": verdict == "minimal", "label": verdict, "tol_minimal": tol},
    }
    doc = ReportDocument("analyze", ch.describe(), grid.describe(), res)
    figs = [("H", lambda p: plotting.field_map(table["u"], table["v"], H, p, "mean curvature H", ch.param_names))]
    return Outcome(doc, f"verdict={verdict} max|H|={max_h:.3e}", table, CSV_COLUMNS, figs)


def cmd_finite_type(args) -> Outcome:
    ch, grid = build_chart(args)
    rep = finite_type_fit(ch, grid, args.tol_eigen or TOL_EIGEN)
    doc = ReportDocument("finite-type", ch.describe(), grid.describe(), {"finite_type": rep.as_dict()})
    table = _grid_table(ch, grid)
    r = np.stack([table["x"], table["y"], table["z"]], -1)
    lap = np.stack([table["lap_r1"], table["lap_r2"], table["lap_r3"]], -1)
    figs = [("fit", lambda p: plotting.eigen_fit(r, lap, rep.lam, p))]
    lam_txt = ",".join("none" if v is None else f"{v:.10g}" for v in rep.lam)
    return Outcome(doc, f"classification={rep.classification} lambda={lam_txt}", table, CSV_COLUMNS, figs)


def cmd_beltrami(args) -> Outcome:
    ch, grid = build_chart(args)
    rep = beltrami_identity_check(ch, grid)
    doc = ReportDocument("beltrami", ch.describe(), grid.describe(), {"beltrami": rep.as_dict()})
    return Outcome(
        doc,
        f"tension_vs_2HN_max={rep.tension_max:.3e} coords_vs_2HN_max={rep.coords_max:.3e}",
        _grid_table(ch, grid),
        CSV_COLUMNS,
    )


def cmd_export(args) -> Outcome:
    ch, grid = build_chart(args)
    grid.check_inside(ch)
    table = _grid_table(ch, grid)
    doc = ReportDocument("export", ch.describe(), grid.describe(), {"rows": int(table["u"].size)})
    if args.format is None:
        args.format = "csv"
    figs = [("H", lambda p: plotting.field_map(table["u"], table["v"], table["H"], p, "H", ch.param_names))]
    return Outcome(doc, f"rows={table['u'].size}", table, CSV_COLUMNS, figs)


def cmd_ruled(args) -> Outcome:
    args.family = args.which
    args.graph = None
    ch, grid = build_chart(args)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    consts = _constants(args)
    t0, t1 = grid.u_range
    ts = rng.uniform(t0, t1, args.samples)
    if args.which == "s1":
        p = S1Params(ch.a, grid.u_range, grid.v_range, consts)
        cls = s1_classify(p, grid, args.tol_minimal or 1e-8)
        verdicts = [ruling_geodesic_check("s1", ch.a, t, constants=consts) for t in ts]
        res = {
            "classification": cls.as_dict(),
            "rulings": {"checked": len(verdicts), "geodesic": sum(v.is_geodesic for v in verdicts)},
        }
        doc = ReportDocument("ruled s1", ch.describe(), grid.describe(), res)
        U = np.linspace(t0, t1, 400)
        figs = [("profile", lambda path: plotting.profile_curve(U, s1_closed_form(p, U)["a"], path))]
        return Outcome(doc, f"case={cls.case}" + (f" c={cls.c:.10g}" if cls.c else ""), figures=figs)

    p = S2Params(ch.a, ch.u, grid.u_range, grid.v_range, consts)
    # y = s on S2, so the (t, s) rectangle is the natural default for (x, y)
    xr, yr = args.x_range or grid.u_range, args.y_range or grid.v_range
    nx, ny = args.grid or (21, 21)
    xy_grid = GridSpec(xr, yr, nx, ny, args.h)
    fitted = s2_system_residuals(p, xy_grid, fit=True)
    plain = s2_system_residuals(p, xy_grid)
    X, Y = xy_grid.mesh()
    P, Q = s2_P_Q(p, X, Y)
    u = UMode(ch.u, consts).values(X, Y)
    verdicts = [ruling_geodesic_check("s2", ch.a, t, ch.u, consts) for t in ts]
    U, V = grid.mesh()
    max_h = float(np.max(np.abs(surface_data(ch, U, V).H)))
    minimal = max_h <= (args.tol_minimal or TOL_MINIMAL)
    res = {
        "system": {"zero_lambda": plain.as_dict(), "fitted": fitted.as_dict()},
        "structure": {"max_abs_Q_plus_uP": float(np.max(np.abs(Q + u * P)))},
        "rulings": {"checked": len(verdicts), "geodesic": sum(v.is_geodesic for v in verdicts)},
        "verdict": {"minimal": bool(minimal), "max_abs_H": max_h},
    }
    doc = ReportDocument("ruled s2", ch.describe(), xy_grid.describe(), res)
    lam_txt = ",".join(f"{v:.6g}" for v in fitted.lam)
    return Outcome(doc, f"minimal={minimal} fitted_lambda={lam_txt}")


def cmd_solve_pde(args) -> Outcome:
    try:
        u_mode: object = float(args.u)
    except ValueError:
        u_mode = _expr(args.u, {"t"}, "--u")
    if args.boundary is None:
        raise UsageError("solve-pde needs --boundary (Dirichlet data)")
    boundary = _expr(args.boundary, {"x", "y"}, "--boundary")
    nx, ny = args.grid or (33, 33)
    prob = PdeProblem(
        args.equation,
        tuple(args.lam),
        u_mode,
        args.x_range or (-1.0, 1.0),
        args.y_range or (-1.0, 1.0),
        nx,
        ny,
        boundary,
        args.coef39,
        args.max_iter or 50,
        args.tol or 1e-10,
    )
    sol = pde_solve(prob)
    check = eq_residual(
        GridFunction(sol.x, sol.y, sol.f), eq=prob.equation, lam=prob.lam,
        u_mode=prob.u_mode, coef39=prob.coef39,
    )
    res = {
        "solution": sol.as_dict(),
        "independent_residual_max": float(np.max(np.abs(check))),
        "f": sol.f,
    }
    grid = {"x_range": list(prob.x_range), "y_range": list(prob.y_range), "nx": nx, "ny": ny}
    doc = ReportDocument("solve-pde", prob.describe(), grid, res)
    X, Y = np.meshgrid(sol.x, sol.y, indexing="ij")
    table = {"x": X, "y": Y, "f": sol.f}
    figs = [
        ("f", lambda p: plotting.field_map(X, Y, sol.f, p, f"solution of {prob.equation}", ("x", "y"))),
        ("newton", lambda p: plotting.convergence(sol.history, p)),
    ]
    return Outcome(
        doc,
        f"converged iterations={sol.iterations} residual={sol.residual:.3e}",
        table,
        ("x", "y", "f"),
        figs,
    )


def cmd_geodesic(args) -> Outcome:
    res: dict = {}
    lines = []
    if args.point is None and args.dir is None and not args.random:
        raise UsageError("geodesic needs --point and --dir, or --random N")
    if (args.point is None) != (args.dir is None):
        raise UsageError("--point and --dir go together")
    if args.point is not None:
        try:
            v = line_is_geodesic(args.point, args.dir)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        label = "geodesic" if v.is_geodesic else "not geodesic"
        lines.append(f"{label}, |accel|={v.accel_norm:.12g}")
        res["line"] = {
            "point": list(args.point),
            "dir": list(args.dir),
            "is_geodesic": v.is_geodesic,
            "accel_norm": v.accel_norm,
        }
    if args.random:
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        n_geo = 0
        for _ in range(args.random):
            p = rng.normal(size=3)
            d = rng.normal(size=3)
            if rng.random() < 0.5:
                # make the direction horizontal so both verdicts occur
                d[2] = 0.5 * (p[0] * d[1] - p[1] * d[0])
            n_geo += line_is_geodesic(p, d).is_geodesic
        res["random"] = {"checked": args.random, "geodesic": n_geo, "seed": args.seed}
        lines.append(f"random lines: {n_geo}/{args.random} geodesic")
    doc = ReportDocument("geodesic", None, None, res)
    return Outcome(doc, "\n".join(lines))


COMMANDS = {
    "analyze": cmd_analyze,
    "finite-type": cmd_finite_type,
    "beltrami": cmd_beltrami,
    "export": cmd_export,
    "ruled": cmd_ruled,
    "solve-pde": cmd_solve_pde,
    "geodesic": cmd_geodesic,
}


# ------------------------------------------------------------------ driver


def _fail(code: int, kind: str, reason: str) -> int:
    reason = " ".join(str(reason).split())
    print(f"error code={code} kind={kind} reason={reason}", file=sys.stderr)
    return code


def _emit(args, out: Outcome, elapsed: float) -> None:
    fmt = args.format or "json"
    out.doc.timing = {"recorded": bool(args.timing)}
    if args.timing:
        out.doc.timing["wall_s"] = elapsed
    if fmt == "csv":
        if out.table is None:
            raise UsageError(f"{args.command} has no tabular output; use --format json")
        text = table_to_csv(out.table, out.columns)
    else:
        text = out.doc.to_json()
    if args.out is None:
        sys.stdout.write(text)
        return
    atomic_write(args.out, text)
    if not args.no_figures:
        for tag, draw in out.figures:
            draw(args.out.with_name(f"{args.out.stem}_{tag}.png"))
    print(out.summary)


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except ConfigError as exc:
        return _fail(EXIT_PARSE, "config", exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        out = COMMANDS[args.command](args)
        if args.command == "geodesic" and args.out is None:
            print(out.summary)
            return EXIT_OK
        _emit(args, out, time.perf_counter() - t0)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except ExprSyntaxError as exc:
        return _fail(EXIT_PARSE, "parse", exc)
    except NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except OSError as exc:
        return _fail(EXIT_USAGE, "io", exc)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
