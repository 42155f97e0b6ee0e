"""Command-line front end.

Four subcommands: ``tables`` prints and saves the scheduling interval
tables, ``feasible`` rasterizes the feasible constant region, ``grow``
runs a growth window end to end, and ``verify`` runs the randomized
property checks.  Every report is accompanied by a rendered figure in the
output directory.

Exit codes: 0 success, 1 bad input, 2 numeric failure, 3 safety violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .driver import GrowthDriver
from .errors import (
    ConvergenceError,
    DegeneracyError,
    DomainError,
    InputError,
    NumericError,
    SafetyViolationError,
    SingularityError,
)
from .feasibility import check_conditions, epsilon_max, rasterize_region
from .meshing import write_off
from .params import (
    DEFAULT_C,
    DEFAULT_Q0,
    DEFAULT_Q1,
    DEFAULT_SIGMA,
    ParameterSet,
)
from .plots import (
    plot_feasible_region,
    plot_growth,
    plot_interval_tables,
    plot_mesh,
    plot_verification,
)
from .scheduling import DEFAULT_HEADROOMS, interval_table
from .spheres import load_spheres
from .verification import REPORTERS

_NUMERIC_ERRORS = (
    NumericError,
    DegeneracyError,
    SingularityError,
    ConvergenceError,
    DomainError,
)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config(path: str) -> dict:
    """key=value lines; blank lines and # comments ignored."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_CONFIG_KEYS = {"c": float, "q0": float, "q1": float, "epsilon": float, "sigma": float}


def _resolve_params(args) -> ParameterSet:
    """Flags beat the config file, the config file beats defaults."""
    merged = {
        "c": DEFAULT_C,
        "q0": DEFAULT_Q0,
        "q1": DEFAULT_Q1,
        "epsilon": -1.0,
        "sigma": DEFAULT_SIGMA,
    }
    if getattr(args, "config", None):
        raw = _read_config(args.config)
        unknown = set(raw) - set(_CONFIG_KEYS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for key, value in raw.items():
            try:
                merged[key] = _CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise InputError(f"config key {key}: {exc}") from None
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return ParameterSet(
        c=merged["c"],
        q0=merged["q0"],
        q1=merged["q1"],
        eps=merged["epsilon"],
        sigma=merged["sigma"],
    )


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_tables(args) -> int:
    params = _resolve_params(args)
    headrooms = args.a_values or list(DEFAULT_HEADROOMS)
    if any(a < 1.0 for a in headrooms):
        raise InputError("headroom factors must be at least 1")
    edge_rows = interval_table("edge", params, headrooms)
    triangle_rows = interval_table("triangle", params, headrooms)
    out = _out_dir(args)
    lines = [f"{'A':>6} {'theta':>10} {'interval':>10}"]
    for label, rows in (("edges", edge_rows), ("triangles", triangle_rows)):
        lines.append(label)
        lines.extend(f"{a:6.1f} {theta:10.3f} {dt:10.3f}" for a, theta, dt in rows)
    print("\n".join(lines))
    csv_path = out / "tables.csv"
    with csv_path.open("w") as handle:
        handle.write("kind,a,theta,interval\n")
        for kind, rows in (("edge", edge_rows), ("triangle", triangle_rows)):
            for a, theta, dt in rows:
                handle.write(f"{kind},{a:.6g},{theta:.6f},{dt:.6f}\n")
    figure = plot_interval_tables(edge_rows, triangle_rows, out / "tables.png")
    print(f"wrote {csv_path} and {figure}")
    return 0


def _cmd_feasible(args) -> int:
    params = _resolve_params(args)
    if args.c_min <= 0 or args.q_min <= 0:
        raise InputError("constant ranges must be positive")
    if args.c_min > args.c_max or args.q_min > args.q_max:
        raise InputError("empty constant range")
    rows = rasterize_region(
        (args.c_min, args.c_max),
        (args.q_min, args.q_max),
        (args.resolution, args.resolution),
        params.eps,
    )
    out = _out_dir(args)
    csv_path = out / "feasible.csv"
    with csv_path.open("w") as handle:
        handle.write("c,q,feasible\n")
        for c, q, ok in rows:
            handle.write(f"{c:.6g},{q:.6g},{int(ok)}\n")
    cs = sorted({c for c, _, _ in rows})
    qs = sorted({q for _, q, _ in rows})
    grid = [[False] * len(qs) for _ in cs]
    index_c = {c: i for i, c in enumerate(cs)}
    index_q = {q: j for j, q in enumerate(qs)}
    for c, q, ok in rows:
        grid[index_c[c]][index_q[q]] = ok
    figure = plot_feasible_region(cs, qs, grid, out / "feasible.png")
    feasible_count = sum(1 for _, _, ok in rows if ok)
    report = check_conditions(params.eps, params.c, params.q1)
    print(
        f"{feasible_count}/{len(rows)} grid cells feasible at epsilon={params.eps:.6g} "
        f"(largest usable epsilon {epsilon_max():.6f}); "
        f"configured constants feasible: {report.feasible}"
    )
    print(f"wrote {csv_path} and {figure}")
    return 0


def _cmd_grow(args) -> int:
    params = _resolve_params(args)
    spheres = load_spheres(args.spheres)
    if args.t_start > args.t_end:
        raise InputError("t_start must not exceed t_end")
    if args.t_end > 0.0:
        raise InputError("the growth window must end at or before t=0")
    out = _out_dir(args)
    driver = GrowthDriver(
        spheres,
        params,
        args.t_start,
        args.t_end,
        seed=args.seed,
        lazy_buffer=args.lazy_buffer,
    )
    snapshot_paths = []

    def on_snapshot(t, mesh):
        path = out / f"snapshot_{len(snapshot_paths):03d}.off"
        write_off(path, mesh)
        snapshot_paths.append(str(path))

    summary = driver.run(snapshot_every=args.snapshot_every, on_snapshot=on_snapshot)
    summary["snapshot_files"] = snapshot_paths
    events_path = out / "events.jsonl"
    with events_path.open("w") as handle:
        for row in driver.events:
            handle.write(json.dumps(row, sort_keys=True) + "\n")
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    figures = [plot_growth(summary, out / "growth.png")]
    figures.append(plot_mesh(driver.mesh, out / "final_mesh.png", title=f"t = {driver.t_end:g}"))
    print(
        f"grew {len(driver.mesh.vertices)} vertices / {len(driver.mesh.triangles)} triangles "
        f"over [{args.t_start:g}, {args.t_end:g}]: "
        f"{summary['scheduler']['checks']} checks, "
        f"{summary['contractions']} contractions, {summary['insertions']} insertions"
    )
    print(f"wrote {len(snapshot_paths)} snapshots, {events_path}, {summary_path}, " + ", ".join(map(str, figures)))
    return 0


def _cmd_verify(args) -> int:
    if args.trials <= 0:
        raise InputError("trials must be positive")
    report = REPORTERS[args.mode](trials=args.trials, seed=args.seed)
    out = _out_dir(args)
    report_path = out / f"verify_{args.mode}.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    figure = plot_verification(report, out / f"verify_{args.mode}.png")
    status = "pass" if report["passed"] else "FAIL"
    print(f"{args.mode}: {status} ({report['trials']} trials, seed {report['seed']})")
    print(f"wrote {report_path} and {figure}")
    if not report["passed"]:
        print(
            "offending configurations are serialized under 'violations' in the report",
            file=sys.stderr,
        )
        return 3
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="skinmesh", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--c", type=float, default=None, help="mesh size constant")
    common.add_argument("--q0", type=float, default=None, help="strict quality constant")
    common.add_argument("--q1", type=float, default=None, help="hard quality constant")
    common.add_argument("--epsilon", type=float, default=None, help="sampling density bound")
    common.add_argument("--sigma", type=float, default=None, help="interval damping factor")
    common.add_argument("--config", default=None, help="key=value config file")
    common.add_argument("--out-dir", default=".", help="directory for reports and figures")
    common.add_argument("--seed", type=int, default=0, help="random generator seed")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_tables = sub.add_parser(
        "tables", parents=[common], help="scheduling interval tables"
    )
    p_tables.add_argument(
        "--a-values",
        type=lambda s: [float(v) for v in s.split(",")],
        default=None,
        help="comma-separated headroom factors (default 1.0..4.0)",
    )
    p_tables.set_defaults(func=_cmd_tables)

    p_feasible = sub.add_parser(
        "feasible", parents=[common], help="rasterize the feasible constant region"
    )
    p_feasible.add_argument("--c-min", type=float, default=0.01)
    p_feasible.add_argument("--c-max", type=float, default=0.5)
    p_feasible.add_argument("--q-min", type=float, default=0.5)
    p_feasible.add_argument("--q-max", type=float, default=3.0)
    p_feasible.add_argument("--resolution", type=int, default=64, help="grid cells per axis")
    p_feasible.set_defaults(func=_cmd_feasible)

    p_grow = sub.add_parser(
        "grow", parents=[common], help="run one growth window"
    )
    p_grow.add_argument("spheres", help="input file: one 'x y z w' line per sphere")
    p_grow.add_argument("--t-start", type=float, required=True, help="window start (negative)")
    p_grow.add_argument("--t-end", type=float, default=0.0, help="window end (at most 0)")
    p_grow.add_argument(
        "--snapshot-every", type=float, default=None, help="snapshot interval in growth time"
    )
    p_grow.add_argument(
        "--lazy-buffer",
        action="store_true",
        help="reschedule borderline elements on their residual interval",
    )
    p_grow.set_defaults(func=_cmd_grow)

    p_verify = sub.add_parser(
        "verify", parents=[common], help="randomized property checks"
    )
    p_verify.add_argument("mode", choices=sorted(REPORTERS))
    p_verify.add_argument("--trials", type=int, default=1000)
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except SafetyViolationError as exc:
        print(f"safety violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
