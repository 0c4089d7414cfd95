"""Command line: ``simulate``, ``fit``, ``verify`` and ``export-plot``.

Exit codes: 0 success, 1 simulation or criterion failure, 2 bad input
(configuration, missing file or column), 3 inadmissible Lyapunov weights,
4 inconclusive or insufficient data for a fit.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import OUTPUT_ROOT_ENV, resolve
from .errors import AlignflowError, ColumnMissing, ConfigParse, InsufficientData
from .ratefit import RateFit, classify_decay, fit_algebraic, fit_exponential
from .runs import header_lines, read_frames, read_header, run_manifest, write_csv, write_outputs

LAWS = {"exp": "exponential", "alg": "algebraic", "auto": None}


def _fail(stage, exc):
    print(f"alignflow: {stage} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
    return getattr(exc, "exit_code", 1)


def cmd_simulate(args):
    try:
        manifest = resolve(args.config)
    except AlignflowError as exc:
        return _fail("configuration", exc)
    try:
        traj = run_manifest(manifest)
    except AlignflowError as exc:
        return _fail("simulation", exc)
    out = write_outputs(traj, manifest, manifest.output_path(args.out))
    print(f"{manifest.name}: {len(traj)} frames, {traj.steps} steps, t = {traj.final.time:.6g} -> {out}")
    return 0


def _load_column(path, column):
    if not Path(path).is_file():
        raise ConfigParse(f"{path}: no such file")
    try:
        data = read_frames(path)
    except ValueError as exc:
        raise ConfigParse(f"{path}: {exc}") from exc
    if column not in data:
        raise ColumnMissing(f"{path} has no column {column!r}; available: {', '.join(data)}")
    t = data.get("t")
    if t is None:
        raise ColumnMissing(f"{path} has no time column 't'")
    y = data[column]
    keep = np.isfinite(t) & np.isfinite(y)
    if not keep.any():
        raise InsufficientData(f"column {column!r} has no finite values")
    return t[keep], y[keep]


def _fit(t, y, law):
    if law == "algebraic":
        pos = t > 0
        return fit_algebraic(t[pos], y[pos])
    if law == "exponential":
        return fit_exponential(t, y)
    return classify_decay(t, y)


def _write_fit(path, fit: RateFit, source, column):
    lines = header_lines(None, {"source": source, "column": column}, read_header(source))
    rows = [
        ("law", fit.law), ("value", repr(fit.value)), ("window_start", repr(fit.window[0])),
        ("window_end", repr(fit.window[1])), ("r_squared", repr(fit.r_squared)),
        ("residual_rms", repr(fit.residual_rms)), ("floor_detected", str(fit.floor_detected)),
        ("intercept", repr(fit.intercept)), ("n_points", str(fit.n_points)),
    ]
    body = "\n".join(lines + ["field,value"] + [f"{k},{v}" for k, v in rows]) + "\n"
    Path(path).write_text(body)


def cmd_fit(args):
    try:
        t, y = _load_column(args.frames, args.column)
        fit = _fit(t, y, LAWS[args.law])
    except AlignflowError as exc:
        return _fail("fit", exc)
    print(f"{args.column}: {fit.summary()}")
    out = Path(args.out) if args.out else Path(args.frames).with_name("fit.csv")
    _write_fit(out, fit, args.frames, args.column)
    return 0


def _report_path(args):
    if args.report:
        return Path(args.report)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
    return root / "reports" / f"verify-{args.suite}.txt"


def cmd_verify(args):
    from .verify import run_suite

    lines = []

    def emit(line):
        print(line, flush=True)
        lines.append(line)

    results = run_suite(args.suite, emit)
    failed = sum(not r.passed for r in results)
    summary = f"{args.suite}: {len(results) - failed}/{len(results)} criteria passed"
    emit(summary)
    path = _report_path(args)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([f"# alignflow {__version__}"] + lines) + "\n")
    return 1 if failed else 0


def _parse_plot_spec(spec):
    column, _, law = spec.partition(":")
    law = law or None
    if law is not None and law not in LAWS:
        raise ConfigParse(f"plot spec {spec!r}: law must be one of {', '.join(LAWS)}")
    return column, law


def _safe_log(values):
    values = np.asarray(values, dtype=float)
    out = np.full_like(values, math.nan)
    pos = values > 0
    out[pos] = np.log(values[pos])
    return out


def plot_table(t, y, fit: RateFit | None):
    columns = ["t", "value", "log_t", "log_value"]
    cols = [t, y, _safe_log(t), _safe_log(y)]
    if fit is not None:
        env = fit.envelope(np.where(t > 0, t, math.nan)) if fit.law == "algebraic" else fit.envelope(t)
        columns += ["envelope", "log_envelope"]
        cols += [env, _safe_log(env)]
    return columns, np.column_stack(cols)


def cmd_export_plot(args):
    try:
        column, law = _parse_plot_spec(args.spec)
        t, y = _load_column(args.frames, column)
        fit = _fit(t, y, LAWS[law]) if law is not None else None
    except AlignflowError as exc:
        return _fail("export-plot", exc)
    columns, table = plot_table(t, y, fit)
    out = Path(args.out) if args.out else Path(args.frames).with_name(f"plot-{column}.csv")
    extra = {"source": args.frames, "column": column}
    if fit is not None:
        extra["fit"] = fit.summary()
    write_csv(out, header_lines(None, extra, read_header(args.frames)), columns, table)
    print(f"wrote {out}")
    if args.svg:
        from .plot import line_chart_svg

        Path(args.svg).write_text(line_chart_svg(t, y, fit, column))
        print(f"wrote {args.svg}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="alignflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"alignflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write frames.csv, final_state.csv, manifest.toml")
    p.add_argument("config", help="TOML manifest path or bundled scenario name")
    p.add_argument("--out", help="output directory (overrides the manifest and $%s)" % OUTPUT_ROOT_ENV)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a decay law to one column of a frames file")
    p.add_argument("frames")
    p.add_argument("--column", required=True)
    p.add_argument("--law", choices=sorted(LAWS), default="auto",
                   help="exp, alg, or auto (classify by goodness of fit)")
    p.add_argument("--out", help="fit summary CSV (default: fit.csv next to the frames file)")
    p.set_defaults(func=cmd_fit)

    from .verify import SUITES

    p = sub.add_parser("verify", help="run an acceptance bundle")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--report", help="report path (default: <output root>/reports/verify-<suite>.txt)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-plot", help="write plot-ready series for one column")
    p.add_argument("frames")
    p.add_argument("--spec", required=True, help="COLUMN or COLUMN:LAW with LAW in exp, alg, auto")
    p.add_argument("--out", help="plot CSV path (default: plot-<column>.csv next to the frames file)")
    p.add_argument("--svg", help="also write a static SVG line chart here")
    p.set_defaults(func=cmd_export_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
