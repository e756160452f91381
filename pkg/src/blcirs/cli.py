"""Command-line front end: run solver suites, evaluate gap bounds, compare runs.

Subcommands
-----------
solve    run selected variants on one problem; emit histories, a summary
         table, figures, and optional bound reports.
compare  run the plain and orthonormalized-smoothing variants and emit a
         combined series keyed by the number of multiplications by A.
bounds   evaluate the rounding-error gap bounds against a stored history.

Every option can also be set in a JSON config file (``--config``); explicit
flags win over the file.  The matrix cache directory honors the
``BLCIRS_CACHE_DIR`` environment variable.
"""

import argparse
import json
import sys
from pathlib import Path

from . import diagnostics, history, ingest, plots
from .errors import AssumptionViolated, BlcirsError
from .kernels import csr_frobenius_norm, frobenius_norm
from .solvers import RunStatus, SolverOptions, SolverVariant, run_suite

__all__ = ["main", "build_parser"]

EMIT_CHOICES = ("csv", "plot", "bounds", "summary")
DEFAULT_EMIT = "csv,summary"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="blcirs",
        description="Block Krylov solvers with cross-interactive residual smoothing.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_problem_options(p):
        p.add_argument("--matrix", help="matrix name (twin/collection) or .mtx path")
        p.add_argument("--generate", metavar="NX,NY,PX,PY",
                       help="generate a convection-diffusion problem")
        p.add_argument("--s", type=int, help="number of right-hand sides (default 16)")
        p.add_argument("--seed", type=int, help="RHS seed (default 0)")
        p.add_argument("--config", help="JSON config file; flags win")

    def add_run_options(p):
        p.add_argument("--tol", type=float, help="relative residual tolerance (default 1e-15)")
        p.add_argument("--max-iter", type=int, dest="max_iter",
                       help="iteration cap (default: matrix order)")
        p.add_argument("--out", help="output directory (must exist)")
        p.add_argument("--emit", help=f"comma list of {','.join(EMIT_CHOICES)}")

    p_solve = sub.add_parser("solve", help="run solver variants on one problem")
    add_problem_options(p_solve)
    add_run_options(p_solve)
    p_solve.add_argument("--solver", action="append",
                         help="variant 1..5 or name (repeatable; default: all)")
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare", help="plain vs orthonormalized smoothing")
    add_problem_options(p_cmp)
    add_run_options(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_bounds = sub.add_parser("bounds", help="evaluate gap bounds for a history")
    p_bounds.add_argument("history", help="history CSV produced by solve")
    add_problem_options(p_bounds)
    p_bounds.add_argument("--out", help="optional directory for a bounds CSV")
    p_bounds.set_defaults(func=cmd_bounds)
    return parser


def _load_config(path):
    try:
        with open(path) as handle:
            cfg = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"error: cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise SystemExit(f"error: config {path} must be a JSON object")
    return cfg


def _setting(args, config, key, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _resolve_problem(args, config):
    generate = _setting(args, config, "generate")
    matrix = _setting(args, config, "matrix")
    if generate is not None:
        if isinstance(generate, (list, tuple)):
            generate = ",".join(str(v) for v in generate)
        source = f"generate:{generate}"
    elif matrix is not None:
        source = str(matrix)
    else:
        raise SystemExit("error: one of --matrix/--generate is required")
    try:
        a, label = ingest.resolve_matrix(source)
    except (BlcirsError, ValueError, OSError) as exc:
        raise SystemExit(f"error: cannot load matrix {source!r}: {exc}")
    return a, label


def _output_dir(args, config, required=True):
    out = _setting(args, config, "out")
    if out is None:
        if required:
            raise SystemExit("error: --out directory is required")
        return None
    out_dir = Path(out)
    if not out_dir.is_dir():
        raise SystemExit(f"error: output directory {out_dir} does not exist")
    return out_dir


def _emit_set(args, config):
    emit = _setting(args, config, "emit", DEFAULT_EMIT)
    if isinstance(emit, (list, tuple)):
        items = [str(e) for e in emit]
    else:
        items = [e.strip() for e in str(emit).split(",") if e.strip()]
    bad = [e for e in items if e not in EMIT_CHOICES]
    if bad:
        raise SystemExit(f"error: unknown emit kinds {bad}; choose from {EMIT_CHOICES}")
    return set(items)


def _history_meta(label, a, result, s, seed, tol):
    return {
        "matrix": label,
        "n": a.n,
        "m": a.m,
        "s": s,
        "seed": seed,
        "tol": tol,
        "solver": result.variant.label,
        "variant": int(result.variant),
        "iterations": result.iterations,
        "status": result.status.value,
        "norm_b": result.norm_b,
    }


def _summary_row(label, s, seed, result):
    return {
        "matrix": label,
        "solver": f"#{int(result.variant)} ({result.variant.label})",
        "s": s,
        "seed": seed,
        "iterations": result.iterations,
        "time_s": result.elapsed_s,
        "true_res": result.final_true_rel,
        "status": result.status.value,
    }


def _bounds_rows(records, norm_a, m, norm_b, s, smoothed):
    """Per-iteration measured gap vs. the three bound evaluators."""
    rows = []
    for rec in records:
        gap = rec.gap_s if smoothed else rec.gap_r
        if rec.k == 0 or gap is None:
            continue
        inputs = diagnostics.bound_inputs_from_records(
            records, norm_a=norm_a, m=m, norm_b=norm_b, s=s,
            smoothed=smoothed, upto=rec.k)
        row = {
            "k": rec.k,
            "gap": gap,
            "bound_exact_ortho": diagnostics.bound_exact_ortho(inputs),
            "bound_householder": diagnostics.bound_householder(inputs),
            "bound_general_q": None,
            "assumption_ok": 1,
        }
        if inputs.per_iter_q is not None:
            try:
                row["bound_general_q"] = diagnostics.bound_general_q(inputs)
            except AssumptionViolated:
                row["assumption_ok"] = 0
        rows.append(row)
    return rows


def _write_bounds_csv(path, rows):
    import csv

    columns = ["k", "gap", "bound_exact_ortho", "bound_householder",
               "bound_general_q", "assumption_ok"]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row[c] is None else
                             (repr(row[c]) if isinstance(row[c], float) else row[c])
                             for c in columns])


def _print_bounds_verdict(rows, tag):
    if not rows:
        print(f"{tag}: no measured gaps to check")
        return
    dominated = all(row["gap"] <= row["bound_householder"] for row in rows)
    print(f"{tag}: householder bound dominates measured gap at every k: "
          f"{'yes' if dominated else 'no'}")
    violated = [row["k"] for row in rows if not row["assumption_ok"]]
    if violated:
        print(f"{tag}: general-orthonormalization bound not applicable at "
              f"iterations {violated} (orthonormality too inexact)")


def cmd_solve(args):
    config = _load_config(args.config) if args.config else {}
    a, label = _resolve_problem(args, config)
    s = int(_setting(args, config, "s", 16))
    seed = int(_setting(args, config, "seed", 0))
    tol = float(_setting(args, config, "tol", 1e-15))
    max_iter = _setting(args, config, "max_iter")
    emit = _emit_set(args, config)
    out_dir = _output_dir(args, config, required=bool(emit & {"csv", "plot", "bounds", "summary"}))

    solver_specs = _setting(args, config, "solver")
    if solver_specs is None:
        solver_specs = config.get("solvers", ["1", "2", "3", "4", "5"])
    try:
        variants = [SolverVariant.parse(spec) for spec in solver_specs]
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    if not variants:
        raise SystemExit("error: at least one solver is required")

    b = ingest.gen_rhs(a.n, s, seed)
    opts = [SolverOptions(variant=v, tol=tol,
                          max_iter=int(max_iter) if max_iter else None, seed=seed)
            for v in variants]
    results = run_suite(a, b, opts)

    norm_a = csr_frobenius_norm(a)
    summary_rows = []
    wrote_all = True
    for result in results:
        stem = f"{label}_s{s}_seed{seed}_{result.variant.label}"
        summary_rows.append(_summary_row(label, s, seed, result))
        try:
            if "csv" in emit:
                history.write_history(out_dir / f"{stem}.csv", result.records,
                                      _history_meta(label, a, result, s, seed, tol))
            if "plot" in emit:
                plots.save_convergence_plot(
                    out_dir / f"{stem}.svg", result.records,
                    smoothed=result.variant.smoothed,
                    title=f"{label}, s={s}: solver #{int(result.variant)} "
                          f"({result.variant.label})")
            if "bounds" in emit:
                rows = _bounds_rows(result.records, norm_a, a.m, result.norm_b,
                                    s, smoothed=result.variant.smoothed)
                _write_bounds_csv(out_dir / f"{stem}_bounds.csv", rows)
                _print_bounds_verdict(rows, stem)
        except OSError as exc:
            print(f"error writing artifacts for {stem}: {exc}", file=sys.stderr)
            wrote_all = False
        if result.status is RunStatus.BREAKDOWN:
            print(f"{stem}: breakdown ({result.breakdown_message})", file=sys.stderr)

    if "summary" in emit:
        try:
            history.write_summary(out_dir / f"{label}_s{s}_seed{seed}_summary.csv",
                                  summary_rows)
        except OSError as exc:
            print(f"error writing summary: {exc}", file=sys.stderr)
            wrote_all = False
    print(history.format_summary_table(summary_rows))
    any_converged = any(r.status is RunStatus.CONVERGED for r in results)
    return 0 if (any_converged and wrote_all) else 1


def _compare_rows(result):
    """Per-multiplication series; the plain variant alternates the two parts."""
    rows = []
    for rec in result.records:
        if result.variant is SolverVariant.PLAIN:
            if rec.k > 0 and rec.mid_rel_r is not None:
                rows.append({"solver": result.variant.label,
                             "spmm_count": rec.spmm_count - 1,
                             "rel_r": rec.mid_rel_r, "rel_s": None,
                             "norm_x": rec.mid_norm_x, "norm_y": None})
            rows.append({"solver": result.variant.label,
                         "spmm_count": rec.spmm_count,
                         "rel_r": rec.rel_r, "rel_s": None,
                         "norm_x": rec.norm_x, "norm_y": None})
        else:
            rows.append({"solver": result.variant.label,
                         "spmm_count": rec.spmm_count,
                         "rel_r": rec.rel_r, "rel_s": rec.rel_s,
                         "norm_x": rec.norm_x, "norm_y": rec.norm_y})
    return rows


def cmd_compare(args):
    config = _load_config(args.config) if args.config else {}
    a, label = _resolve_problem(args, config)
    s = int(_setting(args, config, "s", 16))
    seed = int(_setting(args, config, "seed", 0))
    tol = float(_setting(args, config, "tol", 1e-15))
    max_iter = _setting(args, config, "max_iter")
    emit = _emit_set(args, config)
    out_dir = _output_dir(args, config)

    b = ingest.gen_rhs(a.n, s, seed)
    opts = [SolverOptions(variant=v, tol=tol,
                          max_iter=int(max_iter) if max_iter else None, seed=seed)
            for v in (SolverVariant.PLAIN, SolverVariant.CIRS_ORTHO)]
    plain, smoothed = run_suite(a, b, opts)

    rows = _compare_rows(plain) + _compare_rows(smoothed)
    stem = f"{label}_s{s}_seed{seed}_compare"
    history.write_compare(out_dir / f"{stem}.csv", rows)
    summary_rows = [_summary_row(label, s, seed, r) for r in (plain, smoothed)]
    history.write_summary(out_dir / f"{stem}_summary.csv", summary_rows)

    if "plot" in emit:
        series = {
            "plain residual": [(r["spmm_count"], r["rel_r"]) for r in rows
                               if r["solver"] == "plain"],
            "smoothed residual": [(r["spmm_count"], r["rel_s"]) for r in rows
                                  if r["solver"] != "plain"],
            "plain ||X||": [(r["spmm_count"], r["norm_x"]) for r in rows
                            if r["solver"] == "plain"],
            "smoothed ||Y||": [(r["spmm_count"], r["norm_y"]) for r in rows
                               if r["solver"] != "plain"],
        }
        final_levels = {
            "plain residual": plain.final_true_rel,
            "smoothed residual": smoothed.final_true_rel,
        }
        plots.save_compare_plot(out_dir / f"{stem}.svg", series, final_levels,
                                title=f"{label}, s={s}: plain vs cirs-ortho")
    print(history.format_summary_table(summary_rows))
    ok = any(r.status is RunStatus.CONVERGED for r in (plain, smoothed))
    return 0 if ok else 1


def cmd_bounds(args):
    config = _load_config(args.config) if args.config else {}
    try:
        records, meta = history.read_history(args.history)
    except (OSError, ValueError) as exc:
        raise SystemExit(f"error: cannot read history {args.history}: {exc}")
    a, label = _resolve_problem(args, config)
    norm_b = meta.get("norm_b")
    if norm_b is None:
        raise SystemExit("error: history lacks norm_b metadata; regenerate with "
                         "this version of the tool")
    s = meta.get("s")
    if s is None:
        raise SystemExit("error: history lacks s metadata")
    variant = SolverVariant(meta.get("variant", 1))
    smoothed = variant.smoothed

    gaps_present = any((rec.gap_s if smoothed else rec.gap_r) is not None
                       for rec in records if rec.k > 0)
    if not gaps_present:
        raise SystemExit("error: history has no measured gaps; rerun solve with "
                         "gap recording enabled")
    if smoothed and any(rec.q_norm is None for rec in records if rec.k > 0):
        print("note: q_norm/q_departure missing for some iterations; the "
              "general-orthonormalization bound needs both per iteration and "
              "will be skipped there")

    norm_a = csr_frobenius_norm(a)
    rows = _bounds_rows(records, norm_a, a.m, norm_b, s, smoothed)
    pair = "smoothed (Y, S)" if smoothed else "primary (X, R)"
    print(f"history {args.history}: {len(rows)} measured iterations, "
          f"checking the {pair} recursion on matrix {label}")
    for row in rows:
        general = ("n/a" if row["bound_general_q"] is None and row["assumption_ok"]
                   else ("VIOLATED" if not row["assumption_ok"]
                         else f"{row['bound_general_q']:.3e}"))
        print(f"  k={row['k']:4d}  gap={row['gap']:.3e}  "
              f"exact-ortho={row['bound_exact_ortho']:.3e}  "
              f"householder={row['bound_householder']:.3e}  "
              f"general-q={general}")
    _print_bounds_verdict(rows, label)
    out_dir = _output_dir(args, config, required=False)
    if out_dir is not None:
        _write_bounds_csv(out_dir / f"{Path(args.history).stem}_bounds.csv", rows)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlcirsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
