"""Command-line entry point.

Subcommands cover the full pipeline: ingest raw timing observations into a
matrix CSV, complete the matrix, run the evaluation drivers, and consume
the results (machine ranking, program placement). Every tunable can come
from a key=value config file (--config); explicit flags win over the file.
Percent-valued flags (--fractions, --outlier-fraction) are percentages.

Warnings go to stderr and leave the exit status at 0; errors print to
stderr and exit 1 (argparse usage problems exit 2).
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from .config import (RunConfig, make_run_config, parse_name_list,
                     parse_percent_list, read_config_file, _PARSERS)
from .evaluation import (Algorithm, CliqueProtocol, complete_matrix,
                         leave_one_out, masking_sweep, outlier_sweep,
                         report_to_json, write_reports_csv,
                         write_reports_json)
from .factorization import model_from_json, model_to_json, rank_machines
from .matrix import (ROW_KEY_SEP, build_matrix, read_matrix_csv,
                     read_observations_csv, write_matrix_csv)
from .placement import greedy_place, schedule_batch


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _write_json(payload: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group(
        "configuration", "defaults < --config file < explicit flags")
    g.add_argument("--config", metavar="FILE",
                   help="flat key=value config file")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--repeats", type=int)
    g.add_argument("--algorithm", choices=[a.value for a in Algorithm])
    g.add_argument("--protocol", choices=[p.value for p in CliqueProtocol],
                   help="clique scoring protocol for leave-one-out")
    g.add_argument("--ridge-lambda", dest="ridge_lambda", type=float)
    g.add_argument("--ridge-min-training-rows", dest="ridge_min_training_rows",
                   type=int)
    g.add_argument("--clique-threshold", dest="clique_threshold", type=float)
    g.add_argument("--clique-min-overlap", dest="clique_min_overlap", type=int)
    g.add_argument("--als-k", dest="als_k", type=int)
    g.add_argument("--als-lambda", dest="als_lambda", type=float)
    g.add_argument("--als-max-iters", dest="als_max_iters", type=int)
    g.add_argument("--als-tol", dest="als_tol", type=float)
    g.add_argument("--svd-k", dest="svd_k", type=int)
    g.add_argument("--svd-max-outer", dest="svd_max_outer", type=int)
    g.add_argument("--ensemble", type=parse_name_list,
                   help="comma-separated ensemble members")
    g.add_argument("--fractions", type=parse_percent_list,
                   help="comma-separated mask PERCENTAGES, e.g. 5,10,20")
    g.add_argument("--outlier-fraction", dest="outlier_fraction",
                   type=lambda s: parse_percent_list(s)[0],
                   help="PERCENTAGE of training cells to corrupt")
    g.add_argument("--outlier-lo", dest="outlier_lo", type=float)
    g.add_argument("--outlier-hi", dest="outlier_hi", type=float)


def _load_config(args) -> RunConfig:
    file_overrides = read_config_file(args.config) if args.config else {}
    flag_overrides = {k: getattr(args, k, None) for k in _PARSERS}
    return make_run_config(file_overrides, flag_overrides)


def _echo(cfg: RunConfig, **paths) -> dict:
    out = cfg.to_dict()
    out.update({k: str(v) for k, v in paths.items() if v is not None})
    return out


def _report_warnings(reports) -> None:
    for report in reports:
        if report.note and report.note != "leave-one-out":
            _warn(f"fraction {report.fraction}: {report.note}")


def _print_report_summary(reports) -> None:
    for report in reports:
        for res in report.results:
            total = "n/a" if res.total_error is None else f"{res.total_error:.6g}"
            print(f"fraction={report.fraction:g} algorithm={res.algorithm} "
                  f"total_error={total} cells={len(res.cells)} "
                  f"uncovered={res.n_uncovered}")


def _parse_row_keys(text: str) -> list[tuple[str, str]]:
    keys = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        program, sep, args = part.partition(ROW_KEY_SEP)
        keys.append((program, args if sep else ""))
    if not keys:
        raise ValueError("empty row list")
    return keys


def _resolve_rows(m, text: str | None) -> list[int]:
    if text is None:
        return list(range(m.n_rows))
    index = {key: i for i, key in enumerate(m.row_keys)}
    rows = []
    for key in _parse_row_keys(text):
        if key not in index:
            raise ValueError(
                f"unknown program {key[0] + ROW_KEY_SEP + key[1]!r}; matrix "
                f"has {m.n_rows} rows")
        rows.append(index[key])
    return rows


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    observations = read_observations_csv(args.csv)
    counts = Counter((o.program_id, o.arg_label, o.machine_id)
                     for o in observations)
    duplicates = [key for key, n in counts.items() if n > 1]
    if duplicates:
        p, a, machine = duplicates[0]
        _warn(f"{len(duplicates)} cell(s) observed more than once; values "
              f"averaged (first: {p + ROW_KEY_SEP + a} on {machine})")
    m = build_matrix(observations)
    write_matrix_csv(m, args.out)
    print(f"wrote {m.n_rows}x{m.n_cols} matrix "
          f"({m.count_present} observed cells) to {args.out}")
    return 0


def cmd_complete(args) -> int:
    cfg = _load_config(args)
    m = read_matrix_csv(args.matrix)
    completed, fills, model = complete_matrix(
        m, Algorithm(cfg.algorithm), cfg.to_eval_config())
    write_matrix_csv(completed, args.out)
    if args.fills_out:
        _write_json({
            "run_config": _echo(cfg, input=args.matrix, output=args.out),
            "seed": cfg.seed,
            "fills": [{"program": f.program, "args": f.args,
                       "machine": f.machine, "predicted_seconds": f.predicted,
                       "algorithm": f.algorithm} for f in fills],
        }, args.fills_out)
    if args.model_out:
        if model is None:
            raise ValueError(f"algorithm {cfg.algorithm!r} does not produce "
                             f"a factor model; drop --model-out or use "
                             f"als/svd")
        _write_json({"run_config": _echo(cfg, input=args.matrix),
                     "model": model_to_json(model)}, args.model_out)
    print(f"filled {len(fills)} missing cells with {cfg.algorithm}; "
          f"wrote {args.out}")
    return 0


def _write_eval_outputs(args, cfg: RunConfig, reports, extra_echo) -> None:
    if args.out_json:
        write_reports_json(reports, args.out_json,
                           extra={"run_config": extra_echo,
                                  "seed": cfg.seed})
    if args.out_csv:
        write_reports_csv(reports, args.out_csv)


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    m = read_matrix_csv(args.matrix)
    report = leave_one_out(m, Algorithm(cfg.algorithm), cfg.to_eval_config(),
                           CliqueProtocol(cfg.protocol),
                           dataset=Path(args.matrix).stem)
    _write_eval_outputs(args, cfg, [report],
                        _echo(cfg, input=args.matrix))
    _print_report_summary([report])
    return 0


def _sweep_algorithms(args) -> list[Algorithm]:
    return [Algorithm(name) for name in args.algorithms]


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    m = read_matrix_csv(args.matrix)
    algorithms = _sweep_algorithms(args)
    reports = masking_sweep(m, cfg.fractions, algorithms, cfg.repeats,
                            cfg.seed, cfg.to_eval_config(),
                            dataset=Path(args.matrix).stem)
    echo = _echo(cfg, input=args.matrix)
    echo["algorithms"] = [a.value for a in algorithms]
    _write_eval_outputs(args, cfg, reports, echo)
    _report_warnings(reports)
    _print_report_summary(reports)
    return 0


def cmd_outliers(args) -> int:
    cfg = _load_config(args)
    m = read_matrix_csv(args.matrix)
    algorithms = _sweep_algorithms(args)
    reports = outlier_sweep(m, cfg.outlier_fraction,
                            (cfg.outlier_lo, cfg.outlier_hi), cfg.fractions,
                            algorithms, cfg.repeats, cfg.seed,
                            cfg.to_eval_config(),
                            dataset=Path(args.matrix).stem)
    echo = _echo(cfg, input=args.matrix)
    echo["algorithms"] = [a.value for a in algorithms]
    _write_eval_outputs(args, cfg, reports, echo)
    _report_warnings(reports)
    _print_report_summary(reports)
    return 0


def _load_model(path):
    with open(path) as fh:
        data = json.load(fh)
    return model_from_json(data["model"] if "model" in data else data)


def cmd_rank(args) -> int:
    model = _load_model(args.model)
    for position, machine in enumerate(rank_machines(model), start=1):
        print(json.dumps({"rank": position, "machine": machine},
                         sort_keys=True))
    return 0


def cmd_place(args) -> int:
    m = read_matrix_csv(args.completed)
    ranking = rank_machines(_load_model(args.model)) if args.model else None
    rows = _resolve_rows(m, args.rows)
    if args.schedule:
        assignment, makespan = schedule_batch(m, rows)
        col_index = {c: j for j, c in enumerate(m.col_keys)}
        for machine in m.col_keys:
            for r in assignment[machine]:
                program, prog_args = m.row_keys[r]
                print(json.dumps(
                    {"program": program, "args": prog_args,
                     "machine": machine,
                     "predicted_seconds": float(m.values[r, col_index[machine]])},
                    sort_keys=True))
        print(json.dumps({"makespan": makespan}, sort_keys=True))
        return 0
    for r in rows:
        decision = greedy_place(m, r, ranking)
        print(json.dumps(decision.to_json(), sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfcast",
        description="Predict program execution times on machines they never "
                    "ran on, by completing a sparse timing matrix.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="observations CSV -> matrix CSV")
    p.add_argument("csv", help="CSV with header program,args,machine,seconds")
    p.add_argument("--out", required=True, help="matrix CSV to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("complete", help="fill every missing matrix cell")
    p.add_argument("matrix", help="matrix CSV")
    p.add_argument("--out", required=True, help="completed matrix CSV")
    p.add_argument("--fills-out", help="JSON log of per-cell fills")
    p.add_argument("--model-out", help="JSON factor model (als/svd only)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("evaluate",
                       help="leave-one-out evaluation of one algorithm")
    p.add_argument("matrix")
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    for name, help_text, func in [
        ("sweep", "mask increasing fractions and score predictions",
         cmd_sweep),
        ("outliers", "sweep with corrupted training cells, clean targets",
         cmd_outliers),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("matrix")
        p.add_argument("--algorithms", type=parse_name_list,
                       default=("ridge", "cliques", "als", "ensemble"),
                       help="comma-separated algorithms to compare")
        p.add_argument("--out-json")
        p.add_argument("--out-csv")
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("rank",
                       help="order machines fastest-first from a K=1 model")
    p.add_argument("model", help="factor model JSON")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("place",
                       help="choose machines for programs (JSON lines)")
    p.add_argument("completed", help="completed matrix CSV")
    p.add_argument("--rows", help="comma-separated program" + ROW_KEY_SEP +
                                  "args keys (default: all rows)")
    p.add_argument("--model", help="factor model JSON for cold-row ranking")
    p.add_argument("--schedule", action="store_true",
                   help="batch schedule instead of per-program placement")
    p.set_defaults(func=cmd_place)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
