#!/usr/bin/env python3
"""Run the full evaluation battery on a timing matrix and save the reports.

Given a matrix CSV, this runs three experiments and writes their artifacts
into --out-dir:

  loo.json                leave-one-out, every algorithm, the clique
                          algorithm under all three scoring protocols
  sweep.json / sweep.csv  masking sweep over --fractions
  outliers.json / .csv    same sweep with corrupted training cells

The printed summary has one line per (experiment, fraction, algorithm).
"""

import argparse
import sys
from pathlib import Path

from perfcast import (Algorithm, CliqueProtocol, EvalConfig, density,
                      leave_one_out, masking_sweep, outlier_sweep,
                      read_matrix_csv, write_reports_csv,
                      write_reports_json)
from perfcast.config import parse_name_list, parse_percent_list


def summarize(tag: str, reports) -> None:
    for report in reports:
        if report.note and report.note != "leave-one-out":
            print(f"{tag:9s} fraction={report.fraction:<5g} "
                  f"note: {report.note}")
        for res in report.results:
            total = ("n/a" if res.total_error is None
                     else f"{res.total_error:.4f}")
            print(f"{tag:9s} fraction={report.fraction:<5g} "
                  f"{res.algorithm:9s} error={total:8s} "
                  f"cells={len(res.cells):5d} uncovered={res.n_uncovered}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("matrix", help="matrix CSV (see scripts/"
                                       "make_synthetic.py or perfcast ingest)")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--algorithms", type=parse_name_list,
                        default=("ridge", "cliques", "als", "svd",
                                 "ensemble"))
    parser.add_argument("--fractions", type=parse_percent_list,
                        default=(0.05, 0.10, 0.20, 0.35, 0.50),
                        help="mask percentages, e.g. 5,10,20")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--outlier-fraction", type=float, default=0.10)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    m = read_matrix_csv(args.matrix)
    cfg = EvalConfig(threads=args.threads)
    algorithms = [Algorithm(name) for name in args.algorithms]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{m.n_rows}x{m.n_cols} matrix, {m.count_present} cells, "
          f"density {density(m):.2f}")

    # 1. leave-one-out; the clique predictor is scored under each protocol
    loo_reports = []
    for algorithm in algorithms:
        protocols = (list(CliqueProtocol) if algorithm is Algorithm.CLIQUES
                     else [CliqueProtocol.IN_GROUPS_PLUS_REGRESSION])
        for protocol in protocols:
            report = leave_one_out(m, algorithm, cfg, protocol,
                                   dataset=Path(args.matrix).stem)
            loo_reports.append(report)
            label = (f"{algorithm.value}[{protocol.value}]"
                     if algorithm is Algorithm.CLIQUES else algorithm.value)
            res = report.results[0]
            total = ("n/a" if res.total_error is None
                     else f"{res.total_error:.4f}")
            print(f"loo       {label:32s} error={total:8s} "
                  f"uncovered={res.n_uncovered}")
    write_reports_json(loo_reports, out_dir / "loo.json")

    # 2. masking sweep
    sweep_reports = masking_sweep(m, args.fractions, algorithms,
                                  args.repeats, args.seed, cfg,
                                  dataset=Path(args.matrix).stem)
    write_reports_json(sweep_reports, out_dir / "sweep.json")
    write_reports_csv(sweep_reports, out_dir / "sweep.csv")
    summarize("sweep", sweep_reports)

    # 3. outlier sweep, same fractions, corrupted training cells
    outlier_reports = outlier_sweep(m, args.outlier_fraction, (0.0, 4.0),
                                    args.fractions, algorithms,
                                    args.repeats, args.seed, cfg,
                                    dataset=Path(args.matrix).stem)
    write_reports_json(outlier_reports, out_dir / "outliers.json")
    write_reports_csv(outlier_reports, out_dir / "outliers.csv")
    summarize("outliers", outlier_reports)

    print(f"reports written to {out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
