#!/usr/bin/env python3
"""Generate a synthetic timing matrix CSV for experiments.

Two generators are available. `lowrank` draws K-dimensional positive
factors per program and per machine and uses their inner products as
execution times, so the matrix is exactly rank K before noise. `groups`
splits the machines into families; within a family every column is an
exact positive multiple of a shared latent column, which is the structure
the correlation-clique predictor exploits.

Multiplicative log-normal noise (--noise, sigma in log space) keeps times
positive. --density < 1 blanks a random fraction of cells, mimicking a
matrix where most programs ran on only a few machines.
"""

import argparse
import sys

import numpy as np

from perfcast import (MaskSpec, PCMatrix, density, mask_random,
                      write_matrix_csv)


def lowrank_values(n_rows: int, n_cols: int, rank: int,
                   rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(0.5, 5.0, (n_rows, rank))
    v = rng.uniform(0.5, 5.0, (rank, n_cols))
    return u @ v


def grouped_values(n_rows: int, n_cols: int, n_groups: int,
                   rng: np.random.Generator) -> np.ndarray:
    # each family shares one latent column, scaled per machine
    sizes = np.full(n_groups, n_cols // n_groups)
    sizes[: n_cols % n_groups] += 1
    columns = []
    for size in sizes:
        latent = rng.uniform(1.0, 60.0, n_rows)
        for _ in range(size):
            columns.append(latent * rng.uniform(0.5, 4.0))
    return np.column_stack(columns)


def build(args) -> PCMatrix:
    rng = np.random.default_rng(args.seed)
    if args.structure == "lowrank":
        vals = lowrank_values(args.rows, args.machines, args.rank, rng)
    else:
        vals = grouped_values(args.rows, args.machines, args.groups, rng)
    if args.noise > 0:
        vals = vals * np.exp(rng.normal(0.0, args.noise, vals.shape))
    row_keys = tuple((f"bench{i:03d}", "default") for i in range(args.rows))
    col_keys = tuple(f"host{j:03d}" for j in range(args.machines))
    m = PCMatrix(row_keys, col_keys, vals)
    if args.density < 1.0:
        m, _ = mask_random(m, MaskSpec(1.0 - args.density, args.seed + 1))
    return m


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="matrix CSV to write")
    parser.add_argument("--structure", choices=["lowrank", "groups"],
                        default="lowrank")
    parser.add_argument("--rows", type=int, default=40,
                        help="number of (program, args) rows")
    parser.add_argument("--machines", type=int, default=25)
    parser.add_argument("--rank", type=int, default=1,
                        help="latent rank for --structure lowrank")
    parser.add_argument("--groups", type=int, default=4,
                        help="machine family count for --structure groups")
    parser.add_argument("--noise", type=float, default=0.0,
                        help="log-space noise sigma, 0 for exact structure")
    parser.add_argument("--density", type=float, default=1.0,
                        help="fraction of cells kept, in (0, 1]")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if not (0.0 < args.density <= 1.0):
        parser.error("--density must be in (0, 1]")

    m = build(args)
    write_matrix_csv(m, args.out)
    print(f"wrote {m.n_rows}x{m.n_cols} matrix, "
          f"{m.count_present} observed cells "
          f"(density {density(m):.2f}) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
