"""Compare warm-started and random-initialized eigensolves over a stream.

Generates a staged planted-partition stream, replays it twice with the
same solver settings (once re-randomizing the eigenvector block each
stage, once carrying the previous stage's block forward), and prints
per-stage iteration counts, accuracy against the planted truth, and the
warm/random iteration ratio over stages 2 onward.

Usage:
    python3 scripts/stream_compare.py --mode emerging --stages 10 --seeds 5
"""

import argparse

import numpy as np

from specpart.lobpcg import SolverConfig
from specpart.metrics import contingency, partition_match
from specpart.sbm import SbmSpec, generate_stream
from specpart.spectral import Partition
from specpart.streaming import partition_stream


def stage_accuracy(truth, result):
    labels = truth.labels[: result.partition.n]
    table = contingency(Partition.from_labels(labels), result.partition)
    return partition_match(table)


def run(args) -> None:
    print(f"mode={args.mode} n={args.n} k={args.k} p_in={args.p_in} "
          f"p_out={args.p_out} stages={args.stages} tol={args.tol}")
    ratios = []
    for seed in range(args.seeds):
        spec = SbmSpec(n=args.n, k=args.k, p_in=args.p_in, p_out=args.p_out,
                       seed=seed)
        initial, stages, truth = generate_stream(spec, args.mode, args.stages)
        runs = {}
        for init in ("random", "warm"):
            cfg = SolverConfig(block_size=8, tol=args.tol,
                               max_iter=args.max_iter, seed=seed)
            runs[init] = partition_stream(initial, stages, cfg,
                                          init_mode=init, k_expected=args.k)
        r_total = sum(r.iterations for r in runs["random"][1:])
        w_total = sum(r.iterations for r in runs["warm"][1:])
        ratios.append(w_total / r_total)
        print(f"seed {seed}: iterations per stage")
        for init in ("random", "warm"):
            counts = " ".join(f"{r.iterations:>3}" for r in runs[init])
            final_pm = stage_accuracy(truth, runs[init][-1])
            print(f"  {init:>6}: {counts}  final PM {final_pm:.3f}")
        print(f"  stages 2-{args.stages}: random {r_total}, warm {w_total}, "
              f"ratio {ratios[-1]:.2f}")
    print(f"median warm/random ratio {np.median(ratios):.2f} "
          f"over {args.seeds} seeds")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--mode", choices=("emerging", "snowball"),
                        default="emerging")
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--p-in", type=float, default=0.5)
    parser.add_argument("--p-out", type=float, default=0.0005)
    parser.add_argument("--stages", type=int, default=10)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--tol", type=float, default=2e-3)
    parser.add_argument("--max-iter", type=int, default=300)
    run(parser.parse_args())


if __name__ == "__main__":
    main()
