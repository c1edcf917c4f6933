"""Track eigensolver residual decay on planted-partition graphs.

Runs the block eigensolver from a random start for a fixed number of
iterations and reports how far the worst residual among the first k
columns drops, per seed. The headline figure is the after/initial
ratio at the chosen iteration budget.

Usage:
    python3 scripts/residual_decay.py --n 5000 --k 19 --p-in 0.1 --p-out 0.002
"""

import argparse

import numpy as np

from specpart.graph import LaplacianOperator
from specpart.lobpcg import SolverConfig, lobpcg_solve, random_init
from specpart.sbm import SbmSpec, generate_sbm
from specpart.spectral import block_size_for


def run(args) -> None:
    l = args.block_size or block_size_for(args.k)
    print(f"n={args.n} k={args.k} p_in={args.p_in} p_out={args.p_out} "
          f"block={l} iterations={args.iters}")
    print(f"{'seed':>4} {'initial':>12} {'final':>12} {'ratio':>10}")
    ratios = []
    for seed in range(args.seeds):
        spec = SbmSpec(n=args.n, k=args.k, p_in=args.p_in, p_out=args.p_out,
                       seed=seed)
        g, _ = generate_sbm(spec)
        op = LaplacianOperator(g)
        history = {}
        cfg = SolverConfig(block_size=l, tol=1e-12, max_iter=args.iters, seed=seed)
        lobpcg_solve(op, random_init(args.n, l, seed), cfg,
                     callback=lambda it, vals, norms: history.__setitem__(it, norms))
        first = history[0][: args.k].max()
        last = history[max(history)][: args.k].max()
        ratios.append(last / first)
        print(f"{seed:>4} {first:>12.4e} {last:>12.4e} {ratios[-1]:>10.2e}")
    print(f"median ratio {np.median(ratios):.2e} over {args.seeds} seeds")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=5000)
    parser.add_argument("--k", type=int, default=19)
    parser.add_argument("--p-in", type=float, default=0.1)
    parser.add_argument("--p-out", type=float, default=0.002)
    parser.add_argument("--iters", type=int, default=20)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--block-size", type=int, default=None)
    run(parser.parse_args())


if __name__ == "__main__":
    main()
