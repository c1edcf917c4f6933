"""Command-line front end.

Subcommands: ``static`` partitions one edge list, ``stream`` replays a
stage manifest, ``gen`` writes planted-partition datasets, ``eval``
scores a label file against a truth file. Every run writes a JSON
report next to its outputs.

Exit codes: 0 success, 2 bad input, 3 solver failure, 4 the spectral
gap was unreliable (static only; the fallback partition is still
written).

Heavy imports happen after argument parsing so BLAS thread caps
(``SPECTRAL_THREADS``, forced to 1 by ``--deterministic``) can be
installed first.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_UNRELIABLE = 4

_THREAD_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


@dataclass
class RunConfig:
    """Normalized options shared by the solver-backed subcommands."""

    command: str
    out_dir: Path
    seed: int
    tol: float
    max_iter: int
    alpha: float
    deterministic: bool
    k_expected: int | None = None
    block_size: int | None = None
    init_mode: str = "warm"
    fill: str = "zero"

    def solver_config(self, default_block: int = 8):
        from .lobpcg import SolverConfig

        return SolverConfig(
            block_size=self.block_size or default_block,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed,
            determinism=self.deterministic,
        )

    def seconds(self, value: float) -> float:
        return 0.0 if self.deterministic else value


def _pin_threads(deterministic: bool) -> None:
    value = "1" if deterministic else os.environ.get("SPECTRAL_THREADS")
    if value:
        for var in _THREAD_VARS:
            os.environ[var] = value


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specpart",
        description="Spectral graph partitioning: static graphs and stage streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded BLAS, zeroed timings, byte-stable outputs")

    def solver(p):
        p.add_argument("--k", type=int, default=None, dest="k_expected",
                       help="expected cluster count (sizes the eigenvector block)")
        p.add_argument("--block-size", type=int, default=None,
                       help="eigenvector count; overrides the size derived from --k")
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--max-iter", type=int, default=20)
        p.add_argument("--alpha", type=float, default=3.0,
                       help="gap detection threshold ratio")
        p.add_argument("--truth", default=None, help="truth labels for scoring")

    p = sub.add_parser("static", help="partition one edge-list graph")
    p.add_argument("--graph", required=True, help="tab-separated edge list")
    p.add_argument("--num-vertices", type=int, default=None)
    p.add_argument("--save-state", default=None, help="write the eigensolver state here")
    p.add_argument("--load-state", default=None, help="warm start from a saved state")
    solver(p)
    common(p)

    p = sub.add_parser("stream", help="replay a stage manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--init", choices=("random", "warm"), default="warm")
    p.add_argument("--compare", action="store_true",
                   help="run both initializations and emit paired records")
    p.add_argument("--fill", choices=("zero", "random"), default="zero",
                   help="how warm starts fill rows of new vertices")
    solver(p)
    common(p)

    p = sub.add_parser("gen", help="generate a planted-partition dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--stream", choices=("emerging", "snowball"), default=None)
    p.add_argument("--stages", type=int, default=None)
    p.add_argument("--no-stratify", action="store_true",
                   help="snowball batches ignore truth blocks")
    common(p)

    p = sub.add_parser("eval", help="score labels against truth")
    p.add_argument("--labels", required=True)
    p.add_argument("--truth", required=True)
    common(p)
    return parser


def _metric_fields(truth, found):
    from .metrics import contingency, pairwise_precision, pairwise_recall, partition_match

    table = contingency(truth, found)
    return {
        "PM": partition_match(table),
        "PR": pairwise_recall(table),
        "PP": pairwise_precision(table),
    }


def _run_static(args) -> int:
    cfg = RunConfig(
        command="static",
        out_dir=Path(args.out),
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        alpha=args.alpha,
        deterministic=args.deterministic,
        k_expected=args.k_expected,
        block_size=args.block_size,
    )
    from .graph import load_edge_list
    from .lobpcg import EigenState
    from .spectral import partition_static, read_labels, write_labels

    t0 = time.perf_counter()
    graph = load_edge_list(args.graph, num_vertices=args.num_vertices)
    truth = read_labels(args.truth) if args.truth else None
    t_load = time.perf_counter() - t0

    x0 = None
    if args.load_state:
        x0 = EigenState.load(args.load_state).vectors

    solver_cfg = cfg.solver_config()
    k_for_sizing = None if args.block_size else cfg.k_expected
    t0 = time.perf_counter()
    partition, state, gap = partition_static(
        graph, solver_cfg, k_expected=k_for_sizing, alpha=cfg.alpha, x0=x0
    )
    t_solve = time.perf_counter() - t0

    t0 = time.perf_counter()
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_labels(partition, cfg.out_dir / "labels.tsv")
    if args.save_state:
        state.save(args.save_state)
    t_assign = time.perf_counter() - t0

    t0 = time.perf_counter()
    metrics = _metric_fields(truth, partition) if truth is not None else {}
    t_metrics = time.perf_counter() - t0

    report = {
        "command": "static",
        "n_vertices": graph.n_vertices,
        "n_edges": graph.nnz,
        "k_expected": cfg.k_expected,
        "k_found": partition.k,
        "block_size": state.block_size,
        "eigenvalues": [float(v) for v in state.eigenvalues],
        "gap": {
            "k": gap.k,
            "confidence": float(gap.confidence),
            "reliable": gap.reliable,
        },
        "iterations": state.iterations,
        "converged_columns": int(state.converged.sum()),
        "seed": cfg.seed,
        "tol": cfg.tol,
        "max_iter": cfg.max_iter,
        "alpha": cfg.alpha,
        "seconds": {
            "load": cfg.seconds(t_load),
            "solve": cfg.seconds(t_solve),
            "assign": cfg.seconds(t_assign),
            "metrics": cfg.seconds(t_metrics),
        },
        **metrics,
    }
    _write_json(cfg.out_dir / "report.json", report)
    return EXIT_OK if gap.reliable else EXIT_UNRELIABLE


def _stage_truth(truth, n: int):
    from .spectral import Partition

    if truth is None:
        return None
    if truth.n == n:
        return truth
    return Partition.from_labels(truth.labels[:n])


def _run_stream(args) -> int:
    cfg = RunConfig(
        command="stream",
        out_dir=Path(args.out),
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        alpha=args.alpha,
        deterministic=args.deterministic,
        k_expected=args.k_expected,
        block_size=args.block_size,
        init_mode=args.init,
        fill=args.fill,
    )
    from .errors import StreamStageError
    from .metrics import stage_record
    from .spectral import read_labels, write_labels
    from .streaming import load_manifest, partition_stream

    initial, stages, truth_path, mode = load_manifest(args.manifest)
    if args.truth:
        truth_path = args.truth
    truth = read_labels(truth_path) if truth_path and Path(truth_path).exists() else None

    solver_cfg = cfg.solver_config()
    modes = ("random", "warm") if args.compare else (cfg.init_mode,)
    runs = []
    failure = None
    for init_mode in modes:
        try:
            results = partition_stream(
                initial,
                stages,
                solver_cfg,
                init_mode=init_mode,
                fill=cfg.fill,
                alpha=cfg.alpha,
                k_expected=None if args.block_size else cfg.k_expected,
            )
            error = None
        except StreamStageError as exc:
            results = exc.results
            error = f"stage {exc.stage}: {exc.__cause__}"
            failure = exc
        records = [
            stage_record(
                r.stage,
                cfg.seconds(r.wall_time),
                k_found=r.partition.k,
                iterations=r.iterations,
                init_mode=r.init_mode,
                truth=_stage_truth(truth, r.partition.n),
                found=r.partition,
            )
            for r in results
        ]
        runs.append({"init": init_mode, "records": records, "error": error})
        if results:
            name = f"labels_{init_mode}.tsv" if args.compare else "labels.tsv"
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            write_labels(results[-1].partition, cfg.out_dir / name)

    report = {
        "command": "stream",
        "mode": mode,
        "n_stages": len(stages),
        "k_expected": cfg.k_expected,
        "seed": cfg.seed,
        "tol": cfg.tol,
        "max_iter": cfg.max_iter,
        "alpha": cfg.alpha,
        "fill": cfg.fill,
        "compare": bool(args.compare),
        "runs": runs,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out_dir / "stream_report.json", report)
    return EXIT_SOLVER if failure is not None else EXIT_OK


def _run_gen(args) -> int:
    from .sbm import SbmSpec, write_dataset

    spec = SbmSpec(n=args.n, k=args.k, p_in=args.p_in, p_out=args.p_out, seed=args.seed)
    if args.stream and args.stages is None:
        raise ValueError("--stream needs --stages")
    info = write_dataset(
        args.out,
        spec,
        mode=args.stream,
        stages=args.stages,
        stratified=not args.no_stratify,
    )
    out = Path(args.out)
    for key, value in info.items():
        # report file locations relative to the dataset directory so the
        # report does not depend on where the directory lives
        if isinstance(value, str):
            try:
                info[key] = str(Path(value).resolve().relative_to(out.resolve()))
            except ValueError:
                pass
    info["command"] = "gen"
    info["seed"] = args.seed
    info["p_in"] = args.p_in
    info["p_out"] = args.p_out
    _write_json(out / "gen_report.json", info)
    return EXIT_OK


def _run_eval(args) -> int:
    from .spectral import read_labels

    found = read_labels(args.labels)
    truth = read_labels(args.truth)
    report = {
        "command": "eval",
        "n_vertices": truth.n,
        "k_truth": truth.k,
        "k_found": found.k,
        **_metric_fields(truth, found),
    }
    _write_json(Path(args.out) / "eval_report.json", report)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _pin_threads(args.deterministic)

    from .errors import (
        AssignmentError,
        ConditioningError,
        ContractError,
        DomainError,
        ParseError,
        SolverError,
        StreamStageError,
        UndefinedMetricError,
    )

    runner = {
        "static": _run_static,
        "stream": _run_stream,
        "gen": _run_gen,
        "eval": _run_eval,
    }[args.command]
    try:
        return runner(args)
    except (
        FileNotFoundError,
        IsADirectoryError,
        PermissionError,
        ParseError,
        DomainError,
        ContractError,
        UndefinedMetricError,
        ValueError,
    ) as exc:
        print(f"specpart: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, ConditioningError, AssignmentError, StreamStageError) as exc:
        print(f"specpart: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
