"""Stage-by-stage partitioning of graph streams.

Two stream shapes are supported: emerging (fixed vertex set, edges
arrive in slices) and snowball (vertices arrive in batches together
with their induced edges; old vertices keep their indices). Each stage
re-partitions the cumulative graph; in warm mode the eigenvectors of
the previous stage seed the next solve, new rows zero- or
Gaussian-filled.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, SpecpartError, StreamStageError
from .graph import LaplacianOperator, SparseGraph, apply_delta, empty_graph, load_edge_list
from .lobpcg import EigenState, SolverConfig, lobpcg_solve, random_init
from .spectral import GapResult, Partition, assign_clusters_qrcp, block_size_for, detect_gap

__all__ = [
    "StreamStage",
    "StageResult",
    "warm_start",
    "partition_stream",
    "load_manifest",
    "write_manifest",
]

MODES = ("emerging", "snowball")


@dataclass(frozen=True)
class StreamStage:
    """One stream installment: the edges that arrive and the vertex count after."""

    index: int
    mode: str
    edge_delta: np.ndarray
    n_after: int
    edge_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        edges = np.asarray(self.edge_delta, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edge_delta", edges)
        if self.edge_weights is not None:
            w = np.asarray(self.edge_weights, dtype=np.float64)
            if w.shape != (edges.shape[0],):
                raise DomainError("edge_weights length does not match edge_delta")
            if w.size and (not np.all(np.isfinite(w)) or w.min() < 0):
                raise DomainError("edge weights must be finite and non-negative")
            object.__setattr__(self, "edge_weights", w)
        if self.index < 1:
            raise DomainError("stage indices start at 1")
        if self.n_after < 0:
            raise DomainError("n_after must be non-negative")
        if edges.size and edges.max() >= self.n_after:
            raise DomainError(
                f"stage {self.index} references vertex {int(edges.max())} "
                f"but n_after is {self.n_after}"
            )
        if edges.size and edges.min() < 0:
            raise DomainError("negative vertex index in stage delta")


@dataclass
class StageResult:
    stage: int
    partition: Partition
    eigenstate: EigenState
    gap: GapResult
    iterations: int
    wall_time: float
    init_mode: str


def warm_start(prev: EigenState, n_new: int, fill: str = "zero", seed: int = 0) -> np.ndarray:
    """Grow a previous eigenvector block to a larger vertex set.

    Rows of existing vertices are copied; rows of new vertices are
    zero-filled by default or drawn from a seeded Gaussian.
    """
    if fill not in ("zero", "random"):
        raise DomainError(f"fill must be 'zero' or 'random', got {fill!r}")
    n_old = prev.vectors.shape[0]
    if n_new < n_old:
        raise DomainError("stream shrank the vertex set; deletion is unsupported")
    out = np.empty((n_new, prev.vectors.shape[1]))
    out[:n_old] = prev.vectors
    if n_new > n_old:
        if fill == "zero":
            out[n_old:] = 0.0
        else:
            out[n_old:] = np.random.default_rng(seed).standard_normal(
                (n_new - n_old, prev.vectors.shape[1])
            )
    return out


def _validate_stages(initial: SparseGraph, stages) -> None:
    if not stages:
        raise DomainError("stream has no stages")
    modes = {s.mode for s in stages}
    if len(modes) != 1:
        raise DomainError("all stages must share one mode")
    for pos, stage in enumerate(stages, start=1):
        if stage.index != pos:
            raise DomainError(f"stage indices must run 1..{len(stages)} consecutively")
    n_prev = initial.n_vertices
    for stage in stages:
        if stage.n_after < n_prev:
            raise DomainError(
                f"stage {stage.index} shrinks the vertex set ({n_prev} -> {stage.n_after})"
            )
        if stage.mode == "emerging" and stage.n_after != stages[0].n_after:
            raise DomainError("emerging streams keep the vertex count constant")
        n_prev = stage.n_after


def partition_stream(
    initial: SparseGraph,
    stages,
    cfg: SolverConfig,
    init_mode: str = "warm",
    *,
    fill: str = "zero",
    alpha: float = 3.0,
    k_min: int = 2,
    k_expected: int | None = None,
    fix_k: bool = False,
) -> list[StageResult]:
    """Partition every cumulative stage of a stream.

    ``init_mode`` 'warm' seeds each solve (after the first) with the
    previous stage's eigenvectors; 'random' restarts every stage. The
    block size is fixed at stage 1, from ``k_expected`` of the final
    graph when given, else from cfg. Stage failures raise
    StreamStageError carrying the completed results.
    """
    stages = list(stages)
    if init_mode not in ("warm", "random"):
        raise DomainError(f"init_mode must be 'warm' or 'random', got {init_mode!r}")
    _validate_stages(initial, stages)
    l = block_size_for(k_expected) if k_expected is not None else cfg.block_size
    n_first = max(stages[0].n_after, initial.n_vertices)
    if l > n_first:
        raise DomainError(
            f"block size {l} exceeds the first-stage vertex count {n_first}"
        )
    cfg_run = cfg.replace(block_size=l)
    n_converge = min(k_expected + 1, l) if k_expected is not None else None
    stage_seeds = np.random.SeedSequence(cfg.seed).generate_state(len(stages))

    results: list[StageResult] = []
    graph = initial
    prev_state: EigenState | None = None
    for stage, seed in zip(stages, stage_seeds):
        t0 = time.perf_counter()
        try:
            graph = apply_delta(graph, stage.edge_delta, stage.n_after, stage.edge_weights)
            if init_mode == "warm" and prev_state is not None:
                x0 = warm_start(prev_state, graph.n_vertices, fill=fill, seed=int(seed))
                used = "warm"
            else:
                x0 = random_init(graph.n_vertices, l, int(seed))
                used = "random"
            op = LaplacianOperator(graph)
            state = lobpcg_solve(op, x0, cfg_run, n_converge=n_converge)
            gap = detect_gap(state.eigenvalues, k_min=min(k_min, l - 1), alpha=alpha)
            k_used = k_expected if (fix_k and k_expected is not None) else gap.k
            partition = assign_clusters_qrcp(state.vectors[:, :k_used])
        except SpecpartError as exc:
            raise StreamStageError(stage.index, exc, results=results) from exc
        results.append(
            StageResult(
                stage=stage.index,
                partition=partition,
                eigenstate=state,
                gap=gap,
                iterations=state.iterations,
                wall_time=time.perf_counter() - t0,
                init_mode=used,
            )
        )
        prev_state = state
    return results


def write_manifest(path, mode: str, stage_entries, truth: str | None = None,
                   cumulative: bool = False, n_initial: int = 0) -> None:
    """Write a stream manifest; stage_entries are (edge_file, n_after) pairs."""
    doc = {
        "mode": mode,
        "cumulative": bool(cumulative),
        "n_initial": int(n_initial),
        "stages": [{"edges": str(f), "n_after": int(n)} for f, n in stage_entries],
    }
    if truth is not None:
        doc["truth"] = str(truth)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path):
    """Load a stream manifest.

    Returns (initial graph, stages, truth path or None, mode). Stage
    edge files are resolved relative to the manifest. With
    ``cumulative: true`` each stage file holds the whole graph so far
    and deltas are recovered by weighted subtraction.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DomainError(f"manifest is not valid JSON: {exc}") from exc
    mode = doc.get("mode")
    if mode not in MODES:
        raise DomainError(f"manifest mode must be one of {MODES}, got {mode!r}")
    entries = doc.get("stages")
    if not isinstance(entries, list) or not entries:
        raise DomainError("manifest must list at least one stage")
    cumulative = bool(doc.get("cumulative", False))
    n_initial = int(doc.get("n_initial", 0))

    stages = []
    prev_csr = None
    prev_n = n_initial
    for pos, entry in enumerate(entries, start=1):
        try:
            edge_file = path.parent / entry["edges"]
            n_after = int(entry["n_after"])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"stage {pos} entry malformed: {exc}") from exc
        if n_after < prev_n:
            raise DomainError(
                f"stage {pos} shrinks the vertex set ({prev_n} -> {n_after})"
            )
        g = load_edge_list(edge_file, num_vertices=n_after)
        if not cumulative:
            src, dst, w = g.edge_arrays()
        else:
            cur = g.to_csr()
            if prev_csr is None:
                diff = cur.tocoo()
            else:
                prev_resized = prev_csr.copy()
                prev_resized.resize(cur.shape)
                diff = (cur - prev_resized).tocoo()
            if diff.data.size and diff.data.min() < -1e-12:
                raise DomainError(
                    f"stage {pos} cumulative file removes edge weight; deletion unsupported"
                )
            src, dst, w = diff.row, diff.col, diff.data
            keep = w > 0
            src, dst, w = src[keep], dst[keep], w[keep]
            prev_csr = cur
        stages.append(
            StreamStage(
                index=pos,
                mode=mode,
                edge_delta=np.column_stack([src, dst]) if src.size else np.empty((0, 2), np.int64),
                n_after=n_after,
                edge_weights=np.asarray(w, dtype=np.float64) if src.size else None,
            )
        )
        prev_n = n_after
    truth = doc.get("truth")
    truth_path = str(path.parent / truth) if truth else None
    initial = empty_graph(n_initial)
    return initial, stages, truth_path, mode
