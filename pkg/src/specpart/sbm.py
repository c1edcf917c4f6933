"""Planted-partition graph and stream generator.

Produces known-truth test inputs: a Bernoulli block model (each
intra-block pair is an edge with p_in, inter-block with p_out) plus
two stream shapes over the same graph, emerging (edges arrive in
slices) and snowball (vertices arrive in batches). Generation is
deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .graph import SparseGraph, empty_graph, from_edges, write_edge_list
from .spectral import Partition, write_labels
from .streaming import StreamStage, write_manifest

__all__ = [
    "SbmSpec",
    "SbmStream",
    "generate_sbm",
    "generate_stream",
    "write_dataset",
]


@dataclass(frozen=True)
class SbmSpec:
    """Parameters of one planted-partition draw."""

    n: int
    k: int
    p_in: float
    p_out: float
    block_sizes: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("k must be at least 1")
        if self.n < self.k:
            raise DomainError("need at least one vertex per block")
        if not (0.0 <= self.p_out <= self.p_in <= 1.0):
            raise DomainError("need 0 <= p_out <= p_in <= 1")
        if self.block_sizes is None:
            sizes = tuple(
                self.n // self.k + (1 if i < self.n % self.k else 0)
                for i in range(self.k)
            )
        else:
            sizes = tuple(int(s) for s in self.block_sizes)
            if len(sizes) != self.k:
                raise DomainError("block_sizes must have k entries")
            if any(s < 1 for s in sizes):
                raise DomainError("every block needs at least one vertex")
            if sum(sizes) != self.n:
                raise DomainError("block_sizes must sum to n")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def truth_labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.k), self.block_sizes)


@dataclass(frozen=True)
class SbmStream:
    """A generated stream plus bookkeeping for replay checks.

    Unpacks as (initial, stages, truth). ``vertex_order`` maps stream
    vertex ids back to the base graph's ids (identity for emerging
    mode; the reveal order for snowball, whose stages are relabeled so
    revealed vertices occupy a prefix).
    """

    initial: SparseGraph
    stages: tuple[StreamStage, ...]
    truth: Partition
    vertex_order: np.ndarray

    def __iter__(self):
        return iter((self.initial, self.stages, self.truth))


def _sample_pairs(rng, npairs: int, p: float) -> np.ndarray:
    """Uniformly sample a Binomial(npairs, p) subset of pair indices."""
    if npairs == 0 or p == 0.0:
        return np.empty(0, dtype=np.int64)
    count = rng.binomial(npairs, p)
    if count == 0:
        return np.empty(0, dtype=np.int64)
    return rng.choice(npairs, size=count, replace=False).astype(np.int64)


def generate_sbm(spec: SbmSpec) -> tuple[SparseGraph, Partition]:
    """Draw one planted-partition graph with its truth partition.

    Edges are sampled block pair by block pair: a binomial count, then
    that many distinct pairs chosen uniformly, so the result matches
    per-pair Bernoulli coin flips in distribution without touching all
    O(n^2) pairs.
    """
    rng = np.random.default_rng(spec.seed)
    sizes = np.asarray(spec.block_sizes, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    triu_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    chunks = []
    for a in range(spec.k):
        sa = int(sizes[a])
        # intra-block pairs, decoded through the upper triangle
        idx = _sample_pairs(rng, sa * (sa - 1) // 2, spec.p_in)
        if idx.size:
            if sa not in triu_cache:
                triu_cache[sa] = np.triu_indices(sa, 1)
            iu, ju = triu_cache[sa]
            chunks.append(
                np.column_stack([starts[a] + iu[idx], starts[a] + ju[idx]])
            )
        for b in range(a + 1, spec.k):
            sb = int(sizes[b])
            idx = _sample_pairs(rng, sa * sb, spec.p_out)
            if idx.size:
                i, j = np.divmod(idx, sb)
                chunks.append(np.column_stack([starts[a] + i, starts[b] + j]))
    if chunks:
        arcs = np.vstack(chunks)
    else:
        arcs = np.empty((0, 2), dtype=np.int64)
    graph = from_edges(arcs, spec.n)
    return graph, Partition.from_labels(spec.truth_labels)


def _near_equal_batches(total: int, parts: int) -> np.ndarray:
    sizes = np.full(parts, total // parts, dtype=np.int64)
    sizes[: total % parts] += 1
    return sizes


def _snowball_order(spec: SbmSpec, rng, stratified: bool) -> np.ndarray:
    """Vertex reveal order; stratified interleaves every block evenly."""
    if not stratified:
        return rng.permutation(spec.n)
    labels = spec.truth_labels
    sizes = np.asarray(spec.block_sizes, dtype=np.int64)
    # within-block random order, then a fractional rank so the j-th
    # vertex of every block lands near the same global position
    key = np.empty(spec.n)
    order_within = np.empty(spec.n, dtype=np.int64)
    for b in range(spec.k):
        members = np.flatnonzero(labels == b)
        perm = rng.permutation(members.size)
        order_within[members] = perm
        key[members] = (perm + 1.0) / (sizes[b] + 1.0)
    jitter = rng.random(spec.n)
    return np.lexsort((jitter, key)).astype(np.int64)


def generate_stream(
    spec: SbmSpec, mode: str, stages: int, stratified: bool = True
) -> SbmStream:
    """Split one planted-partition draw into a stream.

    Emerging mode slices the edge set into near-equal random deltas
    over the full vertex set. Snowball mode reveals vertices in
    near-equal batches and emits each edge at the first stage where
    both endpoints are revealed; vertices are renumbered in reveal
    order so every stage occupies a prefix, and the returned truth uses
    the same numbering. The union of all deltas reproduces the base
    graph exactly (up to that renumbering).
    """
    if mode not in ("emerging", "snowball"):
        raise DomainError(f"mode must be 'emerging' or 'snowball', got {mode!r}")
    if stages < 2:
        raise DomainError("a stream needs at least 2 stages")
    base, truth = generate_sbm(spec)
    src, dst, _ = base.edge_arrays()
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 1)))

    if mode == "emerging":
        arcs = np.column_stack([src, dst])
        perm = rng.permutation(arcs.shape[0])
        out = tuple(
            StreamStage(
                index=i + 1, mode="emerging", edge_delta=arcs[chunk], n_after=spec.n
            )
            for i, chunk in enumerate(np.array_split(perm, stages))
        )
        return SbmStream(
            initial=empty_graph(spec.n),
            stages=out,
            truth=truth,
            vertex_order=np.arange(spec.n, dtype=np.int64),
        )

    reveal = _snowball_order(spec, rng, stratified)
    new_id = np.empty(spec.n, dtype=np.int64)
    new_id[reveal] = np.arange(spec.n)
    n_afters = np.cumsum(_near_equal_batches(spec.n, stages))
    u, v = new_id[src], new_id[dst]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    stage_of = np.searchsorted(n_afters, hi, side="right")
    out = []
    for t in range(stages):
        mask = stage_of == t
        delta = np.column_stack([lo[mask], hi[mask]])
        out.append(
            StreamStage(
                index=t + 1, mode="snowball", edge_delta=delta, n_after=int(n_afters[t])
            )
        )
    return SbmStream(
        initial=empty_graph(0),
        stages=tuple(out),
        truth=Partition.from_labels(truth.labels[reveal]),
        vertex_order=reveal,
    )


def write_dataset(
    out_dir,
    spec: SbmSpec,
    mode: str | None = None,
    stages: int | None = None,
    stratified: bool = True,
) -> dict:
    """Write a generated dataset to disk in the TSV/manifest formats.

    Static (mode None): graph.tsv + truth.tsv. Stream: one
    stage_NN.tsv per delta, truth.tsv, and manifest.json. Returns a
    summary dict of what was written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if mode is None:
        graph, truth = generate_sbm(spec)
        write_edge_list(graph, out / "graph.tsv")
        write_labels(truth, out / "truth.tsv")
        return {
            "graph": str(out / "graph.tsv"),
            "truth": str(out / "truth.tsv"),
            "n_vertices": spec.n,
            "n_edges": graph.nnz,
            "k": spec.k,
        }
    if stages is None:
        raise DomainError("stream datasets need a stage count")
    stream = generate_stream(spec, mode, stages, stratified=stratified)
    entries = []
    total_edges = 0
    for stage in stream.stages:
        name = f"stage_{stage.index:02d}.tsv"
        write_edge_list(
            from_edges(stage.edge_delta, stage.n_after), out / name
        )
        entries.append((name, stage.n_after))
        total_edges += stage.edge_delta.shape[0]
    write_labels(stream.truth, out / "truth.tsv")
    write_manifest(
        out / "manifest.json",
        mode,
        entries,
        truth="truth.tsv",
        n_initial=stream.initial.n_vertices,
    )
    return {
        "manifest": str(out / "manifest.json"),
        "truth": str(out / "truth.tsv"),
        "mode": mode,
        "stages": stages,
        "n_vertices": spec.n,
        "n_edges": total_edges,
        "k": spec.k,
    }
