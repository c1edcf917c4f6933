"""Static partitioning pipeline.

Eigensolve the graph Laplacian, read the cluster count off the first
large jump in the eigenvalue sequence, then assign vertices to clusters
with a column-pivoted QR of the eigenvector block. No k-means step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import AssignmentError, ContractError, DomainError, ParseError
from .graph import LaplacianOperator, SparseGraph
from .lobpcg import SolverConfig, lobpcg_solve, random_init

__all__ = [
    "Partition",
    "GapResult",
    "detect_gap",
    "assign_clusters_qrcp",
    "partition_static",
    "block_size_for",
    "read_labels",
    "write_labels",
]

GAP_FLOOR_FACTOR = 1e-12


@dataclass(frozen=True)
class Partition:
    """Cluster labels for every vertex; block ids are 0..k-1, all used."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1:
            raise ContractError("labels must be one-dimensional")
        if self.k < 1:
            raise ContractError("k must be at least 1")
        if labels.size:
            if labels.min() < 0 or labels.max() >= self.k:
                raise ContractError("labels must lie in [0, k)")
            if np.unique(labels).size != self.k:
                raise ContractError("every block id in [0, k) must occur")
        elif self.k != 1:
            raise ContractError("empty label set admits only k=1")
        labels.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @classmethod
    def from_labels(cls, raw) -> "Partition":
        """Build from arbitrary label values, compacted to 0..k-1."""
        raw = np.asarray(raw)
        if raw.size == 0:
            return cls(np.empty(0, dtype=np.int64), 1)
        values, compact = np.unique(raw, return_inverse=True)
        return cls(compact.astype(np.int64), int(values.size))


@dataclass(frozen=True)
class GapResult:
    """Cluster count read from the eigenvalue increments.

    ``confidence`` is the chosen increment divided by the largest
    increment before it; ``reliable`` records whether that ratio cleared
    the significance threshold (an unreliable result falls back to the
    largest increment overall).
    """

    k: int
    increments: np.ndarray = field(repr=False)
    confidence: float
    reliable: bool


def detect_gap(eigenvalues, k_min: int = 2, alpha: float = 3.0) -> GapResult:
    """Choose the cluster count from the first significant eigenvalue jump.

    Scanning increments in ascending order, k is the smallest candidate
    whose increment exceeds ``alpha`` times the largest increment before
    it (with a relative floor guarding against exact-zero prefixes). If
    no increment qualifies, k falls back to the largest increment and
    the result is flagged unreliable.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1:
        raise DomainError("eigenvalues must be a one-dimensional array")
    if not np.isfinite(lam).all():
        raise DomainError("eigenvalues must be finite")
    if not (alpha > 1.0):
        raise DomainError("alpha must exceed 1")
    if k_min < 1:
        raise DomainError("k_min must be at least 1")
    if lam.size < k_min + 1:
        raise DomainError(f"need at least {k_min + 1} eigenvalues, got {lam.size}")
    span = max(abs(float(lam[0])), abs(float(lam[-1])))
    if np.any(np.diff(lam) < -1e-8 * max(span, 1.0)):
        raise DomainError("eigenvalues must be ascending")

    delta = np.maximum(np.diff(lam), 0.0)
    floor = GAP_FLOOR_FACTOR * abs(float(lam[-1]))
    k = None
    # a jump is significant only relative to a non-empty prefix, so the
    # threshold scan starts no earlier than the second increment
    for cand in range(max(k_min, 2), lam.size):
        prefix = max(float(delta[: cand - 1].max()), floor)
        if delta[cand - 1] > alpha * prefix:
            k = cand
            break
    reliable = k is not None
    if k is None:
        k = int(np.argmax(delta)) + 1
    if k >= 2:
        denom = max(float(delta[: k - 1].max()), floor)
        confidence = float(delta[k - 1] / denom) if denom > 0.0 else 0.0
    else:
        confidence = 0.0
    return GapResult(k=k, increments=delta, confidence=confidence, reliable=reliable)


def assign_clusters_qrcp(x: np.ndarray) -> Partition:
    """Assign each vertex to a cluster from a k-column spectral embedding.

    A column-pivoted QR of x' picks k seed vertices, one per cluster;
    every vertex then takes the label of the seed with the largest
    coefficient when its embedding row is expressed in the seed rows'
    basis. Orthonormal input is required; the result does not depend on
    the basis chosen for span(x) beyond label naming.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ContractError("embedding must be a 2-d block")
    n, k = x.shape
    if k < 1 or n < k:
        raise ContractError("embedding needs n >= k >= 1")
    ortho_err = np.abs(x.T @ x - np.eye(k)).max()
    if ortho_err > 1e-6:
        raise ContractError(f"embedding columns not orthonormal (error {ortho_err:.2e})")

    _, _, pivots = scipy.linalg.qr(x.T, mode="economic", pivoting=True)
    seeds = np.sort(pivots[:k])
    seed_rows = x[seeds, :]
    if np.linalg.cond(seed_rows) > 1e12:
        raise AssignmentError("seed rows numerically singular; embedding carries no clusters")
    try:
        psi = np.linalg.solve(seed_rows.T, x.T).T
    except np.linalg.LinAlgError as exc:
        raise AssignmentError(f"seed rows singular: {exc}") from exc
    labels = np.argmax(np.abs(psi), axis=1)
    zero_rows = ~np.any(x, axis=1)
    if zero_rows.any():
        warnings.warn(
            f"{int(zero_rows.sum())} vertices have zero embedding rows; assigned to block 0",
            stacklevel=2,
        )
        labels[zero_rows] = 0
    return Partition.from_labels(labels)


def block_size_for(k_expected: int) -> int:
    """Eigenvector count for a target cluster count: k plus a small margin."""
    if k_expected < 1:
        raise DomainError("k_expected must be at least 1")
    return k_expected + max(2, math.ceil(0.1 * k_expected))


def partition_static(
    g: SparseGraph,
    cfg: SolverConfig,
    k_expected: int | None = None,
    *,
    alpha: float = 3.0,
    k_min: int = 2,
    fix_k: bool = False,
    x0: np.ndarray | None = None,
):
    """Partition a static graph: eigensolve, gap detection, QRCP assignment.

    ``k_expected`` sizes the eigenvector block (and the convergence
    gate); the cluster count is still detected from the spectrum unless
    ``fix_k`` pins it. Returns (Partition, EigenState, GapResult).
    """
    n = g.n_vertices
    if n < 1:
        raise DomainError("cannot partition an empty graph")
    if k_expected is not None:
        if k_expected < 1:
            raise DomainError("k_expected must be at least 1")
        l = block_size_for(k_expected)
    else:
        l = cfg.block_size
    l = min(l, n)
    cfg_run = cfg.replace(block_size=l)
    start = random_init(n, l, cfg.seed) if x0 is None else x0
    n_converge = min(k_expected + 1, l) if k_expected is not None else None
    op = LaplacianOperator(g)
    state = lobpcg_solve(op, start, cfg_run, n_converge=n_converge)

    if l >= 2:
        gap = detect_gap(state.eigenvalues, k_min=min(k_min, l - 1), alpha=alpha)
    else:
        gap = GapResult(k=1, increments=np.empty(0), confidence=0.0, reliable=False)
    k_used = k_expected if (fix_k and k_expected is not None) else gap.k
    partition = assign_clusters_qrcp(state.vectors[:, :k_used])
    return partition, state, gap


def write_labels(partition: Partition, path, base: int = 1) -> None:
    """Write `vertex<TAB>block` lines, both columns in the given base."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, lab in enumerate(partition.labels):
            fh.write(f"{i + base}\t{int(lab) + base}\n")


def read_labels(source, base: int = 1) -> Partition:
    """Read a `vertex<TAB>block` file; every vertex must appear exactly once."""
    close = False
    if isinstance(source, (str, Path)):
        fh = open(source, "rb")
        close = True
    else:
        fh = source
    pairs = {}
    try:
        for line_no, raw in enumerate(fh, start=1):
            if isinstance(raw, bytes):
                raw = raw.decode("utf-8")
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 2 fields, got {len(parts)}", line_no)
            try:
                vertex = int(parts[0]) - base
                label = int(parts[1])
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
            if vertex < 0:
                raise ParseError(f"vertex index below base {base}", line_no)
            if vertex in pairs:
                raise ParseError(f"vertex {parts[0]} listed twice", line_no)
            pairs[vertex] = label
    finally:
        if close:
            fh.close()
    if not pairs:
        raise DomainError("label file contains no assignments")
    n = max(pairs) + 1
    if len(pairs) != n:
        raise DomainError("label file must cover every vertex 1..n")
    raw = np.empty(n, dtype=np.int64)
    for v, lab in pairs.items():
        raw[v] = lab
    return Partition.from_labels(raw)
