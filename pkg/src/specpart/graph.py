"""Sparse graph storage and the matrix-free graph Laplacian.

Graphs are held in compressed-sparse-row form as the *directed* adjacency
A actually read from the input; the symmetric weight matrix W = A + A' is
never materialized. The Laplacian product L @ X = D @ X - A @ X - A' @ X is
applied matrix-free, which is all the block eigensolver needs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DomainError, ParseError

__all__ = [
    "SparseGraph",
    "LaplacianOperator",
    "from_edges",
    "empty_graph",
    "load_edge_list",
    "write_edge_list",
    "symmetrize",
    "degrees",
    "laplacian_apply",
    "apply_delta",
]


@dataclass(frozen=True)
class SparseGraph:
    """Directed weighted adjacency in CSR form.

    Instances are immutable: the index and weight arrays are frozen after
    construction and safe to share across threads. ``is_symmetric`` records
    that the stored matrix already equals its transpose, in which case the
    Laplacian product skips the A' term.
    """

    n_vertices: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray
    is_symmetric: bool = False

    def __post_init__(self):
        n = self.n_vertices
        object.__setattr__(self, "row_offsets", np.asarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices", np.asarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        offs, cols, w = self.row_offsets, self.col_indices, self.weights
        if offs.shape != (n + 1,) or offs[0] != 0 or offs[-1] != cols.size:
            raise ContractError("row_offsets inconsistent with n_vertices/nnz")
        if np.any(np.diff(offs) < 0):
            raise ContractError("row_offsets must be non-decreasing")
        if cols.size != w.size:
            raise ContractError("col_indices and weights differ in length")
        if cols.size and (cols.min() < 0 or cols.max() >= n):
            raise ContractError("column index out of range")
        if np.any(w < 0):
            raise DomainError("negative edge weight")
        # strictly increasing columns within each row (sorted, no duplicates)
        if cols.size:
            interior = np.ones(cols.size, dtype=bool)
            starts = offs[1:-1]
            interior[starts[starts < cols.size]] = False  # row starts unconstrained
            interior[0] = False
            if np.any(np.diff(cols)[interior[1:]] <= 0):
                raise ContractError("columns within a row must be strictly increasing")
            rows = np.repeat(np.arange(n), np.diff(offs))
            if np.any(rows == cols):
                raise ContractError("self-loops are not stored")
        for arr in (offs, cols, w):
            arr.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.col_indices.size)

    @cached_property
    def _csr(self) -> sp.csr_matrix:
        n = self.n_vertices
        return sp.csr_matrix(
            (self.weights, self.col_indices, self.row_offsets), shape=(n, n)
        )

    def to_csr(self) -> sp.csr_matrix:
        """Scipy CSR view of the stored directed adjacency (shared, read-only)."""
        return self._csr

    def edge_arrays(self):
        """Return (src, dst, weight) arrays of the stored directed arcs."""
        src = np.repeat(np.arange(self.n_vertices), np.diff(self.row_offsets))
        return src, self.col_indices.copy(), self.weights.copy()

    def to_dense(self) -> np.ndarray:
        """Dense copy of the stored matrix; test/oracle use only."""
        return self._csr.toarray()


def _coerce_edges(edges, weights=None):
    """Normalize edge input to (src, dst, w) int64/int64/float64 arrays.

    Accepts an (m, 2) or (m, 3) array, or a sequence of (u, v) / (u, v, w)
    tuples. A missing weight defaults to 1.
    """
    if isinstance(edges, np.ndarray) and edges.ndim == 2:
        arr = edges
    else:
        arr = np.asarray(list(edges), dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise ContractError("edges must be (m, 2) or (m, 3)")
    src = np.asarray(arr[:, 0], dtype=np.int64)
    dst = np.asarray(arr[:, 1], dtype=np.int64)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (src.size,):
            raise ContractError("weights length does not match edges")
    elif arr.shape[1] == 3:
        w = np.asarray(arr[:, 2], dtype=np.float64)
    else:
        w = np.ones(src.size)
    if np.any(w < 0):
        raise DomainError("negative edge weight")
    return src, dst, w


def from_edges(edges, n: int, weights=None, *, symmetric: bool = False) -> SparseGraph:
    """Build a graph from directed edges; duplicates summed, self-loops dropped."""
    src, dst, w = _coerce_edges(edges, weights)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise DomainError("edge endpoint out of range")
    keep = src != dst
    src, dst, w = src[keep], dst[keep], w[keep]
    coo = sp.coo_matrix((w, (src, dst)), shape=(n, n))
    csr = coo.tocsr()  # sums duplicates, sorts column indices
    csr.sum_duplicates()
    return SparseGraph(n, csr.indptr, csr.indices, csr.data, is_symmetric=symmetric)


def empty_graph(n: int = 0) -> SparseGraph:
    return SparseGraph(n, np.zeros(n + 1, dtype=np.int64), np.empty(0, np.int64), np.empty(0))


def load_edge_list(source, base: int = 1, num_vertices: int | None = None) -> SparseGraph:
    """Read a tab-separated edge list ``src dst [weight]``.

    ``base`` is the vertex numbering of the file (1 for Graph Challenge
    files, 0 otherwise). Lines starting with ``#`` and blank lines are
    skipped. Duplicate edges have their weights summed and self-loops are
    dropped. The vertex count is the largest index seen unless
    ``num_vertices`` overrides it (for trailing isolated vertices).
    """
    if base not in (0, 1):
        raise DomainError("base must be 0 or 1")
    close = False
    if isinstance(source, (str, Path)):
        fh = open(source, "rb")
        close = True
    elif isinstance(source, bytes):
        fh = io.BytesIO(source)
    else:
        fh = source
    src, dst, wts = [], [], []
    max_idx = -1
    try:
        for line_no, raw in enumerate(fh, start=1):
            if isinstance(raw, bytes):
                raw = raw.decode("utf-8")
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 2 or 3 fields, got {len(parts)}", line_no)
            try:
                u = int(parts[0]) - base
                v = int(parts[1]) - base
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
            if u < 0 or v < 0:
                raise ParseError(f"vertex index below base {base}", line_no)
            if w < 0:
                raise DomainError(f"line {line_no}: negative weight {w}")
            src.append(u)
            dst.append(v)
            wts.append(w)
            if u > max_idx:
                max_idx = u
            if v > max_idx:
                max_idx = v
    finally:
        if close:
            fh.close()
    n = max_idx + 1
    if num_vertices is not None:
        if num_vertices < n:
            raise DomainError(f"num_vertices={num_vertices} below max index {max_idx}")
        n = num_vertices
    edges = np.column_stack([src, dst]) if src else np.empty((0, 2))
    return from_edges(edges, n, weights=np.asarray(wts) if wts else None)


def write_edge_list(g: SparseGraph, path, base: int = 1) -> None:
    """Write the stored directed arcs as a tab-separated edge list."""
    src, dst, w = g.edge_arrays()
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, x in zip(src, dst, w):
            fh.write(f"{u + base}\t{v + base}\t{format(x, '.12g')}\n")


def symmetrize(g: SparseGraph, mode: str = "algebraic") -> SparseGraph:
    """Return the graph holding W = A + A'.

    ``algebraic`` sums weights of antiparallel arcs; ``logical`` records
    unit weight wherever either direction exists (useful for graphs
    whose weights are presence flags).
    """
    s = (g._csr + g._csr.T).tocsr()
    s.sum_duplicates()
    s.sort_indices()
    if mode == "logical":
        data = np.ones_like(s.data)
    elif mode == "algebraic":
        data = s.data
    else:
        raise DomainError(f"unknown symmetrize mode {mode!r}")
    return SparseGraph(g.n_vertices, s.indptr, s.indices, data, is_symmetric=True)


def degrees(g: SparseGraph) -> np.ndarray:
    """Row sums of the effective symmetric weight matrix W.

    For a directed graph W = A + A', so the degree of i is the sum of
    row i and column i of A. For an already-symmetrized graph A is W.
    """
    n = g.n_vertices
    rows = np.repeat(np.arange(n), np.diff(g.row_offsets))
    d = np.bincount(rows, weights=g.weights, minlength=n)
    if not g.is_symmetric:
        d = d + np.bincount(g.col_indices, weights=g.weights, minlength=n)
    return d


def laplacian_apply(g: SparseGraph, d: np.ndarray, x: np.ndarray, out=None) -> np.ndarray:
    """Apply the graph Laplacian to a block of vectors without forming L.

    Computes Y = diag(d) @ X - A @ X - A' @ X (the transpose term is skipped
    when the graph is stored symmetrized). ``out`` may alias a preallocated
    block distinct from ``x``.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (g.n_vertices,):
        raise ContractError("degree vector length does not match graph")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != g.n_vertices:
        raise ContractError(
            f"multivector has {x.shape[0] if x.ndim else 0} rows, graph has {g.n_vertices}"
        )
    if out is None:
        out = np.empty_like(x)
    np.multiply(d[:, None], x, out=out)
    a = g._csr
    out -= a @ x
    if not g.is_symmetric:
        out -= a.T @ x
    return out[:, 0] if squeeze else out


def apply_delta(g: SparseGraph, edges, new_n: int, weights=None) -> SparseGraph:
    """Add an edge delta, growing the vertex set to ``new_n``.

    Existing vertices keep their indices; weights of repeated edges are
    summed. Vertex deletion is not supported.
    """
    if new_n < g.n_vertices:
        raise DomainError("new_n below current vertex count")
    src, dst, w = _coerce_edges(edges, weights)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= new_n):
        raise DomainError("delta endpoint out of range")
    gs, gd, gw = g.edge_arrays()
    return from_edges(
        np.column_stack([np.concatenate([gs, src]), np.concatenate([gd, dst])]),
        new_n,
        weights=np.concatenate([gw, w]),
    )


class LaplacianOperator:
    """Matrix-free handle for L = D - (A + A') used by the eigensolver.

    Exposes ``n``, ``scale_hint`` (the largest symmetrized degree, a cheap
    proxy for the operator scale used in relative stopping tests) and
    ``apply``.
    """

    def __init__(self, g: SparseGraph, d: np.ndarray | None = None):
        self.graph = g
        self.degrees = degrees(g) if d is None else np.asarray(d, dtype=np.float64)
        self.n = g.n_vertices
        self.scale_hint = float(self.degrees.max()) if self.n else 1.0

    def apply(self, x: np.ndarray, out=None) -> np.ndarray:
        return laplacian_apply(self.graph, self.degrees, x, out=out)

    __call__ = apply
