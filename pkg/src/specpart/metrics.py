"""Partition quality against a known truth.

All three scores are computed from one contingency table: optimal
partition matching (best label alignment found by an exact assignment
solver), pairwise recall and pairwise precision (co-clustered pair
counting). Undefined cases raise instead of returning 0 so harnesses
cannot average nonsense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError, UndefinedMetricError
from .spectral import Partition

__all__ = [
    "ContingencyTable",
    "contingency",
    "partition_match",
    "match_count",
    "pair_counts",
    "pairwise_recall",
    "pairwise_precision",
    "stage_record",
]


@dataclass(frozen=True)
class ContingencyTable:
    """counts[a, b] = number of vertices in truth block a and found block b."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2:
            raise ContractError("counts must be a 2-d matrix")
        if counts.size and counts.min() < 0:
            raise ContractError("counts must be non-negative")
        if int(counts.sum()) != self.n:
            raise ContractError("counts must sum to n")
        counts.setflags(write=False)

    @property
    def truth_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def found_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def _labels_of(p) -> np.ndarray:
    if isinstance(p, Partition):
        return p.labels
    return Partition.from_labels(p).labels


def contingency(truth, found) -> ContingencyTable:
    """Cross-tabulate two partitions of the same vertex set."""
    t = _labels_of(truth)
    f = _labels_of(found)
    if t.size != f.size:
        raise ContractError(f"partition lengths differ: {t.size} vs {f.size}")
    kt = int(t.max()) + 1 if t.size else 1
    kf = int(f.max()) + 1 if f.size else 1
    counts = np.bincount(t * kf + f, minlength=kt * kf).reshape(kt, kf)
    return ContingencyTable(counts=counts, n=int(t.size))


def match_count(table: ContingencyTable) -> int:
    """Vertices matched under the best injective block alignment."""
    counts = table.counts
    side = max(counts.shape)
    padded = np.zeros((side, side), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return int(padded[rows, cols].sum())


def partition_match(table: ContingencyTable) -> float:
    """Fraction of vertices matched under the best block alignment (PM)."""
    if table.n == 0:
        raise UndefinedMetricError("partition match of an empty vertex set")
    return match_count(table) / table.n


def pair_counts(table: ContingencyTable):
    """Exact integer pair counts (both, truth, found).

    ``both`` counts unordered vertex pairs co-clustered in both
    partitions; ``truth`` and ``found`` count pairs co-clustered in the
    respective partition alone.
    """

    def choose2(v):
        v = v.astype(np.int64)
        return int((v * (v - 1) // 2).sum())

    both = choose2(table.counts.ravel())
    return both, choose2(table.truth_sizes), choose2(table.found_sizes)


def pairwise_recall(table: ContingencyTable) -> float:
    """Fraction of same-truth-block pairs that are co-clustered in found (PR)."""
    both, truth_pairs, _ = pair_counts(table)
    if truth_pairs == 0:
        raise UndefinedMetricError("no truth block has two vertices; recall undefined")
    return both / truth_pairs

def pairwise_precision(table: ContingencyTable) -> float:
    """Fraction of same-found-block pairs that share a truth block (PP)."""
    both, _, found_pairs = pair_counts(table)
    if found_pairs == 0:
        raise UndefinedMetricError("no found block has two vertices; precision undefined")
    return both / found_pairs


def stage_record(
    stage: int,
    seconds: float,
    k_found: int,
    iterations: int,
    init_mode: str,
    truth=None,
    found=None,
) -> dict:
    """One JSON-ready evaluation record; metric fields are None without truth."""
    pm = pr = pp = None
    if truth is not None and found is not None:
        table = contingency(truth, found)
        pm = partition_match(table)
        pr = pairwise_recall(table)
        pp = pairwise_precision(table)
    return {
        "stage": int(stage),
        "seconds": float(seconds),
        "PM": pm,
        "PR": pr,
        "PP": pp,
        "k_found": int(k_found),
        "iterations": int(iterations),
        "init_mode": init_mode,
    }
