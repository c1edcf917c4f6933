"""Spectral block partitioning of static and streaming graphs.

Submodules are imported lazily so that the command-line entry point can
pin threading environment variables before numpy is first loaded.
"""

__version__ = "0.1.0"

_EXPORTS = {
    # graph
    "SparseGraph": "graph",
    "LaplacianOperator": "graph",
    "from_edges": "graph",
    "empty_graph": "graph",
    "load_edge_list": "graph",
    "write_edge_list": "graph",
    "symmetrize": "graph",
    "degrees": "graph",
    "laplacian_apply": "graph",
    "apply_delta": "graph",
    # lobpcg
    "SolverConfig": "lobpcg",
    "EigenState": "lobpcg",
    "DenseOperator": "lobpcg",
    "random_init": "lobpcg",
    "orthonormalize": "lobpcg",
    "rayleigh_ritz": "lobpcg",
    "lobpcg_solve": "lobpcg",
    "residual_norms": "lobpcg",
    # spectral
    "Partition": "spectral",
    "GapResult": "spectral",
    "detect_gap": "spectral",
    "assign_clusters_qrcp": "spectral",
    "partition_static": "spectral",
    "block_size_for": "spectral",
    "read_labels": "spectral",
    "write_labels": "spectral",
    # streaming
    "StreamStage": "streaming",
    "StageResult": "streaming",
    "warm_start": "streaming",
    "partition_stream": "streaming",
    "load_manifest": "streaming",
    "write_manifest": "streaming",
    # metrics
    "ContingencyTable": "metrics",
    "contingency": "metrics",
    "partition_match": "metrics",
    "pairwise_recall": "metrics",
    "pairwise_precision": "metrics",
    "pair_counts": "metrics",
    "stage_record": "metrics",
    # sbm
    "SbmSpec": "sbm",
    "SbmStream": "sbm",
    "generate_sbm": "sbm",
    "generate_stream": "sbm",
    "write_dataset": "sbm",
    # errors
    "SpecpartError": "errors",
    "ParseError": "errors",
    "DomainError": "errors",
    "ContractError": "errors",
    "ConditioningError": "errors",
    "SolverError": "errors",
    "AssignmentError": "errors",
    "UndefinedMetricError": "errors",
    "StreamStageError": "errors",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    try:
        module = _EXPORTS[name]
    except KeyError:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}") from None
    import importlib

    value = getattr(importlib.import_module(f".{module}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return __all__
