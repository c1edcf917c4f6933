import json

import numpy as np
import pytest

from specpart.errors import DomainError, StreamStageError
from specpart.graph import apply_delta, empty_graph, from_edges, write_edge_list
from specpart.lobpcg import SolverConfig, lobpcg_solve, random_init
from specpart.graph import LaplacianOperator
from specpart.metrics import contingency, partition_match
from specpart.streaming import (
    StageResult,
    StreamStage,
    load_manifest,
    partition_stream,
    warm_start,
    write_manifest,
)

from oracles import best_match_fraction


def two_clique_edges():
    edges = []
    for base in (0, 6):
        for i in range(6):
            for j in range(i + 1, 6):
                edges.append((base + i, base + j))
    return np.array(edges, dtype=np.int64)


def emerging_stages(edges, n, parts, seed=0):
    perm = np.random.default_rng(seed).permutation(len(edges))
    chunks = np.array_split(perm, parts)
    return [
        StreamStage(index=i + 1, mode="emerging", edge_delta=edges[c], n_after=n)
        for i, c in enumerate(chunks)
    ]


CFG = SolverConfig(block_size=4, tol=1e-8, max_iter=200, seed=3)
TRUTH12 = np.array([0] * 6 + [1] * 6)


class TestStreamStage:
    def test_bad_mode(self):
        with pytest.raises(DomainError):
            StreamStage(index=1, mode="trickle", edge_delta=np.empty((0, 2)), n_after=3)

    def test_bad_index(self):
        with pytest.raises(DomainError):
            StreamStage(index=0, mode="emerging", edge_delta=np.empty((0, 2)), n_after=3)

    def test_endpoint_out_of_range(self):
        with pytest.raises(DomainError):
            StreamStage(index=1, mode="emerging", edge_delta=np.array([[0, 5]]), n_after=3)

    def test_negative_weight(self):
        with pytest.raises(DomainError):
            StreamStage(
                index=1, mode="emerging", edge_delta=np.array([[0, 1]]),
                n_after=3, edge_weights=np.array([-1.0]),
            )


class TestWarmStart:
    def test_identity_when_same_size(self):
        g = from_edges(two_clique_edges(), 12)
        x0 = random_init(12, 3, seed=0)
        state = lobpcg_solve(LaplacianOperator(g), x0, SolverConfig(block_size=3, tol=1e-6, max_iter=100))
        out = warm_start(state, 12)
        assert np.array_equal(out, state.vectors)

    def test_zero_fill(self):
        g = from_edges([(0, 1), (1, 2)], 3)
        state = lobpcg_solve(
            LaplacianOperator(g), random_init(3, 2, seed=1),
            SolverConfig(block_size=2, tol=1e-8, max_iter=50),
        )
        out = warm_start(state, 5)
        assert out.shape == (5, 2)
        assert np.array_equal(out[:3], state.vectors)
        assert np.all(out[3:] == 0.0)

    def test_random_fill_seeded(self):
        g = from_edges([(0, 1), (1, 2)], 3)
        state = lobpcg_solve(
            LaplacianOperator(g), random_init(3, 2, seed=1),
            SolverConfig(block_size=2, tol=1e-8, max_iter=50),
        )
        a = warm_start(state, 6, fill="random", seed=9)
        b = warm_start(state, 6, fill="random", seed=9)
        assert np.array_equal(a, b)
        assert np.any(a[3:] != 0.0)

    def test_shrink_rejected(self):
        g = from_edges([(0, 1), (1, 2)], 3)
        state = lobpcg_solve(
            LaplacianOperator(g), random_init(3, 2, seed=1),
            SolverConfig(block_size=2, tol=1e-8, max_iter=50),
        )
        with pytest.raises(DomainError):
            warm_start(state, 2)

    def test_bad_fill(self):
        g = from_edges([(0, 1), (1, 2)], 3)
        state = lobpcg_solve(
            LaplacianOperator(g), random_init(3, 2, seed=1),
            SolverConfig(block_size=2, tol=1e-8, max_iter=50),
        )
        with pytest.raises(DomainError):
            warm_start(state, 5, fill="interpolate")

    def test_resolve_from_warm_converges_fast(self):
        g = from_edges(two_clique_edges(), 12)
        op = LaplacianOperator(g)
        state = lobpcg_solve(op, random_init(12, 3, seed=2), SolverConfig(block_size=3, tol=1e-4, max_iter=100))
        again = lobpcg_solve(op, warm_start(state, 12), SolverConfig(block_size=3, tol=1e-4, max_iter=100))
        assert again.iterations <= 2


class TestPartitionStream:
    def test_stage_one_same_for_both_modes(self):
        stages = emerging_stages(two_clique_edges(), 12, 2)
        w = partition_stream(empty_graph(12), stages, CFG, init_mode="warm")
        r = partition_stream(empty_graph(12), stages, CFG, init_mode="random")
        assert np.array_equal(w[0].partition.labels, r[0].partition.labels)
        assert np.array_equal(w[0].eigenstate.eigenvalues, r[0].eigenstate.eigenvalues)
        assert w[0].init_mode == "random"
        assert r[0].init_mode == "random"
        assert w[1].init_mode == "warm"

    def test_empty_second_stage_is_fixed_point(self):
        edges = two_clique_edges()
        stages = [
            StreamStage(index=1, mode="emerging", edge_delta=edges, n_after=12),
            StreamStage(index=2, mode="emerging", edge_delta=np.empty((0, 2), np.int64), n_after=12),
        ]
        res = partition_stream(empty_graph(12), stages, CFG, init_mode="warm", k_expected=2)
        assert res[1].iterations <= 2
        assert np.array_equal(res[0].partition.labels, res[1].partition.labels)

    def test_final_partition_recovers_blocks(self):
        stages = emerging_stages(two_clique_edges(), 12, 3)
        for mode in ("warm", "random"):
            res = partition_stream(empty_graph(12), stages, CFG, init_mode=mode, k_expected=2)
            assert res[-1].gap.k == 2
            assert best_match_fraction(TRUTH12, res[-1].partition.labels) == 1.0

    def test_snowball_growth(self):
        # bridge edges keep the arriving block reachable from the seeded
        # rows, which zero fill needs to explore the new vertices
        edges = np.vstack([two_clique_edges(), [[0, 6], [1, 7]]])
        first = edges[np.maximum(edges[:, 0], edges[:, 1]) < 6]
        rest = edges[np.maximum(edges[:, 0], edges[:, 1]) >= 6]
        stages = [
            StreamStage(index=1, mode="snowball", edge_delta=first, n_after=6),
            StreamStage(index=2, mode="snowball", edge_delta=rest, n_after=12),
        ]
        res = partition_stream(empty_graph(0), stages, SolverConfig(block_size=3, tol=1e-8, max_iter=200, seed=5), init_mode="warm")
        assert res[0].partition.n == 6
        assert res[1].partition.n == 12
        assert best_match_fraction(TRUTH12, res[1].partition.labels) == 1.0

    def test_snowball_disconnected_batch_needs_random_fill(self):
        # a batch with no links to the old vertices leaves zero-filled
        # rows invisible to the solve; Gaussian fill restores coverage
        edges = two_clique_edges()
        first = edges[np.maximum(edges[:, 0], edges[:, 1]) < 6]
        rest = edges[np.maximum(edges[:, 0], edges[:, 1]) >= 6]
        stages = [
            StreamStage(index=1, mode="snowball", edge_delta=first, n_after=6),
            StreamStage(index=2, mode="snowball", edge_delta=rest, n_after=12),
        ]
        cfg = SolverConfig(block_size=3, tol=1e-8, max_iter=200, seed=5)
        res = partition_stream(empty_graph(0), stages, cfg, init_mode="warm", fill="random")
        assert best_match_fraction(TRUTH12, res[1].partition.labels) == 1.0

    def test_iterations_within_budget(self):
        stages = emerging_stages(two_clique_edges(), 12, 4)
        res = partition_stream(empty_graph(12), stages, CFG, init_mode="warm")
        for st in res:
            assert st.iterations <= CFG.max_iter
            assert isinstance(st, StageResult)
            assert st.wall_time >= 0.0

    def test_run_is_reproducible(self):
        stages = emerging_stages(two_clique_edges(), 12, 3)
        a = partition_stream(empty_graph(12), stages, CFG, init_mode="warm")
        b = partition_stream(empty_graph(12), stages, CFG, init_mode="warm")
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.partition.labels, rb.partition.labels)
            assert np.array_equal(ra.eigenstate.vectors, rb.eigenstate.vectors)

    def test_cumulative_graph_matches_one_shot(self):
        edges = two_clique_edges()
        stages = emerging_stages(edges, 12, 3)
        g = empty_graph(12)
        for st in stages:
            g = apply_delta(g, st.edge_delta, st.n_after)
        assert np.allclose(g.to_dense(), from_edges(edges, 12).to_dense())

    def test_emerging_must_keep_n_constant(self):
        edges = two_clique_edges()
        stages = [
            StreamStage(index=1, mode="emerging", edge_delta=edges[:10], n_after=12),
            StreamStage(index=2, mode="emerging", edge_delta=edges[10:], n_after=13),
        ]
        with pytest.raises(DomainError):
            partition_stream(empty_graph(12), stages, CFG)

    def test_indices_must_be_consecutive(self):
        edges = two_clique_edges()
        stages = [
            StreamStage(index=1, mode="emerging", edge_delta=edges[:10], n_after=12),
            StreamStage(index=3, mode="emerging", edge_delta=edges[10:], n_after=12),
        ]
        with pytest.raises(DomainError):
            partition_stream(empty_graph(12), stages, CFG)

    def test_mixed_modes_rejected(self):
        edges = two_clique_edges()
        stages = [
            StreamStage(index=1, mode="emerging", edge_delta=edges[:10], n_after=12),
            StreamStage(index=2, mode="snowball", edge_delta=edges[10:], n_after=12),
        ]
        with pytest.raises(DomainError):
            partition_stream(empty_graph(12), stages, CFG)

    def test_no_stages_rejected(self):
        with pytest.raises(DomainError):
            partition_stream(empty_graph(12), [], CFG)

    def test_block_too_wide_rejected(self):
        stages = emerging_stages(two_clique_edges(), 12, 2)
        wide = SolverConfig(block_size=30, tol=1e-4, max_iter=10)
        with pytest.raises(DomainError):
            partition_stream(empty_graph(12), stages, wide)

    def test_stage_error_carries_completed_results(self):
        stages = emerging_stages(two_clique_edges(), 12, 3)
        with pytest.raises(StreamStageError) as exc:
            partition_stream(empty_graph(12), stages, CFG, init_mode="warm", fill="bogus")
        # stage 1 is random-initialized, so the bad fill only bites at stage 2
        assert exc.value.stage == 2
        assert len(exc.value.results) == 1
        assert exc.value.results[0].stage == 1


class TestManifest:
    def _write_stage_files(self, tmp_path, parts=2, cumulative=False):
        edges = two_clique_edges()
        perm = np.random.default_rng(1).permutation(len(edges))
        chunks = np.array_split(perm, parts)
        entries = []
        upto = np.empty((0, 2), dtype=np.int64)
        for i, c in enumerate(chunks, start=1):
            name = f"stage_{i:02d}.tsv"
            upto = np.vstack([upto, edges[c]])
            body = upto if cumulative else edges[c]
            write_edge_list(from_edges(body, 12), tmp_path / name)
            entries.append((name, 12))
        return entries

    def test_roundtrip(self, tmp_path):
        entries = self._write_stage_files(tmp_path)
        man = tmp_path / "manifest.json"
        write_manifest(man, "emerging", entries, truth="truth.tsv", n_initial=12)
        initial, stages, truth_path, mode = load_manifest(man)
        assert mode == "emerging"
        assert initial.n_vertices == 12
        assert len(stages) == 2
        assert truth_path == str(tmp_path / "truth.tsv")
        res = partition_stream(initial, stages, CFG, k_expected=2)
        assert best_match_fraction(TRUTH12, res[-1].partition.labels) == 1.0

    def test_cumulative_mode(self, tmp_path):
        entries = self._write_stage_files(tmp_path, cumulative=True)
        man = tmp_path / "manifest.json"
        write_manifest(man, "emerging", entries, n_initial=12, cumulative=True)
        initial, stages, _, _ = load_manifest(man)
        total = sum(s.edge_delta.shape[0] for s in stages)
        assert total == len(two_clique_edges())
        res = partition_stream(initial, stages, CFG, k_expected=2)
        assert best_match_fraction(TRUTH12, res[-1].partition.labels) == 1.0

    def test_cumulative_rejects_edge_removal(self, tmp_path):
        edges = two_clique_edges()
        write_edge_list(from_edges(edges, 12), tmp_path / "s1.tsv")
        write_edge_list(from_edges(edges[:10], 12), tmp_path / "s2.tsv")
        man = tmp_path / "manifest.json"
        write_manifest(man, "emerging", [("s1.tsv", 12), ("s2.tsv", 12)], n_initial=12, cumulative=True)
        with pytest.raises(DomainError):
            load_manifest(man)

    def test_shrinking_vertex_count_rejected(self, tmp_path):
        edges = two_clique_edges()
        write_edge_list(from_edges(edges[:5], 12), tmp_path / "s1.tsv")
        write_edge_list(from_edges(edges[5:10], 10), tmp_path / "s2.tsv")
        man = tmp_path / "manifest.json"
        write_manifest(man, "snowball", [("s1.tsv", 12), ("s2.tsv", 10)])
        with pytest.raises(DomainError):
            load_manifest(man)

    def test_invalid_json(self, tmp_path):
        man = tmp_path / "manifest.json"
        man.write_text("{not json")
        with pytest.raises(DomainError):
            load_manifest(man)

    def test_unknown_mode(self, tmp_path):
        man = tmp_path / "manifest.json"
        man.write_text(json.dumps({"mode": "burst", "stages": [{"edges": "x", "n_after": 1}]}))
        with pytest.raises(DomainError):
            load_manifest(man)

    def test_missing_stages(self, tmp_path):
        man = tmp_path / "manifest.json"
        man.write_text(json.dumps({"mode": "emerging", "stages": []}))
        with pytest.raises(DomainError):
            load_manifest(man)

    def test_malformed_stage_entry(self, tmp_path):
        man = tmp_path / "manifest.json"
        man.write_text(json.dumps({"mode": "emerging", "stages": [{"edges": "x"}]}))
        with pytest.raises(DomainError):
            load_manifest(man)
