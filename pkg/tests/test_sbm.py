import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specpart.errors import DomainError
from specpart.graph import load_edge_list
from specpart.lobpcg import SolverConfig
from specpart.metrics import contingency, partition_match
from specpart.sbm import SbmSpec, generate_sbm, generate_stream, write_dataset
from specpart.spectral import read_labels
from specpart.streaming import load_manifest, partition_stream


def arc_set(g):
    src, dst, _ = g.edge_arrays()
    return set(zip(src.tolist(), dst.tolist()))


class TestSbmSpec:
    def test_near_equal_default_sizes(self):
        spec = SbmSpec(n=10, k=3, p_in=0.5, p_out=0.1)
        assert spec.block_sizes == (4, 3, 3)
        assert spec.truth_labels.tolist() == [0] * 4 + [1] * 3 + [2] * 3

    def test_explicit_sizes(self):
        spec = SbmSpec(n=10, k=2, p_in=0.5, p_out=0.1, block_sizes=(7, 3))
        assert spec.truth_labels.tolist() == [0] * 7 + [1] * 3

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n=10, k=0, p_in=0.5, p_out=0.1),
            dict(n=2, k=3, p_in=0.5, p_out=0.1),
            dict(n=10, k=2, p_in=0.1, p_out=0.5),
            dict(n=10, k=2, p_in=1.5, p_out=0.1),
            dict(n=10, k=2, p_in=0.5, p_out=-0.1),
            dict(n=10, k=2, p_in=0.5, p_out=0.1, block_sizes=(5,)),
            dict(n=10, k=2, p_in=0.5, p_out=0.1, block_sizes=(10, 0)),
            dict(n=10, k=2, p_in=0.5, p_out=0.1, block_sizes=(5, 6)),
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(DomainError):
            SbmSpec(**kwargs)

    def test_equal_probabilities_allowed(self):
        SbmSpec(n=10, k=2, p_in=0.0, p_out=0.0)


class TestGenerateSbm:
    def test_full_intra_zero_inter_gives_cliques(self):
        g, truth = generate_sbm(SbmSpec(n=30, k=3, p_in=1.0, p_out=0.0))
        d = g.to_dense()
        sym = d + d.T
        labels = truth.labels
        for i in range(30):
            for j in range(30):
                want = 1.0 if (labels[i] == labels[j] and i != j) else 0.0
                assert sym[i, j] == want
        assert truth.k == 3

    def test_zero_probabilities_give_empty_graph(self):
        g, _ = generate_sbm(SbmSpec(n=10, k=2, p_in=0.0, p_out=0.0))
        assert g.nnz == 0

    def test_edge_count_near_binomial_mean(self):
        spec = SbmSpec(n=1000, k=4, p_in=0.1, p_out=0.01, seed=2)
        g, _ = generate_sbm(spec)
        sizes = np.asarray(spec.block_sizes)
        intra = int((sizes * (sizes - 1) // 2).sum())
        inter = 1000 * 999 // 2 - intra
        mean = intra * 0.1 + inter * 0.01
        var = intra * 0.1 * 0.9 + inter * 0.01 * 0.99
        assert abs(g.nnz - mean) <= 5 * np.sqrt(var)

    def test_seed_determinism(self):
        spec = SbmSpec(n=200, k=3, p_in=0.2, p_out=0.02, seed=11)
        a, ta = generate_sbm(spec)
        b, tb = generate_sbm(spec)
        assert arc_set(a) == arc_set(b)
        assert np.array_equal(ta.labels, tb.labels)

    def test_different_seeds_differ(self):
        base = dict(n=200, k=3, p_in=0.2, p_out=0.02)
        a, _ = generate_sbm(SbmSpec(seed=1, **base))
        b, _ = generate_sbm(SbmSpec(seed=2, **base))
        assert arc_set(a) != arc_set(b)

    @given(
        st.integers(2, 4),
        st.integers(0, 1000),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
    )
    @settings(max_examples=30)
    def test_arcs_canonical_and_in_range(self, k, seed, pa, pb):
        p_in, p_out = max(pa, pb), min(pa, pb)
        spec = SbmSpec(n=6 * k, k=k, p_in=p_in, p_out=p_out, seed=seed)
        g, truth = generate_sbm(spec)
        src, dst, w = g.edge_arrays()
        assert np.all(src < dst)
        assert src.size == 0 or (src.min() >= 0 and dst.max() < spec.n)
        assert np.all(w == 1.0)
        assert len(arc_set(g)) == g.nnz
        assert truth.n == spec.n


class TestGenerateStream:
    SPEC = SbmSpec(n=120, k=3, p_in=0.4, p_out=0.02, seed=7)

    def test_emerging_slices_partition_the_edges(self):
        base, _ = generate_sbm(self.SPEC)
        stream = generate_stream(self.SPEC, "emerging", 4)
        deltas = [s.edge_delta for s in stream.stages]
        union = set()
        total = 0
        for d in deltas:
            union |= set(map(tuple, d.tolist()))
            total += len(d)
        assert union == arc_set(base)
        assert total == len(union)
        assert all(s.n_after == self.SPEC.n for s in stream.stages)
        assert stream.initial.n_vertices == self.SPEC.n
        assert [s.index for s in stream.stages] == [1, 2, 3, 4]

    def test_emerging_unpacks_as_triple(self):
        initial, stages, truth = generate_stream(self.SPEC, "emerging", 2)
        assert initial.n_vertices == truth.n == self.SPEC.n
        assert len(stages) == 2

    def test_snowball_reveal_shape(self):
        stream = generate_stream(self.SPEC, "snowball", 4)
        n_afters = [s.n_after for s in stream.stages]
        assert n_afters == sorted(n_afters)
        assert n_afters[-1] == self.SPEC.n
        assert stream.initial.n_vertices == 0
        for prev, stage in zip([0] + n_afters, stream.stages):
            if stage.edge_delta.size:
                hi = stage.edge_delta.max(axis=1)
                assert hi.max() < stage.n_after
                # each edge appears at the first stage where visible
                assert hi.min() >= prev

    def test_snowball_union_matches_base_through_order(self):
        base, truth = generate_sbm(self.SPEC)
        stream = generate_stream(self.SPEC, "snowball", 4)
        rel = np.vstack([s.edge_delta for s in stream.stages])
        orig = np.sort(stream.vertex_order[rel], axis=1)
        assert set(map(tuple, orig.tolist())) == arc_set(base)
        assert np.array_equal(stream.truth.labels, truth.labels[stream.vertex_order])

    def test_snowball_stratified_covers_blocks_early(self):
        stream = generate_stream(self.SPEC, "snowball", 4)
        first = stream.truth.labels[: stream.stages[0].n_after]
        assert set(first.tolist()) == set(range(self.SPEC.k))

    def test_snowball_unstratified_runs(self):
        stream = generate_stream(self.SPEC, "snowball", 4, stratified=False)
        assert stream.stages[-1].n_after == self.SPEC.n

    def test_stream_determinism(self):
        a = generate_stream(self.SPEC, "snowball", 3)
        b = generate_stream(self.SPEC, "snowball", 3)
        assert np.array_equal(a.vertex_order, b.vertex_order)
        for sa, sb in zip(a.stages, b.stages):
            assert np.array_equal(sa.edge_delta, sb.edge_delta)

    def test_too_few_stages(self):
        with pytest.raises(DomainError):
            generate_stream(self.SPEC, "emerging", 1)

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            generate_stream(self.SPEC, "burst", 3)

    @pytest.mark.parametrize("mode", ["emerging", "snowball"])
    def test_replay_recovers_truth(self, mode):
        spec = SbmSpec(n=90, k=3, p_in=0.5, p_out=0.01, seed=3)
        stream = generate_stream(spec, mode, 3)
        cfg = SolverConfig(block_size=5, tol=1e-6, max_iter=300, seed=1)
        res = partition_stream(stream.initial, stream.stages, cfg, k_expected=3)
        pm = partition_match(contingency(stream.truth, res[-1].partition))
        assert pm == 1.0


class TestWriteDataset:
    def test_static_files(self, tmp_path):
        spec = SbmSpec(n=40, k=2, p_in=0.6, p_out=0.05, seed=5)
        info = write_dataset(tmp_path, spec)
        g = load_edge_list(info["graph"], num_vertices=40)
        truth = read_labels(info["truth"])
        assert g.n_vertices == 40
        assert g.nnz == info["n_edges"]
        assert truth.k == 2

    def test_stream_dataset_roundtrip(self, tmp_path):
        spec = SbmSpec(n=60, k=3, p_in=0.5, p_out=0.02, seed=4)
        info = write_dataset(tmp_path, spec, mode="snowball", stages=3)
        initial, stages, truth_path, mode = load_manifest(info["manifest"])
        assert mode == "snowball"
        truth = read_labels(truth_path)
        cfg = SolverConfig(block_size=5, tol=1e-6, max_iter=300, seed=1)
        res = partition_stream(initial, stages, cfg, k_expected=3)
        assert partition_match(contingency(truth, res[-1].partition)) == 1.0

    def test_manifest_is_json(self, tmp_path):
        spec = SbmSpec(n=30, k=2, p_in=0.5, p_out=0.05, seed=1)
        info = write_dataset(tmp_path, spec, mode="emerging", stages=2)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["mode"] == "emerging"
        assert len(doc["stages"]) == 2

    def test_stream_needs_stage_count(self, tmp_path):
        with pytest.raises(DomainError):
            write_dataset(tmp_path, SbmSpec(n=30, k=2, p_in=0.5, p_out=0.05), mode="emerging")
