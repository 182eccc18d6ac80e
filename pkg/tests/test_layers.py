"""Layer-level behavior: message passing, policy sampling, individualization,
observation, readout."""

import numpy as np
import pytest

from pfgnn.filtering import StreamFactory
from pfgnn.graphs import Graph, Permutation, complete, erdos_renyi
from pfgnn.nn.layers import (
    gin_layer,
    individualize_embed,
    mlp,
    observe,
    policy_scores,
    readout,
    sample_vertices,
)
from pfgnn.nn.params import ParamStore, init_mlp
from pfgnn.nn.tensor import Tensor, gather_rows, tensor_sum


def identity_mlp(store, prefix, d):
    """Exact identity on non-negative inputs (relu hidden is transparent)."""
    store.add(f"{prefix}.w1", np.eye(d))
    store.add(f"{prefix}.b1", np.zeros(d))
    store.add(f"{prefix}.w2", np.eye(d))
    store.add(f"{prefix}.b2", np.zeros(d))


def random_mlp(store, prefix, d_in, d_hidden, d_out, seed=0):
    init_mlp(store, np.random.default_rng(seed), prefix, d_in, d_hidden, d_out)


class TestGinLayer:
    def test_no_edges_identity(self):
        g = Graph.from_edges(4, [])
        store = ParamStore()
        store.add("g.eps", np.zeros(()))
        identity_mlp(store, "g.mlp", 2)
        h = np.abs(np.random.default_rng(0).normal(size=(4, 2)))
        out = gin_layer(store, "g", Tensor(h), g.adjacency_matrix().astype(float))
        assert np.allclose(out.data, h)

    def test_k3_all_ones(self):
        store = ParamStore()
        store.add("g.eps", np.zeros(()))
        identity_mlp(store, "g.mlp", 1)
        adj = complete(3).adjacency_matrix().astype(float)
        out = gin_layer(store, "g", Tensor(np.ones((3, 1))), adj)
        assert np.allclose(out.data, 3.0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        g = erdos_renyi(7, 0.5, 9)
        adj = g.adjacency_matrix().astype(float)
        store = ParamStore()
        store.add("g.eps", np.array(0.3))
        random_mlp(store, "g.mlp", 3, 5, 3, seed=1)
        h = rng.normal(size=(7, 3))
        perm = Permutation.random(7, rng)
        p = np.array(perm.mapping)
        padj = np.zeros_like(adj)
        for a in range(7):
            for b in range(7):
                padj[p[a], p[b]] = adj[a, b]
        ph = np.zeros_like(h)
        ph[p] = h
        out = gin_layer(store, "g", Tensor(h), adj).data
        pout = gin_layer(store, "g", Tensor(ph), padj).data
        assert np.allclose(pout[p], out, atol=1e-10)


class TestPolicy:
    def make_store(self, d=4, hidden=4):
        store = ParamStore()
        random_mlp(store, "policy", d, hidden, 1, seed=5)
        return store

    def test_identical_rows_uniform(self):
        store = self.make_store()
        h = np.tile(np.random.default_rng(1).normal(size=(1, 1, 4)), (2, 6, 1))
        adj = np.zeros((6, 6))
        lp = policy_scores(store, Tensor(h), adj)
        assert lp.data.shape == (2, 6)
        assert np.allclose(lp.data, -np.log(6), atol=1e-12)

    def test_probabilities_sum_to_one(self):
        store = self.make_store()
        h = np.random.default_rng(2).normal(size=(3, 5, 4))
        lp = policy_scores(store, Tensor(h), np.zeros((5, 5)))
        sums = np.exp(lp.data).sum(axis=-1)
        assert np.allclose(sums, 1.0, atol=1e-12)

    def test_empirical_frequency_matches_softmax(self):
        store = self.make_store()
        draws = 100_000
        row = np.random.default_rng(3).normal(size=(1, 5, 4))
        h = np.tile(row, (draws, 1, 1))
        lp = policy_scores(store, Tensor(h), np.zeros((5, 5)))
        probs = np.exp(lp.data[0])
        factory = StreamFactory(123)
        streams = [factory.particle(1, k) for k in range(draws)]
        choices, chosen_lp = sample_vertices(lp, streams)
        counts = np.bincount(choices, minlength=5)
        sigma = np.sqrt(draws * probs * (1 - probs))
        assert np.all(np.abs(counts - draws * probs) <= 3 * sigma)
        assert np.allclose(chosen_lp.data, lp.data[0][choices])

    def test_gnn_variant_and_unknown_arch(self):
        store = self.make_store()
        store.add("policy.gnn.eps", np.zeros(()))
        random_mlp(store, "policy.gnn.mlp", 4, 4, 4, seed=6)
        h = np.random.default_rng(4).normal(size=(2, 3, 4))
        adj = complete(3).adjacency_matrix().astype(float)
        lp = policy_scores(store, Tensor(h), adj, arch="gnn")
        assert lp.data.shape == (2, 3)
        with pytest.raises(ValueError, match="architecture"):
            policy_scores(store, Tensor(h), adj, arch="transformer")


class TestIndividualize:
    def test_only_chosen_rows_change(self):
        store = ParamStore()
        random_mlp(store, "trans", 3, 4, 3, seed=7)
        h = np.random.default_rng(5).normal(size=(2, 5, 3))
        rows = np.array([4, 1])
        out = individualize_embed(store, Tensor(h), rows).data
        for k in range(2):
            for v in range(5):
                if v == rows[k]:
                    continue
                assert np.array_equal(out[k, v], h[k, v])
        assert not np.array_equal(out[0, 4], h[0, 4])

    def test_ones_transform_is_identity(self):
        store = ParamStore()
        store.add("trans.w1", np.zeros((3, 4)))
        store.add("trans.b1", np.zeros(4))
        store.add("trans.w2", np.zeros((4, 3)))
        store.add("trans.b2", np.ones(3))
        h = np.random.default_rng(6).normal(size=(2, 4, 3))
        out = individualize_embed(store, Tensor(h), np.array([0, 2]))
        assert np.allclose(out.data, h)

    def test_gradient_localized_to_chosen_row(self):
        store = ParamStore()
        random_mlp(store, "trans", 3, 4, 3, seed=8)
        h = Tensor(np.random.default_rng(7).normal(size=(1, 4, 3)))
        rows = np.array([2])

        out = individualize_embed(store, h, rows)
        untouched = tensor_sum(out) - tensor_sum(gather_rows(out, rows))
        store.zero_grad()
        untouched.backward()
        assert all(np.all(g == 0) for g in store.grads().values())

        store.zero_grad()
        tensor_sum(out).backward()
        assert any(np.any(g != 0) for g in store.grads().values())


class TestObserve:
    def make_store(self, d=4):
        store = ParamStore()
        random_mlp(store, "obs", d, 4, 1, seed=9)
        return store

    def test_permutation_invariance(self):
        store = self.make_store()
        h = np.random.default_rng(8).normal(size=(3, 6, 4))
        perm = np.random.default_rng(9).permutation(6)
        a = observe(store, Tensor(h)).data
        b = observe(store, Tensor(h[:, perm])).data
        assert np.allclose(a, b, atol=1e-10)

    def test_positive_for_random_inputs(self):
        store = self.make_store()
        h = np.random.default_rng(10).normal(size=(10_000, 3, 4)) * 5
        out = observe(store, Tensor(h)).data
        assert out.shape == (10_000,)
        assert np.all(out > 0)

    def test_zero_network_gives_log_two(self):
        store = ParamStore()
        store.add("obs.w1", np.zeros((4, 4)))
        store.add("obs.b1", np.zeros(4))
        store.add("obs.w2", np.zeros((4, 1)))
        store.add("obs.b2", np.zeros(1))
        h = np.random.default_rng(11).normal(size=(5, 3, 4))
        out = observe(store, Tensor(h)).data
        assert np.allclose(out, np.log(2.0), atol=1e-12)


class TestReadout:
    def test_single_state_degenerate_concat(self):
        store = ParamStore()
        random_mlp(store, "rho", 3, 4, 2, seed=12)
        m = np.random.default_rng(12).normal(size=(5, 3))
        out = readout(store, [Tensor(m)])
        direct = mlp(store, "rho", Tensor(m.sum(axis=0)))
        assert np.allclose(out.data, direct.data)

    def test_inconsistent_width_rejected(self):
        store = ParamStore()
        random_mlp(store, "rho", 7, 4, 2, seed=13)
        states = [Tensor(np.ones((4, 3))), Tensor(np.ones((4, 4)))]
        with pytest.raises(ValueError, match="width"):
            readout(store, states)

    def test_empty_rejected(self):
        store = ParamStore()
        with pytest.raises(ValueError):
            readout(store, [])

    def test_ten_class_shape(self):
        store = ParamStore()
        random_mlp(store, "rho", 4 * 2, 8, 10, seed=14)
        states = [
            Tensor(np.random.default_rng(15).normal(size=(41, 4))) for _ in range(2)
        ]
        assert readout(store, states).data.shape == (10,)
