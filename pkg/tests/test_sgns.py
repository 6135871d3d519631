import itertools

import numpy as np
import pytest

from multihot.evaluate import cosine_similarity
from multihot.graph import Graph, generate_sbm
from multihot.ops import grad_check, pack_arrays, unpack_arrays
from multihot.sgns import SkipGramEmbedding, batch_loss_grads, walk_pairs


def two_triangles():
    return Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def seeded_init(seed, n_nodes, dim):
    # reproduce the center-table initialization for a given estimator seed
    _, init_seed, _ = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(init_seed)
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_nodes, dim))


class TestWalkPairs:
    def test_window_one_on_a_path(self):
        pairs = walk_pairs([[0, 1, 2]], window=1)
        assert sorted(map(tuple, pairs.tolist())) == [(0, 1), (1, 0), (1, 2), (2, 1)]

    def test_window_must_be_positive(self):
        with pytest.raises(ValueError, match="window"):
            walk_pairs([[0, 1]], window=0)


class TestPairLoss:
    def test_gradients_pass_grad_check(self):
        rng = np.random.default_rng(0)
        centers = rng.normal(size=(4, 5))
        contexts = rng.normal(size=(4, 5))
        c = np.array([1])
        x = np.array([2])
        negs = np.array([[0, 3]])
        point, shapes = pack_arrays([centers, contexts])

        def loss_of(vec):
            v, u = unpack_arrays(vec, shapes)
            return batch_loss_grads(v, u, c, x, negs)[0]

        _, d_centers, d_contexts = batch_loss_grads(centers, contexts, c, x, negs)
        analytic, _ = pack_arrays([d_centers, d_contexts])
        assert grad_check(loss_of, analytic, point) < 1e-4

    def test_full_batch_descent_is_non_increasing_on_a_toy(self):
        g, _ = generate_sbm([10, 10], 0.5, 0.1, seed=1)
        rng = np.random.default_rng(2)
        pairs = walk_pairs([[u, v] for u, v in g.edges()], window=1)
        centers = rng.uniform(-0.05, 0.05, size=(g.n_nodes, 8))
        contexts = np.zeros((g.n_nodes, 8))
        negs = rng.integers(0, g.n_nodes, size=(pairs.shape[0], 3))
        losses = []
        for _ in range(30):
            loss, d_v, d_u = batch_loss_grads(centers, contexts, pairs[:, 0], pairs[:, 1], negs)
            losses.append(loss)
            centers -= 0.05 * d_v
            contexts -= 0.05 * d_u
        assert losses[-1] < losses[0]


class TestSkipGramEmbedding:
    def test_two_triangles_cluster(self):
        emb = SkipGramEmbedding(
            dim=8, epochs=50, walks_per_node=20, walk_length=20, learning_rate=0.05, seed=0
        ).fit_transform(two_triangles())
        intra, inter = [], []
        for a, b in itertools.combinations(range(6), 2):
            sim = cosine_similarity(emb[a], emb[b])
            (intra if (a < 3) == (b < 3) else inter).append(sim)
        assert np.mean(intra) > np.mean(inter)

    def test_zero_epochs_returns_seeded_initialization(self):
        g = two_triangles()
        model = SkipGramEmbedding(dim=6, epochs=0, seed=7).fit(g)
        assert np.array_equal(model.embedding_, seeded_init(7, g.n_nodes, 6))

    def test_isolated_nodes_keep_their_initialization(self):
        g = Graph(4, [(0, 1), (1, 2)])  # node 3 isolated
        model = SkipGramEmbedding(dim=6, epochs=3, walks_per_node=4, walk_length=6, seed=5).fit(g)
        init = seeded_init(5, g.n_nodes, 6)
        assert np.array_equal(model.embedding_[3], init[3])
        assert not np.array_equal(model.embedding_[0], init[0])

    def test_edgeless_graph_rejected(self):
        with pytest.raises(ValueError, match="no training pairs"):
            SkipGramEmbedding(dim=4).fit(Graph(5))

    def test_output_shape_and_determinism(self):
        g, _ = generate_sbm([6, 6], 0.6, 0.1, seed=3)
        a = SkipGramEmbedding(dim=10, epochs=2, seed=9).fit_transform(g)
        b = SkipGramEmbedding(dim=10, epochs=2, seed=9).fit_transform(g)
        assert a.shape == (12, 10)
        assert np.array_equal(a, b)

    def test_transform_looks_up_rows(self):
        g = two_triangles()
        model = SkipGramEmbedding(dim=4, epochs=1, seed=0).fit(g)
        assert np.array_equal(model.transform([2, 0]), model.embedding_[[2, 0]])

    def test_dim_must_be_at_least_two(self):
        with pytest.raises(ValueError, match="dim"):
            SkipGramEmbedding(dim=1).fit(two_triangles())
