import numpy as np
import pytest

from multihot.codebook import (
    Codebook,
    CompressorParams,
    harden,
    reconstruct_from_codebook,
)
from multihot.compress import (
    DenseLayer,
    EmbeddingCompressor,
    encode_latent,
    init_encoder,
    reconstruction_loss_and_grads,
    soft_forward,
)
from multihot.ops import (
    grad_check,
    mse_loss,
    pack_arrays,
    sample_standard_gumbel,
    unpack_arrays,
)


def toy_model(seed=0, latent=2, n_basis=4, code_len=2, dim=3):
    rng = np.random.default_rng(seed)
    from multihot.codebook import init_compressor

    encoder = init_encoder(rng, dim, [latent, latent])
    comp = init_compressor(rng, latent, n_basis, code_len, dim)
    return encoder, comp, rng


class TestEncoder:
    def test_zero_weights_give_zero_latent(self):
        layers = [
            DenseLayer(np.zeros((3, 2)), np.zeros(2)),
            DenseLayer(np.zeros((2, 2)), np.zeros(2)),
        ]
        assert np.array_equal(encode_latent(np.ones((4, 3)), layers), np.zeros((4, 2)))

    def test_single_layer_closed_form(self):
        layers = [DenseLayer(0.1 * np.eye(3), np.zeros(3))]
        x = np.array([[1.0, -2.0, 0.5]])
        assert np.allclose(encode_latent(x, layers), np.tanh(0.1 * x))

    def test_shape_mismatch(self):
        layers = [DenseLayer(np.zeros((3, 2)), np.zeros(2))]
        with pytest.raises(ValueError, match="shape"):
            encode_latent(np.ones((1, 4)), layers)


class TestSoftForward:
    def test_degenerate_codebook_ignores_input(self):
        encoder, _, rng = toy_model(latent=2, dim=3)
        from multihot.codebook import init_compressor

        comp = init_compressor(rng, 2, 1, 1, 3)
        noise = sample_standard_gumbel((2, 1, 1), rng)
        x = rng.normal(size=(2, 3))
        out, _, _ = soft_forward(x, encoder, comp, 1.0, noise=noise)
        assert np.allclose(out[0], comp.basis[0])
        assert np.allclose(out[1], comp.basis[0])

    def test_low_temperature_matches_hard_reconstruction(self):
        encoder, comp, rng = toy_model(seed=0)
        x = rng.normal(size=(5, 3))
        noise = sample_standard_gumbel((5, 2, 4), rng)
        out, _, cache = soft_forward(x, encoder, comp, 0.01, noise=noise)
        codes = harden(cache.soft)
        cb = Codebook(basis=comp.basis, codes=codes)
        for i in range(5):
            assert np.allclose(out[i], reconstruct_from_codebook(cb, i), atol=1e-3)

    def test_loss_is_finite_for_random_inputs(self):
        encoder, comp, rng = toy_model(seed=4)
        x = rng.normal(size=(6, 3)) * 5
        noise = sample_standard_gumbel((6, 2, 4), rng)
        loss, _, _ = reconstruction_loss_and_grads(x, encoder, comp, 0.7, noise)
        assert np.isfinite(loss)


class TestFullGradient:
    def test_every_parameter_passes_grad_check(self):
        # 10 rows, dim 3, 2-layer encoder to latent 2, 4 basis rows, 2 picks
        encoder, comp, rng = toy_model(seed=5)
        x = rng.normal(size=(10, 3))
        noise = sample_standard_gumbel((10, 2, 4), rng)
        tau = 0.8
        arrays = [l.weight for l in encoder] + [l.bias for l in encoder]
        arrays += [comp.weight, comp.bias, comp.basis]
        point, shapes = pack_arrays(arrays)
        n_layers = len(encoder)

        def loss_of(vec):
            parts = unpack_arrays(vec, shapes)
            trial_encoder = [
                DenseLayer(parts[i], parts[n_layers + i]) for i in range(n_layers)
            ]
            trial_comp = CompressorParams(
                weight=parts[2 * n_layers],
                bias=parts[2 * n_layers + 1],
                basis=parts[2 * n_layers + 2],
                code_len=comp.code_len,
            )
            out, _, _ = soft_forward(x, trial_encoder, trial_comp, tau, noise=noise)
            return mse_loss(x, out)

        loss, enc_grads, comp_grads = reconstruction_loss_and_grads(x, encoder, comp, tau, noise)
        analytic, _ = pack_arrays(
            [g for g, _ in enc_grads]
            + [g for _, g in enc_grads]
            + [comp_grads["weight"], comp_grads["bias"], comp_grads["basis"]]
        )
        assert grad_check(loss_of, analytic, point) < 1e-4


class TestTraining:
    def test_identical_rows_collapse_onto_one_basis_row(self):
        row = np.array([0.8, -0.4, 0.2, 0.5])
        table = np.tile(row, (8, 1))
        model = EmbeddingCompressor(
            n_basis=8,
            code_len=1,
            hidden_width=4,
            learning_rate=0.01,
            batch_size=8,
            epochs=300,
            validation_fraction=0.25,
            seed=0,
        ).fit(table)
        initial = model.history_[0]["val_loss"]
        assert model.best_validation_loss_ < 1e-2 * initial

    def test_zero_epochs_exports_initialization(self):
        rng = np.random.default_rng(1)
        table = rng.normal(size=(6, 4))
        model = EmbeddingCompressor(
            n_basis=4, code_len=2, epochs=0, validation_fraction=0.2, seed=2
        ).fit(table)
        assert model.history_ == []
        assert model.codebook_.codes.shape == (6, 2)

    def test_validation_improves_on_sbm_table(self, sbm_bundle):
        _, _, table = sbm_bundle
        model = EmbeddingCompressor(
            n_basis=128, code_len=8, epochs=40, seed=4
        ).fit(table)
        assert model.best_validation_loss_ < model.history_[0]["val_loss"]

    def test_checkpoint_is_never_worse_than_any_logged_epoch(self, sbm_bundle):
        _, _, table = sbm_bundle
        model = EmbeddingCompressor(n_basis=16, code_len=4, epochs=25, seed=5).fit(table)
        assert all(model.best_validation_loss_ <= h["val_loss"] for h in model.history_)

    def test_tau_log_follows_schedule(self, sbm_bundle):
        _, _, table = sbm_bundle
        model = EmbeddingCompressor(
            n_basis=8, code_len=2, epochs=12, tau_step_epochs=5, seed=6
        ).fit(table[:40])
        expected = [max(0.5, 1.0 - 0.1 * (e // 5)) for e in range(12)]
        assert [h["tau"] for h in model.history_] == pytest.approx(expected)

    def test_determinism(self, sbm_bundle):
        _, _, table = sbm_bundle
        kwargs = dict(n_basis=16, code_len=4, epochs=10, seed=7)
        a = EmbeddingCompressor(**kwargs).fit(table)
        b = EmbeddingCompressor(**kwargs).fit(table)
        assert np.array_equal(a.codebook_.codes, b.codebook_.codes)
        assert np.array_equal(a.codebook_.basis, b.codebook_.basis)
        assert a.history_ == b.history_

    def test_dimension_mismatch_on_transform(self, sbm_bundle):
        _, _, table = sbm_bundle
        model = EmbeddingCompressor(n_basis=8, code_len=2, epochs=1, seed=8).fit(table)
        with pytest.raises(ValueError, match="columns"):
            model.transform(np.zeros((2, 5)))

    def test_kd_flavor_trains_and_exports_block_codes(self, sbm_bundle):
        _, _, table = sbm_bundle
        model = EmbeddingCompressor(
            n_basis=16, code_len=4, flavor="kd", block_size=4, epochs=10, seed=9
        ).fit(table)
        model.codebook_.validate()
        assert np.array_equal(
            model.codebook_.codes // 4, np.tile(np.arange(4), (table.shape[0], 1))
        )


@pytest.fixture(scope="module")
def fitted(sbm_bundle):
    _, _, table = sbm_bundle
    model = EmbeddingCompressor(
        n_basis=16, code_len=4, learning_rate=0.003, epochs=300,
        tau_step_epochs=20, seed=10,
    ).fit(table)
    return model, table


class TestExport:

    def test_codes_are_in_range_with_exact_shape(self, fitted):
        model, table = fitted
        cb = model.codebook_
        assert cb.codes.shape == (table.shape[0], 4)
        assert cb.basis.shape == (16, table.shape[1])
        assert np.all((cb.codes >= 0) & (cb.codes < 16))

    def test_identical_rows_get_identical_codes(self, fitted):
        model, table = fitted
        doubled = np.vstack([table[3], table[3]])
        codes = model.encode(doubled)
        assert np.array_equal(codes[0], codes[1])

    def test_transform_equals_codebook_reconstruction(self, fitted):
        model, table = fitted
        assert np.array_equal(
            model.transform(table),
            model.codebook_.basis[model.codebook_.codes].sum(axis=1),
        )

    def test_hard_export_is_consistent_where_a_hard_solution_exists(self):
        # identical rows are exactly representable by one basis row, so the
        # exported hard codes must reconstruct essentially perfectly
        row = np.array([0.8, -0.4, 0.2, 0.5])
        table = np.tile(row, (8, 1))
        for seed in range(3):
            model = EmbeddingCompressor(
                n_basis=8, code_len=1, hidden_width=4, learning_rate=0.01,
                batch_size=8, epochs=300, validation_fraction=0.25, seed=seed,
            ).fit(table)
            hard_loss = mse_loss(table, model.transform(table))
            initial = model.history_[0]["val_loss"]
            assert hard_loss < 1e-3
            assert hard_loss < 1e-2 * initial
