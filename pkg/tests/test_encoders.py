import numpy as np
import pytest

from conftest import rank5_corpus
from slcrec.data import ContextVector
from slcrec.encoders import (
    AutoEncoderModel,
    LstmEncDecModel,
    encode_current,
    encode_sequence,
    encode_sequence_batch,
    load_encoder,
    reconstruct,
    reconstruct_current,
    save_encoder,
    train_autoencoder,
    train_lstm_encdec,
)
from slcrec.errors import EmptyCorpusError, RaggedSequencesError, ShapeMismatchError
from slcrec.nn import DenseLayer, TrainConfig


@pytest.fixture(scope="module")
def trained_ae():
    """Autoencoder fitted on the rank-5 binary corpus (shared, read-only)."""
    X = rank5_corpus(5000, width=20, seed=0)
    return X, train_autoencoder(X, 5, TrainConfig(epochs=500, seed=0))


@pytest.fixture(scope="module")
def trained_encdec():
    """Sequence model fitted on constant-within-sequence windows."""
    V = rank5_corpus(800, width=20, seed=1)
    S = np.repeat(V[:, None, :], 3, axis=1)
    return S, train_lstm_encdec(S, 8, TrainConfig(epochs=250, seed=3))


class TestAutoencoderTraining:
    def test_rank5_corpus_is_rank5(self):
        X = rank5_corpus(2000, width=20, seed=0)
        assert np.linalg.matrix_rank(X) == 5  # compressible by construction

    def test_rank5_reconstruction(self, trained_ae):
        X, model = trained_ae
        assert model.final_loss < 0.01
        recon = np.stack([reconstruct_current(model, x) for x in X[:500]])
        per_vector_rms = np.sqrt(((recon - X[:500]) ** 2).mean(axis=1))
        assert per_vector_rms.max() < 0.1

    def test_loss_decreases_over_first_epochs(self, trained_ae):
        _, model = trained_ae
        trace = model.loss_trace
        assert trace[9] < trace[0]
        assert all(np.isfinite(trace))

    def test_layer_widths_follow_config(self):
        X = np.random.default_rng(0).random((32, 9))
        model = train_autoencoder(X, 10, TrainConfig(epochs=1, seed=0))
        assert model.encoder.W.shape == (10, 9)
        assert model.decoder.W.shape == (9, 10)

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            train_autoencoder(np.zeros((0, 5)), 2)

    def test_deterministic_for_seed(self):
        X = rank5_corpus(200, seed=2)
        a = train_autoencoder(X, 5, TrainConfig(epochs=5, seed=9))
        b = train_autoencoder(X, 5, TrainConfig(epochs=5, seed=9))
        np.testing.assert_array_equal(a.encoder.W, b.encoder.W)
        assert a.loss_trace == b.loss_trace


class TestEncodeCurrent:
    def test_identity_network_fixture(self):
        # Width-equals-latent model wired to the exact identity.
        eye = DenseLayer(W=np.eye(4), b=np.zeros(4), activation="identity")
        model = AutoEncoderModel(encoder=eye, decoder=eye, latent_dim=4)
        x = np.array([0.1, 0.9, 0.0, 0.5])
        np.testing.assert_array_equal(encode_current(model, x).values, x)

    def test_encode_is_pure(self, trained_ae):
        X, model = trained_ae
        v = ContextVector(values=X[0].copy(), timestamp=0)
        a = encode_current(model, v)
        b = encode_current(model, v)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.kind == "current"

    def test_shape_mismatch(self, trained_ae):
        _, model = trained_ae
        with pytest.raises(ShapeMismatchError):
            encode_current(model, np.zeros(7))

    def test_latent_length(self, trained_ae):
        _, model = trained_ae
        assert len(encode_current(model, np.zeros(20)).values) == 5


class TestLstmEncDecTraining:
    def test_wide_config_trains_without_shape_errors(self):
        rng = np.random.default_rng(0)
        S = rng.random((8, 3, 268))
        model = train_lstm_encdec(S, 40, TrainConfig(epochs=1, seed=0))
        assert model.seq_len == 3
        assert model.latent_dim == 40
        assert model.output_head.W.shape == (268, 40)

    def test_constant_sequences_reconstructed(self, trained_encdec):
        S, model = trained_encdec
        assert model.final_loss < 0.05
        outs = reconstruct(model, S[0])
        assert len(outs) == 3

    def test_single_sequence_memorized(self):
        rng = np.random.default_rng(4)
        s = rng.random((1, 3, 6))
        model = train_lstm_encdec(s, 6, TrainConfig(epochs=1500, seed=1))
        assert model.final_loss < 1e-3

    def test_ragged_sequences_rejected(self):
        a = np.zeros((2, 5))
        b = np.zeros((3, 5))
        with pytest.raises(RaggedSequencesError):
            train_lstm_encdec([a, b], 4)

    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpusError):
            train_lstm_encdec([], 4)


class TestEncodeSequence:
    def test_identical_sequences_identical_latents(self, trained_encdec):
        S, model = trained_encdec
        a = encode_sequence(model, S[0])
        b = encode_sequence(model, S[0].copy())
        np.testing.assert_array_equal(a.values, b.values)
        assert a.kind == "sequential"

    def test_order_sensitivity(self, trained_encdec):
        # Swapping vectors inside a window must change the latent: order is
        # the only thing distinguishing the permuted pairs.
        _, model = trained_encdec
        rng = np.random.default_rng(11)
        differing = 0
        for _ in range(100):
            window = rng.random((3, 20))
            permuted = window[[2, 0, 1]]
            if np.allclose(window, permuted):
                continue
            a = encode_sequence(model, window).values
            b = encode_sequence(model, permuted).values
            if np.abs(a - b).max() > 1e-9:
                differing += 1
        assert differing == 100

    def test_latent_width_matches_config(self):
        S = np.random.default_rng(0).random((4, 3, 12))
        model = train_lstm_encdec(S, 40, TrainConfig(epochs=1, seed=0))
        assert len(encode_sequence(model, S[0]).values) == 40

    def test_bottleneck_source(self):
        S = np.random.default_rng(0).random((4, 3, 6))
        model = train_lstm_encdec(S, 4, TrainConfig(epochs=1, seed=0), slc_source="bottleneck")
        z = encode_sequence(model, S[0]).values
        assert z.shape == (4,)
        assert np.all(np.abs(z) < 1.0)  # tanh bottleneck

    def test_shape_mismatch(self, trained_encdec):
        _, model = trained_encdec
        with pytest.raises(ShapeMismatchError):
            encode_sequence(model, np.zeros((4, 20)))


class TestReconstruct:
    def test_zero_model_outputs_all_equal(self):
        zeros = lambda *s: np.zeros(s)
        from slcrec.nn import LstmCell

        def cell(d, h):
            return LstmCell(
                W_i=zeros(h, d + h), W_f=zeros(h, d + h), W_o=zeros(h, d + h), W_g=zeros(h, d + h),
                b_i=zeros(h), b_f=zeros(h), b_o=zeros(h), b_g=zeros(h),
            )

        model = LstmEncDecModel(
            encoder_cell=cell(5, 3),
            decoder_cell=cell(3, 3),
            compress=DenseLayer(zeros(3, 6), zeros(3), "tanh"),
            expand=DenseLayer(zeros(6, 3), zeros(6), "identity"),
            output_head=DenseLayer(zeros(5, 3), zeros(5), "sigmoid"),
            seq_len=4,
            latent_dim=3,
        )
        outs = reconstruct(model, np.random.default_rng(0).random((4, 5)))
        for o in outs:
            np.testing.assert_array_equal(o, outs[0])
        np.testing.assert_array_equal(outs[0], np.full(5, 0.5))

    def test_output_count_equals_window_length(self, trained_encdec):
        S, model = trained_encdec
        assert len(reconstruct(model, S[1])) == model.seq_len

    def test_trained_constant_model_reconstructs(self, trained_encdec):
        S, model = trained_encdec
        outs = np.stack(reconstruct(model, S[2]))
        assert float(((outs - S[2]) ** 2).mean()) < 0.05


class TestSerialization:
    def test_autoencoder_roundtrip_preserves_encoding(self, trained_ae, tmp_path):
        X, model = trained_ae
        path = tmp_path / "ae.model"
        save_encoder(model, path)
        loaded = load_encoder(path)
        np.testing.assert_array_equal(
            encode_current(model, X[0]).values, encode_current(loaded, X[0]).values
        )
        assert loaded.latent_dim == model.latent_dim

    def test_encdec_roundtrip_preserves_encoding(self, trained_encdec, tmp_path):
        S, model = trained_encdec
        path = tmp_path / "seq.model"
        save_encoder(model, path)
        loaded = load_encoder(path)
        np.testing.assert_array_equal(
            encode_sequence_batch(model, S[:5]), encode_sequence_batch(loaded, S[:5])
        )
        assert loaded.seq_len == model.seq_len
        assert loaded.slc_source == model.slc_source

    def test_rewrite_is_byte_identical(self, trained_ae, tmp_path):
        _, model = trained_ae
        a, b = tmp_path / "a.model", tmp_path / "b.model"
        save_encoder(model, a)
        save_encoder(model, b)
        assert a.read_bytes() == b.read_bytes()
