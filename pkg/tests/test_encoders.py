import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encoder_cases import max_encoder_error
from gradcheck import tolerance
from revsent.autodiff import Tensor, default_dtype, no_grad
from revsent.encoders import (
    CnnEncoder, HanEncoder, LstmCell, MetaEncoder, attention_pool, bilstm_forward, build_text_encoder,
    lstm_forward,
)
from revsent.errors import DataError, ShapeError
from revsent.features.text import TokenizedReview, Vocabulary, tokenize_review


@pytest.fixture(autouse=True)
def f64():
    with default_dtype(np.float64):
        yield


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_oracle(w_x, w_h, b, x, reverse=False):
    """Plain per-example, per-step LSTM (gate order i, f, g, o)."""
    hdim = w_h.shape[0]
    out = np.zeros(x.shape[:2] + (hdim,))
    for n in range(x.shape[0]):
        h, c = np.zeros(hdim), np.zeros(hdim)
        steps = range(x.shape[1] - 1, -1, -1) if reverse else range(x.shape[1])
        for t in steps:
            z = x[n, t] @ w_x + h @ w_h + b
            i, f = sigmoid(z[:hdim]), sigmoid(z[hdim:2 * hdim])
            g, o = np.tanh(z[2 * hdim:3 * hdim]), sigmoid(z[3 * hdim:])
            c = f * c + i * g
            h = o * np.tanh(c)
            out[n, t] = h
    return out


def small_han(seed=0, vocab=12):
    return HanEncoder(vocab, np.random.default_rng(seed), embed_dim=5, word_hidden=4, sentence_hidden=3)


@pytest.mark.parametrize("dtype", [np.float32, np.float64], ids=["f32", "f64"])
@pytest.mark.parametrize("kind", ["cnn", "han"])
def test_full_encoder_gradients(kind, dtype):
    worst = max_encoder_error(kind, dtype)
    assert worst <= tolerance(dtype), f"{kind}: max rel err {worst:.2e}"


class TestLstm:
    @pytest.mark.parametrize("reverse", [False, True])
    def test_matches_unrolled_oracle(self, reverse):
        rng = np.random.default_rng(3)
        cell = LstmCell(4, 3, rng)
        x = rng.normal(size=(2, 5, 4))
        got = lstm_forward(cell, Tensor(x), reverse=reverse).data
        want = lstm_oracle(cell.w_x.data, cell.w_h.data, cell.bias.data, x, reverse)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)

    def test_forget_bias_starts_at_one(self):
        cell = LstmCell(2, 3, np.random.default_rng(0))
        np.testing.assert_array_equal(cell.bias.data[3:6], 1.0)

    def test_masked_steps_carry_state(self):
        rng = np.random.default_rng(1)
        cell = LstmCell(2, 3, rng)
        x = rng.normal(size=(1, 4, 2))
        mask = np.array([[True, True, False, False]])
        h = lstm_forward(cell, Tensor(x), mask).data
        np.testing.assert_array_equal(h[0, 2], h[0, 1])
        np.testing.assert_array_equal(h[0, 3], h[0, 1])
        # reverse direction starts from zeros at the padded tail
        hr = lstm_forward(cell, Tensor(x), mask, reverse=True).data
        np.testing.assert_array_equal(hr[0, 2:], 0.0)
        want = lstm_oracle(cell.w_x.data, cell.w_h.data, cell.bias.data, x[:, :2], reverse=True)
        np.testing.assert_allclose(hr[0, :2], want[0], rtol=1e-12)

    def test_bilstm_concatenates(self):
        rng = np.random.default_rng(2)
        f, b = LstmCell(2, 3, rng), LstmCell(2, 3, rng)
        x = Tensor(rng.normal(size=(1, 4, 2)))
        out = bilstm_forward(x, f, b).data
        assert out.shape == (1, 4, 6)
        np.testing.assert_array_equal(out[..., :3], lstm_forward(f, x).data)
        np.testing.assert_array_equal(out[..., 3:], lstm_forward(b, x, reverse=True).data)

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(0)
        f, b = LstmCell(2, 3, rng), LstmCell(2, 3, rng)
        with pytest.raises(ShapeError):
            bilstm_forward(Tensor(np.zeros((1, 0, 2))), f, b)


class TestAttention:
    def test_hand_example(self):
        h = Tensor(np.array([[[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]]))
        u = Tensor(np.array([np.log(3.0), 0.0]))
        pooled, w = attention_pool(h, u, np.array([[True, True, False]]))
        np.testing.assert_allclose(w.data, [[0.75, 0.25, 0.0]], rtol=1e-12)
        np.testing.assert_allclose(pooled.data, [[0.75, 0.25]], rtol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_han_weights_are_distributions(self, seed):
        rng = np.random.default_rng(seed)
        enc = small_han(seed % 7)
        b, r, n = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 6)
        ids = rng.integers(0, 12, size=(b, r, n))
        ids[:, 0, 0] = rng.integers(1, 12, size=b)  # every review has a token
        with no_grad():
            _, tr = enc(ids)
        for i in range(b):
            beta = tr.sentence_attention[i]
            assert np.all(beta >= 0)
            assert abs(beta.sum() - 1.0) <= 1e-5
            np.testing.assert_array_equal(beta[~tr.sentence_mask[i]], 0.0)
            for s in np.flatnonzero(tr.sentence_mask[i]):
                alpha = tr.word_attention[i, s]
                assert np.all(alpha >= 0)
                assert abs(alpha.sum() - 1.0) <= 1e-5
                np.testing.assert_array_equal(alpha[~tr.word_mask[i, s]], 0.0)


class TestHan:
    def test_output_dim(self):
        assert small_han().out_dim == 6
        enc = HanEncoder(5, np.random.default_rng(0), embed_dim=8)
        assert enc.out_dim == 100

    def test_trailing_padding_is_invisible(self):
        enc = small_han()
        ids = np.array([[[3, 4, 5], [6, 7, 0]]])
        padded = np.zeros((1, 4, 6), dtype=np.int64)
        padded[0, :2, :3] = ids[0]
        with no_grad():
            a, _ = enc(ids)
            b, _ = enc(padded)
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12, atol=1e-14)

    def test_batch_matches_single(self):
        vocab = Vocabulary(["<pad>", "<unk>", "good", "food", "bad", "service", "slow", "nice"])
        revs = [tokenize_review(t, vocab) for t in ("good food. nice service", "bad. slow slow service bad food")]
        enc = small_han(vocab=len(vocab))
        with no_grad():
            both, _ = enc(enc.batch_ids(revs))
            one, _ = enc.encode(revs[0])
        np.testing.assert_allclose(both.data[0], one.data, rtol=1e-12, atol=1e-14)

    def test_word_order_matters(self):
        enc = small_han()
        with no_grad():
            a, _ = enc(np.array([[[1, 2, 3, 4]]]))
            b, _ = enc(np.array([[[4, 3, 2, 1]]]))
        assert not np.allclose(a.data, b.data)

    def test_empty_review_rejected(self):
        enc = small_han()
        empty = TokenizedReview([[0]], [0], [["<pad>"]], ["<pad>"])
        with pytest.raises(DataError):
            enc.encode(empty)

    def test_wrong_rank_rejected(self):
        with pytest.raises(ShapeError):
            small_han()(np.ones((2, 3), dtype=np.int64))


class TestCnn:
    def test_hand_computed_conv_and_max(self):
        enc = CnnEncoder(4, np.random.default_rng(0), embed_dim=1, n_filters=1, width=3, seq_len=4)
        enc.embedding.data[:] = [[0.0], [1.0], [2.0], [-3.0]]
        enc.weight.data[:] = [[[1.0], [0.5], [-1.0]]]
        enc.bias.data[:] = [0.25]
        # windows over embeddings [1, 2, -3, 0]: 1+1+3+.25 = 5.25 and 2-1.5-0+.25 = 0.75
        out, _ = enc(np.array([[1, 2, 3, 0]]))
        np.testing.assert_allclose(out.data, [[5.25]])

    def test_relu_floor(self):
        enc = CnnEncoder(3, np.random.default_rng(0), embed_dim=1, n_filters=1, width=3, seq_len=3)
        enc.embedding.data[:] = [[0.0], [1.0], [1.0]]
        enc.weight.data[:] = -1.0
        enc.bias.data[:] = 0.0
        out, _ = enc(np.array([[1, 2, 1]]))
        np.testing.assert_array_equal(out.data, [[0.0]])

    def test_defaults(self):
        enc = CnnEncoder(10, np.random.default_rng(0))
        assert enc.out_dim == 256 and enc.width == 3 and enc.seq_len == 50

    def test_batch_independent(self):
        vocab = Vocabulary(["<pad>", "<unk>", "a1", "b2", "c3", "d4"])
        revs = [tokenize_review(t, vocab) for t in ("a1 b2 c3", "d4 a1 b2 c3 d4 a1")]
        enc = CnnEncoder(len(vocab), np.random.default_rng(0), embed_dim=4, n_filters=5, seq_len=10)
        with no_grad():
            both, _ = enc(enc.batch_ids(revs))
            one = enc.encode(revs[0])
        np.testing.assert_allclose(both.data[0], one.data, rtol=1e-12)

    def test_short_sequence_rejected(self):
        with pytest.raises(ShapeError):
            CnnEncoder(5, np.random.default_rng(0), seq_len=2)

    def test_pretrained_table_shape_checked(self):
        with pytest.raises(ShapeError):
            CnnEncoder(5, np.random.default_rng(0), embed_dim=4, embeddings=np.zeros((5, 3)))

    def test_frozen_embeddings(self):
        table = np.arange(20.0).reshape(5, 4)
        enc = CnnEncoder(5, np.random.default_rng(0), embed_dim=4, embeddings=table, trainable_embeddings=False)
        assert not enc.embedding.requires_grad
        assert "embedding" in dict(enc.named_parameters())
        assert all(p is not enc.embedding for p in enc.trainable_parameters())


class TestMetaEncoder:
    def test_eval_is_relu_linear(self):
        enc = MetaEncoder(3, np.random.default_rng(0), hidden=4).eval()
        m = np.array([[1.0, -2.0, 0.5]])
        want = np.maximum(m @ enc.layer.weight.data + enc.layer.bias.data, 0)
        np.testing.assert_allclose(enc(m).data, want, rtol=1e-12)

    def test_train_mode_drops_and_rescales(self):
        enc = MetaEncoder(3, np.random.default_rng(0), hidden=2000, dropout=0.2, seed=5)
        m = np.ones((1, 3))
        base = enc.eval()(m).data
        out = enc.train()(m).data
        alive = out != 0
        np.testing.assert_allclose(out[alive], base[alive] / 0.8, rtol=1e-12)
        live_base = base != 0
        frac = (~alive & live_base).sum() / live_base.sum()
        assert 0.15 < frac < 0.25

    def test_default_width(self):
        assert MetaEncoder(7, np.random.default_rng(0)).out_dim == 512

    def test_feature_count_checked(self):
        with pytest.raises(ShapeError):
            MetaEncoder(3, np.random.default_rng(0))(np.ones((2, 4)))


def test_build_text_encoder_round_trip():
    enc = small_han()
    again = build_text_encoder(enc.config(), np.random.default_rng(0))
    assert isinstance(again, HanEncoder) and again.config() == enc.config()
    with pytest.raises(ValueError):
        build_text_encoder({"kind": "rnn"}, np.random.default_rng(0))
