"""Tests for the encoder, the stacked LSTM and the hybrid classifier."""

import numpy as np
import pytest

from src.autograd import Tensor, backward, no_grad
from src.autograd import functional as F
from src.config import load_default_config
from src.exceptions import ConfigError, DimensionError
from src.models import (
    EncoderConfig,
    HybridModel,
    LstmConfig,
    ModelConfig,
    bce_loss,
    encode_sequence,
    encoder_layer,
    expected_parameter_count,
    lstm_cell,
    model_config_from_settings,
    predict,
    run_stacked,
)
from src.models.encoder import init_encoder_state
from src.models.recurrent import init_lstm_state
from src.text import SubwordTokenizer, encode_batch
from tests.conftest import max_rel_error, numeric_grad, tiny_model_config

ENCODER = EncoderConfig(n_layers=2, d_model=8, n_heads=2, d_ff=16, max_len=6, vocab_size=12, dropout_p=0.0)


def weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    return F.sum(F.mul(out, Tensor(weights)))


class TestEncoder:
    def test_padding_content_does_not_leak(self, rng):
        state = init_encoder_state(ENCODER, rng)
        mask = np.array([[1, 1, 1, 0, 0, 0]])
        a = encode_sequence(np.array([[2, 5, 3, 0, 0, 0]]), mask, state, False, None).data
        b = encode_sequence(np.array([[2, 5, 3, 7, 9, 11]]), mask, state, False, None).data
        np.testing.assert_allclose(a[:, :3], b[:, :3], rtol=0, atol=1e-12)

    def test_padded_keys_get_zero_attention(self, rng):
        state = init_encoder_state(ENCODER, rng)
        mask = np.array([[1, 1, 1, 1, 0, 0], [1, 1, 0, 0, 0, 0]])
        H = Tensor(rng.normal(size=(2, 6, 8)))
        out, attention = encoder_layer(H, mask, state.layers[0], ENCODER, False, None, return_attention=True)
        assert out.shape == (2, 6, 8)
        assert attention.shape == (2, 2, 6, 6)
        assert np.all(attention[0, :, :, 4:] == 0.0)
        assert np.all(attention[1, :, :, 2:] == 0.0)
        np.testing.assert_allclose(attention.sum(axis=-1), 1.0)

    def test_layer_gradients(self, rng):
        config = EncoderConfig(n_layers=1, d_model=8, n_heads=2, d_ff=16, max_len=5, vocab_size=10, dropout_p=0.0)
        state = init_encoder_state(config, rng)
        layer = state.layers[0]
        for tensor in layer.params.values():
            tensor.data[...] = rng.normal(scale=0.3, size=tensor.shape)
        mask = np.array([[1, 1, 1, 1, 1], [1, 1, 1, 0, 0]])
        H = Tensor(rng.normal(size=(2, 5, 8)), requires_grad=True)
        R = rng.normal(size=(2, 5, 8))

        def value():
            with no_grad():
                return weighted_sum(encoder_layer(H, mask, layer, config, False, None), R).item()

        backward(weighted_sum(encoder_layer(H, mask, layer, config, False, None), R))
        assert max_rel_error(H.grad, numeric_grad(value, H.data)) < 1e-4
        for name, tensor in layer.params.items():
            assert max_rel_error(tensor.grad, numeric_grad(value, tensor.data)) < 1e-4, name

    def test_single_sequence_and_length_checks(self, rng):
        state = init_encoder_state(ENCODER, rng)
        ids = np.array([2, 5, 3, 0, 0, 0])
        single = encode_sequence(ids, ids != 0, state, False, None)
        batch = encode_sequence(ids[None], (ids != 0)[None], state, False, None)
        assert single.shape == (6, 8)
        np.testing.assert_allclose(single.data, batch.data[0])
        with pytest.raises(DimensionError):
            encode_sequence(np.array([[2, 3]]), None, state, False, None)

    def test_invalid_configs(self):
        with pytest.raises(ConfigError):
            EncoderConfig(n_layers=1, d_model=10, n_heads=3, d_ff=8, max_len=4, vocab_size=5)
        with pytest.raises(ConfigError):
            EncoderConfig.from_preset("huge", vocab_size=5)
        assert EncoderConfig.from_preset("desk", vocab_size=50, max_len=24).max_len == 24


class TestRecurrent:
    def test_cell_gradients(self, rng):
        config = LstmConfig(input_dim=3, hidden_dim=4, n_layers=1)
        layer = init_lstm_state(config, rng).layers[0]
        x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        h = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        C = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        Rh, RC = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))

        def objective():
            h_t, C_t = lstm_cell(x, h, C, layer)
            return weighted_sum(h_t, Rh) + weighted_sum(C_t, RC)

        def value():
            with no_grad():
                return objective().item()

        backward(objective())
        for tensor in [x, h, C] + list(layer.params.values()):
            assert max_rel_error(tensor.grad, numeric_grad(value, tensor.data)) < 1e-4

    def test_cell_width_mismatch(self, rng):
        layer = init_lstm_state(LstmConfig(input_dim=3, hidden_dim=4), rng).layers[0]
        with pytest.raises(DimensionError):
            lstm_cell(Tensor(np.ones((1, 5))), Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), layer)

    def test_forget_bias_initialized_to_one(self, rng):
        state = init_lstm_state(LstmConfig(input_dim=3, hidden_dim=4), rng)
        np.testing.assert_array_equal(state.layers[1]["b_f"].data, 1.0)
        np.testing.assert_array_equal(state.layers[1]["b_i"].data, 0.0)

    def test_last_unmasked_matches_truncated_run(self, rng):
        step = init_lstm_state(LstmConfig(input_dim=3, hidden_dim=4, interlayer_dropout_p=0.0), rng)
        unmasked = init_lstm_state(
            LstmConfig(input_dim=3, hidden_dim=4, interlayer_dropout_p=0.0, readout="last_unmasked"),
            np.random.default_rng(0),
        )
        for (_, a), (_, b) in zip(unmasked.named_parameters(), step.named_parameters()):
            a.data[...] = b.data
        H = Tensor(rng.normal(size=(2, 6, 3)))
        mask = np.array([[1, 1, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1]])
        final = run_stacked(H, mask, unmasked, False, None).data
        short = run_stacked(Tensor(H.data[:, :3]), None, step, False, None).data
        full = run_stacked(H, None, step, False, None).data
        np.testing.assert_allclose(final[0], short[0], atol=1e-12)
        np.testing.assert_allclose(final[1], full[1], atol=1e-12)
        assert not np.allclose(full[0], short[0])

    def test_last_unmasked_needs_mask(self, rng):
        state = init_lstm_state(LstmConfig(input_dim=3, hidden_dim=4, readout="last_unmasked"), rng)
        with pytest.raises(DimensionError):
            run_stacked(Tensor(np.ones((1, 2, 3))), None, state, False, None)


class TestHybridModel:
    def test_parameter_count(self, tiny_model):
        assert tiny_model.parameter_count() == expected_parameter_count(tiny_model.config) == 1177
        assert len(set(map(id, tiny_model.parameters()))) == len(tiny_model.registry)

    def test_forward_shape_and_batch_independence(self, tiny_model, tiny_batch):
        ids, mask, _ = tiny_batch
        logits = tiny_model.forward((ids, mask)).data
        assert logits.shape == (3, 5)
        one = tiny_model.forward((ids[1:2], mask[1:2])).data
        np.testing.assert_allclose(one[0], logits[1], atol=1e-12)

    def test_whole_model_gradient_sample(self, tiny_model, tiny_batch, rng):
        ids, mask, targets = tiny_batch

        def value():
            with no_grad():
                return bce_loss(tiny_model.forward((ids, mask)), targets).item()

        backward(bce_loss(tiny_model.forward((ids, mask)), targets))
        for name, tensor in tiny_model.named_parameters():
            flat = rng.choice(tensor.size, size=min(3, tensor.size), replace=False)
            coords = [np.unravel_index(i, tensor.shape) for i in flat]
            numeric = numeric_grad(value, tensor.data, indices=coords)
            analytic = np.array([tensor.grad[c] for c in coords])
            expected = np.array([numeric[c] for c in coords])
            assert max_rel_error(analytic, expected) < 1e-3, name

    def test_dropout_only_in_training(self, tiny_batch):
        model = HybridModel.initialize(tiny_model_config(dropout=0.5), np.random.default_rng(1))
        ids, mask, _ = tiny_batch
        eval_a = model.forward((ids, mask)).data
        eval_b = model.forward((ids, mask)).data
        train = model.forward((ids, mask), training=True, rng=np.random.default_rng(2)).data
        np.testing.assert_array_equal(eval_a, eval_b)
        assert not np.allclose(train, eval_a)

    def test_predict_is_inclusive_and_independent(self):
        out = predict(np.array([[0.0, -1.0, 1.0, 3.0, -3.0]]), threshold=0.5)
        np.testing.assert_array_equal(out.labels, [[1, 0, 1, 1, 0]])
        assert out.probabilities[0, 0] == 0.5

    def test_predict_proba_chunking(self, small_vocab):
        model = HybridModel.initialize(tiny_model_config(vocab_size=len(small_vocab)), np.random.default_rng(5))
        seqs = encode_batch(["you idiot", "nice song", "kill", "win lottery"], SubwordTokenizer(small_vocab), 6)
        np.testing.assert_allclose(model.predict_proba(seqs, batch_size=1), model.predict_proba(seqs), atol=1e-12)
        assert model.predict_proba([]).shape == (0, 5)

    def test_freeze_bottom_k(self, tiny_model):
        frozen = tiny_model.freeze_bottom_k(1)
        assert "encoder.token_embedding" in frozen
        assert "encoder.layers.0.W_Q" in frozen
        trainable = dict(tiny_model.trainable_parameters())
        assert "encoder.layers.0.W_Q" not in trainable
        assert "lstm.layers.0.W_f" in trainable and "head.W_clf" in trainable
        assert not tiny_model.registry["encoder.position_embedding"].requires_grad
        with pytest.raises(ConfigError):
            tiny_model.freeze_bottom_k(2)

    def test_state_arrays_restore(self, tiny_model, tiny_batch):
        ids, mask, _ = tiny_batch
        before = tiny_model.forward((ids, mask)).data
        snapshot = tiny_model.state_arrays()
        for tensor in tiny_model.parameters():
            tensor.data += 0.1
        tiny_model.load_state_arrays(snapshot)
        np.testing.assert_array_equal(tiny_model.forward((ids, mask)).data, before)

    def test_bce_rejects_soft_targets(self):
        with pytest.raises(ValueError):
            bce_loss(Tensor(np.zeros((1, 5))), np.full((1, 5), 0.5))

    def test_config_from_default_settings(self):
        config = model_config_from_settings(load_default_config(), vocab_size=100)
        assert (config.encoder.n_layers, config.encoder.d_model, config.encoder.n_heads) == (2, 32, 4)
        assert config.lstm.hidden_dim == 16
        assert config.lstm.input_dim == 32
        assert config.head_dropout_p == 0.3

    def test_config_round_trip_and_mismatch(self):
        config = tiny_model_config(readout="last_unmasked")
        assert ModelConfig.from_flat(config.to_flat()) == config
        with pytest.raises(ConfigError):
            ModelConfig(encoder=config.encoder, lstm=LstmConfig(input_dim=5, hidden_dim=4))

    def test_empty_batch(self, tiny_model):
        with pytest.raises(DimensionError):
            tiny_model.forward([])
