"""
Tests for the neural building blocks, the optimizer and the training loop
"""

import numpy as np
import pytest

from section_labeler.config import TrainConfig
from section_labeler.embeddings import EmbeddingTable
from section_labeler.errors import DimensionMismatchError, EmptyCorpusError, NonFiniteGradientError
from section_labeler.models import SentenceExample, create_model
from section_labeler.models.layout import LayoutModel
from section_labeler.models.layout_features import NUM_LAYOUT_FEATURES
from section_labeler.nn import trainer
from section_labeler.nn.gradcheck import grad_check
from section_labeler.nn.layers import (BiLSTM, Dense, Dropout, LSTMCell, MaxOverTime, MeanOverTime,
                                       batch_cross_entropy, cross_entropy, lstm_forward, max_over_time,
                                       mean_over_time, pad_sequences, softmax)
from section_labeler.nn.optim import AdamState, adam_step, clip_by_global_norm, global_norm
from section_labeler.nn.trainer import train
from section_labeler.utils.text_processing import PAD_ID


def test_softmax_is_stable_and_normalized():
    z = np.array([[1000.0, 1000.0, 1000.0], [0.0, 0.0, -1000.0]])
    p = softmax(z)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.allclose(p[0], 1 / 3)
    assert p[1, 2] == pytest.approx(0.0)


def test_cross_entropy_clamps_zero_probability():
    assert cross_entropy(np.array([0.0, 1.0]), 0) == pytest.approx(-np.log(1e-12))
    loss, dprobs = batch_cross_entropy(np.array([[0.5, 0.5], [0.25, 0.75]]), np.array([0, 1]))
    assert loss == pytest.approx(-(np.log(0.5) + np.log(0.75)) / 2)
    assert dprobs[0, 1] == 0.0


def test_dense_rejects_wrong_width():
    layer = Dense(4, 3)
    with pytest.raises(DimensionMismatchError):
        layer.forward(np.zeros((2, 5), dtype=np.float32))


def test_zero_parameters_give_uniform_output(small_examples, trainable_table):
    for name in ("focus", "surrounding", "layout", "merged"):
        model = create_model(name, trainable_table.copy(), seed=0)
        for value in model.named_parameters().values():
            value[...] = 0.0
        probs = model.predict_proba(small_examples[:5])
        assert np.allclose(probs, 1 / 7, atol=1e-6), name


def test_dropout_scales_survivors():
    drop = Dropout(0.5, np.random.default_rng(0))
    x = np.ones((1000, 4), dtype=np.float32)
    out = drop.forward(x, training=True)
    assert set(np.unique(out)).issubset({0.0, 2.0})
    assert drop.forward(x, training=False) is x
    with pytest.raises(ValueError):
        Dropout(1.0, np.random.default_rng(0))


def test_pad_sequences_right_pads_and_keeps_empty_rows():
    ids, lengths = pad_sequences([(5, 6, 7), (8,), ()])
    assert ids.tolist() == [[5, 6, 7], [8, 0, 0], [0, 0, 0]]
    assert lengths.tolist() == [3, 1, 1]


def test_pooling_ignores_padded_steps():
    seq = np.array([[[1.0, -1.0], [3.0, -2.0], [100.0, 100.0]]])
    lengths = np.array([2])
    assert MaxOverTime().forward(seq, lengths).tolist() == [[3.0, -1.0]]
    assert MeanOverTime().forward(seq, lengths).tolist() == [[2.0, -1.5]]
    assert max_over_time(seq[0, :2]).tolist() == [3.0, -1.0]
    assert mean_over_time(seq[0, :2]).tolist() == [2.0, -1.5]
    with pytest.raises(DimensionMismatchError):
        max_over_time(np.zeros((0, 2)))


def test_bilstm_padding_does_not_change_real_steps():
    rng = np.random.default_rng(0)
    lstm = BiLSTM(3, 4, np.random.default_rng(1), np.float64)
    x = rng.normal(size=(1, 2, 3))
    padded = np.concatenate([x, rng.normal(size=(1, 3, 3))], axis=1)
    short = lstm.forward(x, np.array([2]))
    long = lstm.forward(padded, np.array([2]))
    assert np.allclose(short, long[:, :2])


def test_lstm_forward_single_sequence():
    cell = LSTMCell(3, 5, np.random.default_rng(0), np.float64)
    out = lstm_forward(np.ones((4, 3)), cell)
    assert out.shape == (4, 5)
    assert np.all(np.abs(out) < 1)
    with pytest.raises(DimensionMismatchError):
        lstm_forward(np.zeros((0, 3)), cell)


def test_adam_first_step_moves_by_learning_rate():
    params = {"w": np.array([1.0, 1.0, 1.0])}
    grads = {"w": np.array([0.5, -2.0, 0.0])}
    adam_step(params, grads, AdamState(), TrainConfig(learning_rate=0.1))
    assert params["w"] == pytest.approx([0.9, 1.1, 1.0], abs=1e-6)


def test_adam_rejects_non_finite_gradient():
    params = {"dense.W": np.zeros(2)}
    with pytest.raises(NonFiniteGradientError, match="dense.W"):
        adam_step(params, {"dense.W": np.array([np.nan, 0.0])}, AdamState(), TrainConfig())


def test_clip_by_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_by_global_norm(grads, 1.0) == pytest.approx(5.0)
    assert global_norm(grads) == pytest.approx(1.0)
    assert grads["a"] == pytest.approx([0.6])
    clip_by_global_norm(grads, None)
    assert global_norm(grads) == pytest.approx(1.0)


GRAD_CHECK_LIMITS = {"layout": 1e-4, "focus": 1e-3, "surrounding": 1e-3, "merged": 1e-3}
MODEL_KINDS = ("focus", "surrounding", "layout", "merged")


def random_configuration(seed):
    """A model kind, its parameters and a batch, all drawn from one seed"""
    rng = np.random.default_rng(seed)
    vocab_size = int(rng.integers(6, 31))
    dim = int(rng.integers(2, 13))
    batch = int(rng.integers(1, 7))
    max_len = int(rng.integers(1, 10))

    def sentence():
        return tuple(int(t) for t in rng.integers(1, vocab_size, size=int(rng.integers(1, max_len + 1))))

    examples = []
    for i in range(batch):
        examples.append(SentenceExample(
            report_id="random",
            index=i,
            focus_ids=sentence(),
            # some sentences open or close their report
            prev_ids=sentence() if rng.random() < 0.7 else (PAD_ID,),
            next_ids=sentence() if rng.random() < 0.7 else (PAD_ID,),
            layout=rng.random(NUM_LAYOUT_FEATURES).astype(np.float32),
            label=int(rng.integers(0, 7)),
        ))
    vectors = rng.uniform(-0.5, 0.5, size=(vocab_size, dim)).astype(np.float32)
    kind = MODEL_KINDS[seed % len(MODEL_KINDS)]
    model = create_model(kind, EmbeddingTable(vectors, trainable=True), seed=seed)
    return kind, model, examples


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    kind, model, examples = random_configuration(seed)
    assert grad_check(model, examples, seed=seed) < GRAD_CHECK_LIMITS[kind]


def test_gradients_on_real_report_sentences(small_examples, trainable_table):
    # the first sentence of a report has an empty previous neighbor
    for kind in MODEL_KINDS:
        model = create_model(kind, trainable_table, seed=2)
        assert grad_check(model, small_examples[:4], seed=1) < GRAD_CHECK_LIMITS[kind], kind


def test_grad_check_leaves_model_untouched(small_examples):
    model = LayoutModel(seed=0)
    before = model.parameter_hash()
    grad_check(model, small_examples[:3])
    assert model.parameter_hash() == before


def test_train_rejects_empty_training_set():
    with pytest.raises(EmptyCorpusError):
        train(LayoutModel(seed=0), [], [], TrainConfig())


def test_early_stopping_restores_best_epoch(small_examples):
    config = TrainConfig(max_epochs=40, patience=3, batch_size=8, dropout_seed=1)
    model, history = train(LayoutModel(seed=0), small_examples[:40], small_examples[40:60], config, name="layout")
    assert 1 <= history.best_epoch <= len(history.epochs) <= 40
    best = history.epochs[history.best_epoch - 1].validation_accuracy
    assert best == pytest.approx(history.best_validation_accuracy)
    labels = np.array([e.label for e in small_examples[40:60]])
    assert np.mean(model.predict(small_examples[40:60]) == labels) == pytest.approx(best)
    if history.stopped_early:
        assert len(history.epochs) - history.best_epoch == config.patience


def test_patience_stops_five_epochs_after_the_peak(monkeypatch, small_examples):
    curve = iter([0.2, 0.4, 0.6] + [0.6] * 20)
    snapshots = []

    def scripted_accuracy(model, examples, labels):
        snapshots.append(model.state_dict())
        return next(curve)

    monkeypatch.setattr(trainer, "accuracy", scripted_accuracy)
    config = TrainConfig(max_epochs=20, patience=5, batch_size=8, dropout_seed=0)
    model, history = train(LayoutModel(seed=0), small_examples[:16], small_examples[16:24], config)

    assert len(history.epochs) == 8
    assert history.best_epoch == 3 and history.stopped_early
    restored = model.state_dict()
    assert all(np.array_equal(restored[name], snapshots[2][name]) for name in restored)
    assert not all(np.array_equal(restored[name], snapshots[-1][name]) for name in restored)


def test_training_is_deterministic(small_examples):
    config = TrainConfig(max_epochs=5, patience=5, batch_size=8, dropout_seed=4)
    first, _ = train(LayoutModel(seed=3), small_examples[:30], small_examples[30:40], config)
    second, _ = train(LayoutModel(seed=3), small_examples[:30], small_examples[30:40], config)
    assert first.parameter_hash() == second.parameter_hash()


@pytest.mark.slow
@pytest.mark.parametrize("name", ["focus", "surrounding", "layout"])
def test_models_overfit_a_toy_set(small_examples, trainable_table, name):
    toy = small_examples[:32]
    config = TrainConfig(learning_rate=0.01, max_epochs=300, patience=30, batch_size=8, dropout_seed=0)
    model, _ = train(create_model(name, trainable_table, seed=0), toy, toy, config, name=name)
    labels = np.array([e.label for e in toy])
    assert np.mean(model.predict(toy) == labels) == pytest.approx(1.0)
