import math

import numpy as np
import pytest

from gradcheck import run_gradient_check
from tensioncorpus.classifier import (
    CheckpointError,
    HeadConfig,
    LabelledDataset,
    LabelledItem,
    TrainingDiverged,
    backward,
    evaluate,
    forward,
    init_params,
    load_checkpoint,
    load_labelled_csv,
    predict_scores,
    save_checkpoint,
    split_dataset,
    train,
    undersample_drop_intro,
    undersample_random_negative,
    weighted_bce_loss,
)
from tensioncorpus.embed import hash_embed
from tensioncorpus.preprocess import StemBag


def make_items(n, dim, seed=0, positive_fraction=0.5, separation=2.0):
    """Linearly separable-ish synthetic items around two Gaussian centers."""
    rng = np.random.default_rng(seed)
    center = rng.normal(size=dim)
    center /= np.linalg.norm(center)
    items = []
    for i in range(n):
        label = 1 if rng.random() < positive_fraction else 0
        offset = separation if label else -separation
        vec = offset * center + rng.normal(scale=0.6, size=dim)
        items.append(
            LabelledItem(
                embedding=vec,
                label=label,
                paragraph_id=f"p{i}",
                session="WHC-35" if i % 2 else "ICHC-12",
                ordinal=i,
            )
        )
    return items


class TestConfig:
    def test_defaults(self):
        config = HeadConfig(input_dim=512)
        assert (config.blocks, config.hidden_dim) == (1, 256)
        assert (config.dropout_p, config.pos_weight) == (0.4, 2.0)
        assert (config.learning_rate, config.weight_decay) == (5e-4, 1e-4)
        assert config.threshold == 0.5

    def test_validation(self):
        with pytest.raises(ValueError):
            HeadConfig(input_dim=0)
        with pytest.raises(ValueError):
            HeadConfig(input_dim=4, dropout_p=1.0)
        with pytest.raises(ValueError):
            HeadConfig(input_dim=4, pos_weight=0.0)
        with pytest.raises(ValueError):
            HeadConfig(input_dim=4, threshold=1.0)


class TestForward:
    def test_zero_weights_give_zero_logit(self):
        config = HeadConfig(input_dim=4, blocks=0, dropout_p=0.0)
        params = init_params(config)
        params.final_weight[:] = 0.0
        assert forward(params, np.ones(4)) == 0.0

    def test_linear_head_is_dot_product(self):
        config = HeadConfig(input_dim=3, blocks=0, dropout_p=0.0)
        params = init_params(config)
        params.final_weight[:] = np.array([1.0, 2.0, -1.0])
        params.final_bias = 0.5
        assert forward(params, np.array([1.0, 1.0, 0.0])) == pytest.approx(3.5)

    def test_eval_mode_deterministic_under_dropout_config(self):
        config = HeadConfig(input_dim=6, blocks=2, hidden_dim=8, dropout_p=0.5)
        params = init_params(config)
        x = np.random.default_rng(1).normal(size=(4, 6))
        assert np.array_equal(forward(params, x), forward(params, x))

    def test_train_mode_reproducible_by_seed(self):
        config = HeadConfig(input_dim=6, blocks=1, hidden_dim=8, dropout_p=0.5)
        params = init_params(config)
        x = np.random.default_rng(1).normal(size=(4, 6))
        a = forward(params, x, train_seed=7)
        b = forward(params, x, train_seed=7)
        c = forward(params, x, train_seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_shape_mismatch(self):
        params = init_params(HeadConfig(input_dim=4))
        with pytest.raises(ValueError):
            forward(params, np.ones((2, 5)))


class TestLoss:
    def test_zero_logit_values(self):
        assert weighted_bce_loss(0.0, 0, 1.0) == pytest.approx(math.log(2), abs=1e-15)
        assert weighted_bce_loss(0.0, 1, 2.0) == pytest.approx(2 * math.log(2), abs=1e-15)

    def test_extreme_logits_stay_finite(self):
        assert math.isfinite(weighted_bce_loss(1000.0, 0, 1.0))
        assert math.isfinite(weighted_bce_loss(-1000.0, 1, 10.0))

    def test_mean_over_batch(self):
        z = np.array([0.0, 0.0])
        y = np.array([0.0, 1.0])
        expected = (math.log(2) + 2 * math.log(2)) / 2
        assert weighted_bce_loss(z, y, 2.0) == pytest.approx(expected, abs=1e-15)

    def test_invalid_pos_weight(self):
        with pytest.raises(ValueError):
            weighted_bce_loss(0.0, 1, 0.0)


class TestBackward:
    def test_matches_finite_differences(self):
        # quick version; the full 24-config sweep runs in the acceptance suite
        assert run_gradient_check(n_configs=8, seed=1) < 1e-4

    def test_empty_batch_rejected(self):
        params = init_params(HeadConfig(input_dim=3, blocks=0))
        with pytest.raises(ValueError):
            backward(params, np.empty((0, 3)), np.empty(0))


class TestDatasets:
    def test_split_is_deterministic_and_partitions(self):
        dataset = LabelledDataset(make_items(40, 6))
        train_a, test_a = split_dataset(dataset, 0.8, seed=3)
        train_b, test_b = split_dataset(dataset, 0.8, seed=3)
        ids = lambda d: [i.paragraph_id for i in d.items]
        assert ids(train_a) == ids(train_b) and ids(test_a) == ids(test_b)
        assert sorted(ids(train_a) + ids(test_a)) == sorted(ids(LabelledDataset(dataset.items)))

    def test_stratified_split_preserves_class_ratio(self):
        items = make_items(100, 4, positive_fraction=0.2, seed=5)
        dataset = LabelledDataset(items)
        train_set, test_set = split_dataset(dataset, 0.8, seed=0, stratified=True)
        n_pos = sum(i.label for i in dataset.items)
        train_pos = sum(i.label for i in train_set.items)
        assert train_pos == int(round(0.8 * n_pos))

    def test_split_ratio_bounds(self):
        dataset = LabelledDataset(make_items(10, 3))
        with pytest.raises(ValueError):
            split_dataset(dataset, 0.0, seed=0)
        with pytest.raises(ValueError):
            split_dataset(dataset, 1.0, seed=0)

    def test_undersample_drop_intro(self):
        dataset = LabelledDataset(make_items(30, 3))
        kept = undersample_drop_intro(dataset, n=20)
        assert all(item.ordinal >= 20 for item in kept.items)
        assert len(kept) == 10

    def test_undersample_random_negative(self):
        dataset = LabelledDataset(make_items(50, 3, seed=2))
        n_neg = sum(1 for i in dataset.items if i.label == 0)
        thinned = undersample_random_negative(dataset, 0.5, seed=0)
        kept_neg = sum(1 for i in thinned.items if i.label == 0)
        assert kept_neg == n_neg - int(round(0.5 * n_neg))
        # positives untouched
        assert sum(i.label for i in thinned.items) == sum(i.label for i in dataset.items)

    def test_label_domain(self):
        with pytest.raises(ValueError):
            LabelledItem(embedding=np.zeros(2), label=2)


class TestEvaluate:
    def test_confusion_counts(self):
        config = HeadConfig(input_dim=1, blocks=0, dropout_p=0.0)
        params = init_params(config)
        params.final_weight[:] = np.array([10.0])
        items = [
            LabelledItem(embedding=np.array([1.0]), label=1),   # tp
            LabelledItem(embedding=np.array([1.0]), label=0),   # fp
            LabelledItem(embedding=np.array([-1.0]), label=1),  # fn
            LabelledItem(embedding=np.array([-1.0]), label=0),  # tn
        ]
        m = evaluate(params, LabelledDataset(items))
        assert (m.tp, m.fp, m.fn, m.tn) == (1, 1, 1, 1)
        assert m.precision == 0.5 and m.recall == 0.5 and m.accuracy == 0.5

    def test_degenerate_metrics_are_zero(self):
        m = evaluate(init_params(HeadConfig(input_dim=2, blocks=0)), LabelledDataset([]))
        assert (m.precision, m.recall, m.accuracy) == (0.0, 0.0, 0.0)

    def test_predict_scores_are_probabilities(self):
        params = init_params(HeadConfig(input_dim=4, blocks=1, hidden_dim=8))
        scores = predict_scores(params, np.random.default_rng(0).normal(size=(10, 4)))
        assert scores.shape == (10,)
        assert np.all((scores >= 0) & (scores <= 1))


class TestTrain:
    def test_learns_separable_data(self):
        dataset = LabelledDataset(make_items(200, 16, seed=4, separation=2.5))
        config = HeadConfig(
            input_dim=16, blocks=1, hidden_dim=32, dropout_p=0.1,
            learning_rate=5e-3, epochs=15, seed=0,
        )
        params, history = train(dataset, config)
        assert len(history) == 15
        assert evaluate(params, dataset).accuracy >= 0.95

    def test_deterministic_given_seed(self):
        dataset = LabelledDataset(make_items(60, 8, seed=1))
        config = HeadConfig(input_dim=8, hidden_dim=16, epochs=3, seed=9)
        a, _ = train(dataset, config)
        b, _ = train(dataset, config)
        for (name, arr_a), (_, arr_b) in zip(a.named_arrays(), b.named_arrays()):
            assert np.array_equal(arr_a, arr_b), name
        assert a.final_bias == b.final_bias

    def test_warm_start_from_init(self):
        dataset = LabelledDataset(make_items(60, 8, seed=1))
        config = HeadConfig(input_dim=8, hidden_dim=16, epochs=2, seed=9)
        first, _ = train(dataset, config)
        resumed, _ = train(dataset, config, init=first)
        assert not np.array_equal(resumed.final_weight, first.final_weight)
        with pytest.raises(ValueError):
            train(dataset, HeadConfig(input_dim=8, hidden_dim=16, blocks=2), init=first)

    def test_divergence_detected(self):
        dataset = LabelledDataset(make_items(40, 4, seed=2))
        config = HeadConfig(input_dim=4, blocks=0, dropout_p=0.0, epochs=2)
        params = init_params(config)
        params.final_weight[:] = np.nan
        with pytest.raises(TrainingDiverged):
            train(dataset, config, init=params)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train(LabelledDataset([]), HeadConfig(input_dim=4))

    def test_hashing_provider_features_are_learnable(self):
        # end-to-end: stem bags -> hashed vectors -> head
        rng = np.random.default_rng(0)
        items = []
        for i in range(120):
            label = i % 2
            words = ["concern", "object", "dispute"] if label else ["thank", "welcom", "support"]
            bag = StemBag({w: int(rng.integers(1, 4)) for w in words})
            items.append(LabelledItem(embedding=hash_embed(bag, 64).values, label=label))
        config = HeadConfig(input_dim=64, hidden_dim=16, dropout_p=0.0,
                            learning_rate=1e-2, epochs=10, seed=0)
        params, _ = train(LabelledDataset(items), config)
        assert evaluate(params, LabelledDataset(items)).accuracy >= 0.95


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        config = HeadConfig(input_dim=6, blocks=2, hidden_dim=8, seed=3)
        params = init_params(config)
        params.final_bias = 0.25
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        assert loaded.config == config
        assert loaded.final_bias == 0.25
        for (name, a), (_, b) in zip(params.named_arrays(), loaded.named_arrays()):
            assert np.array_equal(a, b), name
        x = np.random.default_rng(0).normal(size=(5, 6))
        assert np.array_equal(forward(params, x), forward(loaded, x))

    def test_corruption_rejected(self, tmp_path):
        params = init_params(HeadConfig(input_dim=4, blocks=1, hidden_dim=6))
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, path)
        raw = bytearray(path.read_bytes())
        raw[60] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"hello world, definitely not a checkpoint file")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)


class TestLabelledCsv:
    def test_load(self, tmp_path):
        path = tmp_path / "ext.csv"
        path.write_text('text,label\n"strongly objected",1\n"thanked everyone",0\n')
        assert load_labelled_csv(path) == [("strongly objected", 1), ("thanked everyone", 0)]

    def test_bad_header_and_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(ValueError):
            load_labelled_csv(path)
        path.write_text("text,label\nhello,7\n")
        with pytest.raises(ValueError):
            load_labelled_csv(path)
