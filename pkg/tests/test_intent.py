import numpy as np
import pytest

from shopassist.embeddings import load_embeddings, save_embeddings
from shopassist.intent import (
    EmptyDataset,
    EmptyQuestion,
    IntentConfig,
    IntentModel,
    LabelOutOfRange,
    TrainConfig,
    build_input,
    evaluate,
    forward,
    grad_check,
    init_model,
    load_model,
    loss_of,
    predict,
    save_model,
    train,
)
from shopassist.synth import encode_intent_examples, intent_benchmark
from shopassist.textutil import PAD_ID, Vocabulary


def small_vocab():
    return Vocabulary({"a": 2, "b": 3, "c": 4, "d": 5, "refund": 6, "t1": 7, "t2": 8})


class TestBuildInput:
    VOCAB = small_vocab()

    def test_padding(self):
        ids = build_input(["refund"], [], [], self.VOCAB, 4)
        assert ids.tolist() == [6, PAD_ID, PAD_ID, PAD_ID]

    def test_exact_fit(self):
        ids = build_input(["a", "b"], ["t1"], ["t2"], self.VOCAB, 4)
        assert ids.tolist() == [2, 3, 7, 8]

    def test_words_truncated_before_tags(self):
        ids = build_input(["a", "b", "c"], ["t1"], ["t2"], self.VOCAB, 4)
        assert ids.tolist() == [2, 3, 7, 8]

    def test_tags_truncate_only_when_alone_too_long(self):
        ids = build_input(["a"], ["t1", "t2"], ["t1", "t2"], self.VOCAB, 3)
        assert ids.tolist() == [7, 8, 7]

    def test_oov_maps_to_unk(self):
        ids = build_input(["zzz"], [], [], self.VOCAB, 2)
        assert ids.tolist() == [1, PAD_ID]


def hand_toy_model():
    """d=1, one width-1 filter with weight 1, identity-ish output over 2 classes."""
    vocab = Vocabulary({"a": 2, "b": 3})
    cfg = IntentConfig(emb_dim=1, windows=(1,), filters=1, max_len=2, seed=0)
    params = {
        "emb": np.array([[0.0], [0.0], [2.0], [-1.0]]),
        "conv_w1": np.array([[[1.0]]]),
        "conv_b1": np.zeros(1),
        "out_w": np.array([[1.0], [0.0]]),
        "out_b": np.zeros(2),
    }
    return IntentModel(vocab, ("c0", "c1"), cfg, params)


class TestForward:
    def test_single_class_softmax(self):
        vocab = small_vocab()
        cfg = IntentConfig(emb_dim=2, windows=(1,), filters=2, max_len=3, seed=0)
        model = init_model(vocab, ["only"], cfg)
        probs = forward(model, np.array([2, 3, 4]))
        assert probs.shape == (1,) and probs[0] == pytest.approx(1.0)

    def test_hand_computed_toy(self):
        model = hand_toy_model()
        ids = np.array([2, 3])  # "a b" -> pooled max(2, -1) = 2 -> softmax([2, 0])
        probs = forward(model, ids)
        expected = np.exp([2.0, 0.0]) / np.exp([2.0, 0.0]).sum()
        assert probs == pytest.approx(expected, abs=1e-12)
        assert probs[0] == pytest.approx(0.8808, abs=1e-4)
        assert probs[1] == pytest.approx(0.1192, abs=1e-4)

    def test_all_pad_input_uniform(self):
        vocab = small_vocab()
        cfg = IntentConfig(emb_dim=4, windows=(2,), filters=3, max_len=5, seed=3)
        model = init_model(vocab, ["x", "y", "z"], cfg)
        probs = forward(model, np.full(5, PAD_ID))
        assert probs == pytest.approx(np.full(3, 1 / 3), abs=1e-12)

    def test_softmax_sums_to_one_and_in_open_interval(self):
        vocab = small_vocab()
        cfg = IntentConfig(emb_dim=8, windows=(2, 3), filters=4, max_len=6, seed=1)
        model = init_model(vocab, ["a", "b", "c", "d"], cfg)
        rng = np.random.default_rng(0)
        for _ in range(20):
            ids = rng.integers(0, len(vocab), size=6)
            probs = forward(model, ids)
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)
            assert np.all(probs > 0) and np.all(probs < 1)

    def test_pooling_invariant_to_window_position_permutation(self):
        # two inputs whose windows produce the same multiset of activations
        model = hand_toy_model()
        probs_ab = forward(model, np.array([2, 3]))
        probs_ba = forward(model, np.array([3, 2]))
        assert probs_ab == pytest.approx(probs_ba, abs=1e-15)


class TestTrain:
    def _toy(self, seed=0):
        bench = intent_benchmark(n_classes=2, per_class=50, seed=seed, ambiguous_frac=0.0)
        train_set = encode_intent_examples(bench, bench.train, 12, with_tags=False)
        held_set = encode_intent_examples(bench, bench.held, 12, with_tags=False)
        return bench, train_set, held_set

    def test_epochs_zero_returns_seeded_init(self):
        bench, train_set, _ = self._toy()
        cfg = IntentConfig(emb_dim=8, windows=(2,), filters=4, max_len=12, seed=5)
        model = train(train_set, sorted(bench.labels), bench.vocab, cfg,
                      TrainConfig(epochs=0, seed=5))
        fresh = init_model(bench.vocab, sorted(bench.labels), cfg)
        for key in model.params:
            assert np.array_equal(model.params[key], fresh.params[key])

    def test_separable_toy_reaches_95_within_30_epochs(self):
        bench, train_set, held_set = self._toy()
        cfg = IntentConfig(emb_dim=16, windows=(2, 3), filters=8, max_len=12, seed=0)
        model0 = train(train_set, sorted(bench.labels), bench.vocab, cfg,
                       TrainConfig(epochs=0, seed=0))
        loss0 = loss_of(model0, np.stack([x for x, _ in train_set]),
                        np.array([y for _, y in train_set]))
        model = train(train_set, sorted(bench.labels), bench.vocab, cfg,
                      TrainConfig(epochs=30, lr=0.2, batch_size=16, seed=0))
        loss10 = loss_of(model, np.stack([x for x, _ in train_set]),
                         np.array([y for _, y in train_set]))
        assert evaluate(model, train_set) >= 0.95
        assert loss10 < loss0
        assert evaluate(model, held_set) >= 0.9

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            train([], ["a"], small_vocab(), IntentConfig(max_len=4, windows=(2,)),
                  TrainConfig())

    def test_label_out_of_range(self):
        ids = np.zeros(4, dtype=np.int64)
        with pytest.raises(LabelOutOfRange):
            train([(ids, 5)], ["a", "b"], small_vocab(),
                  IntentConfig(max_len=4, windows=(2,)), TrainConfig())

    def test_deterministic_given_seed(self):
        bench, train_set, _ = self._toy()
        cfg = IntentConfig(emb_dim=8, windows=(2,), filters=4, max_len=12, seed=9)
        tcfg = TrainConfig(epochs=3, seed=9)
        m1 = train(train_set, sorted(bench.labels), bench.vocab, cfg, tcfg)
        m2 = train(train_set, sorted(bench.labels), bench.vocab, cfg, tcfg)
        for key in m1.params:
            assert np.array_equal(m1.params[key], m2.params[key])


class TestPredict:
    def test_same_inputs_same_prediction(self):
        model = hand_toy_model()
        p1 = predict(model, "a b", [], [])
        p2 = predict(model, "a b", [], [])
        assert p1.label == p2.label
        assert p1.probs == pytest.approx(p2.probs)

    def test_composition_contract(self):
        model = hand_toy_model()
        pred = predict(model, "a b", [], [])
        ids = build_input(["a", "b"], [], [], model.vocab, model.cfg.max_len)
        assert pred.probs == pytest.approx(forward(model, ids), abs=0)

    def test_empty_question(self):
        with pytest.raises(EmptyQuestion):
            predict(hand_toy_model(), "   ", [], [])

    def test_argmax_tie_breaks_to_smallest_label(self):
        vocab = small_vocab()
        cfg = IntentConfig(emb_dim=2, windows=(1,), filters=2, max_len=2, seed=0)
        model = init_model(vocab, ["zeta", "alpha"], cfg)
        for key in model.params:
            model.params[key] = np.zeros_like(model.params[key])
        pred = predict(model, "a", [], [])
        assert pred.label == "alpha"  # uniform probs, labels sorted


class TestGradCheck:
    def _random_model(self, seed):
        vocab = Vocabulary({f"w{i}": i + 2 for i in range(6)})
        cfg = IntentConfig(emb_dim=4, windows=(2, 3), filters=3, max_len=6, seed=seed)
        model = init_model(vocab, ["a", "b", "c"], cfg)
        rng = np.random.default_rng(seed + 100)
        for key in model.params:
            model.params[key] = rng.normal(0, 0.5, size=model.params[key].shape)
        return model

    @pytest.mark.parametrize("seed", [0, 1])
    def test_error_below_1e4(self, seed):
        model = self._random_model(seed)
        rng = np.random.default_rng(seed)
        ids = rng.integers(0, 8, size=6)
        assert grad_check(model, ids, int(rng.integers(3)), eps=1e-5) < 1e-4

    def test_zero_gradient_contributes_zero(self):
        # an embedding row for an id absent from the input has zero analytic
        # and zero numeric gradient; the guarded denominator yields 0 for it
        model = self._random_model(2)
        ids = np.array([2, 3, 2, 3, 2, 3])
        err = grad_check(model, ids, 0, eps=1e-5)
        assert err < 1e-4

    def test_eps_bounds_enforced(self):
        model = self._random_model(0)
        with pytest.raises(ValueError):
            grad_check(model, np.zeros(6, dtype=int), 0, eps=1e-2)


class TestPersistence:
    def test_bit_exact_round_trip(self, tmp_path):
        bench = intent_benchmark(n_classes=2, per_class=10, seed=1)
        train_set = encode_intent_examples(bench, bench.train, 8, with_tags=True)
        cfg = IntentConfig(emb_dim=6, windows=(2,), filters=3, max_len=8, seed=2)
        model = train(train_set, sorted(bench.labels), bench.vocab, cfg,
                      TrainConfig(epochs=2, seed=2))
        path = tmp_path / "model.npz"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.labels == model.labels
        assert loaded.cfg == model.cfg
        assert len(loaded.vocab) == len(model.vocab)
        for key in model.params:
            assert np.array_equal(loaded.params[key], model.params[key])

    def test_pretrained_embeddings_applied(self, tmp_path):
        vectors = {"a": np.array([9.0, 8.0]), "zzz": np.array([1.0, 1.0])}
        path = tmp_path / "emb.txt"
        save_embeddings(path, vectors)
        loaded = load_embeddings(path)
        assert loaded["a"] == pytest.approx(vectors["a"])
        vocab = Vocabulary({"a": 2, "b": 3})
        cfg = IntentConfig(emb_dim=2, windows=(1,), filters=2, max_len=3, seed=0)
        model = init_model(vocab, ["x", "y"], cfg, pretrained=loaded)
        assert model.params["emb"][2] == pytest.approx([9.0, 8.0])
        # rows without pretrained vectors keep the seeded init
        assert np.abs(model.params["emb"][3]).max() <= 0.5 / 2
