"""Loss, schedule, optimizer, hand-derived backprop, and checkpoints."""

import json
import math

import numpy as np
import pytest

from convkernel import (
    ConversationClassifier,
    DimensionMismatchError,
    HashEmbedder,
    KernelFamily,
    KernelShape,
    LabeledExample,
    ModelParams,
    SyntheticConfig,
    TrainConfig,
    bce_loss,
    build_tree,
    evaluate,
    gen_synthetic,
    gradients,
    load_checkpoint,
    save_checkpoint,
    train,
)
from convkernel.training import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    BCE_EPS,
    TrainState,
    adam_step,
    lr_at,
)

from conftest import mk, random_tree
from oracles import fd_gradients, worst_grad_error


class TestBceLoss:
    def test_hand_values(self):
        assert bce_loss(0.5, 1) == pytest.approx(math.log(2.0), abs=1e-15)
        assert bce_loss(0.5, 0) == pytest.approx(math.log(2.0), abs=1e-15)
        assert bce_loss(0.9, 0) == pytest.approx(-math.log(0.1), abs=1e-12)

    def test_clamp_keeps_loss_finite(self):
        assert bce_loss(0.0, 1) == pytest.approx(-math.log(BCE_EPS), abs=1e-12)
        # the clamp acts on p, so label 0 sees 1 - (1 - eps), not eps itself
        assert bce_loss(1.0, 0) == pytest.approx(-math.log(1.0 - (1.0 - BCE_EPS)), abs=1e-12)
        assert bce_loss(1.0, 1) == pytest.approx(-math.log(1.0 - BCE_EPS), abs=1e-12)


class TestLrSchedule:
    CONFIG = TrainConfig(learning_rate=0.4, warmup_fraction=0.1)

    def test_linear_warmup_then_constant(self):
        assert lr_at(self.CONFIG, 0, 100) == 0.0
        assert lr_at(self.CONFIG, 5, 100) == pytest.approx(0.2)
        assert lr_at(self.CONFIG, 10, 100) == 0.4
        assert lr_at(self.CONFIG, 99, 100) == 0.4

    def test_zero_warmup(self):
        config = TrainConfig(learning_rate=0.4, warmup_fraction=0.0)
        assert lr_at(config, 0, 100) == 0.4

    def test_step_out_of_range(self):
        with pytest.raises(ValueError):
            lr_at(self.CONFIG, 101, 100)


class TestAdam:
    @staticmethod
    def _fresh_state(params):
        return TrainState(
            params=params,
            m={k: np.zeros_like(a) for k, a in params.as_dict().items()},
            v={k: np.zeros_like(a) for k, a in params.as_dict().items()},
        )

    def test_first_step_is_signed_lr(self):
        # bias correction makes m_hat=g, v_hat=g^2 on step one, so the
        # update is lr * g / (|g| + eps) regardless of g's magnitude
        params = ModelParams.init(2, hidden=2, seed=0)
        state = self._fresh_state(params)
        before = params.head.b2.copy()
        grads = {k: np.zeros_like(a) for k, a in params.as_dict().items()}
        grads["head_b2"] = np.array([3.0, -0.004])
        adam_step(state, grads, lr=0.1)
        delta = params.head.b2 - before
        assert delta[0] == pytest.approx(-0.1 * 3.0 / (3.0 + ADAM_EPS), abs=1e-15)
        assert delta[1] == pytest.approx(0.1 * 0.004 / (0.004 + ADAM_EPS), abs=1e-15)
        assert state.step == 1

    def test_multi_step_matches_reference_recurrence(self):
        params = ModelParams.init(2, hidden=2, seed=1)
        state = self._fresh_state(params)
        name = "head_w2"
        w_ref = params.head.w2.copy()
        m_ref = np.zeros_like(w_ref)
        v_ref = np.zeros_like(w_ref)

        rng = np.random.default_rng(0)
        for t in range(1, 6):
            g_full = {k: np.zeros_like(a) for k, a in params.as_dict().items()}
            g = rng.normal(size=w_ref.shape)
            g_full[name] = g
            adam_step(state, g_full, lr=0.05)

            m_ref = ADAM_BETA1 * m_ref + (1 - ADAM_BETA1) * g
            v_ref = ADAM_BETA2 * v_ref + (1 - ADAM_BETA2) * g * g
            m_hat = m_ref / (1 - ADAM_BETA1**t)
            v_hat = v_ref / (1 - ADAM_BETA2**t)
            w_ref = w_ref - 0.05 * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
            assert np.allclose(params.head.w2, w_ref, atol=1e-14)


def _model(family, seed, L=2):
    shape = KernelShape(family, L=L) if family is not None else None
    return ConversationClassifier.create(
        HashEmbedder(8), shape, hidden=4, seed=seed
    )


def _batch_for(tree, rng, k=3):
    ids = sorted(tree.comments)
    picks = rng.choice(len(ids), size=min(k, len(ids)), replace=False)
    return [
        LabeledExample(tree.conversation_id, ids[i], int(rng.integers(0, 2)))
        for i in sorted(picks)
    ]


class TestGradients:
    def test_batch_gradient_is_mean_of_singles(self, t0):
        model = _model(KernelFamily.ANC_SIB_CHILD, seed=0)
        examples = [
            LabeledExample("t0", "c", 1),
            LabeledExample("t0", "f", 0),
        ]
        both, _ = gradients(model, {"t0": t0}, examples)
        first, _ = gradients(model, {"t0": t0}, examples[:1])
        second, _ = gradients(model, {"t0": t0}, examples[1:])
        for name in both:
            assert np.allclose(
                both[name], (first[name] + second[name]) / 2.0, atol=1e-12
            )

    def test_loss_matches_forward(self, t0):
        model = _model(KernelFamily.ONE_TWO_HOP, seed=1)
        example = LabeledExample("t0", "c", 1)
        _, loss = gradients(model, {"t0": t0}, [example])
        p = model.predict(t0, "c").p_positive
        assert loss == pytest.approx(bce_loss(p, 1), abs=1e-15)

    @pytest.mark.parametrize("family", [KernelFamily.ANC_SIB_CHILD, KernelFamily.ONE_TWO_HOP])
    def test_finite_differences_windowed(self, family):
        rng = np.random.default_rng(100 if family is KernelFamily.ANC_SIB_CHILD else 200)
        for seed in range(3):
            model = _model(family, seed=seed)
            tree = random_tree(rng, 12, conv="g")
            batch = _batch_for(tree, rng)
            analytic, _ = gradients(model, {"g": tree}, batch)
            numeric = fd_gradients(model, {"g": tree}, batch)
            worst, where = worst_grad_error(analytic, numeric)
            assert worst <= 1.0, f"seed {seed}: {where} off by {worst:.2f}x tolerance"

    def test_finite_differences_fallback(self):
        tree = build_tree([mk("solo", None, 0, conv="g", text="alone here")])
        batch = [LabeledExample("g", "solo", 1)]
        for model in (_model(KernelFamily.ANC_SIB_CHILD, seed=5), _model(None, seed=6)):
            analytic, _ = gradients(model, {"g": tree}, batch)
            numeric = fd_gradients(model, {"g": tree}, batch)
            worst, where = worst_grad_error(analytic, numeric)
            assert worst <= 1.0, f"{where} off by {worst:.2f}x tolerance"
            assert not analytic["w_comment"].any()
            assert not analytic["w_window"].any()


def _toy_run(seed=0, epochs=4, lr=0.05):
    config = SyntheticConfig(
        n_trees=60, nodes_per_tree=(6, 10), seed=seed, window_size=2
    )
    trees, examples = gen_synthetic(config)
    model = ConversationClassifier.create(
        HashEmbedder(64),
        KernelShape(KernelFamily.ANC_SIB_CHILD, L=2),
        hidden=16,
        seed=seed,
    )
    train_config = TrainConfig(
        batch_size=8, learning_rate=lr, epochs=epochs, L=2, seed=seed
    )
    state = train(model, trees, examples[:44], examples[44:], train_config)
    return model, trees, examples, train_config, state


class TestTrainLoop:
    def test_learns_toy_task(self):
        model, trees, examples, _, state = _toy_run()
        assert len(state.history) == 4
        assert state.history[-1].train_loss < state.history[0].train_loss
        report = evaluate(model, trees, examples[:44])
        assert report.accuracy > 0.7

    def test_best_epoch_restored(self):
        model, trees, examples, _, state = _toy_run()
        assert 1 <= state.best_epoch <= len(state.history)
        assert state.best_val_macro_f1 == max(h.val_macro_f1 for h in state.history)
        report = evaluate(model, trees, examples[44:])
        assert report.macro_f1 == pytest.approx(state.best_val_macro_f1, abs=1e-12)

    def test_empty_sets_rejected(self, t0):
        model = _model(KernelFamily.ANC_SIB_CHILD, seed=0)
        example = LabeledExample("t0", "c", 1)
        from convkernel import EmptyDatasetError

        with pytest.raises(EmptyDatasetError):
            train(model, {"t0": t0}, [], [example], TrainConfig())
        with pytest.raises(EmptyDatasetError):
            train(model, {"t0": t0}, [example], [], TrainConfig())

    def test_epoch_callback_fires(self):
        seen = []
        config = SyntheticConfig(n_trees=20, nodes_per_tree=(5, 7), seed=3, window_size=2)
        trees, examples = gen_synthetic(config)
        model = ConversationClassifier.create(
            HashEmbedder(32), KernelShape(KernelFamily.ANC_SIB_CHILD, L=2), hidden=8, seed=0
        )
        train(model, trees, examples[:14], examples[14:],
              TrainConfig(batch_size=4, epochs=2, L=2), on_epoch=seen.append)
        assert [s.epoch for s in seen] == [1, 2]


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        model, trees, _, config, state = _toy_run(epochs=2)
        path = tmp_path / "model.json"
        save_checkpoint(path, model, config, history=state.history,
                        best_epoch=state.best_epoch)
        loaded, payload = load_checkpoint(path)

        for name, arr in model.params.as_dict().items():
            assert np.array_equal(arr, loaded.params.as_dict()[name])
        assert payload["format_version"] == 1
        assert payload["kind"] == "convkernel-checkpoint"
        assert payload["family"] == "anc_sib_child"
        assert payload["L"] == 2
        assert loaded.provider.name == model.provider.name
        assert len(payload["history"]) == 2

        tree = trees[sorted(trees)[0]]
        target = sorted(tree.comments)[0]
        assert (
            loaded.predict(tree, target).p_positive
            == model.predict(tree, target).p_positive
        )

    def test_wrong_dimension_provider_rejected(self, tmp_path):
        model, _, _, config, _ = _toy_run(epochs=1)
        path = tmp_path / "model.json"
        save_checkpoint(path, model, config)
        with pytest.raises(DimensionMismatchError):
            load_checkpoint(path, provider=HashEmbedder(8))

    def test_missing_version_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"kind": "convkernel-checkpoint"}))
        with pytest.raises(Exception):
            load_checkpoint(path)

    def test_identical_runs_identical_files(self, tmp_path):
        paths = []
        for run in ("a", "b"):
            model, _, _, config, state = _toy_run(epochs=2)
            path = tmp_path / f"{run}.json"
            save_checkpoint(path, model, config, history=state.history,
                            best_epoch=state.best_epoch)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()
