import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trackpgd.attack import (AttackConfig, TrackPGD, attack_sequence, baseline_attack,
                             clean_track, clip_eps, trackpgd_attack)
from trackpgd.exceptions import AttackError, GradientError, InvalidInputError
from trackpgd.losses import LossConfig, attack_objective

KINDS = ["trackpgd", "segpgd_obj", "segpgd_bg", "bce_pgd"]


class TestClipEps:
    def test_interior_unchanged(self):
        x = np.full((2, 2, 3), 0.5)
        c = x + 0.01
        assert np.array_equal(clip_eps(c, x, 0.05), c)

    def test_boundary_clamp(self):
        x = np.full((2, 2, 3), 0.5)
        c = x.copy()
        c[0, 0, 0] = 0.5 + 2 * 0.05
        out = clip_eps(c, x, 0.05)
        assert out[0, 0, 0] == pytest.approx(0.55)
        assert np.array_equal(out[1], x[1])

    def test_range_dominates(self):
        x = np.full((1, 1, 1), 0.99)
        assert clip_eps(np.full((1, 1, 1), 1.2), x, 0.05)[0, 0, 0] == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            clip_eps(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)), 0.1)

    @given(st.integers(0, 10_000), st.floats(0.0, 0.2))
    def test_projection_bounds(self, seed, eps):
        rng = np.random.default_rng(seed)
        x = rng.random((3, 4, 3))
        out = clip_eps(x + rng.normal(0, 0.3, size=x.shape), x, eps)
        assert np.max(np.abs(out - x)) <= eps + 1e-12
        assert out.min() >= 0 and out.max() <= 1


class TestConfig:
    def test_defaults(self):
        cfg = AttackConfig()
        assert cfg.epsilon == pytest.approx(8 / 255) and cfg.alpha == pytest.approx(2 / 255)
        assert cfg.iters == 10 and cfg.step_sign == "ascend"
        assert cfg.loss_cfg.total_iters == 10

    def test_schedule_follows_iters(self):
        assert AttackConfig(iters=4).loss_cfg.total_iters == 4
        assert AttackConfig(iters=0).loss_cfg.total_iters == 1

    @pytest.mark.parametrize("kwargs", [dict(epsilon=1.5), dict(alpha=0.0), dict(iters=-1),
                                        dict(step_sign="up"), dict(attack_kind="fgsm")])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            AttackConfig(**kwargs)

    def test_warns_large_step(self):
        with pytest.warns(UserWarning):
            AttackConfig(epsilon=0.01, alpha=0.02)


class TestSingleFrame:
    def test_zero_iterations(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        res = trackpgd_attack(untrained_tracker, state, frame, mask, AttackConfig(iters=0))
        assert np.array_equal(res.adv_frame, frame) and res.iterations_run == 0

    def test_zero_epsilon(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        res = trackpgd_attack(untrained_tracker, state, frame, mask, AttackConfig(epsilon=0.0, iters=5))
        assert np.array_equal(res.adv_frame, frame)
        assert len(res.per_iter_losses) == 5

    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("sign", ["ascend", "descend"])
    def test_every_iterate_in_ball(self, untrained_tracker, random_frame_case, kind, sign):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        for iters in (1, 3, 6):
            cfg = AttackConfig(iters=iters, attack_kind=kind, step_sign=sign)
            res = baseline_attack(untrained_tracker, state, frame, mask, cfg)
            assert res.linf_norm <= cfg.epsilon + 1e-6
            assert res.adv_frame.min() >= 0 and res.adv_frame.max() <= 1
            assert res.iterations_run == iters == len(res.per_iter_losses)

    def test_deterministic(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        a = trackpgd_attack(untrained_tracker, state, frame, mask)
        b = trackpgd_attack(untrained_tracker, state, frame, mask)
        assert a.adv_frame.tobytes() == b.adv_frame.tobytes()
        assert a.per_iter_losses == b.per_iter_losses

    @pytest.mark.parametrize("kind", KINDS)
    def test_small_step_increases_loss(self, untrained_tracker, random_frame_case, kind):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        cfg = AttackConfig(iters=1, epsilon=1e-4, alpha=1e-4, attack_kind=kind)
        res = baseline_attack(untrained_tracker, state, frame, mask, cfg)

        def loss(x):
            logits = untrained_tracker.predict_logits(state, x)
            return attack_objective(kind, logits, mask, cfg.loss_cfg, 1)[1].total

        assert loss(res.adv_frame) > loss(frame)

    @pytest.mark.parametrize("kind", KINDS)
    def test_single_step_follows_gradient_sign(self, untrained_tracker, random_frame_case, kind):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        cfg = AttackConfig(iters=1, attack_kind=kind, epsilon=0.05, alpha=0.01)
        res = baseline_attack(untrained_tracker, state, frame, mask, cfg)

        def loss(x):
            logits = untrained_tracker.predict_logits(state, x)
            return float(attack_objective(kind, logits, mask, cfg.loss_cfg, 1)[0])

        rng = np.random.default_rng(1)
        h = 1e-5
        checked = 0
        for flat in rng.choice(frame.size, size=40, replace=False):
            idx = np.unravel_index(flat, frame.shape)
            xp, xm = frame.copy(), frame.copy()
            xp[idx] += h
            xm[idx] -= h
            fd = (loss(xp) - loss(xm)) / (2 * h)
            if abs(fd) < 1e-8:
                continue
            assert np.sign(res.adv_frame[idx] - frame[idx]) == np.sign(fd)
            checked += 1
        assert checked >= 20

    def test_descend_moves_opposite(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        up = trackpgd_attack(untrained_tracker, state, frame, mask, AttackConfig(iters=1, epsilon=0.05, alpha=0.01))
        down = trackpgd_attack(untrained_tracker, state, frame, mask,
                               AttackConfig(iters=1, epsilon=0.05, alpha=0.01, step_sign="descend"))
        assert np.allclose(up.adv_frame - frame, -(down.adv_frame - frame))

    def test_segpgd_obj_confident_start(self, untrained_tracker, random_frame_case):
        frame, _ = random_frame_case
        state = untrained_tracker.init(frame, random_frame_case[1])
        pred = untrained_tracker.predict(state, frame)
        logits = untrained_tracker.predict_logits(state, frame)
        _, b = attack_objective("segpgd_obj", logits * 1e3, pred, LossConfig(), 1)
        # lambda = 0 at t = 1 and the prediction is its own ground truth: only correct pixels remain
        assert b.segpgd_neg_term == 0.0 and b.delta < 1e-6

    def test_prev_mask_shape_mismatch(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        with pytest.raises(InvalidInputError):
            trackpgd_attack(untrained_tracker, state, frame, mask[:-1])


class _Broken:
    capabilities = frozenset({"predicts_logits", "provides_input_gradient"})

    def __init__(self, grad):
        self.grad = grad

    def perturbable_region(self, state, frame):
        return None

    def input_gradient(self, state, frame, loss_evaluator):
        if isinstance(self.grad, Exception):
            raise self.grad
        return np.full(frame.shape, self.grad)


class _Regional(_Broken):
    def perturbable_region(self, state, frame):
        r = np.zeros(frame.shape[:2])
        r[:2] = 1
        return r


def test_non_finite_gradient_aborts(random_frame_case):
    frame, mask = random_frame_case
    with pytest.raises(GradientError):
        trackpgd_attack(_Broken(np.nan), None, frame, mask)


def test_forward_failure_is_attack_error(random_frame_case):
    frame, mask = random_frame_case
    with pytest.raises(AttackError):
        trackpgd_attack(_Broken(RuntimeError("boom")), None, frame, mask)


def test_perturbable_region_respected(random_frame_case):
    frame, mask = random_frame_case
    res = trackpgd_attack(_Regional(1.0), None, frame, mask, AttackConfig(iters=2))
    assert np.array_equal(res.adv_frame[2:], frame[2:])
    assert not np.array_equal(res.adv_frame[:2], frame[:2])


class TestSequence:
    def test_none_equals_clean(self, untrained_tracker, tiny_sequences):
        seq = tiny_sequences[0]
        steps = attack_sequence(untrained_tracker, seq.frames, seq.masks[0], AttackConfig(attack_kind="none"))
        clean = clean_track(untrained_tracker, seq.frames, seq.masks[0])
        assert all(np.array_equal(s.pred_mask, c) for s, c in zip(steps, clean))
        assert all(np.array_equal(s.result.adv_frame, f) for s, f in zip(steps, seq.frames[1:]))

    def test_two_frames(self, untrained_tracker, tiny_sequences):
        seq = tiny_sequences[1]
        steps = attack_sequence(untrained_tracker, seq.frames[:2], seq.masks[0], AttackConfig(iters=2))
        assert len(steps) == 1
        assert np.array_equal(steps[0].ground_truth_used, seq.masks[0])

    def test_chains_previous_prediction(self, untrained_tracker, tiny_sequences):
        seq = tiny_sequences[2]
        steps = attack_sequence(untrained_tracker, seq.frames, seq.masks[0], AttackConfig(iters=2))
        for prev, cur in zip(steps, steps[1:]):
            assert np.array_equal(cur.ground_truth_used, prev.pred_mask)

    def test_errors(self, untrained_tracker, tiny_sequences):
        seq = tiny_sequences[0]
        with pytest.raises(InvalidInputError):
            attack_sequence(untrained_tracker, seq.frames, None, AttackConfig())
        with pytest.raises(InvalidInputError):
            attack_sequence(untrained_tracker, seq.frames[:1], seq.masks[0], AttackConfig())


class TestEstimator:
    def test_params_round_trip(self):
        a = TrackPGD(lambda1=3.0, iters=4)
        assert a.get_params()["lambda1"] == 3.0
        a.set_params(lambda2=0.5)
        cfg = a.config()
        assert cfg.loss_cfg.lambda2 == 0.5 and cfg.loss_cfg.total_iters == 4

    def test_transform(self, untrained_tracker, tiny_sequences):
        seq = tiny_sequences[0]
        adv = TrackPGD(iters=2).fit(untrained_tracker).transform(seq.frames, seq.masks[0])
        assert adv.shape == seq.frames.shape
        assert np.array_equal(adv[0], seq.frames[0])
        assert np.max(np.abs(adv - seq.frames)) <= 8 / 255 + 1e-6

    def test_requires_fit(self, tiny_sequences):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            TrackPGD().transform(tiny_sequences[0].frames, tiny_sequences[0].masks[0])

    def test_rejects_tracker_without_gradients(self):
        class NoGrad:
            capabilities = frozenset({"predicts_logits"})
        with pytest.raises(InvalidInputError):
            TrackPGD().fit(NoGrad())
