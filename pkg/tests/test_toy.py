import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from trackpgd.exceptions import InvalidInputError
from trackpgd.toy import ToyTracker, generate_toy_sequences
from trackpgd.toy.synthetic import AREA_LIMITS, MIN_COLOR_DISTANCE
from trackpgd.toy.tracker import context_region
from trackpgd.masks import BoundingBox


class TestGenerator:
    def test_shapes_and_dtypes(self):
        (s,) = generate_toy_sequences(0, 1, 5, 20)
        assert s.frames.shape == (5, 20, 20, 3) and s.frames.dtype == np.float64
        assert s.masks.shape == (5, 20, 20) and s.masks.dtype == np.uint8
        assert set(np.unique(s.masks)) <= {0, 1}
        assert len(s) == 5 and s.name == "toy_0_0000"

    def test_quantised_to_8_bit(self):
        (s,) = generate_toy_sequences(3, 1, 3, 16)
        assert np.array_equal(np.round(s.frames * 255) / 255, s.frames)
        assert s.frames.min() >= 0 and s.frames.max() <= 1

    def test_deterministic(self):
        a = generate_toy_sequences(11, 3, 4, 16)
        b = generate_toy_sequences(11, 3, 4, 16)
        for x, y in zip(a, b):
            assert np.array_equal(x.frames, y.frames) and np.array_equal(x.masks, y.masks)

    def test_prefix_stable(self):
        a = generate_toy_sequences(5, 2, 4, 16)
        b = generate_toy_sequences(5, 4, 4, 16)
        assert np.array_equal(a[1].frames, b[1].frames)

    def test_seeds_differ(self):
        a, = generate_toy_sequences(1, 1, 2, 16)
        b, = generate_toy_sequences(2, 1, 2, 16)
        assert not np.array_equal(a.frames, b.frames)

    def test_single_frame(self):
        (s,) = generate_toy_sequences(0, 1, 1, 16)
        assert s.frames.shape[0] == 1 and s.masks[0].sum() > 0

    def test_rectangular_frames(self):
        (s,) = generate_toy_sequences(0, 1, 2, (16, 24))
        assert s.frames.shape == (2, 16, 24, 3)

    @pytest.mark.parametrize("kwargs", [dict(count=0), dict(length=0), dict(contrast=0.0),
                                        dict(contrast=1.5)])
    def test_invalid(self, kwargs):
        args = dict(seed=0, count=1, length=2, frame_size=16)
        args.update(kwargs)
        with pytest.raises(ValueError):
            generate_toy_sequences(**args)

    def test_area_fraction_bounds(self):
        # 100 sequences x 10 frames = 1000 masks
        seqs = generate_toy_sequences(42, 100, 10, 32)
        frac = np.concatenate([s.masks.reshape(len(s), -1).mean(1) for s in seqs])
        assert frac.size == 1000
        assert frac.min() >= AREA_LIMITS[0] and frac.max() <= AREA_LIMITS[1]

    def test_colours_separated(self):
        for s in generate_toy_sequences(9, 20, 1, 16):
            for c in np.concatenate([s.background_colors, s.distractor_colors]):
                assert np.linalg.norm(c - s.object_color) >= MIN_COLOR_DISTANCE

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_mask_is_painted_object(self, seed):
        # the noise-free render changes exactly where the mask says, given distinct colours
        (s,) = generate_toy_sequences(seed, 1, 3, 16, keep_layers=True)
        for (backdrop, painted), m in zip(s.meta["layers"], s.masks):
            changed = np.any(np.abs(painted - backdrop) > 1e-12, axis=-1)
            assert np.array_equal(changed, m.astype(bool))

    def test_contrast_compresses_range(self):
        (full,) = generate_toy_sequences(4, 1, 2, 16, contrast=1.0, noise=0.0)
        (low,) = generate_toy_sequences(4, 1, 2, 16, contrast=0.25, noise=0.0)
        assert np.abs(low.frames - 0.5).max() <= 0.25 * 0.5 + 1 / 255
        assert np.abs(full.frames - 0.5).max() > 0.25


class TestContextRegion:
    def test_clipped(self):
        r = context_region(BoundingBox(0, 0, 2, 2), (5, 5), 1.0)
        assert r.sum() == 16 and r[:4, :4].all()


class TestTracker:
    def test_unfitted(self, random_frame_case):
        frame, mask = random_frame_case
        with pytest.raises(Exception):
            ToyTracker().init(frame, mask)

    def test_empty_train_set(self):
        with pytest.raises(InvalidInputError):
            ToyTracker().fit([])

    def test_init_rejects_empty_mask(self, untrained_tracker, random_frame_case):
        frame, _ = random_frame_case
        with pytest.raises(InvalidInputError):
            untrained_tracker.init(frame, np.zeros((16, 16), np.uint8))

    def test_init_rejects_shape_mismatch(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        with pytest.raises(InvalidInputError):
            untrained_tracker.init(frame, mask[:8])

    def test_logits_shape_and_determinism(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        a = untrained_tracker.predict_logits(state, frame)
        b = untrained_tracker.predict_logits(untrained_tracker.init(frame, mask), frame)
        assert a.shape == (16, 16) and a.dtype == np.float64
        assert np.array_equal(a, b)
        assert np.array_equal(untrained_tracker.predict(state, frame), (a > 0).astype(np.uint8))

    def test_frame_shape_checked(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        with pytest.raises(InvalidInputError):
            untrained_tracker.predict_logits(state, frame[:8])

    def test_perturbable_region_is_whole_frame(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        assert untrained_tracker.perturbable_region(untrained_tracker.init(frame, mask), frame) is None


class TestInputGradient:
    def test_constant_loss_gives_zero(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        g = untrained_tracker.input_gradient(state, frame, lambda z: torch.tensor(1.0))
        assert g.shape == frame.shape and not g.any()

    def test_linear_in_loss(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        state = untrained_tracker.init(frame, mask)
        g1 = untrained_tracker.input_gradient(state, frame, lambda z: z.sum())
        g3 = untrained_tracker.input_gradient(state, frame, lambda z: 3 * z.sum())
        np.testing.assert_allclose(g3, 3 * g1, rtol=1e-12, atol=1e-15)

    def test_matches_finite_differences(self, untrained_tracker, random_frame_case):
        frame, mask = random_frame_case
        trk = untrained_tracker
        state = trk.init(frame, mask)
        g = trk.input_gradient(state, frame, lambda z: z.sum())
        rng = np.random.default_rng(1)
        h = 1e-5
        for flat in rng.choice(frame.size, size=20, replace=False):
            idx = np.unravel_index(flat, frame.shape)
            up, dn = frame.copy(), frame.copy()
            up[idx] += h
            dn[idx] -= h
            fd = (trk.predict_logits(state, up).sum() - trk.predict_logits(state, dn).sum()) / (2 * h)
            assert abs(fd - g[idx]) <= 1e-5 * max(1.0, abs(fd))


class TestTraining:
    def test_zero_epochs(self, tiny_sequences):
        trk = ToyTracker(channels=4, epochs=0).fit(tiny_sequences)
        assert trk.train_history_ == [] and trk.receptive_field_ == 13

    def test_standardisation_fitted(self, tiny_sequences):
        trk = ToyTracker(channels=4, epochs=0).fit(tiny_sequences)
        pixels = np.concatenate([s.frames.reshape(-1, 3) for s in tiny_sequences])
        np.testing.assert_allclose(trk.weights_["in_mean"].ravel(), pixels.mean(0), rtol=1e-5)
        np.testing.assert_allclose(trk.weights_["in_std"].ravel(), pixels.std(0), rtol=1e-4)

    def test_same_seed_same_weights(self, tiny_sequences):
        a = ToyTracker(channels=4, epochs=1, pairs_per_sequence=4, batch_size=4, seed=2).fit(tiny_sequences)
        b = ToyTracker(channels=4, epochs=1, pairs_per_sequence=4, batch_size=4, seed=2).fit(tiny_sequences)
        assert len(a.train_history_) == 1 and np.isfinite(a.train_history_[0])
        for k in a.weights_:
            assert np.array_equal(a.weights_[k], b.weights_[k])

    def test_loss_decreases(self):
        seqs = generate_toy_sequences(0, 16, 4, 16)
        trk = ToyTracker(channels=8, epochs=6, pairs_per_sequence=8, batch_size=16).fit(seqs)
        assert trk.train_history_[-1] < trk.train_history_[0]

    def test_get_params_roundtrip(self):
        trk = ToyTracker(channels=5, lr=0.01)
        assert ToyTracker(**trk.get_params()).get_params() == trk.get_params()


class TestPersistence:
    def test_roundtrip(self, untrained_tracker, random_frame_case, tmp_path):
        frame, mask = random_frame_case
        path = tmp_path / "w.bin"
        untrained_tracker.save(path)
        loaded = ToyTracker.load(path)
        assert loaded.get_params() == untrained_tracker.get_params()
        s1, s2 = untrained_tracker.init(frame, mask), loaded.init(frame, mask)
        assert np.array_equal(untrained_tracker.predict_logits(s1, frame), loaded.predict_logits(s2, frame))

    def test_header(self, untrained_tracker, tmp_path):
        path = tmp_path / "w.bin"
        untrained_tracker.save(path)
        assert path.read_bytes().startswith(b"TPGDTOY\0\x01\x00")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "w.bin"
        path.write_bytes(b"garbage")
        with pytest.raises(InvalidInputError):
            ToyTracker.load(path)

    def test_bad_version(self, untrained_tracker, tmp_path):
        path = tmp_path / "w.bin"
        untrained_tracker.save(path)
        blob = bytearray(path.read_bytes())
        blob[8] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(InvalidInputError):
            ToyTracker.load(path)

    def test_unfitted_save(self, tmp_path):
        with pytest.raises(Exception):
            ToyTracker().save(tmp_path / "w.bin")
