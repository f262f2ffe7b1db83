import numpy as np
import pytest
from PIL import Image

from bisp.data import (
    FrameClip,
    load_dataset,
    load_frame,
    make_test_windows,
    make_training_samples,
    stack_frames,
)
from bisp.errors import ConfigurationError, DataError
from conftest import make_clip


@pytest.mark.equations
class TestSkipFrameSamples:
    def test_six_frame_clip_yields_one_sample(self):
        clip = make_clip(n_frames=6, size=8)
        samples = make_training_samples(clip)
        assert len(samples) == 1
        s = samples[0]
        assert s.forward_input_indices == (0, 2, 4)
        assert s.forward_target_index == 5
        assert s.backward_input_indices == (5, 3, 1)
        assert s.backward_target_index == 0
        np.testing.assert_array_equal(s.forward_inputs, clip.frames[[0, 2, 4]])
        np.testing.assert_array_equal(s.backward_inputs, clip.frames[[5, 3, 1]])

    def test_sample_counts(self):
        assert len(make_training_samples(make_clip(n_frames=10, size=8))) == 5
        assert make_training_samples(make_clip(n_frames=5, size=8)) == []

    def test_consecutive_mode_uses_four_frame_windows(self):
        clip = make_clip(n_frames=10, size=8)
        samples = make_training_samples(clip, skip_frames=False)
        assert len(samples) == 7
        s = samples[0]
        assert s.forward_input_indices == (0, 1, 2)
        assert s.forward_target_index == 3
        assert s.backward_input_indices == (3, 2, 1)
        assert s.backward_target_index == 0

    def test_targets_bracket_the_inputs_in_time(self):
        for skip in (True, False):
            for s in make_training_samples(make_clip(n_frames=9, size=8), skip):
                assert s.forward_target_index > max(s.forward_input_indices)
                assert s.backward_target_index < min(s.backward_input_indices)

    def test_temporal_mirror_symmetry(self):
        clip = make_clip(n_frames=11, size=8, seed=4)
        reversed_clip = FrameClip("rev", clip.frames[::-1].copy())
        n = len(clip)
        for s in make_training_samples(clip):
            mirrored_start = n - 6 - s.window_start
            m = make_training_samples(reversed_clip)[mirrored_start]
            np.testing.assert_array_equal(m.forward_inputs, s.backward_inputs)
            np.testing.assert_array_equal(m.forward_target, s.backward_target)
            np.testing.assert_array_equal(m.backward_inputs, s.forward_inputs)


@pytest.mark.equations
class TestTestWindows:
    def test_seven_frame_clip_yields_one_window(self):
        clip = make_clip(n_frames=7, size=8)
        windows = make_test_windows(clip)
        assert len(windows) == 1
        w = windows[0]
        assert w.forward_input_indices == (0, 1, 2)
        assert w.backward_input_indices == (6, 5, 4)
        assert w.target_frame_index == 3
        np.testing.assert_array_equal(w.target, clip.frames[3])

    def test_hundred_frame_clip(self):
        windows = make_test_windows(make_clip(n_frames=100, size=8))
        assert len(windows) == 94
        assert windows[0].target_frame_index == 3
        assert windows[-1].target_frame_index == 96

    def test_short_clip_yields_nothing(self):
        assert make_test_windows(make_clip(n_frames=6, size=8)) == []

    def test_backward_inputs_are_reversed_in_time(self):
        clip = make_clip(n_frames=7, size=8)
        w = make_test_windows(clip)[0]
        np.testing.assert_array_equal(w.backward_inputs[0], clip.frames[6])
        np.testing.assert_array_equal(w.backward_inputs[2], clip.frames[4])


@pytest.mark.equations
class TestStackingAndLoading:
    def test_stack_frames_orders_channels_by_frame(self):
        frames = np.arange(2 * 3 * 4 * 4, dtype=np.float32).reshape(2, 3, 4, 4)
        stacked = stack_frames(frames)
        assert stacked.shape == (6, 4, 4)
        np.testing.assert_array_equal(stacked[:3], frames[0])
        np.testing.assert_array_equal(stacked[3:], frames[1])

    def test_load_frame_normalizes_to_unit_range(self, tmp_path):
        arr = np.zeros((8, 8, 3), dtype=np.uint8)
        arr[0, 0] = 255
        path = tmp_path / "f.png"
        Image.fromarray(arr).save(path)
        out = load_frame(path, image_size=8)
        assert out.shape == (3, 8, 8)
        assert out.dtype == np.float32
        assert out[0, 0, 0] == pytest.approx(1.0)
        assert out[0, 1, 1] == pytest.approx(-1.0)

    def test_load_frame_replicates_grayscale(self, tmp_path):
        arr = (np.arange(64, dtype=np.uint8) * 3).reshape(8, 8)
        path = tmp_path / "g.png"
        Image.fromarray(arr, mode="L").save(path)
        out = load_frame(path, image_size=8)
        np.testing.assert_array_equal(out[0], out[1])
        np.testing.assert_array_equal(out[1], out[2])

    def test_load_frame_resizes(self, tmp_path):
        path = tmp_path / "big.png"
        Image.fromarray(np.full((32, 32, 3), 100, dtype=np.uint8)).save(path)
        assert load_frame(path, image_size=16).shape == (3, 16, 16)


class TestFrameClip:
    def test_rejects_bad_shapes(self):
        with pytest.raises(DataError):
            FrameClip("v", np.zeros((5, 1, 8, 8), dtype=np.float32))

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(DataError):
            FrameClip("v", np.zeros((5, 3, 8, 8), dtype=np.float32), labels=[0, 1])


class TestLoadDataset:
    def test_loads_rendered_dataset(self, synth_root):
        train = load_dataset(synth_root, "train", image_size=32)
        test = load_dataset(synth_root, "test", image_size=32)
        assert [c.video_id for c in train] == ["train000", "train001"]
        assert [c.video_id for c in test] == ["test000", "test001"]
        assert all(len(c) == 20 for c in train + test)
        assert all(c.labels is None for c in train)
        assert all(c.labels is not None for c in test)
        for c in test:
            assert c.frames.shape == (20, 3, 32, 32)
            assert float(c.frames.min()) >= -1.0 and float(c.frames.max()) <= 1.0

    def test_missing_split_is_a_configuration_error(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_dataset(tmp_path, "train", image_size=32)

    def test_short_videos_are_skipped_with_warning(self, tmp_path):
        video = tmp_path / "train" / "tiny"
        video.mkdir(parents=True)
        frame = np.zeros((8, 8, 3), dtype=np.uint8)
        for i in range(6):
            Image.fromarray(frame).save(video / f"{i:03d}.png")
        with pytest.warns(UserWarning, match="tiny"):
            clips = load_dataset(tmp_path, "train", image_size=8)
        assert clips == []

    def test_malformed_label_length_is_fatal(self, tmp_path):
        video = tmp_path / "test" / "v0"
        video.mkdir(parents=True)
        frame = np.zeros((8, 8, 3), dtype=np.uint8)
        for i in range(8):
            Image.fromarray(frame).save(video / f"{i:03d}.png")
        labels = tmp_path / "test_labels"
        labels.mkdir()
        (labels / "v0.txt").write_text("0\n1\n")
        with pytest.raises(DataError):
            load_dataset(tmp_path, "test", image_size=8)

    def test_non_binary_labels_are_fatal(self, tmp_path):
        video = tmp_path / "test" / "v0"
        video.mkdir(parents=True)
        frame = np.zeros((8, 8, 3), dtype=np.uint8)
        for i in range(8):
            Image.fromarray(frame).save(video / f"{i:03d}.png")
        labels = tmp_path / "test_labels"
        labels.mkdir()
        (labels / "v0.txt").write_text("0\n1\n2\n0\n0\n0\n0\n0\n")
        with pytest.raises(DataError):
            load_dataset(tmp_path, "test", image_size=8)

    def test_windowing_is_deterministic(self, synth_root):
        a = load_dataset(synth_root, "test", image_size=16)
        b = load_dataset(synth_root, "test", image_size=16)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.frames, cb.frames)
            wa, wb = make_test_windows(ca), make_test_windows(cb)
            assert [w.target_frame_index for w in wa] == [w.target_frame_index for w in wb]
