"""Frame-directory ingestion and temporal windowing.

Datasets are directories of pre-extracted frames:

    <root>/<split>/<video_id>/<frame>.png     (lexicographic frame order)
    <root>/test_labels/<video_id>.txt         (optional, one 0/1 per line)

Frames are resized to a square resolution and normalized to [-1, 1].
Training uses 6-frame windows sampled with a temporal stride of 2 inside
the window (skip frames); testing uses 7-frame windows whose middle frame
is predicted from both ends.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

from .errors import ConfigurationError, DataError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
MIN_VIDEO_FRAMES = 7

TRAIN_WINDOW = 6
TEST_WINDOW = 7
# Offsets of the three input frames and the target inside a training window.
SKIP_FORWARD_INPUTS = (0, 2, 4)
SKIP_FORWARD_TARGET = 5
SKIP_BACKWARD_INPUTS = (5, 3, 1)
SKIP_BACKWARD_TARGET = 0
# Consecutive-frame sampling used when the skip-frame strategy is disabled.
CONSEC_WINDOW = 4
CONSEC_FORWARD_INPUTS = (0, 1, 2)
CONSEC_FORWARD_TARGET = 3
CONSEC_BACKWARD_INPUTS = (3, 2, 1)
CONSEC_BACKWARD_TARGET = 0


@dataclass
class FrameClip:
    """All frames of one video as a (N, 3, H, W) float32 array in [-1, 1]."""

    video_id: str
    frames: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise DataError(
                f"clip '{self.video_id}': frames must be (N, 3, H, W), "
                f"got {self.frames.shape}"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (len(self.frames),):
                raise DataError(
                    f"clip '{self.video_id}': {len(self.labels)} labels for "
                    f"{len(self.frames)} frames"
                )

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class SkipFrameSample:
    """One training unit: a forward and a backward prediction task.

    Indices are offsets into ``clip.frames``; tensors are assembled lazily so
    a sample costs no frame copies until it is read.
    """

    clip: FrameClip
    window_start: int
    skip_frames: bool = True

    def _offsets(self):
        if self.skip_frames:
            return (SKIP_FORWARD_INPUTS, SKIP_FORWARD_TARGET,
                    SKIP_BACKWARD_INPUTS, SKIP_BACKWARD_TARGET)
        return (CONSEC_FORWARD_INPUTS, CONSEC_FORWARD_TARGET,
                CONSEC_BACKWARD_INPUTS, CONSEC_BACKWARD_TARGET)

    @property
    def forward_input_indices(self) -> tuple[int, ...]:
        return tuple(self.window_start + o for o in self._offsets()[0])

    @property
    def forward_target_index(self) -> int:
        return self.window_start + self._offsets()[1]

    @property
    def backward_input_indices(self) -> tuple[int, ...]:
        return tuple(self.window_start + o for o in self._offsets()[2])

    @property
    def backward_target_index(self) -> int:
        return self.window_start + self._offsets()[3]

    @property
    def forward_inputs(self) -> np.ndarray:
        return self.clip.frames[list(self.forward_input_indices)]

    @property
    def forward_target(self) -> np.ndarray:
        return self.clip.frames[self.forward_target_index]

    @property
    def backward_inputs(self) -> np.ndarray:
        return self.clip.frames[list(self.backward_input_indices)]

    @property
    def backward_target(self) -> np.ndarray:
        return self.clip.frames[self.backward_target_index]

    def forward_model_input(self) -> np.ndarray:
        """Three input frames stacked channel-wise into a (9, H, W) array."""
        return stack_frames(self.forward_inputs)

    def backward_model_input(self) -> np.ndarray:
        return stack_frames(self.backward_inputs)


@dataclass(frozen=True)
class TestWindow:
    """A 7-frame test window: both ends predict the middle frame."""

    clip: FrameClip
    window_start: int

    @property
    def forward_input_indices(self) -> tuple[int, int, int]:
        s = self.window_start
        return (s, s + 1, s + 2)

    @property
    def backward_input_indices(self) -> tuple[int, int, int]:
        s = self.window_start
        return (s + 6, s + 5, s + 4)

    @property
    def target_frame_index(self) -> int:
        return self.window_start + 3

    @property
    def forward_inputs(self) -> np.ndarray:
        return self.clip.frames[list(self.forward_input_indices)]

    @property
    def backward_inputs(self) -> np.ndarray:
        return self.clip.frames[list(self.backward_input_indices)]

    @property
    def target(self) -> np.ndarray:
        return self.clip.frames[self.target_frame_index]

    def forward_model_input(self) -> np.ndarray:
        return stack_frames(self.forward_inputs)

    def backward_model_input(self) -> np.ndarray:
        return stack_frames(self.backward_inputs)


def stack_frames(frames: np.ndarray) -> np.ndarray:
    """Stack (T, 3, H, W) frames channel-wise into (T*3, H, W)."""
    t, c, h, w = frames.shape
    return np.ascontiguousarray(frames).reshape(t * c, h, w)


def load_frame(path: str | Path, image_size: int) -> np.ndarray:
    """Load one image as a (3, H, W) float32 array normalized to [-1, 1].

    Grayscale sources are replicated to three channels; resizing is bilinear.
    """
    img = Image.open(path).convert("RGB")
    if img.size != (image_size, image_size):
        img = img.resize((image_size, image_size), Image.Resampling.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 127.5 - 1.0
    return arr.transpose(2, 0, 1)


def _read_label_file(path: Path, num_frames: int, video_id: str) -> np.ndarray:
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    try:
        labels = np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"label file {path} contains non-integer entries") from exc
    if len(labels) != num_frames:
        raise DataError(
            f"label file {path} has {len(labels)} entries for "
            f"{num_frames} frames of video '{video_id}'"
        )
    if not np.isin(labels, (0, 1)).all():
        raise DataError(f"label file {path} contains values other than 0/1")
    return labels


def load_dataset(root: str | Path, split: str, image_size: int = 256) -> list[FrameClip]:
    """Load every video of one split as a list of FrameClips.

    Videos shorter than 7 frames are skipped with a warning.
    Test clips pick up labels from ``<root>/test_labels/<video_id>.txt`` when
    present; train clips never carry labels.
    """
    root = Path(root)
    split_dir = root / split
    if not split_dir.is_dir():
        raise ConfigurationError(f"dataset split directory not found: {split_dir}")

    clips = []
    for video_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
        frame_paths = sorted(
            p for p in video_dir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
        )
        if len(frame_paths) < MIN_VIDEO_FRAMES:
            warnings.warn(
                f"skipping video '{video_dir.name}' with {len(frame_paths)} "
                f"frames (< {MIN_VIDEO_FRAMES})"
            )
            continue
        frames = np.stack([load_frame(p, image_size) for p in frame_paths])
        labels = None
        if split == "test":
            label_path = root / "test_labels" / f"{video_dir.name}.txt"
            if label_path.is_file():
                labels = _read_label_file(label_path, len(frames), video_dir.name)
        clips.append(FrameClip(video_dir.name, frames, labels))
    return clips


def make_training_samples(clip: FrameClip, skip_frames: bool = True) -> list[SkipFrameSample]:
    """Slide a training window over the clip with stride 1.

    Skip-frame mode uses 6-frame windows (inputs at offsets 0/2/4 predict
    offset 5 forward; 5/3/1 predict offset 0 backward). Consecutive mode uses
    4-frame windows (0/1/2 -> 3 forward, mirrored backward). Clips shorter
    than the window yield an empty list.
    """
    window = TRAIN_WINDOW if skip_frames else CONSEC_WINDOW
    return [
        SkipFrameSample(clip, s, skip_frames)
        for s in range(len(clip) - window + 1)
    ]


def make_test_windows(clip: FrameClip) -> list[TestWindow]:
    """Slide the 7-frame co-prediction window over the clip with stride 1."""
    return [TestWindow(clip, s) for s in range(len(clip) - TEST_WINDOW + 1)]


class TrainingSampleDataset(Dataset):
    """Torch dataset of training samples drawn from several clips.

    Items are (forward_input, forward_target, backward_input, backward_target)
    float32 tensors of shapes (9, H, W), (3, H, W), (9, H, W), (3, H, W).
    """

    def __init__(self, clips: list[FrameClip], skip_frames: bool = True):
        self.samples: list[SkipFrameSample] = []
        for clip in clips:
            self.samples.extend(make_training_samples(clip, skip_frames))

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, idx: int):
        s = self.samples[idx]
        return (
            torch.from_numpy(s.forward_model_input()),
            torch.from_numpy(np.ascontiguousarray(s.forward_target)),
            torch.from_numpy(s.backward_model_input()),
            torch.from_numpy(np.ascontiguousarray(s.backward_target)),
        )
