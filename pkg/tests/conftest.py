import numpy as np
import pytest

from bisp.data import FrameClip
from bisp.synth import SynthSpec, generate


def make_clip(video_id="v0", n_frames=12, size=32, seed=0, labels=None) -> FrameClip:
    rng = np.random.default_rng(seed)
    frames = rng.uniform(-1.0, 1.0, size=(n_frames, 3, size, size)).astype(np.float32)
    return FrameClip(video_id, frames, labels)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """A small rendered dataset: 2 train + 2 test videos of 20 frames."""
    root = tmp_path_factory.mktemp("synthdata")
    generate(
        SynthSpec(num_train_videos=2, num_test_videos=2, frames_per_video=20, seed=3),
        root,
    )
    return root
