"""Dual-stream prediction autoencoders.

Each stream is a convolutional encoder-decoder that maps three stacked input
frames (9 channels) to one predicted frame. The encoder downsamples three
times (32 -> 64 -> 128 channels, max-pooled) into a 256-channel latent; the
decoder mirrors it with transposed convolutions, adds the variance-channel-
attended skip tensor of matching resolution at each scale, applies context
spatial attention, and ends in a 3-channel Tanh head.

The full model holds two structurally identical streams (forward and
backward) that share no parameters. Variants cover single-stream training,
latent fusion, and attention/skip-frame ablations.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import torch
from torch import nn

from .attention import ContextSpatialAttention, VarianceChannelAttention, zero_conv_biases
from .errors import ConfigurationError, DataError

STRATEGIES = ("bisp", "forward", "backward", "fusion")
ENCODER_CHANNELS = (32, 64, 128)
LATENT_CHANNELS = 256
FRAME_CHANNELS = 3
INPUT_FRAMES = 3

CHECKPOINT_MAGIC = "BISP-CKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class VariantSpec:
    """Model/training variant: stream strategy plus ablation toggles."""

    strategy: str = "bisp"
    skip_frames: bool = True
    varca: bool = True
    consa: bool = True

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown variant strategy '{self.strategy}'; expected one of {STRATEGIES}"
            )

    @property
    def has_forward(self) -> bool:
        return self.strategy in ("bisp", "fusion", "forward")

    @property
    def has_backward(self) -> bool:
        return self.strategy in ("bisp", "fusion", "backward")

    @property
    def dual(self) -> bool:
        return self.has_forward and self.has_backward

    @property
    def name(self) -> str:
        flags = "".join(
            f"+{flag}" if on else f"-{flag}"
            for flag, on in (
                ("skipf", self.skip_frames),
                ("varca", self.varca),
                ("consa", self.consa),
            )
        )
        return self.strategy + flags

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VariantSpec":
        known = {"strategy", "skip_frames", "varca", "consa"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown variant keys: {sorted(unknown)}")
        return cls(**d)


def _conv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size=3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


def _deconv_block(cin: int, cout: int) -> nn.Sequential:
    # kernel 3, stride 2, output padding 1: exactly doubles H and W
    return nn.Sequential(
        nn.ConvTranspose2d(cin, cout, kernel_size=3, stride=2, padding=1, output_padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Encoder(nn.Module):
    """Three pooled stages plus a 256-channel bottleneck.

    Returns the latent and the pre-pool activation of every stage, which the
    decoder consumes as skip tensors at full stage resolution.
    """

    def __init__(self, in_channels: int):
        super().__init__()
        c1, c2, c3 = ENCODER_CHANNELS
        self.stage1 = nn.Sequential(_conv_block(in_channels, c1), _conv_block(c1, c1))
        self.stage2 = nn.Sequential(_conv_block(c1, c2), _conv_block(c2, c2))
        self.stage3 = nn.Sequential(_conv_block(c2, c3), _conv_block(c3, c3))
        self.bottleneck = nn.Sequential(
            _conv_block(c3, LATENT_CHANNELS),
            nn.Conv2d(LATENT_CHANNELS, LATENT_CHANNELS, kernel_size=3, padding=1),
        )
        self.pool = nn.MaxPool2d(2, stride=2)

    def forward(self, x: torch.Tensor):
        if x.dim() != 4:
            raise ValueError(f"expected (B, C, H, W) input, got {tuple(x.shape)}")
        if x.shape[-2] % 8 != 0 or x.shape[-1] % 8 != 0:
            raise ValueError(
                f"spatial size {x.shape[-2]}x{x.shape[-1]} must be divisible by 8"
            )
        s1 = self.stage1(x)
        s2 = self.stage2(self.pool(s1))
        s3 = self.stage3(self.pool(s2))
        latent = self.bottleneck(self.pool(s3))
        return latent, (s1, s2, s3)


class Decoder(nn.Module):
    """Mirror of the encoder with attended skip additions at each scale."""

    def __init__(self, out_channels: int = FRAME_CHANNELS,
                 use_varca: bool = True, use_consa: bool = True):
        super().__init__()
        c1, c2, c3 = ENCODER_CHANNELS
        self.pre = nn.Sequential(
            _conv_block(LATENT_CHANNELS, LATENT_CHANNELS),
            _conv_block(LATENT_CHANNELS, LATENT_CHANNELS),
        )
        self.up3 = _deconv_block(LATENT_CHANNELS, c3)
        self.up2 = _deconv_block(c3, c2)
        self.up1 = _deconv_block(c2, c1)
        self.skip_att3 = VarianceChannelAttention(c3) if use_varca else nn.Identity()
        self.skip_att2 = VarianceChannelAttention(c2) if use_varca else nn.Identity()
        self.skip_att1 = VarianceChannelAttention(c1) if use_varca else nn.Identity()
        self.dec_att3 = ContextSpatialAttention(c3) if use_consa else nn.Identity()
        self.dec_att2 = ContextSpatialAttention(c2) if use_consa else nn.Identity()
        self.dec_att1 = ContextSpatialAttention(c1) if use_consa else nn.Identity()
        self.block3 = nn.Sequential(_conv_block(c3, c3), _conv_block(c3, c3))
        self.block2 = nn.Sequential(_conv_block(c2, c2), _conv_block(c2, c2))
        self.block1 = nn.Sequential(_conv_block(c1, c1), _conv_block(c1, c1))
        self.head = nn.Conv2d(c1, out_channels, kernel_size=3, padding=1)

    @staticmethod
    def _merge(upsampled: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        if upsampled.shape != skip.shape:
            raise ValueError(
                f"skip tensor {tuple(skip.shape)} does not match decoder "
                f"feature {tuple(upsampled.shape)}"
            )
        return upsampled + skip

    def forward(self, latent: torch.Tensor, skips) -> torch.Tensor:
        s1, s2, s3 = skips
        y = self.pre(latent)
        y = self._merge(self.up3(y), self.skip_att3(s3))
        y = self.block3(self.dec_att3(y))
        y = self._merge(self.up2(y), self.skip_att2(s2))
        y = self.block2(self.dec_att2(y))
        y = self._merge(self.up1(y), self.skip_att1(s1))
        y = self.block1(self.dec_att1(y))
        return torch.tanh(self.head(y))


class PredictionAutoencoder(nn.Module):
    """One stream: encode three stacked frames, decode the predicted frame."""

    def __init__(self, use_varca: bool = True, use_consa: bool = True):
        super().__init__()
        self.encoder = Encoder(INPUT_FRAMES * FRAME_CHANNELS)
        self.decoder = Decoder(FRAME_CHANNELS, use_varca, use_consa)
        zero_conv_biases(self)

    def encode(self, x: torch.Tensor):
        return self.encoder(x)

    def decode(self, latent: torch.Tensor, skips) -> torch.Tensor:
        return self.decoder(latent, skips)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        latent, skips = self.encode(x)
        return self.decode(latent, skips)


class BispModel(nn.Module):
    """Forward and/or backward prediction streams per the variant spec.

    ``predict_pair`` returns (forward prediction, backward prediction); a
    missing stream yields None in its slot. The fusion strategy sums the two
    latents element-wise before each stream's decoder (skips stay per
    stream).
    """

    def __init__(self, variant: VariantSpec | None = None):
        super().__init__()
        self.variant = variant or VariantSpec()
        self.forward_ae = (
            PredictionAutoencoder(self.variant.varca, self.variant.consa)
            if self.variant.has_forward else None
        )
        self.backward_ae = (
            PredictionAutoencoder(self.variant.varca, self.variant.consa)
            if self.variant.has_backward else None
        )

    def predict_pair(self, forward_inputs: torch.Tensor | None,
                     backward_inputs: torch.Tensor | None):
        if self.variant.strategy == "fusion":
            latent_f, skips_f = self.forward_ae.encode(forward_inputs)
            latent_b, skips_b = self.backward_ae.encode(backward_inputs)
            fused = latent_f + latent_b
            return (
                self.forward_ae.decode(fused, skips_f),
                self.backward_ae.decode(fused, skips_b),
            )
        pred_f = self.forward_ae(forward_inputs) if self.forward_ae is not None else None
        pred_b = self.backward_ae(backward_inputs) if self.backward_ae is not None else None
        return pred_f, pred_b

    def forward(self, forward_inputs, backward_inputs):
        return self.predict_pair(forward_inputs, backward_inputs)


def build_variant(variant: VariantSpec | str | dict) -> BispModel:
    """Construct a model from a VariantSpec, strategy name, or mapping."""
    if isinstance(variant, str):
        variant = VariantSpec(strategy=variant)
    elif isinstance(variant, dict):
        variant = VariantSpec.from_dict(variant)
    return BispModel(variant)


def ablation_variants() -> list[VariantSpec]:
    """The six toggle combinations of the component ablation grid."""
    toggles = [
        (False, False, False),
        (True, False, False),
        (True, True, False),
        (True, False, True),
        (False, True, True),
        (True, True, True),
    ]
    return [VariantSpec("bisp", s, v, c) for s, v, c in toggles]


def strategy_variants() -> list[VariantSpec]:
    """Single-stream, fusion, and dual-stream training strategies."""
    return [VariantSpec(s) for s in ("forward", "backward", "fusion", "bisp")]


def save_checkpoint(path: str | Path, model: BispModel, step: int,
                    extra: dict | None = None) -> Path:
    """Write a versioned archive of parameters, variant spec, and step count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "magic": CHECKPOINT_MAGIC,
            "version": CHECKPOINT_VERSION,
            "variant": model.variant.to_dict(),
            "step": int(step),
            "state_dict": model.state_dict(),
            "extra": dict(extra or {}),
        },
        path,
    )
    return path


def load_checkpoint(path: str | Path):
    """Load a checkpoint; returns (model, step, extra)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("magic") != CHECKPOINT_MAGIC:
        raise DataError(f"{path} is not a model checkpoint (bad magic header)")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(
            f"unsupported checkpoint version {payload.get('version')} in {path}"
        )
    model = BispModel(VariantSpec.from_dict(payload["variant"]))
    model.load_state_dict(payload["state_dict"])
    return model, payload["step"], payload.get("extra", {})
