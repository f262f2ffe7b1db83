"""Variance channel attention (VarCA) and context spatial attention (ConSA).

VarCA runs two branches in parallel on a (B, C, H, W) feature map: a spatial
branch that weights positions by the softmax of their squared deviation from
the mean of a learned per-position distribution, and a squeeze-excitation
channel branch. Both branch outputs are added back onto the input.

ConSA is serial: four dilated convolutions aggregate context at growing
receptive fields, a sigmoid gate built from the channel-mean map rescales the
concatenated context, and a 1x1 projection restores the input channel count.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError

# (kernel size, dilation) of the context branches; padding preserves H x W.
CONTEXT_BRANCHES = ((1, 1), (3, 1), (3, 2), (3, 4))
CONTEXT_BRANCH_CHANNELS = 32


def _check_finite(x: torch.Tensor, name: str) -> None:
    if not torch.isfinite(x).all():
        raise ValueError(f"{name} received a non-finite input tensor")


def zero_conv_biases(module: nn.Module) -> None:
    """Zero the biases of every conv/deconv below ``module`` (weights keep
    torch's fan-in-scaled uniform default)."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)) and m.bias is not None:
            nn.init.zeros_(m.bias)


class VarianceChannelAttention(nn.Module):
    """Parallel spatial-variance and channel gates added onto the input."""

    def __init__(self, channels: int):
        super().__init__()
        if channels % 2 != 0:
            raise ConfigurationError(
                f"VarianceChannelAttention needs an even channel count, got {channels}"
            )
        self.proj = nn.Conv2d(channels, 1, kernel_size=1)
        self.squeeze = nn.Conv2d(channels, channels // 2, kernel_size=1)
        self.expand = nn.Conv2d(channels // 2, channels, kernel_size=1)
        self.pool = nn.AdaptiveAvgPool2d(1)
        zero_conv_biases(self)

    def variance_map(self, x: torch.Tensor) -> torch.Tensor:
        """Spatial weight map (B, 1, H*W); sums to 1 over positions.

        The input is projected to one channel, softmaxed over positions, and
        each position is then re-weighted by the softmax of its squared
        deviation from the spatial mean of that distribution.
        """
        _check_finite(x, "variance_map")
        attn = torch.softmax(self.proj(x).flatten(2), dim=-1)
        deviation = (attn - attn.mean(dim=-1, keepdim=True)) ** 2
        return torch.softmax(deviation, dim=-1)

    def channel_map(self, x: torch.Tensor) -> torch.Tensor:
        """Per-channel gate (B, C, 1, 1) with entries in (0, 1)."""
        _check_finite(x, "channel_map")
        pooled = self.pool(x)
        return torch.sigmoid(self.expand(F.relu(self.squeeze(pooled))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_finite(x, "VarianceChannelAttention")
        b, c, h, w = x.shape
        spatial = (x.flatten(2) * self.variance_map(x)).view(b, c, h, w)
        channel = x * self.channel_map(x)
        return x + spatial + channel


class ContextSpatialAttention(nn.Module):
    """Dilated context aggregation followed by spatial sigmoid gating."""

    def __init__(self, channels: int):
        super().__init__()
        self.branches = nn.ModuleList(
            nn.Conv2d(
                channels,
                CONTEXT_BRANCH_CHANNELS,
                kernel_size=k,
                padding=(k - 1) // 2 * d,
                dilation=d,
            )
            for k, d in CONTEXT_BRANCHES
        )
        context_channels = CONTEXT_BRANCH_CHANNELS * len(CONTEXT_BRANCHES)
        self.spatial = nn.Conv2d(1, 1, kernel_size=3, padding=1)
        self.proj = nn.Conv2d(context_channels, channels, kernel_size=1)
        zero_conv_biases(self)

    def context_extract(self, x: torch.Tensor) -> torch.Tensor:
        """Concatenate all dilated branches: (B, C, H, W) -> (B, 128, H, W)."""
        _check_finite(x, "context_extract")
        return torch.cat([branch(x) for branch in self.branches], dim=1)

    def spatial_map(self, context: torch.Tensor) -> torch.Tensor:
        """Gate map (B, 1, H, W) from the channel mean of the context."""
        return torch.sigmoid(self.spatial(context.mean(dim=1, keepdim=True)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        context = self.context_extract(x)
        gated = context * self.spatial_map(context)
        return self.proj(gated)
