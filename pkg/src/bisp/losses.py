"""Training objective: forward/backward prediction losses plus a structural
consistency term between the two predicted frames."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2  # (0.01 * L)^2 with dynamic range L = 1
SSIM_C2 = 0.03 ** 2


@dataclass
class LossBundle:
    """Scalar loss components of one batch; ``total`` is their plain sum."""

    l_fp: torch.Tensor
    l_bp: torch.Tensor
    l_con: torch.Tensor

    @property
    def total(self) -> torch.Tensor:
        return self.l_fp + self.l_bp + self.l_con

    def detach_floats(self) -> dict[str, float]:
        return {
            "l_fp": float(self.l_fp.detach()),
            "l_bp": float(self.l_bp.detach()),
            "l_con": float(self.l_con.detach()),
            "total": float(self.total.detach()),
        }


def _check_same_shape(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def prediction_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over all pixels and channels."""
    _check_same_shape(pred, target)
    return ((pred - target) ** 2).mean()


def _gaussian_window(window_size: int, sigma: float, channels: int,
                     dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    half = window_size // 2
    xs = torch.arange(window_size, dtype=dtype, device=device) - half
    g = torch.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    g = g / g.sum()
    window = g.outer(g)
    return window.expand(channels, 1, window_size, window_size).contiguous()


def ssim(a: torch.Tensor, b: torch.Tensor, window_size: int = SSIM_WINDOW,
         sigma: float = SSIM_SIGMA) -> torch.Tensor:
    """Mean structural similarity between two frames in [-1, 1].

    Inputs are rescaled to [0, 1] and compared per channel under a Gaussian
    window. Accepts (C, H, W) or (B, C, H, W); images smaller than the window
    are rejected.
    """
    _check_same_shape(a, b)
    if a.dim() == 3:
        a, b = a.unsqueeze(0), b.unsqueeze(0)
    if a.dim() != 4:
        raise ValueError(f"expected (B, C, H, W) or (C, H, W), got {tuple(a.shape)}")
    _, channels, h, w = a.shape
    if h < window_size or w < window_size:
        raise ValueError(
            f"image {h}x{w} is smaller than the {window_size}x{window_size} SSIM window"
        )

    a = (a + 1.0) / 2.0
    b = (b + 1.0) / 2.0
    window = _gaussian_window(window_size, sigma, channels, a.dtype, a.device)
    pad = window_size // 2

    mu_a = F.conv2d(a, window, padding=pad, groups=channels)
    mu_b = F.conv2d(b, window, padding=pad, groups=channels)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = F.conv2d(a * a, window, padding=pad, groups=channels) - mu_aa
    var_b = F.conv2d(b * b, window, padding=pad, groups=channels) - mu_bb
    cov = F.conv2d(a * b, window, padding=pad, groups=channels) - mu_ab

    ssim_map = ((2 * mu_ab + SSIM_C1) * (2 * cov + SSIM_C2)) / (
        (mu_aa + mu_bb + SSIM_C1) * (var_a + var_b + SSIM_C2)
    )
    return ssim_map.mean()


def consistency_loss(pred_f: torch.Tensor, pred_b: torch.Tensor) -> torch.Tensor:
    """1 - SSIM between the forward and backward predictions."""
    return 1.0 - ssim(pred_f, pred_b)


def total_loss(pred_f: torch.Tensor, pred_b: torch.Tensor,
               target_f: torch.Tensor, target_b: torch.Tensor) -> LossBundle:
    """Both prediction losses plus the consistency term, unweighted."""
    return LossBundle(
        l_fp=prediction_loss(pred_f, target_f),
        l_bp=prediction_loss(pred_b, target_b),
        l_con=consistency_loss(pred_f, pred_b),
    )


def single_stream_loss(pred: torch.Tensor, target: torch.Tensor,
                       forward: bool) -> LossBundle:
    """Loss bundle for variants that train only one prediction direction."""
    zero = torch.zeros((), dtype=pred.dtype, device=pred.device)
    loss = prediction_loss(pred, target)
    if forward:
        return LossBundle(l_fp=loss, l_bp=zero, l_con=zero.clone())
    return LossBundle(l_fp=zero, l_bp=loss, l_con=zero.clone())
