"""Convolution blocks shared by the segmentation net, generator, and critic."""

from __future__ import annotations

import torch
import torch.nn as nn

from .geometry import circular_pad_hw


class PanoConv2d(nn.Module):
    """3x3-style conv over wrap-padded panoramic features.

    Horizontal padding is circular and horizontal stride is always 1, so a
    stack of these commutes with horizontal rolls for any shift, not just
    multiples of the total downsampling factor.  Resolution changes happen
    vertically via `stride_h`; wide receptive fields come from `dilation_w`.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        stride_h: int = 1,
        dilation_w: int = 1,
        bias: bool = True,
    ):
        super().__init__()
        self.pad_h = (kernel_size - 1) // 2
        self.pad_w = dilation_w * (kernel_size - 1) // 2
        self.conv = nn.Conv2d(
            in_channels,
            out_channels,
            kernel_size,
            stride=(stride_h, 1),
            dilation=(1, dilation_w),
            padding=0,
            bias=bias,
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(circular_pad_hw(x, self.pad_h, self.pad_w))


def upsample_rows(x: torch.Tensor) -> torch.Tensor:
    """Double the height (nearest neighbor); width untouched."""
    return torch.nn.functional.interpolate(x, scale_factor=(2, 1), mode="nearest")
