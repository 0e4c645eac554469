"""Backbone + column-fusion head.

The backbone is a small stride stack producing a grid x grid feature map
from the preprocessed input (asserted at construction). The head is the
interesting part: a 1x1 convolution to 2 classes, a maximum over the image
width, and a per-row softmax, so each of the 17 grid rows gets one
artifact probability covering the whole width.
"""

import torch
from torch import nn

from .config import ArtinetConfig


class ColumnFusionHead(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.project = nn.Conv2d(channels, 2, kernel_size=1)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) feature grid -> (B, H, 2) row logits."""
        if features.ndim != 4:
            raise ValueError(f"expected 4-D features, got shape {tuple(features.shape)}")
        grid = self.project(features)          # (B, 2, H, W)
        fused = grid.max(dim=3).values         # max over the width axis
        return fused.transpose(1, 2)           # (B, H, 2)

    def row_probabilities(self, features: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(features), dim=2)


def _block(c_in, c_out, stride, padding=1):
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel_size=3, stride=stride, padding=padding),
        nn.GroupNorm(4, c_out),
        nn.ReLU(inplace=True),
    )


class ArtiNet(nn.Module):
    def __init__(self, cfg: ArtinetConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.channels
        self.backbone = nn.Sequential(
            _block(3, max(4, c // 4), stride=2),       # 299 -> 150
            _block(max(4, c // 4), max(4, c // 2), stride=2),   # 150 -> 75
            _block(max(4, c // 2), max(4, c // 2), stride=2),   # 75 -> 38
            _block(max(4, c // 2), c, stride=2),       # 38 -> 19
            _block(c, c, stride=1, padding=0),         # 19 -> 17
        )
        self.head = ColumnFusionHead(c)
        with torch.no_grad():
            probe = self.backbone(torch.zeros(1, 3, cfg.input_side, cfg.input_side))
        if probe.shape[-2:] != (cfg.grid, cfg.grid):
            raise ValueError(
                f"backbone stride stack yields {tuple(probe.shape[-2:])}, "
                f"expected {(cfg.grid, cfg.grid)}"
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 3, S, S) input -> (B, grid, 2) row logits."""
        return self.head(self.backbone(x))

    def row_probabilities(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=2)

    def parameter_groups(self):
        """Two groups: pretrained-style backbone rate, faster head rate."""
        return [
            {"params": self.backbone.parameters(), "lr": self.cfg.lr_backbone},
            {"params": self.head.parameters(), "lr": self.cfg.lr_head},
        ]
