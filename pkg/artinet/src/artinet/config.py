"""Configuration for the toy row-artifact network."""

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class ArtinetConfig:
    input_side: int = 299
    crop_side: int = 400
    grid: int = 17
    channels: int = 64          # 768 mimics the original backbone width
    lr_head: float = 5e-5
    lr_backbone: float = 5e-6
    steps: int = 2000
    batch: int = 25
    seed: int = 0
    row_positive_fraction: float = 0.25

    def __post_init__(self):
        if self.batch < 2:
            raise ValueError("batch must be >= 2 (both classes per minibatch)")
        if self.crop_side < self.input_side:
            raise ValueError("crop_side must be >= input_side")
        if self.channels < 4:
            raise ValueError("channels must be >= 4")
        if not 0.0 <= self.row_positive_fraction <= 1.0:
            raise ValueError("row_positive_fraction must be in [0, 1]")

    def as_dict(self) -> dict:
        return asdict(self)
