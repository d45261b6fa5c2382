"""Early fusion: stack the raw slice with radiomic feature maps as input channels."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radiomap.imgio import save_raster
from radiomap.preprocess import minmax_normalize

RAW_CHANNEL = "flair"


@dataclass
class FusedStack:
    channels: list[tuple[str, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if not self.channels:
            raise ValueError("a stack needs at least one channel")
        names = [name for name, _ in self.channels]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ValueError(f"duplicate channel name {dup!r}")
        shape = np.shape(self.channels[0][1])
        for name, arr in self.channels:
            if np.shape(arr) != shape:
                raise ValueError(f"dimension mismatch: channel {name!r} is {np.shape(arr)}, expected {shape}")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.channels]

    @property
    def height(self) -> int:
        return np.shape(self.channels[0][1])[0]

    @property
    def width(self) -> int:
        return np.shape(self.channels[0][1])[1]

    def array(self) -> np.ndarray:
        """Channels as a ``(C, H, W)`` float32 array, in build order."""
        return np.stack([np.asarray(a, dtype=np.float32) for _, a in self.channels])


def build_stack(
    raw: np.ndarray,
    maps: list[tuple[str, np.ndarray]] = (),
    normalize_features: bool = True,
    raw_name: str = RAW_CHANNEL,
) -> FusedStack:
    """Raw channel first, then ``maps`` in the given order.

    With ``normalize_features`` each feature map is min-max scaled to
    ``[0, 1]`` on its own (a constant map becomes zeros), matching the range
    of the normalized raw slice.
    """
    raw = np.asarray(raw, dtype=np.float64)
    channels = [(raw_name, raw)]
    for name, fmap in maps:
        fmap = np.asarray(fmap, dtype=np.float64)
        if fmap.shape != raw.shape:
            raise ValueError(f"dimension mismatch: channel {name!r} is {fmap.shape}, expected {raw.shape}")
        channels.append((name, minmax_normalize(fmap) if normalize_features else fmap))
    return FusedStack(channels)


def export_stack(stack: FusedStack, stem: str | Path) -> tuple[Path, Path]:
    """Write the stack as a planar f32 raster with channel names in order."""
    return save_raster(stack.channels, stem)
