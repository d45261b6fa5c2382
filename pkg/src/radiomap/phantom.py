"""Synthetic FLAIR-like slices: hyperintense elliptical lesions on a noisy background.

Noise comes from a counter-based SplitMix64 stream: draw ``k`` of seed ``s``
is the SplitMix64 output for state ``s + (k+1) * 0x9E3779B97F4A7C15``, its top
53 bits give a uniform in (0, 1), and consecutive uniform pairs go through
Box-Muller (cosine branch). Pixel ``p`` in row-major order uses draws ``2p``
and ``2p+1``, so output depends only on the spec and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, counters: np.ndarray) -> np.ndarray:
    """SplitMix64 outputs for the given 0-based draw indices."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed % 2**64) + (np.asarray(counters, dtype=np.uint64) + np.uint64(1)) * GOLDEN_GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """``count`` uniforms in (0, 1) from draw ``start`` on."""
    z = splitmix64(seed, np.arange(start, start + count, dtype=np.uint64))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def gaussians(seed: int, count: int) -> np.ndarray:
    u = uniforms(seed, 0, 2 * count)
    u1, u2 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass
class Lesion:
    center: tuple[float, float]  # (x, y) = (column, row)
    semi_axes: tuple[float, float]
    angle: float = 0.0  # degrees, counter-clockwise from the x axis
    boost: float = 50.0

    def __post_init__(self):
        self.center = tuple(float(v) for v in self.center)
        self.semi_axes = tuple(float(v) for v in self.semi_axes)
        if len(self.center) != 2 or len(self.semi_axes) != 2:
            raise ValueError("lesion center and semi_axes need two values each")


@dataclass
class PhantomSpec:
    width: int = 128
    height: int = 128
    lesions: list[Lesion] = field(default_factory=list)
    background_mean: float = 100.0
    noise_sd: float = 10.0
    gradient: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.lesions = [les if isinstance(les, Lesion) else Lesion(**les) for les in self.lesions]
        if self.width < 1 or self.height < 1:
            raise ValueError("phantom dimensions must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        for k, les in enumerate(self.lesions):
            a, b = les.semi_axes
            if a <= 0 or b <= 0:
                raise ValueError(f"lesion {k}: semi-axes must be positive")
            if les.boost <= 0:
                raise ValueError(f"lesion {k}: boost must be positive")
            ex, ey = _half_extent(les)
            cx, cy = les.center
            if cx - ex < 0 or cy - ey < 0 or cx + ex > self.width - 1 or cy + ey > self.height - 1:
                raise ValueError(f"lesion {k} does not fit inside the image")

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("phantom spec must be a JSON object")
        background = raw.pop("background", None)
        if background is not None:
            raw.setdefault("background_mean", background.get("mean", 100.0))
            raw.setdefault("noise_sd", background.get("noise_sd", 10.0))
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown phantom spec fields: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def _half_extent(les: Lesion) -> tuple[float, float]:
    a, b = les.semi_axes
    t = math.radians(les.angle)
    return math.hypot(a * math.cos(t), b * math.sin(t)), math.hypot(a * math.sin(t), b * math.cos(t))


def lesion_mask(spec: PhantomSpec) -> np.ndarray:
    """Union of the lesion ellipses, sampled at pixel centers (uint8 0/1)."""
    y, x = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    for les in spec.lesions:
        t = math.radians(les.angle)
        dx, dy = x - les.center[0], y - les.center[1]
        u = dx * math.cos(t) + dy * math.sin(t)
        v = -dx * math.sin(t) + dy * math.cos(t)
        mask |= (u / les.semi_axes[0]) ** 2 + (v / les.semi_axes[1]) ** 2 <= 1.0
    return mask.astype(np.uint8)


def generate(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Render ``(image, mask)``.

    ``image = background_mean + gradient_ramp + boost + noise_sd * N(0, 1)``,
    where a pixel covered by several ellipses takes the largest boost. The
    ramp rises linearly from 0 at the top-left corner to ``gradient`` at the
    bottom-right one.
    """
    h, w = spec.height, spec.width
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    ramp = (x + y) / max(1, (w - 1) + (h - 1))
    boost = np.zeros((h, w))
    for les in spec.lesions:
        single = PhantomSpec(width=w, height=h, lesions=[les], noise_sd=0.0)
        boost = np.maximum(boost, les.boost * lesion_mask(single))
    image = spec.background_mean + spec.gradient * ramp + boost
    if spec.noise_sd > 0:
        image = image + spec.noise_sd * gaussians(spec.seed, h * w).reshape(h, w)
    return image, lesion_mask(spec)


def random_spec(
    seed: int,
    width: int = 128,
    height: int = 128,
    n_lesions: int = 3,
    noise_sd: float = 10.0,
    boost: float = 40.0,
    gradient: float = 20.0,
) -> PhantomSpec:
    """A seeded phantom layout: ``n_lesions`` ellipses with semi-axes in [4, 12] px.

    The layout uses draws from the far end of the seed's stream, so it never
    overlaps the noise draws of an image under ``2**40`` pixels.
    """
    u = uniforms(seed, 2**41, 5 * n_lesions)
    lesions = []
    for k in range(n_lesions):
        ua, ub, ut, ux, uy = u[5 * k : 5 * k + 5]
        a, b = 4.0 + 8.0 * ua, 4.0 + 8.0 * ub
        angle = 180.0 * ut
        probe = Lesion(center=(0.0, 0.0), semi_axes=(a, b), angle=angle, boost=boost)
        ex, ey = _half_extent(probe)
        cx = ex + 1 + ux * (width - 3 - 2 * ex)
        cy = ey + 1 + uy * (height - 3 - 2 * ey)
        lesions.append(Lesion(center=(cx, cy), semi_axes=(a, b), angle=angle, boost=boost))
    return PhantomSpec(width, height, lesions, 100.0, noise_sd, gradient, seed)


def feature_contrast(mask: np.ndarray, fmap: np.ndarray) -> tuple[float, float]:
    """Mean of ``fmap`` inside (mask = 1) and outside (mask = 0) the lesions."""
    mask = np.asarray(mask) != 0
    fmap = np.asarray(fmap, dtype=np.float64)
    if mask.shape != fmap.shape:
        raise ValueError(f"dimension mismatch: mask {mask.shape} vs map {fmap.shape}")
    if mask.all() or not mask.any():
        raise ValueError("mask must contain both lesion and background pixels")
    return float(fmap[mask].mean()), float(fmap[~mask].mean())
