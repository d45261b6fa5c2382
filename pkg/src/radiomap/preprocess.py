"""Per-slice intensity normalization, 256-level quantization and resizing."""

from __future__ import annotations

import numpy as np

LEVELS = 256


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Scale a slice to ``[0, 1]`` with ``(v - min) / (max - min)``.

    A constant slice maps to all zeros.

    Raises:
        ValueError: if the image is empty or holds non-finite values.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot normalize an empty image")
    if not np.all(np.isfinite(values)):
        raise ValueError("image contains non-finite values")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    out = (values - lo) / (hi - lo)
    # Guard the endpoints against rounding in the division.
    out[values == hi] = 1.0
    return out


def quantize(values: np.ndarray) -> np.ndarray:
    """Map ``[0, 1]`` intensities to uint8 levels, ``floor(v*255 + 0.5)``."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all((values >= 0.0) & (values <= 1.0)):
        raise ValueError("quantize expects values in [0, 1]")
    return np.floor(values * (LEVELS - 1) + 0.5).astype(np.uint8)


def as_levels(levels: np.ndarray) -> np.ndarray:
    """Validate a quantized image and return it as a 2D uint8 array."""
    arr = np.asarray(levels)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a nonempty 2D image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ValueError("gray levels must be integers")
        if arr.min() < 0 or arr.max() > LEVELS - 1:
            raise ValueError("gray levels must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def pad_reflect(image: np.ndarray, s: int) -> np.ndarray:
    """Mirror-pad by ``s`` pixels, edge sample included (``d c b a | a b c d``).

    Repeats the mirror as needed when ``s`` exceeds the image size.
    """
    return np.pad(image, s, mode="symmetric")


def _nearest_index(n_out: int, n_in: int) -> np.ndarray:
    # Closest source center to each output center, ties to the smaller index.
    # Source coordinate minus 1/2 is ((2o+1)*n_in - 2*n_out) / (2*n_out); take its ceiling.
    o = np.arange(n_out, dtype=np.int64)
    num = (2 * o + 1) * n_in - 2 * n_out
    idx = -((-num) // (2 * n_out))
    return np.clip(idx, 0, n_in - 1)


def _bilinear_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def resize(image: np.ndarray, size: tuple[int, int], mode: str = "bilinear") -> np.ndarray:
    """Resize a 2D image to ``size = (width, height)``.

    ``nearest`` copies the closest source pixel (ties toward the smaller index)
    and preserves dtype, so binary masks stay binary. ``bilinear`` aligns the
    corner pixel centers of source and target and clamps at the edges; a
    single-pixel target axis samples the source midpoint.
    """
    width, height = size
    if width < 1 or height < 1:
        raise ValueError(f"target size must be >= 1 in both dimensions, got {size}")
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {image.shape}")
    h_in, w_in = image.shape
    if (h_in, w_in) == (height, width):
        return image.copy()
    if mode == "nearest":
        rows = _nearest_index(height, h_in)
        cols = _nearest_index(width, w_in)
        return image[np.ix_(rows, cols)]
    if mode != "bilinear":
        raise ValueError(f"unknown resize mode {mode!r}")
    src = image.astype(np.float64)
    r0, r1, fr = _bilinear_coords(height, h_in)
    c0, c1, fc = _bilinear_coords(width, w_in)
    top = src[r0][:, c0] * (1 - fc) + src[r0][:, c1] * fc
    bottom = src[r1][:, c0] * (1 - fc) + src[r1][:, c1] * fc
    return top * (1 - fr)[:, None] + bottom * fr[:, None]
