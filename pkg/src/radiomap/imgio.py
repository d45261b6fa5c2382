"""On-disk formats: binary PGM, minimal single-file NIfTI-1, planar f32 rasters.

All readers take the full file content as ``bytes`` and check every length
before slicing, so truncated or corrupt input raises :class:`FormatError`
instead of reading past the payload.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed input file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


@dataclass
class GrayImage:
    """A 2D scalar slice; ``values`` has shape ``(height, width)``."""

    values: np.ndarray
    spacing: tuple[float, float] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise ValueError(f"image must be 2D and nonempty, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image contains non-finite values")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


# --------------------------------------------------------------------- PGM


def _pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        ch = data[pos : pos + 1]
        if ch == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header", start)
    return data[start:pos], pos


def _pgm_int(data: bytes, pos: int, name: str) -> tuple[int, int]:
    token, end = _pgm_token(data, pos)
    if not token.isdigit():
        raise FormatError(f"PGM {name} is not a positive integer: {token[:16]!r}", end - len(token))
    return int(token), end


def load_pgm(data: bytes) -> GrayImage:
    """Decode a binary ("P5") PGM.

    Samples are one byte for ``maxval <= 255`` and two big-endian bytes above.
    """
    if len(data) < 2:
        raise FormatError("truncated PGM magic", 0)
    if data[:2] != b"P5":
        raise FormatError(f"unsupported magic {data[:2]!r}", 0)
    width, pos = _pgm_int(data, 2, "width")
    height, pos = _pgm_int(data, pos, "height")
    maxval, pos = _pgm_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"PGM dimensions must be >= 1, got {width}x{height}", pos)
    if not 1 <= maxval <= 65535:
        raise FormatError(f"PGM maxval {maxval} out of range 1..65535", pos)
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after PGM maxval", pos)
    pos += 1
    itemsize = 1 if maxval < 256 else 2
    need = width * height * itemsize
    if len(data) - pos < need:
        raise FormatError(f"truncated PGM payload: need {need} bytes, have {len(data) - pos}", pos)
    dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
    samples = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return GrayImage(samples.reshape(height, width).astype(np.float64))


def save_pgm(values: np.ndarray, maxval: int | None = None) -> bytes:
    """Encode non-negative integer samples as a "P5" PGM."""
    arr = np.asarray(values)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValueError(f"PGM needs a nonempty 2D array, got shape {arr.shape}")
    if np.any(arr < 0) or np.any(arr != np.round(arr)):
        raise ValueError("PGM samples must be non-negative integers")
    top = int(arr.max())
    if maxval is None:
        maxval = 255 if top <= 255 else 65535
    if not 1 <= maxval <= 65535 or top > maxval:
        raise ValueError(f"maxval {maxval} cannot hold sample {top}")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    return header + arr.astype(dtype).tobytes()


def load_mask_pgm(data: bytes) -> np.ndarray:
    """PGM as a binary mask: nonzero is foreground."""
    return (load_pgm(data).values != 0).astype(np.uint8)


# ------------------------------------------------------------------- NIfTI-1

NIFTI_HEADER_SIZE = 348

#: Supported datatype codes and their little-endian numpy dtypes.
NIFTI_DTYPES = {
    2: np.dtype("u1"),
    4: np.dtype("<i2"),
    16: np.dtype("<f4"),
    512: np.dtype("<u2"),
}
_NIFTI_NAMES = {2: "uint8", 4: "int16", 16: "float32", 512: "uint16"}


@dataclass
class VolumeMeta:
    dims: tuple[int, int, int]
    datatype: int
    slope: float = 1.0
    intercept: float = 0.0
    voxel_sizes: tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def datatype_name(self) -> str:
        return _NIFTI_NAMES[self.datatype]


def _nifti_header(data: bytes) -> tuple[VolumeMeta, int, str]:
    if len(data) < NIFTI_HEADER_SIZE:
        raise FormatError(f"truncated NIfTI header: {len(data)} of {NIFTI_HEADER_SIZE} bytes", len(data))
    for endian in "<>":
        if struct.unpack_from(endian + "i", data, 0)[0] == NIFTI_HEADER_SIZE:
            break
    else:
        raise FormatError("sizeof_hdr is not 348", 0)
    magic = data[344:348]
    if magic == b"ni1\x00":
        raise FormatError("unsupported layout: two-file (.hdr/.img) NIfTI", 344)
    if magic != b"n+1\x00":
        raise FormatError(f"bad NIfTI magic {magic!r}", 344)
    dim = struct.unpack_from(endian + "8h", data, 40)
    ndim = dim[0]
    if not 2 <= ndim <= 7:
        raise FormatError(f"dim[0] = {ndim} out of range", 40)
    dims = tuple(int(d) if k <= ndim else 1 for k, d in enumerate(dim[1:4], start=1))
    if any(d < 1 for d in dims):
        raise FormatError(f"non-positive dimensions {dims}", 42)
    if any(d > 1 for d in dim[4 : ndim + 1]):
        raise FormatError("volumes with more than 3 dimensions are not supported", 48)
    datatype, bitpix = struct.unpack_from(endian + "2h", data, 70)
    if datatype not in NIFTI_DTYPES:
        raise FormatError(f"unsupported datatype code {datatype}", 70)
    if bitpix != NIFTI_DTYPES[datatype].itemsize * 8:
        raise FormatError(f"bitpix {bitpix} does not match datatype {datatype}", 72)
    pixdim = struct.unpack_from(endian + "8f", data, 76)
    vox_offset = struct.unpack_from(endian + "f", data, 108)[0]
    slope, intercept = struct.unpack_from(endian + "2f", data, 112)
    if not np.isfinite(vox_offset) or vox_offset < NIFTI_HEADER_SIZE or vox_offset != int(vox_offset):
        raise FormatError(f"invalid vox_offset {vox_offset}", 108)
    if not (np.isfinite(slope) and np.isfinite(intercept)):
        raise FormatError("non-finite scl_slope/scl_inter", 112)
    meta = VolumeMeta(
        dims=dims,
        datatype=datatype,
        slope=1.0 if slope == 0 else float(slope),
        intercept=float(intercept),
        voxel_sizes=tuple(float(abs(p)) for p in pixdim[1:4]),
    )
    return meta, int(vox_offset), endian


def load_nifti_slice(data: bytes, index: int, axis: str = "axial") -> tuple[GrayImage, VolumeMeta]:
    """Read one axial slice (fixed third index) from a single-file NIfTI-1.

    Values are ``raw * slope + intercept``; a zero slope counts as 1. The
    returned image has shape ``(ny, nx)``.
    """
    if axis != "axial":
        raise ValueError(f"only axial slicing is supported, got {axis!r}")
    meta, offset, endian = _nifti_header(data)
    nx, ny, nz = meta.dims
    if not 0 <= index < nz:
        raise IndexError(f"slice index {index} out of bounds for nz = {nz}")
    dtype = NIFTI_DTYPES[meta.datatype].newbyteorder(endian)
    slice_bytes = nx * ny * dtype.itemsize
    if offset > len(data):
        raise FormatError(f"vox_offset {offset} beyond file length {len(data)}", 108)
    end = offset + nz * slice_bytes
    if end > len(data):
        raise FormatError(f"truncated NIfTI payload: need {end} bytes, have {len(data)}", len(data))
    raw = np.frombuffer(data, dtype=dtype, count=nx * ny, offset=offset + index * slice_bytes)
    values = raw.reshape(ny, nx).astype(np.float64)
    if meta.slope != 1.0 or meta.intercept != 0.0:
        values = values * meta.slope + meta.intercept
    if not np.all(np.isfinite(values)):
        raise FormatError("non-finite voxel values in slice", offset + index * slice_bytes)
    image = GrayImage(values, spacing=(meta.voxel_sizes[0], meta.voxel_sizes[1]))
    return image, meta


def save_nifti(
    volume: np.ndarray,
    datatype: int = 16,
    slope: float = 1.0,
    intercept: float = 0.0,
    voxel_sizes: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> bytes:
    """Encode a ``(nz, ny, nx)`` array of raw stored values as a single-file NIfTI-1."""
    if datatype not in NIFTI_DTYPES:
        raise ValueError(f"unsupported datatype code {datatype}")
    vol = np.asarray(volume)
    if vol.ndim == 2:
        vol = vol[None]
    if vol.ndim != 3 or min(vol.shape) < 1:
        raise ValueError(f"expected a nonempty (nz, ny, nx) array, got shape {vol.shape}")
    dtype = NIFTI_DTYPES[datatype]
    stored = vol.astype(dtype)
    if not np.array_equal(stored.astype(np.float64), vol.astype(np.float64)):
        raise ValueError(f"values are not representable as {_NIFTI_NAMES[datatype]}")
    nz, ny, nx = vol.shape
    header = bytearray(NIFTI_HEADER_SIZE)
    struct.pack_into("<i", header, 0, NIFTI_HEADER_SIZE)
    struct.pack_into("<8h", header, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<2h", header, 70, datatype, dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, 1.0, *voxel_sizes, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", header, 108, 352.0)
    struct.pack_into("<2f", header, 112, slope, intercept)
    header[344:348] = b"n+1\x00"
    return bytes(header) + b"\x00" * 4 + stored.tobytes()


# ------------------------------------------------------------------ rasters

RASTER_DTYPE = "f32le"


def save_raster(channels: list[tuple[str, np.ndarray]], stem: str | Path) -> tuple[Path, Path]:
    """Write channels as planar little-endian float32 plus a JSON sidecar.

    The payload goes to ``<stem>.bin``, channel-major then row-major; the
    sidecar ``<stem>.json`` lists ``width``, ``height``, ``channels`` (names in
    order) and ``dtype``.
    """
    if not channels:
        raise ValueError("no channels to write")
    names = [name for name, _ in channels]
    arrays = [np.asarray(arr) for _, arr in channels]
    shape = arrays[0].shape
    if len(shape) != 2:
        raise ValueError(f"channels must be 2D, got shape {shape}")
    for name, arr in zip(names, arrays):
        if arr.shape != shape:
            raise ValueError(f"dimension mismatch: channel {name!r} is {arr.shape}, expected {shape}")
    stem = Path(stem)
    payload, sidecar = stem.with_name(stem.name + ".bin"), stem.with_name(stem.name + ".json")
    planes = np.stack([a.astype("<f4") for a in arrays])
    payload.write_bytes(planes.tobytes())
    meta = {"width": shape[1], "height": shape[0], "channels": names, "dtype": RASTER_DTYPE}
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return payload, sidecar


def parse_raster(payload: bytes, sidecar: str) -> list[tuple[str, np.ndarray]]:
    """Decode a raster from its payload bytes and sidecar JSON text."""
    try:
        meta = json.loads(sidecar)
    except json.JSONDecodeError as exc:
        raise FormatError(f"sidecar is not valid JSON: {exc.msg}", exc.pos) from None
    if not isinstance(meta, dict):
        raise FormatError("sidecar must be a JSON object", 0)
    if meta.get("dtype") != RASTER_DTYPE:
        raise FormatError(f"unsupported raster dtype {meta.get('dtype')!r}")
    width, height, names = meta.get("width"), meta.get("height"), meta.get("channels")
    if not (isinstance(width, int) and isinstance(height, int) and width >= 1 and height >= 1):
        raise FormatError("sidecar width/height must be positive integers")
    if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
        raise FormatError("sidecar channels must be a nonempty list of names")
    need = len(names) * width * height * 4
    if len(payload) != need:
        raise FormatError(f"raster payload is {len(payload)} bytes, sidecar implies {need}", min(len(payload), need))
    planes = np.frombuffer(payload, dtype="<f4").reshape(len(names), height, width)
    return [(name, planes[k].copy()) for k, name in enumerate(names)]


def load_raster(stem: str | Path) -> list[tuple[str, np.ndarray]]:
    """Read ``<stem>.bin`` / ``<stem>.json`` written by :func:`save_raster`."""
    stem = Path(stem)
    payload = stem.with_name(stem.name + ".bin").read_bytes()
    sidecar = stem.with_name(stem.name + ".json").read_text()
    return parse_raster(payload, sidecar)
