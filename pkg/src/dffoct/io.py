"""Reading and writing stacks, images, masks and filter reports.

The ``.dstk`` container is one line of JSON followed by the raw
little-endian payload in core layout order (x fastest, then y, then t)::

    {"magic": "DSTK", "version": 1, "width": 2, "height": 2, "frames": 3,
     "dtype": "f32", "frame_rate_hz": 150.0, "wavelength_nm": null}\\n
    <width * height * frames samples>

A 2-D image is the same container with ``frames = 1``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DynamicImage, Stack

__all__ = [
    "FormatError",
    "BadMagicError",
    "HeaderError",
    "UnknownDtypeError",
    "DimensionError",
    "TruncatedPayloadError",
    "NonFiniteError",
    "StackFileHeader",
    "MaskImage",
    "write_stack",
    "read_stack",
    "read_dstk",
    "write_image",
    "read_image",
    "write_pgm16",
    "read_pgm",
    "read_mask",
    "write_mask",
    "write_json",
    "TileReport",
    "FilterReport",
    "write_report",
    "read_report",
]

MAGIC = "DSTK"
VERSION = 1
MAX_HEADER_BYTES = 1 << 16
# Per-axis and total sample limits; anything larger is treated as a corrupt header.
MAX_DIM = 1 << 24
MAX_SAMPLES = 1 << 40

_DTYPES = {"u16": np.dtype("<u2"), "f32": np.dtype("<f4")}


class FormatError(ValueError):
    """Base class for every parse failure raised by the readers."""


class BadMagicError(FormatError):
    pass


class HeaderError(FormatError):
    pass


class UnknownDtypeError(FormatError):
    pass


class DimensionError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


@dataclass(frozen=True)
class StackFileHeader:
    width: int
    height: int
    frames: int
    dtype: str = "f32"
    frame_rate_hz: float | None = None
    wavelength_nm: float | None = None
    version: int = VERSION
    magic: str = MAGIC

    @property
    def n_samples(self) -> int:
        return self.width * self.height * self.frames

    @property
    def payload_bytes(self) -> int:
        return self.n_samples * _DTYPES[self.dtype].itemsize

    def serialize(self) -> bytes:
        d = {
            "magic": self.magic,
            "version": self.version,
            "width": self.width,
            "height": self.height,
            "frames": self.frames,
            "dtype": self.dtype,
            "frame_rate_hz": self.frame_rate_hz,
            "wavelength_nm": self.wavelength_nm,
        }
        return (json.dumps(d) + "\n").encode("ascii")

    @classmethod
    def parse(cls, line: bytes) -> "StackFileHeader":
        if not line.startswith(b"{"):
            if line[:4] != MAGIC.encode():
                raise BadMagicError(f"not a dstk file (starts with {line[:4]!r})")
        try:
            d = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, ValueError, RecursionError) as e:
            raise HeaderError(f"header is not valid JSON: {type(e).__name__}") from None
        if not isinstance(d, dict):
            raise HeaderError("header must be a JSON object")
        if d.get("magic") != MAGIC:
            raise BadMagicError(f"bad magic {d.get('magic')!r}, expected {MAGIC!r}")
        version = d.get("version")
        if not _is_int(version) or version != VERSION:
            raise HeaderError(f"unsupported version {version!r}")
        dims = []
        for key in ("width", "height", "frames"):
            v = d.get(key)
            if not _is_int(v):
                raise HeaderError(f"{key} must be an integer, got {v!r}")
            if v < 1 or v > MAX_DIM:
                raise DimensionError(f"{key}={v} out of range [1, {MAX_DIM}]")
            dims.append(v)
        if dims[0] * dims[1] * dims[2] > MAX_SAMPLES:
            raise DimensionError(f"dimensions {dims} overflow the sample limit")
        dtype = d.get("dtype")
        if not isinstance(dtype, str) or dtype not in _DTYPES:
            raise UnknownDtypeError(f"unknown dtype {dtype!r}")
        meta = {}
        for key in ("frame_rate_hz", "wavelength_nm"):
            v = d.get(key)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))
                                  or not np.isfinite(float(v))):
                raise HeaderError(f"{key} must be a finite number or null, got {v!r}")
            meta[key] = None if v is None else float(v)
        return cls(dims[0], dims[1], dims[2], dtype, **meta)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _write(path, header: StackFileHeader, payload: np.ndarray):
    path = Path(path)
    try:
        with open(path, "wb") as f:
            f.write(header.serialize())
            f.write(np.ascontiguousarray(payload, dtype=_DTYPES[header.dtype]).tobytes())
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}", str(path)) from e


def read_dstk(path) -> tuple[StackFileHeader, np.ndarray]:
    """Parse a ``.dstk`` file into its header and a float32 array
    of shape (frames, height, width)."""
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    nl = blob.find(b"\n", 0, MAX_HEADER_BYTES)
    if nl < 0:
        if blob[:1] != b"{" and blob[:4] != MAGIC.encode():
            raise BadMagicError(f"{path}: not a dstk file")
        raise HeaderError(f"{path}: header line missing or longer than {MAX_HEADER_BYTES} bytes")
    try:
        header = StackFileHeader.parse(blob[:nl])
    except FormatError as e:
        raise type(e)(f"{path}: {e}") from None
    payload = memoryview(blob)[nl + 1:]
    need = header.payload_bytes
    if len(payload) < need:
        raise TruncatedPayloadError(f"{path}: payload has {len(payload)} bytes, header needs {need}")
    if len(payload) > need:
        raise FormatError(f"{path}: {len(payload) - need} trailing bytes after payload")
    raw = np.frombuffer(payload, dtype=_DTYPES[header.dtype])
    data = raw.astype(np.float32).reshape(header.frames, header.height, header.width)
    if header.dtype == "f32" and not np.isfinite(data).all():
        raise NonFiniteError(f"{path}: payload contains NaN or Inf")
    return header, data


def write_stack(stack: Stack, path) -> None:
    header = StackFileHeader(
        stack.width, stack.height, stack.frames, "f32",
        stack.frame_rate_hz, stack.wavelength_nm,
    )
    _write(path, header, stack.data)


def read_stack(path) -> Stack:
    """Load a stack; u16 payloads are widened to float32 without scaling."""
    header, data = read_dstk(path)
    if header.frames < 2:
        raise DimensionError(f"{path}: a stack needs at least 2 frames, file has {header.frames}")
    return Stack(data, frame_rate_hz=header.frame_rate_hz, wavelength_nm=header.wavelength_nm)


def write_image(image: DynamicImage, path, format: str = "dstk-2d") -> None:
    if format == "dstk-2d":
        header = StackFileHeader(image.width, image.height, 1, "f32")
        _write(path, header, image.values)
    elif format == "pgm16":
        write_pgm16(image.values, path)
    else:
        raise ValueError(f"unknown image format {format!r}")


def read_image(path) -> DynamicImage:
    header, data = read_dstk(path)
    if header.frames != 1:
        raise DimensionError(f"{path}: expected a 2-D image (frames=1), got frames={header.frames}")
    try:
        return DynamicImage(data[0])
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None


def write_pgm16(values: np.ndarray, path, scale: bool = True) -> None:
    """Binary 16-bit PGM (P5, maxval 65535, big-endian samples).

    With ``scale`` the values are min-max mapped onto 0..65535 and a
    constant image becomes all zeros; otherwise they must already be
    integers in range.
    """
    v = np.asarray(values, dtype=np.float64)
    if scale:
        lo, hi = v.min(), v.max()
        if hi > lo:
            v = np.rint((v - lo) / (hi - lo) * 65535.0)
        else:
            v = np.zeros_like(v)
    elif v.min() < 0 or v.max() > 65535 or not np.array_equal(v, np.rint(v)):
        raise ValueError("unscaled PGM values must be integers in 0..65535")
    h, w = v.shape
    try:
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
            f.write(v.astype(">u2").tobytes())
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}", str(path)) from e


def _pgm_tokens(blob: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, i, n = [], 0, len(blob)
    while len(tokens) < count:
        while i < n and blob[i:i + 1].isspace():
            i += 1
        if i < n and blob[i:i + 1] == b"#":
            while i < n and blob[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not blob[j:j + 1].isspace() and blob[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise FormatError("PGM header ended early")
        tokens.append(blob[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    if i >= n or not blob[i:i + 1].isspace():
        raise FormatError("PGM header not terminated by whitespace")
    return tokens, i + 1


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM, 8- or 16-bit, into an integer array."""
    with open(path, "rb") as f:
        blob = f.read()
    tokens, start = _pgm_tokens(blob, 4)
    if tokens[0] != b"P5":
        raise BadMagicError(f"{path}: not a binary PGM (magic {tokens[0][:8]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if not (0 < w <= MAX_DIM and 0 < h <= MAX_DIM and 0 < maxval <= 65535):
        raise DimensionError(f"{path}: PGM header out of range ({w}x{h}, maxval {maxval})")
    dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dt.itemsize
    raster = blob[start:]
    if len(raster) < need:
        raise TruncatedPayloadError(f"{path}: PGM raster has {len(raster)} bytes, needs {need}")
    return np.frombuffer(raster[:need], dtype=dt).reshape(h, w).astype(np.int64)


@dataclass(frozen=True)
class MaskImage:
    """Segmentation labels: 0 is background, n > 0 is cell n."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError(f"mask must be 2-D, got {lab.shape}")
        if lab.dtype.kind not in "iu":
            raise ValueError("mask labels must be integers")
        if lab.size and lab.min() < 0:
            raise ValueError("mask labels must be >= 0")
        object.__setattr__(self, "labels", lab.astype(np.int64))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def cell_ids(self) -> np.ndarray:
        ids = np.unique(self.labels)
        return ids[ids > 0]

    @property
    def n_cells(self) -> int:
        return len(self.cell_ids)


def read_mask(path) -> MaskImage:
    """Load a label mask from a 16-bit PGM or an integer-valued dstk-2d."""
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"P5":
        return MaskImage(read_pgm(path))
    header, data = read_dstk(path)
    if header.frames != 1:
        raise DimensionError(f"{path}: mask must have frames=1")
    img = data[0].astype(np.float64)
    if not np.array_equal(img, np.rint(img)) or (img < 0).any():
        raise FormatError(f"{path}: mask contains non-integer or negative labels")
    return MaskImage(img.astype(np.int64))


def write_mask(mask: MaskImage, path) -> None:
    if mask.labels.size and mask.labels.max() > 65535:
        raise ValueError("PGM masks hold at most 65535 labels")
    write_pgm16(mask.labels, path, scale=False)


def write_json(obj, path) -> None:
    path = Path(path)
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


@dataclass
class TileReport:
    """Detector evidence for one spatial tile (the whole frame when untiled)."""

    x0: int
    y0: int
    width: int
    height: int
    rejected_indices: list[int]
    zcr: list[int]
    dzcr: list[float]
    threshold_value: float
    singular_values: list[float]
    wall_time_seconds: float

    def to_dict(self) -> dict:
        return {
            "x0": self.x0, "y0": self.y0, "width": self.width, "height": self.height,
            "rejected_indices": list(self.rejected_indices),
            "zcr": list(self.zcr),
            "dzcr": list(self.dzcr),
            "threshold_value": self.threshold_value,
            "singular_values": list(self.singular_values),
            "wall_time_seconds": self.wall_time_seconds,
        }


@dataclass
class FilterReport:
    """Audit trail of one ``filter_stack`` run.

    ``rejected_indices`` is the union over tiles; the per-tile evidence
    (ZCR, D-ZCR, threshold, spectrum) lives in ``tiles``.  For an untiled
    run the single tile's evidence is also exposed at the top level.
    ``artifact_image`` (sum of |U_i| over rejected terms) is kept in memory
    only and is never serialized.
    """

    detector: str
    threshold_multiplier: float
    max_candidate_index: int | None
    tiles: list[TileReport]
    wall_time_seconds: float = 0.0
    artifact_image: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def rejected_indices(self) -> list[int]:
        return sorted({i for t in self.tiles for i in t.rejected_indices})

    def _single(self, name):
        if len(self.tiles) != 1:
            raise AttributeError(f"{name} is per tile for tiled runs; see .tiles")
        return getattr(self.tiles[0], name)

    zcr = property(lambda self: self._single("zcr"))
    dzcr = property(lambda self: self._single("dzcr"))
    threshold_value = property(lambda self: self._single("threshold_value"))
    singular_values = property(lambda self: self._single("singular_values"))

    def to_dict(self) -> dict:
        d = {
            "detector": self.detector,
            "threshold_multiplier": self.threshold_multiplier,
            "max_candidate_index": self.max_candidate_index,
            "rejected_indices": self.rejected_indices,
            "wall_time_seconds": self.wall_time_seconds,
            "tiles": [t.to_dict() for t in self.tiles],
        }
        if len(self.tiles) == 1:
            t = self.tiles[0]
            d.update(zcr=list(t.zcr), dzcr=list(t.dzcr),
                     threshold_value=t.threshold_value,
                     singular_values=list(t.singular_values))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FilterReport":
        tiles = [TileReport(**t) for t in d["tiles"]]
        return cls(d["detector"], d["threshold_multiplier"], d["max_candidate_index"],
                   tiles, d.get("wall_time_seconds", 0.0))


def write_report(report: FilterReport, path) -> None:
    write_json(report.to_dict(), path)


def read_report(path) -> FilterReport:
    with open(path) as f:
        return FilterReport.from_dict(json.load(f))
