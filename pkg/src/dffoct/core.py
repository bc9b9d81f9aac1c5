"""Data model shared by every stage: stacks, unfolded matrices, SVD factors
and dynamic images.

Stacks are stored frame-major with x varying fastest, i.e. a numpy array of
shape ``(frames, height, width)`` in C order.  Unfolding is then a transposed
view of that buffer and costs nothing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Stack",
    "UnfoldedMatrix",
    "SvdFactors",
    "DynamicImage",
    "DimensionMismatchError",
    "unfold",
    "fold",
]


class DimensionMismatchError(ValueError):
    """Raised when array shapes disagree with declared dimensions."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = a.view()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Stack:
    """Raw acquisition cube M(x, y, t).

    Parameters
    ----------
    data : ndarray, shape (frames, height, width)
        Samples, converted to float32.  Must be finite.
    frame_rate_hz, wavelength_nm : float, optional
        Acquisition metadata carried along unchanged.
    """

    data: np.ndarray
    frame_rate_hz: float | None = None
    wavelength_nm: float | None = None

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise DimensionMismatchError(f"stack data must be 3-D (frames, height, width), got {data.shape}")
        frames, height, width = data.shape
        if width < 1 or height < 1:
            raise DimensionMismatchError(f"stack must be at least 1x1 pixels, got {width}x{height}")
        if frames < 2:
            raise DimensionMismatchError(f"stack needs at least 2 frames, got {frames}")
        if not np.isfinite(data).all():
            raise ValueError("stack contains NaN or Inf samples")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def pixel(self, x: int, y: int) -> np.ndarray:
        """Time series of pixel (x, y)."""
        return self.data[:, y, x]

    def with_data(self, data: np.ndarray) -> "Stack":
        return Stack(data, frame_rate_hz=self.frame_rate_hz, wavelength_nm=self.wavelength_nm)


@dataclass(frozen=True)
class UnfoldedMatrix:
    """(pixel, time) view of a stack; row ``p = y * width + x``."""

    values: np.ndarray
    source_dims: tuple[int, int]

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DimensionMismatchError(f"unfolded matrix must be 2-D, got {self.values.shape}")
        w, h = self.source_dims
        object.__setattr__(self, "source_dims", (int(w), int(h)))

    @property
    def n_pixels(self) -> int:
        return self.values.shape[0]

    @property
    def frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SvdFactors:
    """Economy SVD ``M_u = sum_i s_i U_i (x) V_i`` with a mask of kept terms.

    ``spatial_vectors`` has the U_i as columns (n_pixels, k) and
    ``temporal_vectors`` the V_i as columns (frames, k).  Rejected terms stay
    in the arrays; ``kept_mask`` says which contribute to a reconstruction.
    """

    singular_values: np.ndarray
    spatial_vectors: np.ndarray
    temporal_vectors: np.ndarray
    kept_mask: np.ndarray
    source_dims: tuple[int, int]

    @property
    def k(self) -> int:
        return self.singular_values.shape[0]

    @property
    def rejected(self) -> np.ndarray:
        return np.flatnonzero(~self.kept_mask)

    def filtered_values(self) -> np.ndarray:
        """Singular values with rejected entries zeroed."""
        return np.where(self.kept_mask, self.singular_values, 0.0)


@dataclass(frozen=True)
class DynamicImage:
    """Per-pixel fluctuation strength, shape (height, width), float32 >= 0."""

    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.ndim != 2:
            raise DimensionMismatchError(f"dynamic image must be 2-D, got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("dynamic image contains NaN or Inf")
        if (v < 0).any():
            raise ValueError("dynamic image values must be non-negative")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def unfold(stack: Stack) -> UnfoldedMatrix:
    """Reinterpret a stack as a (n_pixels, frames) matrix without copying."""
    values = stack.data.reshape(stack.frames, -1).T
    return UnfoldedMatrix(values, (stack.width, stack.height))


def fold(matrix: UnfoldedMatrix, *, frame_rate_hz=None, wavelength_nm=None) -> Stack:
    """Inverse of :func:`unfold`.  Values are cast to float32."""
    w, h = matrix.source_dims
    if matrix.n_pixels != w * h:
        raise DimensionMismatchError(
            f"matrix has {matrix.n_pixels} rows but source_dims {w}x{h} need {w * h}"
        )
    data = matrix.values.T.reshape(matrix.frames, h, w)
    return Stack(data, frame_rate_hz=frame_rate_hz, wavelength_nm=wavelength_nm)
