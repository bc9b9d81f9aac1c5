"""Adaptive SVD filter for bulk-motion artifacts.

The stack is unfolded into a (pixel, time) matrix and decomposed.  Temporal
eigenvectors of motion-free data look like sinusoids of steadily increasing
frequency, so their zero-crossing counts rise smoothly with the index.
Motion artifacts show up as eigenvectors with erratic, high-frequency time
courses: a jump in the zero-crossing count.  Jumps larger than a multiple of
the standard deviation of the jump series are rejected and the stack is
rebuilt from the remaining terms.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .core import Stack, SvdFactors, UnfoldedMatrix, fold, unfold
from .io import FilterReport, TileReport

__all__ = [
    "FilterConfig",
    "ZcrSeries",
    "DecompositionError",
    "InsufficientDataError",
    "MemoryBudgetError",
    "decompose",
    "zero_crossing_rate",
    "zcr_series",
    "detect_artifact_vectors",
    "apply_filter",
    "reconstruct",
    "filter_stack",
    "tile_grid",
    "decomposition_bytes",
    "available_memory",
]

log = logging.getLogger(__name__)


class DecompositionError(RuntimeError):
    pass


class InsufficientDataError(ValueError):
    pass


class MemoryBudgetError(MemoryError):
    """A single tile would not fit in the configured memory budget."""


@dataclass(frozen=True)
class FilterConfig:
    """Parameters of :func:`filter_stack`.

    Attributes
    ----------
    threshold_multiplier : float
        A D-ZCR value is an outlier when it exceeds this many population
        standard deviations of the D-ZCR series.
    max_candidate_index : int or None
        Only eigenvectors with index below this may be rejected.  The
        statistic itself always uses the full series.  ``None`` scans all k.
    tile_width, tile_height : int or None
        Process the frame in independent tiles of this size; ``None`` means
        the whole frame along that axis.
    detector : {"dzcr_threshold", "manual"}
    manual_indices : sequence of int
        Indices rejected in every tile when ``detector == "manual"``.
    n_workers : int
        Tiles decomposed concurrently (bounded further by the budget).
    memory_budget_bytes : int or None
        Upper bound on working memory for concurrent decompositions.
    """

    threshold_multiplier: float = 3.0
    max_candidate_index: int | None = 16
    tile_width: int | None = None
    tile_height: int | None = None
    detector: str = "dzcr_threshold"
    manual_indices: tuple[int, ...] = ()
    n_workers: int = 1
    memory_budget_bytes: int | None = None

    def __post_init__(self):
        if not self.threshold_multiplier > 0:
            raise ValueError("threshold_multiplier must be > 0")
        if self.max_candidate_index is not None and self.max_candidate_index < 1:
            raise ValueError("max_candidate_index must be >= 1 or None")
        if self.detector not in ("dzcr_threshold", "manual"):
            raise ValueError(f"unknown detector {self.detector!r}")
        for t in (self.tile_width, self.tile_height):
            if t is not None and t < 2:
                raise ValueError(f"tiles must be at least 2x2 pixels, got {t}")
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        object.__setattr__(self, "manual_indices", tuple(int(i) for i in self.manual_indices))


@dataclass(frozen=True)
class ZcrSeries:
    zcr: np.ndarray
    dzcr: np.ndarray


def decompose(matrix: UnfoldedMatrix) -> SvdFactors:
    """Economy SVD in float64 (k = min(n_pixels, frames))."""
    a = np.asarray(matrix.values, dtype=np.float64)
    if not np.isfinite(a).all():
        raise ValueError("matrix contains NaN or Inf")
    try:
        u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        log.warning("gesdd did not converge on %dx%d matrix, retrying with gesvd", *a.shape)
        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except np.linalg.LinAlgError as e:
            raise DecompositionError(f"SVD did not converge for {a.shape[0]}x{a.shape[1]} matrix") from e
    return SvdFactors(s, u, vt.T, np.ones(s.shape, dtype=bool), matrix.source_dims)


def zero_crossing_rate(v) -> int:
    """Number of sign changes between consecutive samples.

    Exact zeros take the sign of the previous sample (leading zeros take
    the first nonzero sign), so touching zero is not a crossing.  An
    all-zero series has no crossings.
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("zero_crossing_rate needs a 1-D series of length >= 2")
    return int(_zcr_columns(v[:, None])[0])


def _zcr_columns(a: np.ndarray) -> np.ndarray:
    """Zero-crossing count of each column of ``a``."""
    sign = np.sign(a).astype(np.int8)
    n = sign.shape[0]
    nz = sign != 0
    # forward-fill zeros with the last nonzero sign
    idx = np.where(nz, np.arange(n)[:, None], 0)
    np.maximum.accumulate(idx, axis=0, out=idx)
    filled = np.take_along_axis(sign, idx, axis=0)
    # leading zeros: back-fill from the first nonzero entry
    first = np.argmax(nz, axis=0)
    lead = np.arange(n)[:, None] < first[None, :]
    filled = np.where(lead, sign[first, np.arange(sign.shape[1])][None, :], filled)
    return np.count_nonzero(filled[1:] * filled[:-1] < 0, axis=0)


def zcr_series(factors: SvdFactors) -> ZcrSeries:
    zcr = _zcr_columns(factors.temporal_vectors)
    dzcr = np.abs(np.diff(zcr)).astype(np.float64)
    return ZcrSeries(zcr.astype(np.int64), dzcr)


def detect_artifact_vectors(factors: SvdFactors, config: FilterConfig = FilterConfig()):
    """Flag temporal eigenvectors whose zero-crossing count jumps.

    Returns ``(indices, series, threshold)``.  For each adjacent pair whose
    D-ZCR strictly exceeds ``multiplier * std(dzcr)`` the member with more
    zero crossings is flagged (the later one on ties).
    """
    if factors.k < 3:
        raise InsufficientDataError(f"need at least 3 singular vectors to threshold D-ZCR, got {factors.k}")
    series = zcr_series(factors)
    sigma = float(np.std(series.dzcr))
    threshold = config.threshold_multiplier * sigma
    if sigma == 0.0:
        # a constant series has no outliers, whatever its level
        return [], series, threshold
    limit = factors.k if config.max_candidate_index is None else config.max_candidate_index
    zcr = series.zcr
    flagged = set()
    for i in np.flatnonzero(series.dzcr > threshold):
        j = int(i) if zcr[i] > zcr[i + 1] else int(i) + 1
        if j < limit:
            flagged.add(j)
    return sorted(flagged), series, threshold


def apply_filter(factors: SvdFactors, indices: Sequence[int]) -> SvdFactors:
    """Mask the given terms; singular values themselves are kept."""
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= factors.k):
        raise IndexError(f"filter indices {idx.tolist()} outside [0, {factors.k})")
    mask = factors.kept_mask.copy()
    mask[idx] = False
    return replace(factors, kept_mask=mask)


def reconstruct(factors: SvdFactors) -> UnfoldedMatrix:
    """Sum of the kept terms, accumulated in float64."""
    keep = factors.kept_mask
    u = factors.spatial_vectors[:, keep]
    values = (u * factors.singular_values[keep]) @ factors.temporal_vectors[:, keep].T
    return UnfoldedMatrix(values, factors.source_dims)


def tile_grid(width: int, height: int, tile_width=None, tile_height=None):
    """Tile rectangles ``(x0, y0, w, h)`` covering the frame in row-major
    order.  A remainder narrower than 2 pixels is merged into its
    neighbour."""
    def edges(n, t):
        if t is None or t >= n:
            return [0, n]
        e = list(range(0, n, t)) + [n]
        if len(e) > 2 and e[-1] - e[-2] < 2:
            del e[-2]
        return e

    xs, ys = edges(width, tile_width), edges(height, tile_height)
    return [(x0, y0, x1 - x0, y1 - y0)
            for y0, y1 in zip(ys[:-1], ys[1:])
            for x0, x1 in zip(xs[:-1], xs[1:])]


def decomposition_bytes(n_pixels: int, frames: int) -> int:
    """Working set of one decompose + reconstruct: float64 copy of the
    matrix, U, V, the reconstruction and the gesdd workspace."""
    k = min(n_pixels, frames)
    return 8 * (2 * n_pixels * frames + n_pixels * k + k * frames + 4 * k * k + 8 * k)


def available_memory() -> int | None:
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return None


def _filter_tile(block: np.ndarray, origin, config: FilterConfig):
    """Run the filter on one (frames, h, w) block."""
    t0 = time.perf_counter()
    frames, h, w = block.shape
    matrix = UnfoldedMatrix(block.reshape(frames, -1).T, (w, h))
    factors = decompose(matrix)
    if config.detector == "manual":
        indices = sorted(set(config.manual_indices))
        series = zcr_series(factors)
        threshold = None
    else:
        indices, series, threshold = detect_artifact_vectors(factors, config)
    factors = apply_filter(factors, indices)
    rebuilt = reconstruct(factors).values
    artifact = np.abs(factors.spatial_vectors[:, indices]).sum(axis=1).reshape(h, w)
    out = rebuilt.T.reshape(frames, h, w).astype(np.float32)
    report = TileReport(
        x0=origin[0], y0=origin[1], width=w, height=h,
        rejected_indices=[int(i) for i in indices],
        zcr=[int(z) for z in series.zcr],
        dzcr=[float(d) for d in series.dzcr],
        threshold_value=threshold,
        singular_values=[float(s) for s in factors.singular_values],
        wall_time_seconds=time.perf_counter() - t0,
    )
    return out, artifact, report


def filter_stack(stack: Stack, config: FilterConfig = FilterConfig()) -> tuple[Stack, FilterReport]:
    """Decompose, detect, mask and rebuild, tile by tile.

    Tiles are independent: each gets its own decomposition and its own
    rejection decision.  Results do not depend on ``n_workers``.

    Raises
    ------
    MemoryBudgetError
        If one tile's decomposition alone exceeds ``memory_budget_bytes``.
    """
    t0 = time.perf_counter()
    tiles = tile_grid(stack.width, stack.height, config.tile_width, config.tile_height)
    per_tile = max(decomposition_bytes(w * h, stack.frames) for _, _, w, h in tiles)
    workers = min(config.n_workers, len(tiles))
    if config.memory_budget_bytes is not None:
        fit = config.memory_budget_bytes // per_tile
        if fit < 1:
            raise MemoryBudgetError(
                f"one {stack.width if config.tile_width is None else config.tile_width}x"
                f"{stack.height if config.tile_height is None else config.tile_height} tile needs "
                f"~{per_tile / 2**30:.2f} GiB, budget is {config.memory_budget_bytes / 2**30:.2f} GiB; "
                f"use smaller tiles")
        workers = min(workers, int(fit))

    out = np.empty(stack.shape, dtype=np.float32)
    artifact = np.zeros((stack.height, stack.width))

    def job(tile):
        x0, y0, w, h = tile
        block = stack.data[:, y0:y0 + h, x0:x0 + w]
        return _filter_tile(block, (x0, y0), config)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, tiles))
    else:
        results = [job(t) for t in tiles]

    reports = []
    for (x0, y0, w, h), (block, art, rep) in zip(tiles, results):
        out[:, y0:y0 + h, x0:x0 + w] = block
        artifact[y0:y0 + h, x0:x0 + w] = art
        reports.append(rep)

    report = FilterReport(
        detector=config.detector,
        threshold_multiplier=config.threshold_multiplier,
        max_candidate_index=config.max_candidate_index,
        tiles=reports,
        wall_time_seconds=time.perf_counter() - t0,
        artifact_image=artifact,
    )
    log.info("filtered %dx%dx%d stack in %d tile(s), rejected %s",
             stack.width, stack.height, stack.frames, len(tiles), report.rejected_indices)
    return stack.with_data(out), report
