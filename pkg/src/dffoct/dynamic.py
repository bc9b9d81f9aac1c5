"""Dynamic-contrast operators and Brownian-bridge statistics.

Two per-pixel operators turn a stack into a dynamic image:

* ``dyn_std`` -- average over windows of the temporal standard deviation;
* ``dyn_cumsum`` -- average over windows of ``max |cumsum(I - mean(I))|``.

For centered noise the cumulative sum of a mean-subtracted window is a
discrete Brownian bridge whose maximum grows like ``sqrt(tau)``; a steady
drift makes it grow like ``tau``.  The second operator therefore rewards
slow, biased fluctuations over white noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DynamicImage, Stack

__all__ = [
    "DynConfig",
    "dyn_std",
    "dyn_cumsum",
    "dynamic_image",
    "window_starts",
    "bridge_max_cdf",
    "bridge_paths",
    "bridge_max_samples",
    "normalize_bridge_maxima",
    "drift_detection_ratio",
    "BRIDGE_DISCRETE_OFFSET",
    "METHODS",
]

METHODS = ("std_dev", "cumsum_max")

#: Expected gap between the supremum of a continuous Brownian path and its
#: discrete samples, in units of the step size: -zeta(1/2)/sqrt(2*pi).
BRIDGE_DISCRETE_OFFSET = 0.5825971579390106

_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class DynConfig:
    """Window parameters.

    ``window_stride`` defaults to ``window_length`` (non-overlapping
    windows); use 1 for a fully running window.  Frames after the last
    complete window are ignored.
    """

    window_length: int = 50
    window_stride: int | None = None
    method: str = "std_dev"

    def __post_init__(self):
        if self.window_length < 2:
            raise ValueError(f"window_length must be >= 2, got {self.window_length}")
        stride = self.window_length if self.window_stride is None else self.window_stride
        if not 1 <= stride <= self.window_length:
            raise ValueError(f"window_stride must be in [1, {self.window_length}], got {stride}")
        object.__setattr__(self, "window_stride", int(stride))
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    def n_windows(self, frames: int) -> int:
        if self.window_length > frames:
            raise ValueError(f"window_length {self.window_length} exceeds stack length {frames}")
        return (frames - self.window_length) // self.window_stride + 1


def window_starts(frames: int, config: DynConfig) -> np.ndarray:
    return np.arange(config.n_windows(frames)) * config.window_stride


def _windows(block: np.ndarray, config: DynConfig) -> np.ndarray:
    """(N, tau, pixels) float64 view/copy of the windows of ``block``."""
    tau = config.window_length
    starts = window_starts(block.shape[0], config)
    if config.window_stride == tau:
        w = block[: starts[-1] + tau].reshape(len(starts), tau, -1)
    else:
        w = np.lib.stride_tricks.sliding_window_view(block, tau, axis=0)[starts]
        w = np.moveaxis(w, -1, 1)
    return w.astype(np.float64)


def _std_kernel(w):
    return w.std(axis=1).mean(axis=0)


def _cumsum_kernel(w):
    c = np.cumsum(w - w.mean(axis=1, keepdims=True), axis=1)
    return np.abs(c).max(axis=1).mean(axis=0)


def _apply(stack: Stack, config: DynConfig, kernel) -> DynamicImage:
    config.n_windows(stack.frames)
    flat = stack.data.reshape(stack.frames, -1)
    n = flat.shape[1]
    out = np.empty(n, dtype=np.float64)
    # pixels are independent, so chunking changes nothing but peak memory
    step = max(1, _CHUNK_ELEMENTS // stack.frames)
    for p0 in range(0, n, step):
        out[p0:p0 + step] = kernel(_windows(flat[:, p0:p0 + step], config))
    meta = {"method": config.method, "window_length": config.window_length,
            "window_stride": config.window_stride, "n_windows": config.n_windows(stack.frames)}
    return DynamicImage(out.reshape(stack.height, stack.width), meta)


def dyn_std(stack: Stack, config: DynConfig = DynConfig()) -> DynamicImage:
    """Mean over windows of the per-window population standard deviation."""
    return _apply(stack, _with_method(config, "std_dev"), _std_kernel)


def dyn_cumsum(stack: Stack, config: DynConfig = DynConfig(method="cumsum_max")) -> DynamicImage:
    """Mean over windows of max |cumulative sum of the mean-subtracted window|."""
    return _apply(stack, _with_method(config, "cumsum_max"), _cumsum_kernel)


def dynamic_image(stack: Stack, config: DynConfig) -> DynamicImage:
    """Dispatch on ``config.method``."""
    if config.method == "std_dev":
        return dyn_std(stack, config)
    return dyn_cumsum(stack, config)


def _with_method(config: DynConfig, method: str) -> DynConfig:
    if config.method == method:
        return config
    return DynConfig(config.window_length, config.window_stride, method)


# --- Brownian bridge ------------------------------------------------------

def bridge_max_cdf(u):
    """CDF of the supremum of a standard Brownian bridge, ``1 - exp(-2 u^2)``.

    Accepts scalars or arrays; negative arguments are rejected.
    """
    a = np.asarray(u, dtype=np.float64)
    if (a < 0).any() or np.isnan(a).any():
        raise ValueError("bridge_max_cdf is defined for u >= 0")
    p = -np.expm1(-2.0 * a * a)
    return float(p) if p.ndim == 0 else p


def bridge_paths(n_frames: int, n_trials: int, seed: int, bias: float = 0.0,
                 center: bool = True) -> np.ndarray:
    """Cumulative sums of ``n_trials`` series of unit Gaussians.

    ``bias`` is added to every sample.  With ``center=True`` each series is
    mean-subtracted first, giving a discrete Brownian bridge (zero at the
    end); with ``center=False`` the raw random walk is returned.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    x = np.random.default_rng(seed).standard_normal((n_trials, n_frames)) + bias
    if center:
        x -= x.mean(axis=1, keepdims=True)
    return np.cumsum(x, axis=1)


def bridge_max_samples(n_frames: int, n_trials: int, seed: int, bias: float = 0.0) -> np.ndarray:
    """Suprema of ``n_trials`` discrete Brownian bridges of length ``n_frames``.

    Divide by ``sqrt(n_frames)`` (see :func:`normalize_bridge_maxima`) to
    compare with :func:`bridge_max_cdf`.
    """
    return bridge_paths(n_frames, n_trials, seed, bias=bias, center=True).max(axis=1)


def normalize_bridge_maxima(suprema, n_frames: int, continuity_correction: bool = True) -> np.ndarray:
    """Scale discrete bridge suprema to the unit-time bridge.

    The discrete maximum undershoots the continuous one by about
    ``BRIDGE_DISCRETE_OFFSET`` steps; adding it back removes the O(1/sqrt(n))
    bias that otherwise dominates goodness-of-fit tests.
    """
    # a bridge ends at zero, so its supremum is >= 0 up to rounding
    s = np.maximum(np.asarray(suprema, dtype=np.float64), 0.0)
    if continuity_correction:
        s = s + BRIDGE_DISCRETE_OFFSET
    return s / np.sqrt(n_frames)


def drift_detection_ratio(n_frames: int = 512, n_trials: int = 1000, seed: int = 0,
                          drift: float = 1.0 / 3.0, profile: str = "ramp") -> float:
    """Monte-Carlo ratio of E[max |cumsum|] with and without a drift.

    The drift is added to centered unit Gaussians before summation (no mean
    subtraction).  ``profile="ramp"`` grows the added bias linearly from 0
    to ``drift`` over the series; ``profile="offset"`` adds ``drift`` to
    every sample.  Both series share the same noise draws.
    """
    if profile not in ("ramp", "offset"):
        raise ValueError(f"profile must be 'ramp' or 'offset', got {profile!r}")
    noise = np.random.default_rng(seed).standard_normal((n_trials, n_frames))
    if profile == "ramp":
        bias = drift * np.arange(n_frames) / n_frames
    else:
        bias = np.full(n_frames, drift)
    base = np.abs(np.cumsum(noise, axis=1)).max(axis=1).mean()
    biased = np.abs(np.cumsum(noise + bias, axis=1)).max(axis=1).mean()
    return float(biased / base)
