"""Synthetic D-FFOCT acquisitions with known ground truth.

Every pixel follows the two-beam interference law

    I(r, t) = eta*I0/4 * (R + R_inc + R_ref + 2*sqrt(R*R_ref)*cos(dphi(r, t)))

with ``dphi = phi_walk(r, t) + 4*pi*z(t)/lambda``.  Motile pixels carry a
Gaussian phase random walk (optionally biased), static reflectors a constant
random phase, background pixels no coherent term at all.  The axial
displacement ``z(t)`` is shared by the whole field.  Camera noise is additive
Gaussian.

Random numbers are drawn from independent Philox streams keyed by
``(seed, purpose, row)``, so rows can be generated in any order or in
parallel with bit-identical results.
"""
from __future__ import annotations

import io
import math
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .core import Stack
from .io import MaskImage

__all__ = [
    "SimConfig",
    "WalkSpec",
    "MotionSpec",
    "Region",
    "SceneSpec",
    "SimGroundTruth",
    "SchemaError",
    "BACKGROUND",
    "STATIC",
    "MOTILE",
    "phase_from_displacement",
    "simulate_stack",
    "lung_like",
    "macaque_like",
    "liver_like",
    "TEMPLATES",
    "BREATHING",
    "HEARTBEAT",
    "load_sim_document",
    "with_motion",
]

BACKGROUND, STATIC, MOTILE = 0, 1, 2
_KIND_CODES = {"background": BACKGROUND, "static_reflector": STATIC, "motile": MOTILE}

# Philox stream purposes
_S_MOTION, _S_PHASE0, _S_WALK, _S_NOISE, _S_LAYOUT = range(5)


def _rng(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, purpose, index])))


class SchemaError(ValueError):
    """Invalid simulation document; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SimConfig:
    width: int = 128
    height: int = 128
    frames: int = 512
    wavelength_nm: float = 660.0
    source_intensity: float = 1000.0
    quantum_efficiency: float = 0.5
    r_ref: float = 0.2
    r_inc: float = 0.01
    frame_rate_hz: float = 150.0
    camera_noise_std: float = 0.3
    rng_seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frames < 2:
            raise ValueError(f"need width, height >= 1 and frames >= 2, got "
                             f"{self.width}x{self.height}x{self.frames}")
        if not self.wavelength_nm > 0:
            raise ValueError("wavelength_nm must be > 0")
        if not self.source_intensity > 0:
            raise ValueError("source_intensity must be > 0")
        if not 0 < self.quantum_efficiency <= 1:
            raise ValueError("quantum_efficiency must lie in (0, 1]")
        if not 0 < self.r_ref <= 1:
            raise ValueError("r_ref must lie in (0, 1]")
        if not self.r_inc >= 0:
            raise ValueError("r_inc must be >= 0")
        if not self.frame_rate_hz > 0:
            raise ValueError("frame_rate_hz must be > 0")
        if not self.camera_noise_std >= 0:
            raise ValueError("camera_noise_std must be >= 0")

    @property
    def gain(self) -> float:
        """Prefactor eta * I0 / 4."""
        return self.quantum_efficiency * self.source_intensity / 4.0


@dataclass(frozen=True)
class WalkSpec:
    """Per-frame Gaussian phase increments, ``N(drift, std**2)`` radians."""

    std: float
    drift: float = 0.0

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("walk std must be > 0")
        if not math.isfinite(self.drift):
            raise ValueError("walk drift must be finite")

    @property
    def kind(self) -> str:
        return "centered_gaussian" if self.drift == 0 else "biased_gaussian"


@dataclass(frozen=True)
class MotionSpec:
    """Bulk axial displacement z(t) of the sample, in nm.

    kind is one of ``none``, ``sinusoid`` (amplitude_nm, frequency_hz, phase),
    ``random_walk`` (std_nm_per_frame, starting at 0) or ``trace`` (z_nm).
    """

    kind: str = "none"
    amplitude_nm: float = 0.0
    frequency_hz: float = 0.0
    phase: float = 0.0
    std_nm_per_frame: float = 0.0
    z_nm: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "sinusoid", "random_walk", "trace"):
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.kind == "trace":
            if self.z_nm is None:
                raise ValueError("trace motion needs z_nm")
            object.__setattr__(self, "z_nm", tuple(float(z) for z in self.z_nm))
        if self.kind == "random_walk" and not self.std_nm_per_frame >= 0:
            raise ValueError("std_nm_per_frame must be >= 0")

    def trace(self, frames: int, frame_rate_hz: float, seed: int = 0) -> np.ndarray:
        t = np.arange(frames)
        if self.kind == "none":
            return np.zeros(frames)
        if self.kind == "sinusoid":
            return self.amplitude_nm * np.sin(2 * np.pi * self.frequency_hz * t / frame_rate_hz + self.phase)
        if self.kind == "random_walk":
            steps = _rng(seed, _S_MOTION).normal(0.0, self.std_nm_per_frame, frames)
            steps[0] = 0.0
            return np.cumsum(steps)
        z = np.asarray(self.z_nm, dtype=np.float64)
        if z.shape != (frames,):
            raise ValueError(f"motion trace has {z.size} samples, stack has {frames} frames")
        return z


@dataclass(frozen=True)
class Region:
    """A set of pixels (flat indices ``y * width + x``) sharing one kind."""

    pixels: np.ndarray
    kind: str
    r_s: float = 0.0
    walk: WalkSpec | None = None

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "motile" and self.walk is None:
            raise ValueError("motile regions need a walk")
        if self.kind != "background" and not 0 <= self.r_s <= 1:
            raise ValueError("r_s must lie in [0, 1]")
        object.__setattr__(self, "pixels", np.unique(np.asarray(self.pixels, dtype=np.int64)))


@dataclass(frozen=True)
class SceneSpec:
    regions: tuple[Region, ...] = ()
    bulk_motion: MotionSpec = field(default_factory=MotionSpec)

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))


@dataclass(frozen=True)
class SimGroundTruth:
    """Oracle returned next to a simulated stack.

    label_map holds BACKGROUND / STATIC / MOTILE per pixel, region_map the
    1-based index of the region covering the pixel (0 if uncovered) and
    motility_map the RMS phase step (rad/frame) of motile pixels.
    """

    label_map: np.ndarray
    motility_map: np.ndarray
    z_trace_nm: np.ndarray
    region_map: np.ndarray

    @property
    def width(self) -> int:
        return self.label_map.shape[1]

    @property
    def height(self) -> int:
        return self.label_map.shape[0]

    def cell_mask(self) -> MaskImage:
        """Each motile region becomes one cell, numbered 1..n in scene order;
        every other pixel is background."""
        motile_regions = np.unique(self.region_map[self.label_map == MOTILE])
        lut = np.zeros(int(self.region_map.max()) + 1, dtype=np.int64)
        lut[motile_regions] = np.arange(1, len(motile_regions) + 1)
        labels = np.where(self.label_map == MOTILE, lut[self.region_map], 0)
        return MaskImage(labels)

    def save(self, path) -> None:
        """Write an ``.npz`` archive.  Entries carry a fixed timestamp so
        identical ground truth gives identical bytes."""
        arrays = {"label_map": self.label_map, "motility_map": self.motility_map,
                  "z_trace_nm": self.z_trace_nm, "region_map": self.region_map}
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, a in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asarray(a), allow_pickle=False)
                info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
                info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, buf.getvalue())

    @classmethod
    def load(cls, path) -> "SimGroundTruth":
        with np.load(path) as f:
            return cls(f["label_map"], f["motility_map"], f["z_trace_nm"], f["region_map"])


def phase_from_displacement(z_nm, wavelength_nm: float):
    """Round-trip interferometric phase 4*pi*z/lambda (radians)."""
    if not wavelength_nm > 0:
        raise ValueError("wavelength_nm must be > 0")
    out = 4.0 * np.pi * np.asarray(z_nm, dtype=np.float64) / wavelength_nm
    return float(out) if out.ndim == 0 else out


def _rasterize(config: SimConfig, scene: SceneSpec):
    n = config.width * config.height
    label = np.zeros(n, dtype=np.int8)
    region = np.zeros(n, dtype=np.int32)
    refl = np.zeros(n)
    step_std = np.zeros(n)
    step_mean = np.zeros(n)
    for i, reg in enumerate(scene.regions, start=1):
        px = reg.pixels
        if px.size and (px[0] < 0 or px[-1] >= n):
            raise ValueError(f"region {i - 1} has pixels outside the "
                             f"{config.width}x{config.height} frame")
        if (region[px] != 0).any():
            raise ValueError(f"region {i - 1} overlaps an earlier region")
        region[px] = i
        label[px] = _KIND_CODES[reg.kind]
        if reg.kind != "background":
            refl[px] = reg.r_s
        if reg.kind == "motile":
            step_std[px] = reg.walk.std
            step_mean[px] = reg.walk.drift
    shape = (config.height, config.width)
    return (label.reshape(shape), region.reshape(shape), refl.reshape(shape),
            step_std.reshape(shape), step_mean.reshape(shape))


def simulate_stack(config: SimConfig, scene: SceneSpec, n_workers: int = 1) -> tuple[Stack, SimGroundTruth]:
    """Generate a stack and its ground truth.

    ``n_workers > 1`` generates rows on a thread pool; output is identical
    to the serial run.
    """
    label, region, refl, step_std, step_mean = _rasterize(config, scene)
    T, W, H = config.frames, config.width, config.height
    seed = config.rng_seed
    z = scene.bulk_motion.trace(T, config.frame_rate_hz, seed)
    psi = phase_from_displacement(z, config.wavelength_nm)
    k = config.gain
    out = np.empty((T, H, W), dtype=np.float32)

    def row(y):
        phi0 = _rng(seed, _S_PHASE0, y).uniform(0.0, 2 * np.pi, W)
        walk = _rng(seed, _S_WALK, y).standard_normal((W, T))
        walk *= step_std[y][:, None]
        walk += step_mean[y][:, None]
        walk[:, 0] = 0.0
        phi = np.cumsum(walk, axis=1)
        phi += phi0[:, None]
        phi += psi[None, :]
        R = refl[y][:, None]
        I = k * (R + config.r_inc + config.r_ref + 2.0 * np.sqrt(R * config.r_ref) * np.cos(phi))
        if config.camera_noise_std > 0:
            I += config.camera_noise_std * _rng(seed, _S_NOISE, y).standard_normal((W, T))
        out[:, y, :] = I.T

    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            list(pool.map(row, range(H)))
    else:
        for y in range(H):
            row(y)

    motility = np.where(label == MOTILE, np.hypot(step_std, step_mean), 0.0)
    truth = SimGroundTruth(label, motility, z, region)
    stack = Stack(out, frame_rate_hz=config.frame_rate_hz, wavelength_nm=config.wavelength_nm)
    return stack, truth


# --- pixel-set helpers and scene templates -------------------------------

def _disc(width, height, cx, cy, r):
    yy, xx = np.mgrid[:height, :width]
    return np.flatnonzero((xx - cx) ** 2 + (yy - cy) ** 2 < r * r)


def _rect(width, height, x0, y0, x1, y1):
    yy, xx = np.mgrid[:height, :width]
    return np.flatnonzero((xx >= x0) & (xx < x1) & (yy >= y0) & (yy < y1))


def _line(width, height, x0, y0, x1, y1, half_width):
    """Pixels within ``half_width`` of the infinite line through two points."""
    yy, xx = np.mgrid[:height, :width]
    dx, dy = x1 - x0, y1 - y0
    norm = math.hypot(dx, dy)
    if norm == 0:
        raise ValueError("line endpoints coincide")
    d = np.abs((xx - x0) * dy - (yy - y0) * dx) / norm
    return np.flatnonzero(d < half_width)


def _fibers(rng, width, height, n, half_width=1.5):
    taken = np.zeros(width * height, dtype=bool)
    for _ in range(n):
        y0 = rng.uniform(0, height)
        ang = rng.uniform(0, np.pi)
        x0 = width / 2
        taken[_line(width, height, x0, y0, x0 + math.cos(ang), y0 + math.sin(ang), half_width)] = True
    return np.flatnonzero(taken)


def _cells(rng, width, height, n, radius, taken, min_pixels=10, margin=0.0):
    """Random discs clipped against already-taken pixels."""
    out = []
    for _ in range(n):
        cx = rng.uniform(margin, width - margin)
        cy = rng.uniform(margin, height - margin)
        r = rng.uniform(*radius)
        px = _disc(width, height, cx, cy, r)
        px = px[~taken[px]]
        if px.size < min_pixels:
            continue
        taken[px] = True
        out.append(px)
    return out


def _scaled(count, width, height):
    return max(1, int(round(count * width * height / (128 * 128))))


BREATHING = MotionSpec("sinusoid", amplitude_nm=100.0, frequency_hz=5.0)


def lung_like(width=128, height=128, frames=512, motion: MotionSpec | None = None,
              seed: int = 0, **config_overrides) -> tuple[SimConfig, SceneSpec]:
    """Bright static fibers (r_s = 0.05) over densely packed dim motile
    cells (r_s = 1e-4, centered walk 0.5 rad/frame), moved by a 100 nm,
    5 Hz bulk oscillation unless ``motion`` says otherwise.

    Without bulk motion the fibers are invisible on dynamic images; with it
    their interferometric swing dominates everything else.  Pass
    ``MotionSpec()`` for the motion-free twin.
    """
    rng = _rng(seed, _S_LAYOUT)
    taken = np.zeros(width * height, dtype=bool)
    fibers = _fibers(rng, width, height, _scaled(8, width, height))
    taken[fibers] = True
    regions = [Region(fibers, "static_reflector", r_s=0.05)]
    walk = WalkSpec(std=0.5)
    for px in _cells(rng, width, height, _scaled(250, width, height), (4.0, 6.0), taken):
        regions.append(Region(px, "motile", r_s=1e-4, walk=walk))
    cfg = dict(width=width, height=height, frames=frames, camera_noise_std=0.3, rng_seed=seed)
    cfg.update(config_overrides)
    return SimConfig(**cfg), SceneSpec(tuple(regions), motion or BREATHING)


def macaque_like(width=128, height=128, frames=512, motion: MotionSpec | None = None,
                 seed: int = 0, **config_overrides) -> tuple[SimConfig, SceneSpec]:
    """Isolated dim cells whose phase drifts at a constant rate
    (0.1 rad/frame, random sign per cell, 0.05 rad/frame jitter) in a
    camera-noise-limited background, as found deep in tissue."""
    rng = _rng(seed, _S_LAYOUT)
    taken = np.zeros(width * height, dtype=bool)
    regions = []
    for px in _cells(rng, width, height, _scaled(80, width, height), (3.0, 4.5), taken, margin=4.0):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        regions.append(Region(px, "motile", r_s=1e-4, walk=WalkSpec(std=0.05, drift=0.1 * sign)))
    cfg = dict(width=width, height=height, frames=frames, camera_noise_std=1.0, rng_seed=seed)
    cfg.update(config_overrides)
    return SimConfig(**cfg), SceneSpec(tuple(regions), motion or MotionSpec())


HEARTBEAT = MotionSpec("sinusoid", amplitude_nm=40.0, frequency_hz=8.0)


def liver_like(width=128, height=128, frames=512, motion: MotionSpec | None = None,
               seed: int = 0, **config_overrides) -> tuple[SimConfig, SceneSpec]:
    """In vivo stand-in: a few reflective static structures, dim drifting
    cells and a heartbeat-like bulk oscillation (40 nm at 8 Hz)."""
    rng = _rng(seed, _S_LAYOUT)
    taken = np.zeros(width * height, dtype=bool)
    fibers = _fibers(rng, width, height, _scaled(6, width, height))
    taken[fibers] = True
    regions = [Region(fibers, "static_reflector", r_s=0.05)]
    for px in _cells(rng, width, height, _scaled(80, width, height), (3.0, 4.5), taken, margin=4.0):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        regions.append(Region(px, "motile", r_s=1e-4, walk=WalkSpec(std=0.05, drift=0.1 * sign)))
    cfg = dict(width=width, height=height, frames=frames, camera_noise_std=0.5, rng_seed=seed)
    cfg.update(config_overrides)
    return SimConfig(**cfg), SceneSpec(tuple(regions), motion or HEARTBEAT)


TEMPLATES = {"lung_like": lung_like, "macaque_like": macaque_like, "liver_like": liver_like}


# --- JSON document ---------------------------------------------------------

def _num(d, key, path, default=None, lo=None, lo_open=False, integer=False):
    if key not in d:
        if default is None:
            raise SchemaError(f"{path}.{key}", "required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
    if integer and not isinstance(v, int):
        raise SchemaError(f"{path}.{key}", "expected an integer")
    if not math.isfinite(v):
        raise SchemaError(f"{path}.{key}", "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise SchemaError(f"{path}.{key}", f"must be {'>' if lo_open else '>='} {lo}")
    return v


def _motion_from(d, path) -> MotionSpec:
    if not isinstance(d, dict):
        raise SchemaError(path, "expected an object")
    kind = d.get("kind", "none")
    if kind == "none":
        return MotionSpec()
    if kind == "sinusoid":
        return MotionSpec("sinusoid", amplitude_nm=_num(d, "amplitude_nm", path),
                          frequency_hz=_num(d, "frequency_hz", path, lo=0),
                          phase=_num(d, "phase", path, default=0.0))
    if kind == "random_walk":
        return MotionSpec("random_walk", std_nm_per_frame=_num(d, "std_nm_per_frame", path, lo=0))
    if kind == "trace":
        z = d.get("z_nm")
        if not isinstance(z, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in z):
            raise SchemaError(f"{path}.z_nm", "expected a list of numbers")
        return MotionSpec("trace", z_nm=tuple(z))
    raise SchemaError(f"{path}.kind", f"unknown motion kind {kind!r}")


def _walk_from(d, path) -> WalkSpec:
    if not isinstance(d, dict):
        raise SchemaError(path, "expected an object")
    kind = d.get("kind", "centered_gaussian")
    std = _num(d, "std", path, lo=0, lo_open=True)
    if kind == "centered_gaussian":
        return WalkSpec(std)
    if kind == "biased_gaussian":
        return WalkSpec(std, _num(d, "drift", path))
    raise SchemaError(f"{path}.kind", f"unknown walk kind {kind!r}")


def _shape_from(d, path, width, height) -> np.ndarray:
    if not isinstance(d, dict) or len(d) != 1:
        raise SchemaError(path, "expected exactly one of disc, rect, line, pixels")
    (name, args), = d.items()
    arity = {"disc": 3, "rect": 4, "line": 5}
    if name in arity:
        if (not isinstance(args, list) or len(args) != arity[name]
                or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in args)):
            raise SchemaError(f"{path}.{name}", f"expected {arity[name]} numbers")
        fn = {"disc": _disc, "rect": _rect, "line": _line}[name]
        try:
            return fn(width, height, *args)
        except ValueError as e:
            raise SchemaError(f"{path}.{name}", str(e)) from None
    if name == "pixels":
        try:
            xy = np.asarray(args, dtype=np.int64).reshape(-1, 2)
        except (ValueError, TypeError):
            raise SchemaError(f"{path}.pixels", "expected a list of [x, y] pairs") from None
        if ((xy[:, 0] < 0) | (xy[:, 0] >= width) | (xy[:, 1] < 0) | (xy[:, 1] >= height)).any():
            raise SchemaError(f"{path}.pixels", "pixel outside the frame")
        return xy[:, 1] * width + xy[:, 0]
    raise SchemaError(path, f"unknown shape {name!r}")


def load_sim_document(doc: dict[str, Any], seed: int | None = None) -> tuple[SimConfig, SceneSpec]:
    """Build (SimConfig, SceneSpec) from the JSON document accepted by the CLI.

    ``seed`` overrides ``config.rng_seed`` (and the template layout seed).
    """
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    cfg_doc = doc.get("config", {})
    if not isinstance(cfg_doc, dict):
        raise SchemaError("$.config", "expected an object")
    known = {f for f in SimConfig.__dataclass_fields__}
    for key in cfg_doc:
        if key not in known:
            raise SchemaError(f"$.config.{key}", "unknown field")
    cfg = {}
    for key in known:
        if key in cfg_doc:
            cfg[key] = _num(cfg_doc, key, "$.config",
                            integer=key in ("width", "height", "frames", "rng_seed"))
    if seed is not None:
        cfg["rng_seed"] = seed
    scene_doc = doc.get("scene", {})
    if not isinstance(scene_doc, dict):
        raise SchemaError("$.scene", "expected an object")
    motion = _motion_from(scene_doc["bulk_motion"], "$.scene.bulk_motion") \
        if "bulk_motion" in scene_doc else None

    if "template" in scene_doc:
        name = scene_doc["template"]
        if name not in TEMPLATES:
            raise SchemaError("$.scene.template", f"unknown template {name!r}; choose from {sorted(TEMPLATES)}")
        dims = {k: cfg.pop(k) for k in ("width", "height", "frames") if k in cfg}
        layout_seed = cfg.pop("rng_seed", 0)
        try:
            config, scene = TEMPLATES[name](motion=motion, seed=layout_seed, **dims, **cfg)
        except ValueError as e:
            raise SchemaError("$.config", str(e)) from None
        return config, scene

    try:
        config = SimConfig(**cfg)
    except ValueError as e:
        raise SchemaError("$.config", str(e)) from None
    regions_doc = scene_doc.get("regions", [])
    if not isinstance(regions_doc, list):
        raise SchemaError("$.scene.regions", "expected a list")
    regions = []
    taken = np.zeros(config.width * config.height, dtype=bool)
    for i, rd in enumerate(regions_doc):
        path = f"$.scene.regions[{i}]"
        if not isinstance(rd, dict):
            raise SchemaError(path, "expected an object")
        kind = rd.get("kind")
        if kind not in _KIND_CODES:
            raise SchemaError(f"{path}.kind", f"unknown region kind {kind!r}")
        if "shape" not in rd:
            raise SchemaError(f"{path}.shape", "required")
        px = _shape_from(rd["shape"], f"{path}.shape", config.width, config.height)
        if taken[px].any():
            raise SchemaError(path, "overlaps an earlier region")
        taken[px] = True
        r_s = 0.0 if kind == "background" else _num(rd, "r_s", path, lo=0)
        if r_s > 1:
            raise SchemaError(f"{path}.r_s", "must be <= 1")
        walk = _walk_from(rd.get("walk"), f"{path}.walk") if kind == "motile" else None
        regions.append(Region(px, kind, r_s=r_s, walk=walk))
    scene = SceneSpec(tuple(regions), motion or MotionSpec())
    if scene.bulk_motion.kind == "trace" and len(scene.bulk_motion.z_nm) != config.frames:
        raise SchemaError("$.scene.bulk_motion.z_nm",
                          f"has {len(scene.bulk_motion.z_nm)} samples, config has {config.frames} frames")
    return config, scene


def with_motion(scene: SceneSpec, motion: MotionSpec) -> SceneSpec:
    """Same regions, different bulk motion (e.g. the motion-free twin)."""
    return replace(scene, bulk_motion=motion)
