"""Image-quality measures: per-cell SNR against a label mask, SNR gains
between two operators, and class means against simulator ground truth."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DynamicImage
from .io import MaskImage, write_json
from .simulate import BACKGROUND, MOTILE, STATIC, SimGroundTruth

__all__ = [
    "SnrReport",
    "GainReport",
    "ArtifactEnergy",
    "EmptyRegionError",
    "snr_per_cell",
    "snr_gain",
    "artifact_energy",
    "write_snr_json",
    "write_gain_csv",
]


class EmptyRegionError(ValueError):
    """A label selected for averaging has no pixels."""

    def __init__(self, label: int, what: str):
        super().__init__(f"{what} (label {label}) has no pixels")
        self.label = label


@dataclass(frozen=True)
class SnrReport:
    """Per-cell SNR: mean over the cell divided by mean over label 0."""

    per_cell_snr: list[tuple[int, float]]
    mean_snr: float
    n_cells: int
    background_mean: float

    @property
    def cell_ids(self) -> list[int]:
        return [c for c, _ in self.per_cell_snr]

    @property
    def values(self) -> np.ndarray:
        return np.array([s for _, s in self.per_cell_snr])

    def to_dict(self) -> dict:
        return {
            "per_cell_snr": [{"cell_id": c, "snr": s} for c, s in self.per_cell_snr],
            "mean_snr": self.mean_snr,
            "n_cells": self.n_cells,
            "background_mean": self.background_mean,
        }


@dataclass(frozen=True)
class GainReport:
    cell_ids: list[int]
    snr_a: np.ndarray
    snr_b: np.ndarray
    gains: np.ndarray
    mean_gain: float


@dataclass(frozen=True)
class ArtifactEnergy:
    """Mean dynamic value per ground-truth class; ``None`` if the class is
    absent from the scene."""

    static_mean: float | None
    motile_mean: float | None
    background_mean: float | None

    def as_tuple(self):
        return self.static_mean, self.motile_mean, self.background_mean


def _check_dims(image: DynamicImage, labels: np.ndarray):
    if labels.shape != image.values.shape:
        raise ValueError(f"mask is {labels.shape[1]}x{labels.shape[0]} but image is "
                         f"{image.width}x{image.height}")


def snr_per_cell(image: DynamicImage, mask: MaskImage) -> SnrReport:
    """SNR of every labelled cell relative to the label-0 background.

    Raises
    ------
    EmptyRegionError
        If the background is empty.
    """
    labels = mask.labels
    _check_dims(image, labels)
    v = image.values.astype(np.float64).ravel()
    lab = labels.ravel()
    counts = np.bincount(lab)
    sums = np.bincount(lab, weights=v)
    if counts[0] == 0:
        raise EmptyRegionError(0, "background")
    bg = sums[0] / counts[0]
    ids = np.flatnonzero(counts)
    ids = ids[ids > 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = (sums[ids] / counts[ids]) / bg
    per_cell = [(int(i), float(s)) for i, s in zip(ids, snr)]
    mean = float(np.mean(snr)) if len(ids) else float("nan")
    return SnrReport(per_cell, mean, len(ids), float(bg))


def snr_gain(report_a: SnrReport, report_b: SnrReport) -> GainReport:
    """Per-cell ``snr_b / snr_a`` and its mean over cells."""
    if report_a.cell_ids != report_b.cell_ids:
        missing = set(report_a.cell_ids) ^ set(report_b.cell_ids)
        raise ValueError(f"reports cover different cells: {sorted(missing)[:10]}")
    a, b = report_a.values, report_b.values
    with np.errstate(divide="ignore", invalid="ignore"):
        g = b / a
    mean = float(g.mean()) if g.size else float("nan")
    return GainReport(report_a.cell_ids, a, b, g, mean)


def artifact_energy(image: DynamicImage, truth: SimGroundTruth) -> ArtifactEnergy:
    """Mean of ``image`` over the static, motile and background classes."""
    _check_dims(image, truth.label_map)
    v = image.values.astype(np.float64)

    def mean_of(cls):
        sel = truth.label_map == cls
        return float(v[sel].mean()) if sel.any() else None

    return ArtifactEnergy(mean_of(STATIC), mean_of(MOTILE), mean_of(BACKGROUND))


def write_snr_json(report: SnrReport, path, gain: GainReport | None = None) -> None:
    d = report.to_dict()
    if gain is not None:
        d["mean_gain"] = gain.mean_gain
    write_json(d, path)


def write_gain_csv(gain: GainReport, path) -> None:
    """One row per cell: cell_id, snr_a, snr_b, gain."""
    with open(Path(path), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cell_id", "snr_a", "snr_b", "gain"])
        for row in zip(gain.cell_ids, gain.snr_a, gain.snr_b, gain.gains):
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
