"""Dynamic full-field OCT processing: SVD motion-artifact filtering,
dynamic-contrast operators, a ground-truth simulator and SNR metrics."""

__version__ = "0.1.0"

from .core import DynamicImage, Stack, SvdFactors, UnfoldedMatrix, fold, unfold
from .dynamic import DynConfig, dyn_cumsum, dyn_std, dynamic_image
from .io import MaskImage, read_image, read_mask, read_stack, write_image, write_stack
from .metrics import artifact_energy, snr_gain, snr_per_cell
from .simulate import SimConfig, simulate_stack
from .svdfilter import FilterConfig, filter_stack

__all__ = [
    "Stack", "UnfoldedMatrix", "SvdFactors", "DynamicImage", "unfold", "fold",
    "DynConfig", "dyn_std", "dyn_cumsum", "dynamic_image",
    "MaskImage", "read_stack", "write_stack", "read_image", "write_image", "read_mask",
    "artifact_energy", "snr_per_cell", "snr_gain",
    "SimConfig", "simulate_stack",
    "FilterConfig", "filter_stack",
]
