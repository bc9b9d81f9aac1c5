"""
Removing bulk-motion artifacts with the SVD filter
==================================================

A lung-like sample: bright static fibers over dim, densely packed cells.
A 100 nm, 5 Hz axial oscillation of the whole sample makes the fibers
swing through their interference fringe, and on a standard-deviation
dynamic image they outshine the cells by more than an order of magnitude.

The filter unfolds the stack into a (pixel, time) matrix, looks at the
zero-crossing count of each temporal eigenvector and drops the ones whose
count jumps.  Run with ``--size 64`` for a quick look.
"""
import argparse
from pathlib import Path

import numpy as np

from dffoct.dynamic import dyn_std
from dffoct.io import write_image, write_pgm16
from dffoct.metrics import artifact_energy
from dffoct.simulate import MotionSpec, lung_like, simulate_stack, with_motion
from dffoct.svdfilter import filter_stack

parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
parser.add_argument("--size", type=int, default=128)
parser.add_argument("--frames", type=int, default=512)
parser.add_argument("--outdir", default="demo_output/01")
args = parser.parse_args()
out = Path(args.outdir)
out.mkdir(parents=True, exist_ok=True)

# Simulate the moving sample and its motion-free twin (same cells, same noise).
config, scene = lung_like(args.size, args.size, args.frames)
stack, truth = simulate_stack(config, scene, n_workers=4)
twin, _ = simulate_stack(config, with_motion(scene, MotionSpec()), n_workers=4)
print(f"stack {stack.width}x{stack.height}x{stack.frames}, "
      f"{truth.cell_mask().n_cells} cells, bulk motion {scene.bulk_motion.amplitude_nm:g} nm "
      f"at {scene.bulk_motion.frequency_hz:g} Hz")

# Filter.  The report keeps the evidence: ZCR of every temporal eigenvector,
# the D-ZCR series and the threshold it was compared with.
filtered, report = filter_stack(stack)
print(f"rejected eigenvectors: {report.rejected_indices}")
print(f"threshold {report.threshold_value:.2f}; first ZCR values {report.zcr[:8]}")
print(f"largest D-ZCR jumps: {np.sort(report.dzcr)[::-1][:4]}")

# How much did the static fibers lose, and did the cells survive?
raw = artifact_energy(dyn_std(stack), truth)
clean = artifact_energy(dyn_std(filtered), truth)
ref = artifact_energy(dyn_std(twin), truth)
print(f"static-pixel SD: {raw.static_mean:.3f} -> {clean.static_mean:.3f} "
      f"({raw.static_mean / clean.static_mean:.1f}x lower)")
print(f"motile-pixel SD: {clean.motile_mean:.3f} vs {ref.motile_mean:.3f} without motion "
      f"(ratio {clean.motile_mean / ref.motile_mean:.2f})")

# Previews for the eye; the .dstk files hold the exact values.
for name, img in (("sd_raw", dyn_std(stack)), ("sd_filtered", dyn_std(filtered))):
    write_image(img, out / f"{name}.dstk")
    write_image(img, out / f"{name}.pgm", format="pgm16")
write_pgm16(report.artifact_image, out / "removed_spatial_vectors.pgm")
print(f"images written to {out}/")
