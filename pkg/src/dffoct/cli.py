"""``dffoct`` command line: simulate, filter, dyn, snr, pipeline, rerun.

Every command writes a JSON manifest next to its outputs holding the
resolved configuration, the tool version, per-stage wall times and the
output paths.  ``dffoct rerun MANIFEST`` replays it; outputs are
byte-identical except for the wall-time fields of filter reports.

Exit codes: 0 success, 2 bad input or arguments, 3 memory budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .core import DynamicImage
from .dynamic import DynConfig, dynamic_image
from .io import FormatError, read_image, read_mask, read_stack, write_image, write_json, write_report, write_stack
from .metrics import snr_gain, snr_per_cell, write_gain_csv
from .simulate import SchemaError, load_sim_document, simulate_stack
from .svdfilter import FilterConfig, MemoryBudgetError, available_memory, filter_stack

log = logging.getLogger("dffoct")

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3
_METHODS = {"std": "std_dev", "cumsum": "cumsum_max"}


class UsageError(Exception):
    pass


# --- argument helpers --------------------------------------------------------

def _tile(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"tile must look like WxH, got {text!r}") from None
    if w < 2 or h < 2:
        raise argparse.ArgumentTypeError("tiles must be at least 2x2")
    return [w, h]


def _indices(text: str):
    try:
        return sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _max_candidates(text: str):
    if text.lower() in ("all", "none"):
        return None
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--max-candidates must be >= 1 or 'all'")
    return v


def _default_budget() -> int | None:
    avail = available_memory()
    return None if avail is None else int(avail * 0.75)


def _add_filter_flags(p):
    g = p.add_argument_group("SVD filter")
    g.add_argument("--threshold-mult", type=float, default=3.0,
                   help="D-ZCR outlier threshold in standard deviations (default 3)")
    g.add_argument("--max-candidates", type=_max_candidates, default=16,
                   help="only eigenvectors below this index may be rejected; 'all' scans every one (default 16)")
    g.add_argument("--manual-indices", type=_indices, default=None,
                   help="reject exactly these eigenvector indices, e.g. 0,1 (disables the detector)")
    g.add_argument("--tile", type=_tile, default=None, help="process in WxH tiles")
    g.add_argument("--workers", type=int, default=1, help="tiles decomposed in parallel")
    g.add_argument("--memory-budget", type=int, default=None,
                   help="working-memory limit in bytes (default: 75%% of available memory)")


def _add_dyn_flags(p, method=True):
    g = p.add_argument_group("dynamic image")
    if method:
        g.add_argument("--method", choices=sorted(_METHODS), default="std")
    g.add_argument("--tau", type=int, default=50, help="window length in frames (default 50)")
    g.add_argument("--stride", type=int, default=None, help="window stride (default: tau)")


def _filter_config(args) -> dict:
    budget = args.memory_budget if args.memory_budget is not None else _default_budget()
    tile = args.tile or [None, None]
    return {
        "threshold_multiplier": args.threshold_mult,
        "max_candidate_index": args.max_candidates,
        "detector": "manual" if args.manual_indices is not None else "dzcr_threshold",
        "manual_indices": args.manual_indices or [],
        "tile_width": tile[0],
        "tile_height": tile[1],
        "n_workers": args.workers,
        "memory_budget_bytes": budget,
    }


def _dyn_config(args, method=None) -> dict:
    return {"window_length": args.tau,
            "window_stride": args.stride if args.stride is not None else args.tau,
            "method": method or _METHODS[args.method]}


# --- stages ------------------------------------------------------------------
# Each run_* takes plain dicts (as stored in the manifest) so ``rerun`` can
# replay them without going through argparse.

def _stage(times: dict, name: str, t0: float):
    times[name] = round(time.perf_counter() - t0, 6)


def run_simulate(inputs, config, outputs):
    times = {}
    t0 = time.perf_counter()
    sim_config, scene = load_sim_document(config["document"], seed=config["seed"])
    stack, truth = simulate_stack(sim_config, scene, n_workers=config.get("workers", 1))
    _stage(times, "simulate", t0)
    write_stack(stack, outputs["stack"])
    truth.save(outputs["truth"])
    return times


def run_filter(inputs, config, outputs):
    times = {}
    t0 = time.perf_counter()
    stack = read_stack(inputs["stack"])
    filtered, report = filter_stack(stack, FilterConfig(**config))
    _stage(times, "filter", t0)
    write_stack(filtered, outputs["stack"])
    write_report(report, outputs["report"])
    log.info("rejected eigenvectors: %s", report.rejected_indices)
    return times


def _write_dyn(image: DynamicImage, path, preview=None):
    write_image(image, path)
    if preview:
        write_image(image, preview, format="pgm16")


def run_dyn(inputs, config, outputs):
    times = {}
    stack = read_stack(inputs["stack"])
    t0 = time.perf_counter()
    image = dynamic_image(stack, DynConfig(**config))
    _stage(times, "dyn", t0)
    _write_dyn(image, outputs["image"], outputs.get("preview"))
    return times


def _snr(image_a, image_b, mask, out_csv, out_json):
    a = snr_per_cell(image_a, mask)
    b = snr_per_cell(image_b, mask)
    gain = snr_gain(a, b)
    write_gain_csv(gain, out_csv)
    summary = {"image_a": a.to_dict(), "image_b": b.to_dict(),
               "mean_gain": gain.mean_gain, "n_cells": a.n_cells}
    write_json(summary, out_json)
    log.info("%d cells, mean SNR %.4g -> %.4g, mean gain %.4g",
             a.n_cells, a.mean_snr, b.mean_snr, gain.mean_gain)
    return gain


def run_snr(inputs, config, outputs):
    times = {}
    t0 = time.perf_counter()
    a, b = read_image(inputs["image_a"]), read_image(inputs["image_b"])
    mask = read_mask(inputs["mask"])
    for name, img in (("image_a", a), ("image_b", b)):
        if (img.width, img.height) != (mask.width, mask.height):
            raise UsageError(f"{name} is {img.width}x{img.height} but mask is {mask.width}x{mask.height}")
    _snr(a, b, mask, outputs["csv"], outputs["json"])
    _stage(times, "snr", t0)
    return times


def run_pipeline(inputs, config, outputs):
    times = {}
    t0 = time.perf_counter()
    stack = read_stack(inputs["stack"])
    mask = read_mask(inputs["mask"]) if inputs.get("mask") else None
    if mask is not None and (mask.width, mask.height) != (stack.width, stack.height):
        raise UsageError(f"mask is {mask.width}x{mask.height} but stack is {stack.width}x{stack.height}")
    _stage(times, "read", t0)

    t0 = time.perf_counter()
    filtered, report = filter_stack(stack, FilterConfig(**config["filter"]))
    _stage(times, "filter", t0)
    write_stack(filtered, outputs["filtered_stack"])
    write_report(report, outputs["report"])

    images = {}
    for method in ("std_dev", "cumsum_max"):
        t0 = time.perf_counter()
        images[method] = dynamic_image(filtered, DynConfig(**config["dyn"], method=method))
        _stage(times, f"dyn_{method}", t0)
        _write_dyn(images[method], outputs[f"dyn_{method}"], outputs.get(f"preview_{method}"))

    if mask is not None:
        t0 = time.perf_counter()
        _snr(images["std_dev"], images["cumsum_max"], mask, outputs["snr_csv"], outputs["snr_json"])
        _stage(times, "snr", t0)
    return times


RUNNERS = {"simulate": run_simulate, "filter": run_filter, "dyn": run_dyn,
           "snr": run_snr, "pipeline": run_pipeline}


# --- manifest ----------------------------------------------------------------

def _manifest_path(args, default: Path) -> Path:
    return Path(args.manifest) if getattr(args, "manifest", None) else default


def _execute(command, inputs, config, outputs, manifest_path):
    t0 = time.perf_counter()
    times = RUNNERS[command](inputs, config, outputs)
    times["total"] = round(time.perf_counter() - t0, 6)
    manifest = {
        "tool": "dffoct",
        "version": __version__,
        "command": command,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "config": config,
        "outputs": {k: str(v) for k, v in outputs.items() if v is not None},
        "stage_seconds": times,
    }
    write_json(manifest, manifest_path)
    return manifest


def _with_suffix(path, suffix):
    path = Path(path)
    return path.with_name(path.name + suffix)


def _relocate(outputs: dict, outdir: Path) -> dict:
    return {k: str(outdir / Path(v).name) for k, v in outputs.items()}


# --- subcommand handlers -----------------------------------------------------

def cmd_simulate(args):
    if (args.scene is None) == (args.template is None):
        raise UsageError("give exactly one of --scene or --template")
    if args.scene is not None:
        try:
            document = json.loads(Path(args.scene).read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"{args.scene}: invalid JSON ({e})") from None
    else:
        document = {"scene": {"template": args.template}}
    config = {"document": document, "seed": args.seed, "workers": args.workers}
    outputs = {"stack": args.out_stack, "truth": args.out_truth}
    inputs = {"scene": args.scene}
    return _execute("simulate", inputs, config, outputs,
                    _manifest_path(args, _with_suffix(args.out_stack, ".manifest.json")))


def cmd_filter(args):
    outputs = {"stack": args.out_stack, "report": args.report}
    return _execute("filter", {"stack": args.in_stack}, _filter_config(args), outputs,
                    _manifest_path(args, _with_suffix(args.out_stack, ".manifest.json")))


def cmd_dyn(args):
    outputs = {"image": args.out_image, "preview": args.preview}
    return _execute("dyn", {"stack": args.in_stack}, _dyn_config(args), outputs,
                    _manifest_path(args, _with_suffix(args.out_image, ".manifest.json")))


def cmd_snr(args):
    out_json = args.out_json or str(Path(args.out_csv).with_suffix(".json"))
    inputs = {"image_a": args.image_a, "image_b": args.image_b, "mask": args.mask}
    return _execute("snr", inputs, {}, {"csv": args.out_csv, "json": out_json},
                    _manifest_path(args, _with_suffix(args.out_csv, ".manifest.json")))


def cmd_pipeline(args):
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dyn = _dyn_config(args, method="cumsum_max")
    del dyn["method"]
    config = {"filter": _filter_config(args), "dyn": dyn}
    outputs = {
        "filtered_stack": outdir / "filtered.dstk",
        "report": outdir / "filter_report.json",
        "dyn_std_dev": outdir / "dyn_std.dstk",
        "dyn_cumsum_max": outdir / "dyn_cumsum.dstk",
    }
    if args.preview:
        outputs["preview_std_dev"] = outdir / "dyn_std.pgm"
        outputs["preview_cumsum_max"] = outdir / "dyn_cumsum.pgm"
    if args.mask:
        outputs["snr_csv"] = outdir / "snr.csv"
        outputs["snr_json"] = outdir / "snr.json"
    outputs = {k: str(v) for k, v in outputs.items()}
    inputs = {"stack": args.in_stack, "mask": args.mask}
    return _execute("pipeline", inputs, config, outputs,
                    _manifest_path(args, outdir / "manifest.json"))


def cmd_rerun(args):
    try:
        manifest = json.loads(Path(args.manifest_in).read_text())
        command = manifest["command"]
        inputs, config, outputs = manifest["inputs"], manifest["config"], manifest["outputs"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise UsageError(f"{args.manifest_in}: not a dffoct manifest ({e})") from None
    if command not in RUNNERS:
        raise UsageError(f"{args.manifest_in}: unknown command {command!r}")
    if args.outdir:
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        outputs = _relocate(outputs, outdir)
        default = outdir / Path(args.manifest_in).name
    else:
        default = Path(args.manifest_in)
    return _execute(command, inputs, config, outputs, _manifest_path(args, default))


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dffoct", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", help="manifest path (default: next to the main output)")

    p = sub.add_parser("simulate", help="generate a synthetic stack with ground truth")
    p.add_argument("--scene", help="scene JSON document")
    p.add_argument("--template", help="built-in scene: lung_like, macaque_like or liver_like")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("out_stack")
    p.add_argument("out_truth", help="ground-truth .npz")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="remove bulk-motion eigenvectors")
    p.add_argument("in_stack")
    p.add_argument("out_stack")
    p.add_argument("--report", required=True, help="FilterReport JSON output")
    _add_filter_flags(p)
    common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("dyn", help="compute a dynamic image")
    p.add_argument("in_stack")
    p.add_argument("out_image", help="dstk-2d output")
    _add_dyn_flags(p)
    p.add_argument("--preview", help="also write a min-max scaled 16-bit PGM here")
    common(p)
    p.set_defaults(func=cmd_dyn)

    p = sub.add_parser("snr", help="per-cell SNR of two dynamic images and their gain (b over a)")
    p.add_argument("image_a")
    p.add_argument("image_b")
    p.add_argument("mask", help="label mask (PGM or dstk-2d), 0 = background")
    p.add_argument("out_csv")
    p.add_argument("--out-json", help="summary JSON (default: out_csv with .json)")
    common(p)
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("pipeline", help="filter, then std and cumsum dynamic images, then optional SNR")
    p.add_argument("in_stack")
    p.add_argument("outdir")
    p.add_argument("--mask")
    p.add_argument("--preview", action="store_true", help="write PGM previews")
    _add_filter_flags(p)
    _add_dyn_flags(p, method=False)
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("manifest_in")
    p.add_argument("--outdir", help="write outputs here instead of their recorded paths")
    common(p)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except MemoryBudgetError as e:
        print(f"dffoct: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, SchemaError, FormatError, OSError, ValueError) as e:
        print(f"dffoct: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
