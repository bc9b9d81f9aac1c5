import csv
import json

import numpy as np
import pytest

from dffoct.cli import main
from dffoct.core import DynamicImage, Stack
from dffoct.dynamic import dyn_std
from dffoct.io import MaskImage, read_dstk, read_image, read_stack, write_image, write_mask, write_stack
from dffoct.metrics import artifact_energy
from dffoct.simulate import SimGroundTruth

MINIMAL = {
    "config": {"width": 8, "height": 8, "frames": 64},
    "scene": {"regions": [
        {"kind": "static_reflector", "r_s": 0.05, "shape": {"rect": [0, 0, 8, 2]}},
        {"kind": "motile", "r_s": 1e-3, "walk": {"std": 0.4}, "shape": {"disc": [4, 5, 2.5]}},
    ]},
}


@pytest.fixture
def scene_file(tmp_path):
    p = tmp_path / "scene.json"
    p.write_text(json.dumps(MINIMAL))
    return p


def test_simulate_minimal(tmp_path, scene_file):
    out = tmp_path / "a.dstk"
    assert main(["simulate", "--scene", str(scene_file), "--seed", "4", str(out), str(tmp_path / "a.npz")]) == 0
    header, _ = read_dstk(out)
    assert (header.width, header.height, header.frames) == (8, 8, 64)
    manifest = json.loads((tmp_path / "a.dstk.manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["config"]["seed"] == 4
    assert "simulate" in manifest["stage_seconds"]
    out2 = tmp_path / "b.dstk"
    main(["simulate", "--scene", str(scene_file), "--seed", "4", str(out2), str(tmp_path / "b.npz")])
    assert out.read_bytes() == out2.read_bytes()
    assert (tmp_path / "a.npz").read_bytes() == (tmp_path / "b.npz").read_bytes()


def test_simulate_schema_error_reports_path(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"config": {"width": -3}}))
    assert main(["simulate", "--scene", str(bad), str(tmp_path / "s.dstk"), str(tmp_path / "t.npz")]) == 2
    assert "$.config" in capsys.readouterr().err


def test_simulate_needs_one_scene_source(tmp_path, scene_file):
    args = [str(tmp_path / "s.dstk"), str(tmp_path / "t.npz")]
    assert main(["simulate", *args]) == 2
    assert main(["simulate", "--scene", str(scene_file), "--template", "lung_like", *args]) == 2


def test_simulate_lung_template_is_artifact_dominated(tmp_path):
    doc = tmp_path / "lung.json"
    doc.write_text(json.dumps({"config": {"width": 64, "height": 64, "frames": 200},
                               "scene": {"template": "lung_like"}}))
    s, t = tmp_path / "lung.dstk", tmp_path / "lung.npz"
    assert main(["simulate", "--scene", str(doc), str(s), str(t)]) == 0
    e = artifact_energy(dyn_std(read_stack(s)), SimGroundTruth.load(t))
    assert e.static_mean > 5 * e.motile_mean


@pytest.fixture
def sim(tmp_path, scene_file):
    s, t = tmp_path / "sim.dstk", tmp_path / "sim.npz"
    main(["simulate", "--scene", str(scene_file), str(s), str(t)])
    return s, t


def test_filter_clean_and_manual(tmp_path, sim):
    stack, _ = sim
    out, rep = tmp_path / "f.dstk", tmp_path / "f.json"
    assert main(["filter", str(stack), str(out), "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["rejected_indices"] == []
    assert main(["filter", str(stack), str(out), "--report", str(rep), "--manual-indices", "0,1"]) == 0
    r = json.loads(rep.read_text())
    assert r["detector"] == "manual" and r["rejected_indices"] == [0, 1]
    m = json.loads((tmp_path / "f.dstk.manifest.json").read_text())
    assert m["config"]["manual_indices"] == [0, 1]
    assert m["config"]["memory_budget_bytes"] > 0


def test_filter_missing_input(tmp_path, capsys):
    code = main(["filter", str(tmp_path / "nope.dstk"), str(tmp_path / "o.dstk"), "--report", str(tmp_path / "r")])
    assert code == 2
    assert "nope.dstk" in capsys.readouterr().err


def test_filter_memory_budget_exit_code(tmp_path, sim, capsys):
    code = main(["filter", str(sim[0]), str(tmp_path / "o.dstk"), "--report", str(tmp_path / "r.json"),
                 "--memory-budget", "1000"])
    assert code == 3
    assert "smaller tiles" in capsys.readouterr().err
    code = main(["filter", str(sim[0]), str(tmp_path / "o.dstk"), "--report", str(tmp_path / "r.json"),
                 "--memory-budget", "1000000", "--tile", "4x4"])
    assert code == 0


def test_filter_bad_flags(tmp_path, sim):
    with pytest.raises(SystemExit) as e:
        main(["filter", str(sim[0]), "o", "--report", "r", "--tile", "1x8"])
    assert e.value.code == 2


def test_dyn(tmp_path, sim):
    out = tmp_path / "d.dstk"
    assert main(["dyn", str(sim[0]), str(out), "--method", "cumsum", "--preview", str(tmp_path / "d.pgm")]) == 0
    m = json.loads((tmp_path / "d.dstk.manifest.json").read_text())
    assert m["config"] == {"window_length": 50, "window_stride": 50, "method": "cumsum_max"}
    assert read_image(out).width == 8
    assert (tmp_path / "d.pgm").read_bytes().startswith(b"P5")
    assert main(["dyn", str(sim[0]), str(out), "--tau", "65"]) == 2


def test_dyn_constant_stack(tmp_path):
    p = tmp_path / "c.dstk"
    write_stack(Stack(np.full((20, 3, 4), 7.0)), p)
    for method in ("std", "cumsum"):
        assert main(["dyn", str(p), str(tmp_path / "o.dstk"), "--method", method, "--tau", "10"]) == 0
        assert (read_image(tmp_path / "o.dstk").values == 0).all()


def _images_and_mask(tmp_path, factor=2.0):
    labels = np.zeros((6, 6), dtype=int)
    labels[:2, :2] = 1
    labels[3:, 3:] = 2
    write_mask(MaskImage(labels), tmp_path / "mask.pgm")
    a = np.where(labels > 0, 3.0, 1.0)
    write_image(DynamicImage(a), tmp_path / "a.dstk")
    write_image(DynamicImage(np.where(labels > 0, 3.0 * factor, 1.0)), tmp_path / "b.dstk")


def test_snr(tmp_path):
    _images_and_mask(tmp_path)
    out = tmp_path / "snr.csv"
    assert main(["snr", str(tmp_path / "a.dstk"), str(tmp_path / "b.dstk"), str(tmp_path / "mask.pgm"),
                 str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [float(r["gain"]) for r in rows] == [2.0, 2.0]
    assert json.loads((tmp_path / "snr.json").read_text())["mean_gain"] == 2.0
    assert main(["snr", str(tmp_path / "a.dstk"), str(tmp_path / "a.dstk"), str(tmp_path / "mask.pgm"),
                 str(out)]) == 0
    assert all(float(r["gain"]) == 1.0 for r in csv.DictReader(open(out)))


def test_snr_dimension_mismatch(tmp_path):
    _images_and_mask(tmp_path)
    write_image(DynamicImage(np.ones((5, 6))), tmp_path / "small.dstk")
    assert main(["snr", str(tmp_path / "a.dstk"), str(tmp_path / "small.dstk"), str(tmp_path / "mask.pgm"),
                 str(tmp_path / "o.csv")]) == 2


def test_cumsum_beats_std_on_biased_walk_scene(tmp_path):
    doc = tmp_path / "m.json"
    doc.write_text(json.dumps({"config": {"width": 64, "height": 64, "frames": 300},
                               "scene": {"template": "macaque_like"}}))
    s, t = tmp_path / "m.dstk", tmp_path / "m.npz"
    main(["simulate", "--scene", str(doc), str(s), str(t)])
    write_mask(SimGroundTruth.load(t).cell_mask(), tmp_path / "mask.pgm")
    main(["dyn", str(s), str(tmp_path / "std.dstk"), "--method", "std"])
    main(["dyn", str(s), str(tmp_path / "cs.dstk"), "--method", "cumsum", "--tau", "50"])
    assert main(["snr", str(tmp_path / "std.dstk"), str(tmp_path / "cs.dstk"), str(tmp_path / "mask.pgm"),
                 str(tmp_path / "g.csv")]) == 0
    summary = json.loads((tmp_path / "g.json").read_text())
    assert summary["image_b"]["mean_snr"] > summary["image_a"]["mean_snr"]
    assert summary["mean_gain"] >= 1.5


def test_pipeline_clean_and_rerun(tmp_path, sim):
    stack, truth = sim
    write_mask(SimGroundTruth.load(truth).cell_mask(), tmp_path / "mask.pgm")
    out = tmp_path / "run"
    assert main(["pipeline", str(stack), str(out), "--mask", str(tmp_path / "mask.pgm"), "--preview"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stage_seconds"]) >= {"filter", "dyn_std_dev", "dyn_cumsum_max", "snr", "total"}
    assert json.loads((out / "filter_report.json").read_text())["rejected_indices"] == []
    for name in ("filtered.dstk", "dyn_std.dstk", "dyn_cumsum.dstk", "dyn_std.pgm", "snr.csv", "snr.json"):
        assert (out / name).exists()
    again = tmp_path / "again"
    assert main(["rerun", str(out / "manifest.json"), "--outdir", str(again)]) == 0
    for name in ("filtered.dstk", "dyn_std.dstk", "dyn_cumsum.dstk", "snr.csv"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_rerun_rejects_garbage(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{}")
    assert main(["rerun", str(p)]) == 2
    assert main(["rerun", str(tmp_path / "missing.json")]) == 2
