import numpy as np
import pytest

from dffoct.dynamic import dyn_std
from dffoct.simulate import (
    MOTILE, STATIC, MotionSpec, Region, SceneSpec, SchemaError, SimConfig, SimGroundTruth, WalkSpec,
    lung_like, liver_like, load_sim_document, macaque_like, phase_from_displacement, simulate_stack, with_motion,
)


def test_phase_from_displacement():
    assert phase_from_displacement(0.0, 660.0) == 0.0
    assert phase_from_displacement(330.0, 660.0) == pytest.approx(2 * np.pi)
    assert phase_from_displacement(165.0, 660.0) == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        phase_from_displacement(1.0, 0.0)


@pytest.mark.parametrize("kw", [dict(frames=1), dict(width=0), dict(r_ref=0.0), dict(quantum_efficiency=1.5),
                                dict(camera_noise_std=-1.0), dict(wavelength_nm=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_walk_and_motion_validation():
    with pytest.raises(ValueError):
        WalkSpec(0.0)
    with pytest.raises(ValueError):
        WalkSpec(1.0, drift=float("inf"))
    assert WalkSpec(1.0, 0.2).kind == "biased_gaussian"
    with pytest.raises(ValueError):
        MotionSpec("trace")
    with pytest.raises(ValueError):
        MotionSpec("trace", z_nm=(1.0, 2.0)).trace(3, 150.0)


def _static_scene(cfg, r_s=0.05, motion=None):
    px = np.arange(cfg.width * cfg.height // 2)
    return SceneSpec((Region(px, "static_reflector", r_s=r_s),), motion or MotionSpec())


def test_static_noiseless_scene_is_constant():
    cfg = SimConfig(8, 8, 32, camera_noise_std=0.0)
    stack, truth = simulate_stack(cfg, _static_scene(cfg))
    assert (np.ptp(stack.data, axis=0) == 0).all()
    assert (truth.label_map.ravel()[:32] == STATIC).all()


def test_quarter_wave_sinusoid_swing():
    cfg = SimConfig(4, 4, 300, camera_noise_std=0.0)
    r_s = 0.05
    # amplitude lambda/4 sweeps the phase over +-pi, a full cosine period
    motion = MotionSpec("sinusoid", amplitude_nm=cfg.wavelength_nm / 4, frequency_hz=1.0)
    stack, _ = simulate_stack(cfg, _static_scene(cfg, r_s, motion))
    swing = np.ptp(stack.data[:, 0, 0])
    expected = 4 * cfg.gain * np.sqrt(r_s * cfg.r_ref)
    assert swing == pytest.approx(expected, rel=1e-3)


def test_intensity_non_negative_without_noise():
    cfg, scene = lung_like(32, 32, 64, camera_noise_std=0.0,
                           motion=MotionSpec("sinusoid", amplitude_nm=200, frequency_hz=3))
    stack, _ = simulate_stack(cfg, scene)
    assert stack.data.min() >= 0


def test_seed_determinism_and_parallel_rows():
    cfg, scene = lung_like(32, 24, 40)
    a, ta = simulate_stack(cfg, scene)
    b, _ = simulate_stack(cfg, scene, n_workers=3)
    assert a.data.tobytes() == b.data.tobytes()
    c, _ = simulate_stack(SimConfig(**{**cfg.__dict__, "rng_seed": 1}), scene)
    assert a.data.tobytes() != c.data.tobytes()


def test_region_errors():
    cfg = SimConfig(4, 4, 8)
    with pytest.raises(ValueError, match="outside"):
        simulate_stack(cfg, SceneSpec((Region([16], "static_reflector", 0.1),)))
    with pytest.raises(ValueError, match="overlap"):
        simulate_stack(cfg, SceneSpec((Region([1, 2], "static_reflector", 0.1),
                                       Region([2, 3], "static_reflector", 0.1))))
    with pytest.raises(ValueError):
        Region([0], "motile", 0.1)


def test_dynamic_semantics_without_motion():
    cfg = SimConfig(32, 32, 200, camera_noise_std=0.3)
    n = cfg.width * cfg.height
    scene = SceneSpec((Region(np.arange(0, n // 3), "static_reflector", r_s=0.05),
                       Region(np.arange(n // 3, 2 * n // 3), "motile", r_s=1e-3, walk=WalkSpec(0.5))))
    stack, truth = simulate_stack(cfg, scene)
    sd = dyn_std(stack).values
    static = sd[truth.label_map == STATIC].mean()
    motile = sd[truth.label_map == MOTILE].mean()
    assert static < 3 * cfg.camera_noise_std
    assert motile > 5 * static


def test_artifact_scales_with_sqrt_reflectivity():
    cfg = SimConfig(100, 10, 200, camera_noise_std=0.1)
    r = np.array([0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0])
    # one row per reflectivity so the random static phases average out
    regions = tuple(Region(np.arange(i * 100, (i + 1) * 100), "static_reflector", r_s=float(v))
                    for i, v in enumerate(r))
    scene = SceneSpec(regions, MotionSpec("sinusoid", amplitude_nm=100, frequency_hz=5))
    stack, _ = simulate_stack(cfg, scene)
    level = dyn_std(stack).values.mean(axis=1)
    assert np.corrcoef(np.sqrt(r), level)[0, 1] > 0.99


def test_templates():
    for fn in (lung_like, macaque_like, liver_like):
        cfg, scene = fn(64, 64, 16)
        _, truth = simulate_stack(cfg, scene)
        mask = truth.cell_mask()
        assert mask.n_cells > 5
        assert (mask.labels[truth.label_map != MOTILE] == 0).all()
    assert liver_like()[1].bulk_motion.kind == "sinusoid"
    assert lung_like()[1].bulk_motion.kind == "sinusoid"
    assert lung_like(motion=MotionSpec())[1].bulk_motion.kind == "none"


def test_with_motion_keeps_regions():
    _, scene = lung_like(32, 32, 8)
    moved = with_motion(scene, MotionSpec("sinusoid", amplitude_nm=10, frequency_hz=1))
    assert moved.regions is scene.regions and moved.bulk_motion.kind == "sinusoid"


def test_ground_truth_round_trip(tmp_path):
    cfg, scene = macaque_like(32, 32, 8)
    _, truth = simulate_stack(cfg, scene)
    truth.save(tmp_path / "t.npz")
    back = SimGroundTruth.load(tmp_path / "t.npz")
    np.testing.assert_array_equal(back.label_map, truth.label_map)
    np.testing.assert_array_equal(back.cell_mask().labels, truth.cell_mask().labels)


def test_document_regions():
    doc = {
        "config": {"width": 8, "height": 8, "frames": 16, "camera_noise_std": 0.0},
        "scene": {
            "regions": [
                {"kind": "static_reflector", "r_s": 0.05, "shape": {"rect": [0, 0, 4, 8]}},
                {"kind": "motile", "r_s": 1e-4, "walk": {"kind": "biased_gaussian", "std": 0.1, "drift": 0.05},
                 "shape": {"disc": [6, 4, 1.5]}},
                {"kind": "motile", "r_s": 1e-4, "walk": {"std": 0.3}, "shape": {"pixels": [[7, 0], [7, 1]]}},
            ],
            "bulk_motion": {"kind": "sinusoid", "amplitude_nm": 50, "frequency_hz": 5},
        },
    }
    cfg, scene = load_sim_document(doc, seed=9)
    assert cfg.rng_seed == 9 and len(scene.regions) == 3
    _, truth = simulate_stack(cfg, scene)
    assert truth.cell_mask().n_cells == 2


@pytest.mark.parametrize("doc, path", [
    ({"config": {"width": "8"}}, "$.config.width"),
    ({"config": {"bogus": 1}}, "$.config.bogus"),
    ({"scene": {"template": "kidney"}}, "$.scene.template"),
    ({"scene": {"regions": [{"kind": "cloud", "shape": {"rect": [0, 0, 1, 1]}}]}}, "$.scene.regions[0].kind"),
    ({"scene": {"regions": [{"kind": "motile", "r_s": 0.1, "shape": {"rect": [0, 0, 1, 1]}}]}},
     "$.scene.regions[0].walk"),
    ({"scene": {"regions": [{"kind": "static_reflector", "r_s": 0.1, "shape": {"disc": [1, 1]}}]}},
     "$.scene.regions[0].shape.disc"),
    ({"scene": {"bulk_motion": {"kind": "sinusoid", "frequency_hz": 5}}}, "$.scene.bulk_motion.amplitude_nm"),
    ({"config": {"frames": 4}, "scene": {"bulk_motion": {"kind": "trace", "z_nm": [1, 2]}}},
     "$.scene.bulk_motion.z_nm"),
    ([], "$"),
])
def test_schema_errors_carry_json_path(doc, path):
    with pytest.raises(SchemaError) as e:
        load_sim_document(doc)
    assert e.value.path == path


def test_template_document():
    cfg, scene = load_sim_document({"config": {"width": 48, "height": 40, "frames": 20},
                                    "scene": {"template": "lung_like"}}, seed=3)
    assert (cfg.width, cfg.height, cfg.frames, cfg.rng_seed) == (48, 40, 20, 3)
    assert len(scene.regions) > 10
