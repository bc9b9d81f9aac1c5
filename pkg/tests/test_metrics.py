import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dffoct.core import DynamicImage
from dffoct.io import MaskImage
from dffoct.metrics import (
    EmptyRegionError, artifact_energy, snr_gain, snr_per_cell, write_gain_csv, write_snr_json,
)
from dffoct.simulate import MOTILE, STATIC, SimGroundTruth


def _mask():
    labels = np.zeros((6, 6), dtype=int)
    labels[1:3, 1:3] = 1
    labels[4:, 3:] = 2
    return MaskImage(labels)


def test_uniform_image_has_unit_snr():
    r = snr_per_cell(DynamicImage(np.full((6, 6), 3.0)), _mask())
    assert r.n_cells == 2 and r.mean_snr == pytest.approx(1.0)
    assert all(s == pytest.approx(1.0) for _, s in r.per_cell_snr)


def test_cells_at_twice_background():
    m = _mask()
    img = np.where(m.labels > 0, 4.0, 2.0)
    r = snr_per_cell(DynamicImage(img), m)
    assert [s for _, s in r.per_cell_snr] == [2.0, 2.0]
    assert r.background_mean == 2.0


def test_matches_brute_force(rng):
    img = rng.random((20, 30))
    labels = rng.integers(0, 7, size=(20, 30))
    r = snr_per_cell(DynamicImage(img), MaskImage(labels))
    img32 = DynamicImage(img).values.astype(np.float64)
    bg = img32[labels == 0].mean()
    for cell, snr in r.per_cell_snr:
        assert snr == pytest.approx(img32[labels == cell].mean() / bg, rel=1e-6)
    assert r.n_cells == len(np.unique(labels[labels > 0]))


def test_empty_background_rejected():
    with pytest.raises(EmptyRegionError) as e:
        snr_per_cell(DynamicImage(np.ones((2, 2))), MaskImage(np.ones((2, 2), dtype=int)))
    assert e.value.label == 0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        snr_per_cell(DynamicImage(np.ones((3, 3))), _mask())


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
def test_snr_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    img = rng.random((6, 6)) + 0.1
    a = snr_per_cell(DynamicImage(img), _mask())
    b = snr_per_cell(DynamicImage(img * c), _mask())
    np.testing.assert_allclose(a.values, b.values, rtol=1e-5)


def test_gain_identity_and_doubling():
    m = _mask()
    base = np.where(m.labels > 0, 3.0, 1.0)
    a = snr_per_cell(DynamicImage(base), m)
    assert (snr_gain(a, a).gains == 1.0).all()
    doubled = np.where(m.labels > 0, 6.0, 1.0)
    assert snr_gain(a, snr_per_cell(DynamicImage(doubled), m)).mean_gain == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_gain_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    a = snr_per_cell(DynamicImage(rng.random((6, 6)) + 0.1), _mask())
    b = snr_per_cell(DynamicImage(rng.random((6, 6)) + 0.1), _mask())
    np.testing.assert_allclose(snr_gain(a, b).gains * snr_gain(b, a).gains, 1.0, rtol=1e-12)


def test_gain_requires_same_cells():
    a = snr_per_cell(DynamicImage(np.ones((6, 6))), _mask())
    labels = _mask().labels.copy()
    labels[labels == 2] = 5
    b = snr_per_cell(DynamicImage(np.ones((6, 6))), MaskImage(labels))
    with pytest.raises(ValueError):
        snr_gain(a, b)


def _truth():
    label = np.zeros((4, 4), dtype=np.int8)
    label[0] = STATIC
    label[1] = MOTILE
    return SimGroundTruth(label, np.zeros((4, 4)), np.zeros(3), np.zeros((4, 4), dtype=np.int32))


def test_artifact_energy():
    t = _truth()
    assert artifact_energy(DynamicImage(np.zeros((4, 4))), t).as_tuple() == (0.0, 0.0, 0.0)
    ind = (t.label_map == MOTILE).astype(float)
    assert artifact_energy(DynamicImage(ind), t).as_tuple() == (0.0, 1.0, 0.0)


def test_artifact_energy_absent_class():
    t = _truth()
    label = np.full((4, 4), MOTILE, dtype=np.int8)
    t = SimGroundTruth(label, t.motility_map, t.z_trace_nm, t.region_map)
    e = artifact_energy(DynamicImage(np.ones((4, 4))), t)
    assert e.static_mean is None and e.background_mean is None and e.motile_mean == 1.0


def test_writers(tmp_path):
    m = _mask()
    a = snr_per_cell(DynamicImage(np.where(m.labels > 0, 3.0, 1.0)), m)
    b = snr_per_cell(DynamicImage(np.where(m.labels > 0, 6.0, 1.0)), m)
    g = snr_gain(a, b)
    write_gain_csv(g, tmp_path / "g.csv")
    rows = list(csv.reader(open(tmp_path / "g.csv")))
    assert rows[0] == ["cell_id", "snr_a", "snr_b", "gain"]
    assert [float(x) for x in rows[1][1:]] == [3.0, 6.0, 2.0]
    write_snr_json(a, tmp_path / "a.json", gain=g)
    assert '"mean_gain": 2.0' in (tmp_path / "a.json").read_text()
