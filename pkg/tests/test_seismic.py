import math

import numpy as np
import pytest

from fracinv.geometry import strike_dip_from_normal
from fracinv.seismic import (
    MicroseismicCatalog,
    focal_angle_histograms,
    fold_dip,
    fold_strike,
    generate_catalog,
    read_catalog,
    seismogenic_region,
    write_catalog,
)
from fracinv.geometry import polygon_area


def test_counts_follow_area_weights(truth_realization):
    cat = generate_catalog(truth_realization, 332, 5.0, 5.0, seed=0)
    areas = np.array([f.area for f in truth_realization.fractures])
    p = areas / areas.sum()
    counts = np.bincount(cat.host, minlength=3)
    sd = np.sqrt(332 * p * (1 - p))
    assert np.all(np.abs(counts - 332 * p) <= 4 * sd)


def test_noise_free_events_lie_on_host_planes(truth_realization):
    cat = generate_catalog(truth_realization, 200, 0.0, 0.0, seed=1)
    for loc, h, foc in zip(cat.locations, cat.host, cat.focal):
        f = truth_realization.fractures[h].fracture
        assert abs((loc - np.array(f.center)) @ f.normal) < 1e-3
        sd = strike_dip_from_normal(f.normal)
        assert tuple(foc) == pytest.approx((sd.strike, sd.dip))


def test_event_radius_confines_events(truth_realization):
    cat = generate_catalog(truth_realization, 300, 0.0, 0.0, seed=2, event_radius=20.0)
    for loc, h in zip(cat.locations, cat.host):
        c = np.array(truth_realization.fractures[h].fracture.center)
        assert np.linalg.norm(loc - c) <= 20.0 + 1e-9


def test_patch_area_is_disk_clipped_by_box(truth_realization):
    disk = 0.5 * 64 * 400 * math.sin(2 * math.pi / 64)     # 64-gon of radius 20
    areas = [polygon_area(seismogenic_region(f.fracture, f.polygon, 20.0))
             for f in truth_realization.fractures]
    # the two shallow centres sit within 20 m of the top face; the deep one does not
    assert areas[0] < disk and areas[1] < disk
    assert areas[2] == pytest.approx(disk, rel=1e-9)


def test_folding():
    assert fold_strike(-5.0) == pytest.approx(175.0)
    assert fold_strike(185.0) == pytest.approx(5.0)
    assert fold_dip(-3.0) == pytest.approx(3.0)
    assert fold_dip(183.0) == pytest.approx(177.0)


def test_histograms_normalised(truth_realization):
    cat = generate_catalog(truth_realization, 332, seed=0)
    s, d = focal_angle_histograms(cat)
    assert s.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert d.masses.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(cat.focal[:, 0] < 180) and np.all(cat.focal[:, 1] <= 180)


def test_catalog_round_trip(tmp_path, truth_realization):
    cat = generate_catalog(truth_realization, 50, seed=3)
    p = tmp_path / "cat.csv"
    write_catalog(cat, p)
    assert p.read_text().splitlines()[0] == "x,y,z,strike,dip"
    back = read_catalog(p)
    np.testing.assert_allclose(back.locations, cat.locations, rtol=1e-8)
    write_catalog(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == p.read_bytes()


def test_bad_catalog_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_catalog(p)


def test_catalog_validation():
    with pytest.raises(ValueError):
        MicroseismicCatalog(np.empty((0, 3)), np.empty((0, 2)), np.empty(0, int))
    with pytest.raises(ValueError):
        generate_catalog(None, 0)
