import math

import numpy as np
import pytest

from fracinv.dfn import (
    Case1,
    Case2,
    Case3,
    Case4,
    FluidProperties,
    FractureSample,
    NonPositiveLength,
    apply_case,
    build_realization,
)
from fracinv.geometry import AxisBox, polygon_area

from conftest import DOMAIN, TRUTH_ASPECTS, truth_samples


def test_case1_passes_values_through():
    assert apply_case(Case1(1e-5, 1e-12), 100.0) == (1e-5, 1e-12)


@pytest.mark.parametrize("b, k_pub", [(5.3222e-6, 2.361e-12), (4.6028e-6, 1.765e-12),
                                        (3.585e-6, 1.071e-12)])
def test_cubic_law_permeability_matches_published_pairs(b, k_pub):
    # a zero-spread Case 2 draw at log10(b) reproduces exactly b
    rng = np.random.default_rng(0)
    bb, k = apply_case(Case2(math.log10(b), 1e-300), 100.0, rng)
    assert bb == pytest.approx(b, rel=1e-12)
    assert k == pytest.approx(k_pub, rel=1e-3)


def test_case2_log_aperture_statistics():
    rng = np.random.default_rng(1)
    x = np.log10([apply_case(Case2(-5.0, 0.75), 100.0, rng)[0] for _ in range(4000)])
    assert x.mean() == pytest.approx(-5.0, abs=0.05)
    assert x.std() == pytest.approx(0.75, abs=0.03)


# minor and per-fracture major lengths of the published best samples
PUB_C3 = (245.98, (296.24, 300.48, 306.56), (4.2092e-5, 4.2256e-5, 4.2454e-5))
PUB_C4 = (250.64, (272.64, 289.3, 303.84), (2.596e-3, 2.722e-3, 2.832e-3))


def test_case3_reproduces_published_apertures():
    minor, majors, published = PUB_C3
    for major, b_pub in zip(majors, published):
        b, k = apply_case(Case3(1.6e-9, 0.75), 0.5 * (minor + major))
        assert b == pytest.approx(b_pub, rel=0.05)
        assert k == pytest.approx(b * b / 12.0)


def test_case4_first_fracture_reproduces_published_aperture():
    minor, majors, published = PUB_C4
    assert apply_case(Case4(5e-5, 0.804), 0.5 * (minor + majors[0]))[0] == pytest.approx(published[0], rel=0.05)


def test_case3_hand_value():
    l_mean = 271.11
    sig = 1.6e-9 * (0.5 * l_mean) ** 0.75
    b_hand = (12 * sig * 8.94e-4 / (997 * 9.8)) ** (1 / 3)
    assert apply_case(Case3(1.6e-9, 0.75), l_mean)[0] == pytest.approx(b_hand, rel=1e-12)
    assert b_hand == pytest.approx(4.12e-5, rel=0.01)


def test_case4_hand_value():
    assert apply_case(Case4(5e-5, 0.804), 261.64)[0] == pytest.approx(2.52e-3, rel=0.01)


def test_bad_inputs():
    with pytest.raises(NonPositiveLength):
        apply_case(Case3(1.6e-9, 0.75), 0.0)
    with pytest.raises(ValueError):
        apply_case(Case1(-1.0, 1e-12), 10.0)
    with pytest.raises(ValueError):
        apply_case(Case2(-5, 0.7), 10.0)          # no generator
    with pytest.raises(ValueError):
        FluidProperties(density=0)


def test_mean_lengths_of_example_network(truth_realization):
    means = [f.fracture.mean_length for f in truth_realization.fractures]
    assert means == pytest.approx([262.5, 275.0, 281.25])


def test_realization_clips_to_domain(truth_realization):
    assert len(truth_realization) == 3
    for f in truth_realization.fractures:
        assert np.all(f.polygon >= -100 - 1e-9) and np.all(f.polygon <= 100 + 1e-9)
        assert 0 < f.area < math.pi * f.fracture.minor_radius * f.fracture.major_radius
        assert f.area == pytest.approx(polygon_area(f.polygon))


def test_center_outside_domain_rejected():
    s = FractureSample(0.0, 45.0, 10.0, 1.0, (500.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        build_realization([s], Case1(1e-5, 1e-12), DOMAIN)


def test_fracture_larger_than_box_is_clipped_to_section():
    box = AxisBox((0, 0, 0), (1, 1, 1))
    r = build_realization([FractureSample(0.0, 0.0, 5.0, 1.0, (0.5, 0.5, 0.5))], Case1(1e-5, 1e-12), box)
    assert r.fractures[0].area == pytest.approx(1.0)


def test_case2_draws_are_per_fracture_and_seeded():
    s = truth_samples()
    a = build_realization(s, Case2(-5, 0.75), DOMAIN, seed=3)
    b = build_realization(s, Case2(-5, 0.75), DOMAIN, seed=3)
    c = build_realization(s, Case2(-5, 0.75), DOMAIN, seed=4)
    ap = [f.aperture for f in a.fractures]
    assert ap == [f.aperture for f in b.fractures]
    assert ap != [f.aperture for f in c.fractures]
    assert len(set(ap)) == 3


def test_aspects_recorded(truth_realization):
    assert [f.fracture.aspect_ratio for f in truth_realization.fractures] == TRUTH_ASPECTS
