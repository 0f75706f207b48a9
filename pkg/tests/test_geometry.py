import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfhom.errors import GeometryError, PackingInfeasibleError
from perfhom.geometry import (Cavity, DomainSpec, Perforation, StarProfile,
                              generate_perforation, star_shape, unit_disk_shape,
                              validate_a1)

RADII = (0.5, 1.0, 1.5)


def test_generation_respects_guard_distances():
    p = generate_perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII, "fill", seed=7)
    assert len(p.cavities) >= 1
    c = p.centers()
    d = np.sqrt(((c[:, None] - c[None, :]) ** 2).sum(-1))
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 0.3               # 2 * R3 * eps, exact by construction
    assert p.domain.boundary_distance(c).min() >= 0.15


def test_generation_deterministic():
    a = generate_perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII, "fill", seed=7)
    b = generate_perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII, "fill", seed=7)
    assert a.centers().tolist() == b.centers().tolist()
    c = generate_perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII, "fill", seed=8)
    assert a.centers().tolist() != c.centers().tolist()


def test_packing_bound_error():
    # floor(1 / (pi * 0.75^2)) = 0 guard balls fit, so asking for 10 must fail
    assert math.floor(1.0 / (math.pi * 0.75 ** 2)) == 0
    with pytest.raises(PackingInfeasibleError):
        generate_perforation(DomainSpec.unit_square(), 0.5, 1.0, RADII, 10, seed=1)


def test_target_count_exact():
    p = generate_perforation(DomainSpec.unit_square(), 0.05, 0.5, RADII, 12, seed=2)
    assert len(p.cavities) == 12


def test_validate_clean_on_generated(small_perforation):
    report = validate_a1(small_perforation)
    assert not report.violations


def test_validate_reports_guard_overlap():
    d = 1.9 * 1.5 * 0.1                      # 1.9 * R3 * eps < 2 * R3 * eps
    p = Perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII,
                    (Cavity((0.4, 0.5), unit_disk_shape()),
                     Cavity((0.4 + d, 0.5), unit_disk_shape())))
    report = validate_a1(p)
    assert any("guard-ball overlap (k=0,j=1)" in v for v in report.violations)


def test_validate_reports_boundary_clearance():
    p = Perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII,
                    (Cavity((0.5 * 1.5 * 0.1, 0.5), unit_disk_shape()),))
    report = validate_a1(p)
    assert any("boundary clearance" in v for v in report.violations)


def test_validate_reports_bad_eta():
    with pytest.raises(GeometryError):
        Perforation(DomainSpec.unit_square(), 0.1, 1.5, RADII, ())


def test_scaled_cavity_membership_disk():
    p = Perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII,
                    (Cavity((0.5, 0.5), unit_disk_shape()),))
    region = p.scaled_cavity(0)
    assert region.membership(np.array([[0.52, 0.5]]))[0]      # 0.02 < 0.05
    assert not region.membership(np.array([[0.56, 0.5]]))[0]  # 0.06 > 0.05


def test_scaled_cavity_membership_star():
    shape = star_shape((0.8, 0.0, 0.0, 0.1))          # rho(0) = 0.9
    p = Perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII,
                    (Cavity((0.5, 0.5), shape),))
    region = p.scaled_cavity(0)
    r = 0.9 * p.scale
    assert region.membership(np.array([[0.5 + r, 0.5]]))[0]
    assert not region.membership(np.array([[0.5 + 1.01 * r, 0.5]]))[0]


def test_scaled_cavity_index_error(small_perforation):
    with pytest.raises(IndexError):
        small_perforation.scaled_cavity(len(small_perforation.cavities))


def test_boundary_polygon_on_exact_boundary():
    shape = star_shape((0.8, 0.0, 0.0, 0.1))
    p = Perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII,
                    (Cavity((0.5, 0.5), shape),))
    poly = p.scaled_cavity(0).boundary_polygon(128)
    r = np.hypot(poly[:, 0] - 0.5, poly[:, 1] - 0.5)
    theta = np.arctan2(poly[:, 1] - 0.5, poly[:, 0] - 0.5)
    assert np.allclose(r, shape.radial_profile(theta) * p.scale, rtol=1e-12)


def test_surface_measure_bound():
    # scaled boundary length <= 2 pi R2 (1 + sup|rho'|) * (eps*eta)^(d-1)
    for shape in (unit_disk_shape(), star_shape((0.8, 0.0, 0.0, 0.1))):
        scale = 0.1 * 0.5
        length = shape.perimeter() * scale
        bound = 2 * math.pi * shape.outer_radius * (1.0 + shape.deriv_bound()) * scale
        assert length <= bound * (1 + 1e-12)


def test_json_roundtrip(small_perforation):
    text = small_perforation.to_json()
    q = Perforation.from_json(text)
    assert q.epsilon == small_perforation.epsilon
    assert q.eta == small_perforation.eta
    assert q.radii == small_perforation.radii
    assert np.allclose(q.centers(), small_perforation.centers())
    doc = json.loads(text)
    assert set(doc) == {"domain", "epsilon", "eta", "radii", "cavities"}
    assert set(doc["cavities"][0]) == {"center", "shape"}


def test_json_star_roundtrip():
    p = generate_perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII, "fill",
                             seed=3, shapes=("star",))
    q = Perforation.from_json(p.to_json())
    theta = np.linspace(0, 2 * math.pi, 64)
    for ca, cb in zip(p.cavities, q.cavities):
        assert np.allclose(ca.shape.radius_at(theta), cb.shape.radius_at(theta),
                           rtol=1e-12)


def test_star_profile_rotation_and_fit():
    prof = StarProfile((0.8, 0.0, 0.0, 0.1), (0.0, 0.0, 0.0, 0.0))
    rot = prof.rotated(0.3)
    theta = np.linspace(0, 2 * math.pi, 50)
    assert np.allclose(rot(theta), prof(theta - 0.3), atol=1e-12)
    fit = StarProfile.from_callable(lambda t: 0.8 + 0.1 * np.cos(3 * t))
    assert np.allclose(fit(theta), prof(theta), atol=1e-10)


def test_disk_domain_generation():
    p = generate_perforation(DomainSpec.disk(radius=1.0), 0.1, 0.5, RADII, "fill", seed=5)
    assert len(p.cavities) >= 1
    assert p.domain.boundary_distance(p.centers()).min() >= 0.15
    assert not validate_a1(p).violations


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000),
       eps=st.sampled_from((0.05, 0.08, 0.1)),
       eta=st.sampled_from((0.25, 0.5, 1.0)),
       shapes=st.sampled_from((("unit_disk",), ("star",), ("unit_disk", "star"))))
def test_generate_then_validate_property(seed, eps, eta, shapes):
    p = generate_perforation(DomainSpec.unit_square(), eps, eta, RADII, "fill",
                             seed=seed, shapes=shapes)
    assert not validate_a1(p).violations


def test_region_altering_requests_fail_loudly():
    with pytest.raises(GeometryError):
        generate_perforation(DomainSpec.unit_square(), 0.1, 0.5, (1.0, 0.9, 1.5), "fill", 0)
    with pytest.raises(GeometryError):
        DomainSpec.rectangle(1.0, 0.0, 0.0, 1.0)
