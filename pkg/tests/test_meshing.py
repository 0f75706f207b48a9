import math

import numpy as np
import pytest

from perfhom.errors import MeshingError, TransferError
from perfhom.geometry import Cavity, DomainSpec, Perforation, star_shape, unit_disk_shape
from perfhom.meshing import (DiscreteFunction, mesh_perforated, mesh_unperforated,
                             read_mesh, transfer, write_mesh)

RADII = (0.5, 1.0, 1.5)


def single_cavity(center=(0.5, 0.5), eps=0.1, eta=0.5, shape=None, radii=RADII,
                  domain=None):
    return Perforation(domain or DomainSpec.unit_square(), eps, eta, radii,
                       (Cavity(center, shape or unit_disk_shape()),))


def boundary_length(mesh, tag=None):
    sel = slice(None) if tag is None else mesh.boundary_tags == tag
    e = mesh.boundary_edges[sel]
    return np.hypot(*(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]]).T).sum()


# ---------------------------------------------------------------------------
# perforated meshes
# ---------------------------------------------------------------------------

def test_cavity_boundary_resolved():
    p = single_cavity()                       # scaled radius 0.05
    m = mesh_perforated(p, 0.02)
    cav_vertices = np.unique(m.boundary_edges[m.boundary_tags == 1])
    r = np.hypot(m.vertices[cav_vertices, 0] - 0.5, m.vertices[cav_vertices, 1] - 0.5)
    assert np.all(np.abs(r - 0.05) <= 1e-9)
    assert m.cavity_edge_count(0) >= 32
    assert not m.validate()


def test_no_cavities_square():
    m = mesh_perforated(Perforation(DomainSpec.unit_square(), 0.1, 0.5, RADII, ()), 0.1)
    assert np.all(m.boundary_tags == 0)
    assert abs(boundary_length(m) - 4.0) <= 1e-9


def test_unperforated_square_boundary():
    m = mesh_unperforated(DomainSpec.unit_square(), 0.25)
    assert abs(boundary_length(m) - 4.0) <= 1e-9
    assert abs(m.area() - 1.0) <= 1e-12


def test_unperforated_disk_boundary():
    m = mesh_unperforated(DomainSpec.disk(), 0.1)
    n_out = int(np.count_nonzero(m.boundary_tags == 0))
    # equally spaced points on the circle: perimeter of the inscribed polygon
    expected = 2 * n_out * math.sin(math.pi / n_out)
    assert abs(boundary_length(m) - expected) <= 1e-9
    assert 2 * math.pi - boundary_length(m) <= 2 * math.pi * (math.pi / n_out) ** 2 / 6 * 1.1


def test_refinement_vertex_scaling():
    m1 = mesh_unperforated(DomainSpec.unit_square(), 0.1)
    m2 = mesh_unperforated(DomainSpec.unit_square(), 0.05)
    assert 3.0 <= m2.n_vertices / m1.n_vertices <= 5.0
    d1 = mesh_unperforated(DomainSpec.disk(), 0.1)
    d2 = mesh_unperforated(DomainSpec.disk(), 0.05)
    assert 3.0 <= d2.n_vertices / d1.n_vertices <= 5.0


def test_h_max_bound():
    for m, h in ((mesh_unperforated(DomainSpec.unit_square(), 0.1), 0.1),
                 (mesh_unperforated(DomainSpec.disk(), 0.1), 0.1),
                 (mesh_perforated(single_cavity(), 0.05), 0.05)):
        assert m.h_max <= 2 * h
        assert m.edge_lengths().max() <= m.h_max * (1 + 1e-12)


def test_coarse_h_still_resolves_cavities():
    # far-field h much larger than the cavity: near-cavity grading takes over
    p = Perforation(DomainSpec.unit_square(), 0.1, 1.0, (0.5, 1.0, 1.5),
                    (Cavity((0.35, 0.5), unit_disk_shape()),
                     Cavity((0.65, 0.5), unit_disk_shape())))   # exactly 2*R3*eps apart
    m = mesh_perforated(p, 3 * 1.5 * 0.1)
    assert not m.validate()
    assert m.cavity_edge_count(0) >= 32 and m.cavity_edge_count(1) >= 32
    cent = m.centroids()
    for k in range(2):
        assert not np.any(p.scaled_cavity(k).membership(cent) &
                          (np.hypot(cent[:, 0] - p.cavities[k].center[0],
                                    cent[:, 1] - p.cavities[k].center[1])
                           < 0.995 * p.scale))


def test_overlapping_cavities_error():
    p = Perforation(DomainSpec.unit_square(), 0.1, 1.0, (0.5, 1.0, 1.5),
                    (Cavity((0.45, 0.5), unit_disk_shape()),
                     Cavity((0.55, 0.5), unit_disk_shape())))
    with pytest.raises(MeshingError) as err:
        mesh_perforated(p, 0.05)
    assert "0" in str(err.value) and "1" in str(err.value)


def test_star_cavity_mesh_conforms():
    p = single_cavity(shape=star_shape((0.8, 0.0, 0.0, 0.1)), eps=0.15, eta=1.0)
    m = mesh_perforated(p, 0.04)
    assert not m.validate()
    loop = m.cavity_polygon(0)
    assert len(loop) == m.cavity_edge_count(0)
    # cavity vertices sit on the exact star boundary
    v = m.vertices[loop]
    th = np.arctan2(v[:, 1] - 0.5, v[:, 0] - 0.5)
    r = np.hypot(v[:, 0] - 0.5, v[:, 1] - 0.5)
    assert np.allclose(r, p.cavities[0].shape.radius_at(th) * p.scale, atol=1e-12)


def test_mesh_area_matches_geometry(small_perforation):
    m = mesh_perforated(small_perforation, 0.04)
    cav_area = sum(c.shape.area() * small_perforation.scale ** 2
                   for c in small_perforation.cavities)
    seg = min(m.cavity_edge_count(k) for k in range(len(small_perforation.cavities)))
    tol = (2 * math.pi ** 2 / 3) / seg ** 2 * cav_area * 1.5 + 1e-12
    assert abs(m.area() - (1.0 - cav_area)) <= tol


def test_tag_integrity(small_perforation):
    m = mesh_perforated(small_perforation, 0.05)
    for k in range(len(small_perforation.cavities)):
        loop = m.cavity_polygon(k)
        assert len(loop) == m.cavity_edge_count(k)
        assert len(np.unique(loop)) == len(loop)


def test_min_angle_quality(small_perforation):
    m = mesh_perforated(small_perforation, 0.05)
    assert m.min_angle() >= 20.0


# ---------------------------------------------------------------------------
# transfer
# ---------------------------------------------------------------------------

def test_transfer_reproduces_constants_and_linears(small_perforation):
    a = mesh_unperforated(DomainSpec.unit_square(), 0.07)
    b = mesh_perforated(small_perforation, 0.05)
    ones = transfer(DiscreteFunction(a, np.ones(a.n_vertices)), b)
    assert np.allclose(ones.values, 1.0, atol=1e-12)
    lin = 3.0 * a.vertices[:, 0] + 2.0 * a.vertices[:, 1] + 1.0
    out = transfer(DiscreteFunction(a, lin), b)
    expected = 3.0 * b.vertices[:, 0] + 2.0 * b.vertices[:, 1] + 1.0
    assert np.abs(out.values - expected).max() <= 1e-12


def test_transfer_linearity(small_perforation):
    a = mesh_unperforated(DomainSpec.unit_square(), 0.07)
    b = mesh_perforated(small_perforation, 0.06)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(a.n_vertices) + 1j * rng.standard_normal(a.n_vertices)
    w = rng.standard_normal(a.n_vertices)
    lhs = transfer(DiscreteFunction(a, 2.0 * u + 3.0 * w), b).values
    rhs = 2.0 * transfer(DiscreteFunction(a, u), b).values \
        + 3.0 * transfer(DiscreteFunction(a, w), b).values
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_transfer_interpolation_error():
    a = mesh_unperforated(DomainSpec.unit_square(), 0.05)
    b = mesh_unperforated(DomainSpec.unit_square(), 0.033)
    u = np.sin(np.pi * a.vertices[:, 0])
    out = transfer(DiscreteFunction(a, u), b)
    exact = np.sin(np.pi * b.vertices[:, 0])
    bound = (math.pi ** 2 / 8) * 0.05 ** 2 * 1.05
    assert np.abs(out.values - exact).max() <= bound


def test_transfer_exact_at_shared_vertices():
    a = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    u = np.cos(a.vertices[:, 0]) * a.vertices[:, 1] ** 2
    out = transfer(DiscreteFunction(a, u), a)
    assert np.abs(out.values - u).max() <= 1e-12


def test_transfer_outside_errors(annulus_perforation):
    a = mesh_perforated(annulus_perforation, 0.05)     # has a hole at the center
    b = mesh_unperforated(DomainSpec.disk(), 0.1)      # covers the hole
    u = DiscreteFunction(a, np.ones(a.n_vertices))
    with pytest.raises(TransferError) as err:
        transfer(u, b)
    assert "outside" in str(err.value)


def test_transfer_into_cavity_from_unperforated(annulus_perforation):
    # the reverse direction is fine: the unperforated mesh covers cavity vertices
    a = mesh_unperforated(DomainSpec.disk(), 0.05)
    b = mesh_perforated(annulus_perforation, 0.05)
    out = transfer(DiscreteFunction(a, a.vertices[:, 0]), b)
    assert np.abs(out.values - b.vertices[:, 0]).max() <= 1e-10


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def test_mesh_text_roundtrip(tmp_path, small_perforation):
    m = mesh_perforated(small_perforation, 0.06)
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    text = path.read_text()
    assert text.startswith("VERTICES\n")
    assert "TRIANGLES\n" in text and "BOUNDARY\n" in text
    m2 = read_mesh(path)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.allclose(m.vertices, m2.vertices, rtol=0, atol=0)
    assert np.array_equal(m.boundary_edges, m2.boundary_edges)
    assert np.array_equal(m.boundary_tags, m2.boundary_tags)


def test_boundary_tags_are_small_ints(small_perforation):
    m = mesh_perforated(small_perforation, 0.06)
    tags = set(np.unique(m.boundary_tags).tolist())
    assert tags == set(range(len(small_perforation.cavities) + 1))
