import math

import numpy as np
import pytest
import scipy.linalg

from perfhom.geometry import DomainSpec
from perfhom.meshing import DiscreteFunction, mesh_perforated, mesh_unperforated
from perfhom.metrics import (LEMMA_IDS, boundary_mass, error_norms, f_norm_cavities,
                             f_norm_domain, lemma_constant, lemma_pencil,
                             top_generalized_eigenvalue)
from perfhom.solver import SolveResult


def as_result(mesh, values):
    return SolveResult(DiscreteFunction(mesh, values), 1, [], {})


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def test_zero_difference():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    u = as_result(mesh, np.sin(mesh.vertices[:, 0]))
    en = error_norms(u, as_result(mesh, u.solution.values.copy()), mesh,
                     lambda x, y: np.ones_like(x))
    assert en.l2 <= 1e-14 and en.h1 <= 1e-14


def test_constant_difference_norms():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    en = error_norms(as_result(mesh, np.ones(mesh.n_vertices)),
                     as_result(mesh, np.zeros(mesh.n_vertices)), mesh,
                     lambda x, y: np.ones_like(x))
    assert abs(en.l2 - 1.0) <= 1e-12         # sqrt(area) on the unit square
    assert abs(en.h1 - 1.0) <= 1e-12


def test_linear_difference_norms():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.1)
    en = error_norms(as_result(mesh, mesh.vertices[:, 0].astype(complex)),
                     as_result(mesh, np.zeros(mesh.n_vertices)), mesh,
                     lambda x, y: np.ones_like(x))
    assert abs(en.l2 - 1.0 / math.sqrt(3.0)) <= 1e-12     # integral of x^2 = 1/3
    assert abs(en.h1 - math.sqrt(1.0 / 3.0 + 1.0)) <= 1e-12
    assert en.h1 >= en.l2


def test_norm_homogeneity():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(mesh.n_vertices) + 1j * rng.standard_normal(mesh.n_vertices)
    base = error_norms(as_result(mesh, vals), as_result(mesh, np.zeros_like(vals)),
                       mesh, lambda x, y: np.ones_like(x))
    scaled = error_norms(as_result(mesh, -2.5 * vals),
                         as_result(mesh, np.zeros_like(vals)), mesh,
                         lambda x, y: np.ones_like(x))
    assert abs(scaled.l2 - 2.5 * base.l2) <= 1e-12 * scaled.l2
    assert abs(scaled.h1 - 2.5 * base.h1) <= 1e-12 * scaled.h1


def test_f_norms(small_perforation):
    mesh = mesh_perforated(small_perforation, 0.04)
    base = mesh_unperforated(DomainSpec.unit_square(), 0.05)
    one = lambda x, y: np.ones_like(np.asarray(x, dtype=float), dtype=complex)
    assert abs(f_norm_domain(base, one) - 1.0) <= 1e-12
    cav_area = sum(c.shape.area() * small_perforation.scale ** 2
                   for c in small_perforation.cavities)
    got = f_norm_cavities(mesh, one)
    assert abs(got - math.sqrt(cav_area)) <= 0.01 * math.sqrt(cav_area)


def test_mesh_mismatch_error(small_perforation):
    mesh = mesh_perforated(small_perforation, 0.06)
    other = mesh_unperforated(DomainSpec.unit_square(), 0.1)
    with pytest.raises(ValueError):
        error_norms(as_result(other, np.zeros(other.n_vertices)),
                    as_result(other, np.zeros(other.n_vertices)), mesh,
                    lambda x, y: np.ones_like(x))


# ---------------------------------------------------------------------------
# trace-constant eigenproblems
# ---------------------------------------------------------------------------

def test_constant_probe_admissible_for_ring_inequality():
    # u = 1: boundary measure over (eta/eps) * ring measure is a valid ratio,
    # so the best constant must dominate it
    eps, eta, r2, r3 = 0.1, 0.5, 1.0, 1.5
    B, R, weights, mesh = lemma_pencil("3.1", eps, eta)
    assert weights is None
    ones = np.ones(mesh.n_vertices)
    ratio = (ones @ (B @ ones)) / (ones @ (R @ ones))
    lam, _, _ = top_generalized_eigenvalue(B, R)
    assert lam >= ratio > 0
    # analytic check of the probe ratio: 2 pi a / ((eta/eps) pi (R3^2 - R2^2) eps^2)
    a = eps * eta
    expected = (2 * math.pi * a) / (eta / eps * math.pi * (r3 ** 2 - r2 ** 2) * eps ** 2)
    assert abs(ratio - expected) <= 0.02 * expected


def test_mean_zero_constraint_annihilates_constants():
    B, R, weights, mesh = lemma_pencil("3.3", 0.1, 0.5)
    assert weights is not None
    assert weights @ np.ones(mesh.n_vertices) > 0
    lam, vec, _ = top_generalized_eigenvalue(B, R, weights)
    assert abs(weights @ vec) <= 1e-8 * np.abs(vec).max() * weights.sum()


def test_dense_eigensolver_oracle_lemma_33():
    # sparse power iteration vs a dense solve at double resolution
    lc = lemma_constant("3.3", 0.1, 0.5, mesh_resolution=16)
    B, R, weights, mesh = lemma_pencil("3.3", 0.1, 0.5, mesh_resolution=32)
    Z = scipy.linalg.null_space(weights[None, :])
    Bd = Z.T @ (B.toarray() @ Z)
    Rd = Z.T @ (R.toarray() @ Z)
    dense_top = float(scipy.linalg.eigh(Bd, Rd, eigvals_only=True)[-1])
    assert abs(lc.best_constant - dense_top) <= 0.05 * dense_top


def test_power_iteration_matches_dense_same_mesh():
    B, R, _, mesh = lemma_pencil("3.6", 0.1, 0.5, mesh_resolution=12)
    lam, _, resid = top_generalized_eigenvalue(B, R)
    dense = scipy.linalg.eigh(B.toarray(), R.toarray(), eigvals_only=True)[-1]
    assert abs(lam - dense) <= 1e-6 * dense
    assert resid <= 1e-3


def test_scale_invariance_mean_zero_constant():
    a = lemma_constant("3.3", 0.1, 0.5).best_constant
    b = lemma_constant("3.3", 0.2, 0.5).best_constant
    assert abs(a - b) <= 1e-9 * a


def test_uniformity_small_grid():
    for lid in LEMMA_IDS:
        vals = [lemma_constant(lid, eps, eta).best_constant
                for eps in (0.2, 0.1) for eta in (0.5, 0.25)]
        assert max(vals) / min(vals) <= 3.0
        assert all(v > 0 for v in vals)


def test_boundary_mass_total(small_perforation):
    # boundary mass applied to ones gives the total tagged length
    m = mesh_perforated(small_perforation, 0.05)
    Bm = boundary_mass(m, "cavity")
    ones = np.ones(m.n_vertices)
    sel = m.boundary_tags > 0
    e = m.boundary_edges[sel]
    total = np.hypot(*(m.vertices[e[:, 0]] - m.vertices[e[:, 1]]).T).sum()
    assert abs(ones @ (Bm @ ones) - total) <= 1e-12 * total


def test_unknown_lemma_id():
    with pytest.raises(KeyError):
        lemma_constant("3.4", 0.1, 0.5)
