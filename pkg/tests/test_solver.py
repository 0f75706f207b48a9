import math

import numpy as np
import pytest

from conftest import h1_norm
from radial_oracle import solve_radial

from perfhom.errors import PicardDivergenceError
from perfhom.geometry import Cavity, DomainSpec, Perforation, unit_disk_shape
from perfhom.meshing import DiscreteFunction, Mesh, mesh_perforated, mesh_unperforated
from perfhom.problem import (ProblemSpec, coefficient_preset, nonlinearity_preset,
                             Coefficients, F_PRESETS)
from perfhom.solver import (assemble_load, assemble_volume, estimate_coercive_shift,
                            p1_mass, p1_stiffness, read_solution, robin_residual,
                            solve_homogenized, solve_perturbed, write_solution)


def reference_triangle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    edges = np.array([[0, 1], [1, 2], [2, 0]])
    return Mesh(verts, tris, edges, np.zeros(3, dtype=np.int64), math.sqrt(2.0))


def l2_err(mesh, values, exact):
    d = np.asarray(values) - exact
    M = p1_mass(mesh)
    return math.sqrt(abs(np.vdot(d, M @ d).real))


# ---------------------------------------------------------------------------
# element-level assembly
# ---------------------------------------------------------------------------

def test_reference_stiffness_matrix():
    K = p1_stiffness(reference_triangle()).toarray()
    expected = 0.5 * np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert np.allclose(K, expected, atol=1e-14)


def test_reference_mass_matrix():
    M = p1_mass(reference_triangle()).toarray()
    expected = (np.ones((3, 3)) + np.eye(3)) / 24.0      # area 1/2
    assert np.allclose(M, expected, atol=1e-15)
    assert np.allclose(M.sum(axis=1), 0.5 / 3.0)         # row sums = area / 3


def test_shift_adds_exact_mass():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.25)
    co = coefficient_preset("laplacian")
    h0 = assemble_volume(mesh, co, 0.0, dirichlet="none").matrix.toarray()
    h1 = assemble_volume(mesh, co, -1.0, dirichlet="none").matrix.toarray()
    assert np.allclose(h1 - h0, p1_mass(mesh).toarray(), atol=1e-13)


def test_convection_term_integral():
    # b = (1, 0): nodal x against constant 1 gives the area integral of dx/dx
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    base = assemble_volume(mesh, Coefficients(), 0.0, dirichlet="none").matrix
    conv = assemble_volume(mesh, Coefficients(b1=1.0), 0.0, dirichlet="none").matrix
    x = mesh.vertices[:, 0].astype(complex)
    ones = np.ones(mesh.n_vertices)
    val = np.vdot(ones, (conv - base) @ x).real
    assert abs(val - 1.0) <= 1e-9


def test_variable_coefficient_quadratic_form():
    # form value against a linear ansatz: midpoint sampling is exact since the
    # integrand A(x) grad(u) . grad(v) is then linear per element in x
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.125)
    co = Coefficients(a11=lambda x, y: 1.0 + x, a22=1.0)
    H = assemble_volume(mesh, co, 0.0, dirichlet="none").matrix
    x = mesh.vertices[:, 0].astype(complex)
    val = np.vdot(x, H @ x).real      # integral of (1 + x) over the square
    assert abs(val - 1.5) <= 1e-12


# ---------------------------------------------------------------------------
# Robin load
# ---------------------------------------------------------------------------

def test_robin_residual_zero_cases(annulus_perforation):
    mesh = mesh_perforated(annulus_perforation, 0.05)
    zero = DiscreteFunction(mesh, np.zeros(mesh.n_vertices))
    out = robin_residual(mesh, zero, nonlinearity_preset("linear", 0.5))
    assert np.abs(out).max() == 0.0
    ones = DiscreteFunction(mesh, np.ones(mesh.n_vertices))
    out = robin_residual(mesh, ones, nonlinearity_preset("zero"))
    assert np.abs(out).max() == 0.0


def test_robin_residual_circumference(annulus_perforation):
    mesh = mesh_perforated(annulus_perforation, 0.05)
    mu, r = 0.8, 0.2
    ones = DiscreteFunction(mesh, np.ones(mesh.n_vertices))
    out = robin_residual(mesh, ones, nonlinearity_preset("linear", mu))
    total = out.sum().real
    m = mesh.cavity_edge_count(0)
    defect = 2 * math.pi * r * (math.pi / m) ** 2 / 2 * 1.2
    assert abs(total - mu * 2 * math.pi * r) <= mu * defect + 1e-12


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------

def test_no_cavity_perturbed_equals_homogenized():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.1)
    co = coefficient_preset("laplacian")
    spec = ProblemSpec(co, nonlinearity_preset("zero"), -1.0, F_PRESETS["sine"])
    a = solve_perturbed(spec, mesh)
    b = solve_homogenized(co, -1.0, F_PRESETS["sine"], mesh)
    assert a.picard_iterations == 1
    assert np.abs(a.solution.values - b.solution.values).max() <= 1e-12


def test_manufactured_convergence_rate():
    co = coefficient_preset("laplacian")
    errs = []
    for h in (0.1, 0.05):
        mesh = mesh_unperforated(DomainSpec.unit_square(), h)
        res = solve_homogenized(co, -1.0, F_PRESETS["sine"], mesh)
        exact = np.sin(np.pi * mesh.vertices[:, 0]) * np.sin(np.pi * mesh.vertices[:, 1])
        errs.append(l2_err(mesh, res.solution.values, exact))
    assert 3.6 <= errs[0] / errs[1] <= 4.4


def test_zero_data_zero_solution():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    res = solve_homogenized(coefficient_preset("laplacian"), -1.0, F_PRESETS["zero"], mesh)
    assert np.abs(res.solution.values).max() <= 1e-14


def test_homogenized_linearity():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    co = coefficient_preset("convective")
    f1, f2 = F_PRESETS["sine"], F_PRESETS["bump"]
    a = solve_homogenized(co, -1.0, f1, mesh).solution.values
    b = solve_homogenized(co, -1.0, f2, mesh).solution.values
    c = solve_homogenized(co, -1.0, lambda x, y: f1(x, y) + f2(x, y), mesh)
    assert np.abs(a + b - c.solution.values).max() <= 1e-10


def test_annulus_matches_radial_oracle(annulus_perforation):
    r1d, u1d = solve_radial(0.2, 0.5)
    mesh = mesh_perforated(annulus_perforation, 0.02)
    spec = ProblemSpec(coefficient_preset("laplacian"),
                       nonlinearity_preset("linear", 0.5), -1.0, F_PRESETS["one"],
                       annulus_perforation)
    res = solve_perturbed(spec, mesh)
    rr = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    uref = np.interp(rr, r1d, u1d)
    rel = l2_err(mesh, res.solution.values, uref) / l2_err(mesh, np.zeros_like(uref), uref)
    assert rel <= 1e-3
    assert res.contraction_estimate is not None and res.contraction_estimate < 1.0


def test_saturating_nonlinearity_perturbation(annulus_perforation):
    co = coefficient_preset("laplacian")
    mu = 0.1
    dists = []
    for h in (0.04, 0.02):
        mesh = mesh_perforated(annulus_perforation, h)
        sat = ProblemSpec(co, nonlinearity_preset("saturating", mu), -1.0,
                          F_PRESETS["one"], annulus_perforation)
        base = ProblemSpec(co, nonlinearity_preset("zero"), -1.0, F_PRESETS["one"],
                           annulus_perforation)
        a = solve_perturbed(sat, mesh)
        b = solve_perturbed(base, mesh)
        assert a.contraction_estimate < 1.0
        dists.append(h1_norm(mesh, a.solution.values - b.solution.values))
    # distance scales like mu with an h-stable constant
    assert dists[0] <= 10 * mu and dists[1] <= 10 * mu
    assert abs(dists[0] - dists[1]) <= 0.3 * max(dists)


def test_picard_divergence_raises(annulus_perforation):
    mesh = mesh_perforated(annulus_perforation, 0.06)
    spec = ProblemSpec(coefficient_preset("laplacian"),
                       nonlinearity_preset("linear", 50.0), -1.0, F_PRESETS["one"],
                       annulus_perforation)
    with pytest.raises(PicardDivergenceError):
        solve_perturbed(spec, mesh, max_iter=40)


def test_complex_shift_complex_data(annulus_perforation):
    mesh = mesh_perforated(annulus_perforation, 0.05)
    spec = ProblemSpec(coefficient_preset("variable"),
                       nonlinearity_preset("linear", 0.3), -1.0 + 0.5j,
                       lambda x, y: np.exp(1j * np.pi * x), annulus_perforation)
    res = solve_perturbed(spec, mesh)
    assert np.abs(res.solution.values.imag).max() > 1e-6
    assert res.picard_residual_history[-1] <= 1e-10


# ---------------------------------------------------------------------------
# coercivity and a-priori stability
# ---------------------------------------------------------------------------

def test_discrete_coercivity_presets(small_perforation):
    mesh = mesh_perforated(small_perforation, 0.06)
    gram = (p1_stiffness(mesh) + p1_mass(mesh))
    rng = np.random.default_rng(5)
    for name in ("laplacian", "variable", "convective"):
        co = coefficient_preset(name)
        system = assemble_volume(mesh, co, -1.0, dirichlet="outer")
        g = gram[system.free][:, system.free]
        for _ in range(8):
            v = rng.standard_normal(len(system.free)) \
                + 1j * rng.standard_normal(len(system.free))
            lhs = np.vdot(v, system.matrix @ v).real
            rhs = 0.5 * co.c1 * np.vdot(v, g @ v).real
            assert lhs >= rhs * (1 - 1e-12)


def test_apriori_bound_stable_across_eps():
    co = coefficient_preset("laplacian")
    ratios = []
    for i, eps in enumerate((0.2, 0.1, 0.05)):
        from perfhom.geometry import generate_perforation
        p = generate_perforation(DomainSpec.unit_square(), eps, eps, (0.5, 1.0, 1.5),
                                 "fill", seed=21 + i)
        mesh = mesh_perforated(p, min(0.05, eps / 3))
        spec = ProblemSpec(co, nonlinearity_preset("linear", eps), -1.0,
                           F_PRESETS["sine"], p)
        res = solve_perturbed(spec, mesh)
        from perfhom.metrics import f_norm_domain
        ratios.append(h1_norm(mesh, res.solution.values)
                      / f_norm_domain(mesh, F_PRESETS["sine"]))
    mid = sorted(ratios)[1]
    assert all(abs(r - mid) <= 0.2 * mid for r in ratios)


def test_estimate_coercive_shift():
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.1)
    lam0 = estimate_coercive_shift(coefficient_preset("laplacian"), mesh)
    assert lam0 > -1.0            # the default shift -1 is safely coercive
    assert math.isfinite(lam0)


def test_contraction_decreases_with_eps():
    from perfhom.geometry import generate_perforation
    co = coefficient_preset("laplacian")
    rates = []
    for eps in (0.2, 0.1):
        p = generate_perforation(DomainSpec.unit_square(), eps, eps, (0.5, 1.0, 1.5),
                                 "fill", seed=4)
        mesh = mesh_perforated(p, min(0.05, eps / 3))
        spec = ProblemSpec(co, nonlinearity_preset("linear", eps), -1.0,
                           F_PRESETS["sine"], p)
        res = solve_perturbed(spec, mesh)
        assert res.contraction_estimate < 1.0
        rates.append(res.contraction_estimate)
    assert rates[1] < rates[0]


def test_iterative_fallback_matches_direct(monkeypatch, annulus_perforation):
    import perfhom.solver as solver_mod
    mesh = mesh_perforated(annulus_perforation, 0.05)
    spec = ProblemSpec(coefficient_preset("laplacian"),
                       nonlinearity_preset("linear", 0.5), -1.0, F_PRESETS["one"],
                       annulus_perforation)
    direct = solve_perturbed(spec, mesh)
    monkeypatch.setattr(solver_mod, "DIRECT_SOLVER_LIMIT", 1)
    iterative = solve_perturbed(spec, mesh)
    assert iterative.linear_solver_stats["method"] == "ilu-lgmres"
    assert np.abs(direct.solution.values - iterative.solution.values).max() <= 1e-8


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_solution_roundtrip(tmp_path):
    mesh = mesh_unperforated(DomainSpec.unit_square(), 0.2)
    res = solve_homogenized(coefficient_preset("laplacian"), -1.0, F_PRESETS["sine"], mesh)
    prefix = tmp_path / "sol"
    write_solution(res, prefix)
    back = read_solution(prefix, mesh)
    assert np.array_equal(back.solution.values, res.solution.values)
    assert back.picard_iterations == res.picard_iterations
    raw = (tmp_path / "sol.bin").read_bytes()
    assert len(raw) == 16 * mesh.n_vertices          # little-endian float64 pairs
    first = np.frombuffer(raw[:16], dtype="<c16")[0]
    assert first == res.solution.values[0]
