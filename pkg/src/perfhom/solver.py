"""Sesquilinear-form assembly and solution of the perturbed and limit problems.

P1 elements; the volume form uses exact element integrals with coefficients
frozen at triangle centroids (exact for constant coefficients, midpoint rule
otherwise).  The nonlinear Robin term never enters the matrix: each Picard
step solves the same factorized linear system against an updated load, so one
sparse factorization serves the whole iteration.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import PicardDivergenceError, SolverError
from .meshing import DiscreteFunction, Mesh
from .problem import Coefficients, ProblemSpec, RobinNonlinearity

_GAUSS_T = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


# ---------------------------------------------------------------------------
# element geometry
# ---------------------------------------------------------------------------

def _p1_gradients(mesh: Mesh):
    """Hat-function gradients per triangle: (M, 3, 2), plus areas."""
    a, b, c = mesh.corners()
    area = mesh.areas()
    g = np.empty((mesh.n_triangles, 3, 2))
    g[:, 0, 0] = b[:, 1] - c[:, 1]
    g[:, 0, 1] = c[:, 0] - b[:, 0]
    g[:, 1, 0] = c[:, 1] - a[:, 1]
    g[:, 1, 1] = a[:, 0] - c[:, 0]
    g[:, 2, 0] = a[:, 1] - b[:, 1]
    g[:, 2, 1] = b[:, 0] - a[:, 0]
    g /= (2.0 * area)[:, None, None]
    return g, area


def _scatter(mesh: Mesh, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Accumulate (M, 3, 3) element blocks into an n x n sparse matrix."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()          # q index varies slower
    cols = np.tile(t, (1, 3)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


_MASS_LOCAL = (np.ones((3, 3)) + np.eye(3)) / 12.0


def p1_mass(mesh: Mesh) -> sp.csr_matrix:
    """Exact P1 mass matrix."""
    local = mesh.areas()[:, None, None] * _MASS_LOCAL[None, :, :]
    return _scatter(mesh, local, mesh.n_vertices)


def p1_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 stiffness matrix of the plain Laplacian."""
    g, area = _p1_gradients(mesh)
    local = np.einsum("m,mpk,mqk->mqp", area, g, g)
    return _scatter(mesh, local, mesh.n_vertices)


# ---------------------------------------------------------------------------
# assembled system
# ---------------------------------------------------------------------------

@dataclass
class RobinQuadrature:
    """Two-point Gauss data on every cavity-tagged edge."""

    v0: np.ndarray          # (E,) endpoint vertex ids
    v1: np.ndarray
    lengths: np.ndarray     # (E,)
    gx: np.ndarray          # (E, 2) x at the two Gauss points
    gy: np.ndarray          # (E, 2)

    @property
    def n_edges(self) -> int:
        return len(self.v0)


def _robin_quadrature(mesh: Mesh) -> RobinQuadrature:
    sel = mesh.boundary_tags > 0
    edges = mesh.boundary_edges[sel]
    p0 = mesh.vertices[edges[:, 0]]
    p1 = mesh.vertices[edges[:, 1]]
    lengths = np.hypot(*(p1 - p0).T)
    t = np.asarray(_GAUSS_T)
    gx = p0[:, 0, None] + t[None, :] * (p1[:, 0] - p0[:, 0])[:, None]
    gy = p0[:, 1, None] + t[None, :] * (p1[:, 1] - p0[:, 1])[:, None]
    return RobinQuadrature(edges[:, 0], edges[:, 1], lengths, gx, gy)


@dataclass
class AssembledSystem:
    """Volume form minus the spectral shift, reduced to the free vertices."""

    matrix: sp.csc_matrix               # (nfree, nfree) complex
    load: np.ndarray                    # (nfree,) complex
    dirichlet: np.ndarray               # constrained vertex ids (zero values)
    free: np.ndarray                    # free vertex ids
    robin: RobinQuadrature
    mesh: Mesh
    h1_gram: sp.csr_matrix = field(repr=False, default=None)   # K + M on free dofs

    def free_index(self):
        idx = np.full(self.mesh.n_vertices, -1, dtype=np.int64)
        idx[self.free] = np.arange(len(self.free))
        return idx

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.mesh.n_vertices, dtype=complex)
        u[self.free] = u_free
        return u

    def h1_norm_free(self, u_free: np.ndarray) -> float:
        return math.sqrt(max(0.0, float(np.real(np.vdot(u_free, self.h1_gram @ u_free)))))


def assemble_volume(mesh: Mesh, coeffs: Coefficients, lam: complex,
                    dirichlet: str = "outer") -> AssembledSystem:
    """Assemble the volume sesquilinear form with the shift -lam*(u, v).

    ``dirichlet``: "outer" constrains outer-tagged boundary vertices only
    (cavity vertices stay free for the natural boundary condition); "all"
    constrains every boundary vertex; "none" keeps every vertex free.
    """
    n = mesh.n_vertices
    g, area = _p1_gradients(mesh)
    cent = mesh.centroids()

    A = coeffs.A_at(cent)                 # (M,2,2)
    local = np.einsum("m,mij,mpj,mqi->mqp", area, A, g, g).astype(complex)
    if coeffs.has_drift:
        b = coeffs.b_at(cent)             # (M,2)
        conv = np.einsum("m,mj,mpj->mp", area / 3.0, b, g)
        local += conv[:, None, :]         # same row contribution for each q
    czero = coeffs.c_at(cent) - complex(lam)
    local += (czero * area)[:, None, None] * _MASS_LOCAL[None, :, :]

    full = _scatter(mesh, local, n)

    if dirichlet == "all":
        constrained = mesh.boundary_vertex_set()
    elif dirichlet == "none":
        constrained = np.zeros(0, dtype=np.int64)
    else:
        constrained = mesh.outer_vertex_indices()
    free = np.setdiff1d(np.arange(n), constrained)
    matrix = full[free][:, free].tocsc()

    gram = (p1_stiffness(mesh) + p1_mass(mesh))[free][:, free].tocsr()
    return AssembledSystem(matrix, np.zeros(len(free), dtype=complex),
                           constrained, free, _robin_quadrature(mesh), mesh, gram)


def assemble_load(mesh: Mesh, f) -> np.ndarray:
    """(f, hat_q) by the centroid rule; full-length vector."""
    cent = mesh.centroids()
    fc = np.asarray(f(cent[:, 0], cent[:, 1]), dtype=complex)
    contrib = (mesh.areas() * fc / 3.0)
    out = np.zeros(mesh.n_vertices, dtype=complex)
    for q in range(3):
        np.add.at(out, mesh.triangles[:, q], contrib)
    return out


def _robin_load(rq: RobinQuadrature, u: np.ndarray, nl: RobinNonlinearity,
                n_vertices: int) -> np.ndarray:
    out = np.zeros(n_vertices, dtype=complex)
    if rq.n_edges == 0 or nl.is_zero:
        return out
    t = np.asarray(_GAUSS_T)
    ug = (u[rq.v0][:, None] * (1.0 - t)[None, :] + u[rq.v1][:, None] * t[None, :])
    ag = np.asarray(nl(rq.gx, rq.gy, ug), dtype=complex)
    w = 0.5 * rq.lengths[:, None]
    np.add.at(out, rq.v0, np.sum(w * ag * (1.0 - t)[None, :], axis=1))
    np.add.at(out, rq.v1, np.sum(w * ag * t[None, :], axis=1))
    return out


def robin_residual(mesh: Mesh, u: DiscreteFunction, nl: RobinNonlinearity) -> np.ndarray:
    """Load-vector contribution of the boundary reaction over all cavity edges."""
    if u.mesh is not mesh:
        raise ValueError("u must live on the given mesh")
    return _robin_load(_robin_quadrature(mesh), u.values, nl, mesh.n_vertices)


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------

@dataclass
class SolveResult:
    solution: DiscreteFunction
    picard_iterations: int
    picard_residual_history: list
    linear_solver_stats: dict
    contraction_estimate: float | None = None


# above this unknown count the direct factorization gives way to a
# preconditioned iterative solve (residual 1e-12)
DIRECT_SOLVER_LIMIT = 600_000


class _IterativeSolver:
    def __init__(self, matrix: sp.csc_matrix):
        self.matrix = matrix
        ilu = spla.spilu(matrix, drop_tol=1e-5, fill_factor=20)
        self.prec = spla.LinearOperator(matrix.shape, ilu.solve, dtype=complex)

    def solve(self, rhs):
        x, info = spla.lgmres(self.matrix, rhs, M=self.prec, rtol=1e-12, atol=0.0,
                              maxiter=2000)
        if info != 0:
            raise SolverError(f"iterative linear solve stalled (info={info})")
        return x


def _factorize(matrix: sp.csc_matrix):
    t0 = time.perf_counter()
    if matrix.shape[0] <= DIRECT_SOLVER_LIMIT:
        solver = spla.splu(matrix)
        method = "sparse-lu"
    else:
        solver = _IterativeSolver(matrix)
        method = "ilu-lgmres"
    stats = {"method": method, "n": matrix.shape[0],
             "nnz": int(matrix.nnz), "factor_seconds": time.perf_counter() - t0}
    return solver, stats


def solve_homogenized(coeffs: Coefficients, lam: complex, f, mesh: Mesh) -> SolveResult:
    """Single linear solve of the limit problem with Dirichlet data on the
    whole boundary."""
    system = assemble_volume(mesh, coeffs, lam, dirichlet="all")
    load = assemble_load(mesh, f)[system.free]
    try:
        lu, stats = _factorize(system.matrix)
        u_free = lu.solve(load)
    except Exception as exc:   # singular factor, memory, ...
        raise SolverError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(u_free)):
        raise SolverError("linear solve returned non-finite values")
    return SolveResult(DiscreteFunction(mesh, system.expand(u_free)), 1, [], stats)


def solve_perturbed(spec: ProblemSpec, mesh: Mesh, tol: float = 1e-10,
                    max_iter: int = 100) -> SolveResult:
    """Successive substitution on the boundary reaction.

    Each step solves  volume_form(u_new) = f_load - robin_load(u_old)  with
    the outer boundary constrained to zero; stops when the discrete H1 norm
    of the increment drops below ``tol``.
    """
    if complex(spec.lam).real > spec.lambda0 + 1e-12:
        raise SolverError("Re(lambda) exceeds the declared coercive shift")
    system = assemble_volume(mesh, spec.coefficients, spec.lam, dirichlet="outer")
    f_load = assemble_load(mesh, spec.f)
    try:
        lu, stats = _factorize(system.matrix)
    except Exception as exc:
        raise SolverError(f"factorization failed: {exc}") from exc

    nl = spec.nonlinearity
    u = np.zeros(mesh.n_vertices, dtype=complex)
    pure_linear = nl.is_zero or system.robin.n_edges == 0

    history: list[float] = []
    ratios: list[float] = []
    iterations = 0
    for it in range(1, max_iter + 1):
        rhs = (f_load - _robin_load(system.robin, u, nl, mesh.n_vertices))[system.free]
        u_new_free = lu.solve(rhs)
        if not np.all(np.isfinite(u_new_free)):
            raise SolverError("linear solve returned non-finite values")
        delta = system.h1_norm_free(u_new_free - u[system.free])
        history.append(delta)
        u = system.expand(u_new_free)
        iterations = it
        if pure_linear or delta <= tol:
            break
        if len(history) >= 2 and history[-2] > 0:
            ratios.append(history[-1] / history[-2])
            if len(ratios) >= 3 and all(r >= 1.0 for r in ratios[-3:]):
                raise PicardDivergenceError(
                    "successive-substitution increments stopped contracting; "
                    "reduce the boundary Lipschitz budget mu or take Re(lambda) "
                    "more negative")
    else:
        raise SolverError(f"no convergence within {max_iter} iterations "
                          f"(last increment {history[-1]:.3e} > tol {tol:.1e})")

    return SolveResult(DiscreteFunction(mesh, u), iterations, history, stats,
                       max(ratios) if ratios else None)


def estimate_coercive_shift(coeffs: Coefficients, mesh: Mesh, n_probes: int = 32,
                            seed: int = 0, tol: float = 1e-3) -> float:
    """Empirical largest shift keeping the discrete form coercive.

    Bisects on x = Re(lambda) for the probe-sampled condition
    Re(v* (H - x M) v) >= c1/2 * v* (K + M) v.
    """
    system = assemble_volume(mesh, coeffs, 0.0, dirichlet="all")
    n = len(system.free)
    mass = p1_mass(mesh)[system.free][:, system.free]
    rng = np.random.default_rng(seed)
    probes = rng.standard_normal((n_probes, n)) + 1j * rng.standard_normal((n_probes, n))

    h_quad = np.array([np.real(np.vdot(v, system.matrix @ v)) for v in probes])
    m_quad = np.array([np.real(np.vdot(v, mass @ v)) for v in probes])
    g_quad = np.array([np.real(np.vdot(v, system.h1_gram @ v)) for v in probes])
    target = 0.5 * coeffs.c1 * g_quad

    def ok(x):
        return np.all(h_quad - x * m_quad >= target)

    lo, hi = -1.0, 1.0
    while not ok(lo):
        lo *= 2.0
        if lo < -1e6:
            raise SolverError("no coercive shift found down to -1e6")
    while ok(hi) and hi < 1e6:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


# ---------------------------------------------------------------------------
# result serialization: JSON log + raw little-endian complex nodal values
# ---------------------------------------------------------------------------

def write_solution(result: SolveResult, path_prefix: str) -> None:
    meta = {
        "picard_iterations": result.picard_iterations,
        "picard_residual_history": list(map(float, result.picard_residual_history)),
        "linear_solver_stats": result.linear_solver_stats,
        "contraction_estimate": result.contraction_estimate,
        "n_values": int(len(result.solution.values)),
    }
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2)
    with open(str(path_prefix) + ".bin", "wb") as fh:
        fh.write(np.ascontiguousarray(result.solution.values, dtype="<c16").tobytes())


def read_solution(path_prefix: str, mesh: Mesh) -> SolveResult:
    with open(str(path_prefix) + ".json") as fh:
        meta = json.load(fh)
    values = np.frombuffer(open(str(path_prefix) + ".bin", "rb").read(), dtype="<c16")
    if len(values) != meta["n_values"]:
        raise SolverError("binary payload length disagrees with the JSON log")
    return SolveResult(DiscreteFunction(mesh, values.copy()),
                       meta["picard_iterations"], meta["picard_residual_history"],
                       meta["linear_solver_stats"], meta.get("contraction_estimate"))
