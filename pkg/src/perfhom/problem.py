"""Coefficient data, Robin nonlinearity, scaling laws and hypothesis checks.

Field callables follow the numpy broadcasting convention fn(x, y) -> array,
where x and y are coordinate arrays of equal shape; constants are accepted
anywhere a field is expected.  Structural hypotheses (ellipticity, Lipschitz
budget, admissible scaling) are verified by sampling, not symbolically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .geometry import Perforation
from .theory import varkappa


def _as_field(v):
    if callable(v):
        return v
    const = complex(v)
    return lambda x, y: np.full(np.shape(x), const, dtype=complex)


# ---------------------------------------------------------------------------
# coefficients of the second-order operator
# ---------------------------------------------------------------------------

@dataclass
class Coefficients:
    """Diffusion matrix A, drift vector b and zero-order coefficient c.

    Entries are fields fn(x, y) or constants.  ``c1`` is the declared
    ellipticity constant: Re(conj(z) . A(x) z) >= c1 |z|^2 must hold.
    ``w1inf_bound`` declares a sup bound for b and its first derivatives when
    the stronger L2 convergence path is used.
    """

    a11: object = 1.0
    a12: object = 0.0
    a21: object = 0.0
    a22: object = 1.0
    b1: object = 0.0
    b2: object = 0.0
    c: object = 0.0
    c1: float = 1.0
    sup_bound: float = 1.0         # declared sup norm of A entries
    da_sup_bound: float = 0.0      # declared sup norm of first derivatives of A
    w1inf_bound: float | None = None
    name: str = "custom"

    def A_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        out = np.empty((len(pts), 2, 2), dtype=complex)
        out[:, 0, 0] = _as_field(self.a11)(x, y)
        out[:, 0, 1] = _as_field(self.a12)(x, y)
        out[:, 1, 0] = _as_field(self.a21)(x, y)
        out[:, 1, 1] = _as_field(self.a22)(x, y)
        return out

    def b_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        out = np.empty((len(pts), 2), dtype=complex)
        out[:, 0] = _as_field(self.b1)(x, y)
        out[:, 1] = _as_field(self.b2)(x, y)
        return out

    def c_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.asarray(_as_field(self.c)(pts[:, 0], pts[:, 1]), dtype=complex)

    @property
    def has_drift(self) -> bool:
        def nonzero(v):
            return callable(v) or complex(v) != 0
        return nonzero(self.b1) or nonzero(self.b2)


def coefficient_preset(name: str) -> Coefficients:
    """Shipped coefficient families, addressable by string key."""
    if name == "laplacian":
        return Coefficients(name="laplacian")
    if name == "variable":
        return Coefficients(
            a11=lambda x, y: 2.0 + 0.5 * np.sin(np.pi * x),
            a12=0.3, a21=0.3,
            a22=lambda x, y: 2.0 + 0.5 * np.cos(np.pi * y),
            c=0.1,
            c1=1.2, sup_bound=2.5, da_sup_bound=0.5 * math.pi,
            name="variable")
    if name == "convective":
        # drift lies in W^1_inf: |b| <= 0.45, |grad b| <= 0.15*pi
        return Coefficients(
            b1=lambda x, y: 0.3 + 0.15 * np.sin(np.pi * y),
            b2=lambda x, y: 0.2 * np.cos(np.pi * x),
            c1=1.0, sup_bound=1.0, da_sup_bound=0.0,
            w1inf_bound=0.45 + 0.15 * math.pi,
            name="convective")
    raise KeyError(f"unknown coefficient preset {name!r}")


def check_ellipticity(coeffs: Coefficients, sample_points, probe_vectors=None) -> float:
    """Sampled infimum of Re(conj(z) . A(x) z) / |z|^2.

    A nonpositive value (ellipticity violated on the samples) triggers a
    warning; the infimum is returned either way.
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if len(pts) == 0:
        raise ValueError("sample_points must be nonempty")
    if probe_vectors is None:
        probe_vectors = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0),
                         (1.0, 1.0j), (1.0j, 1.0), (1.0, -1.0j)]
    A = coeffs.A_at(pts)
    inf = math.inf
    for z in probe_vectors:
        z = np.asarray(z, dtype=complex)
        quad = np.einsum("i,nij,j->n", z.conj(), A, z)
        inf = min(inf, float(np.min(quad.real) / np.sum(np.abs(z) ** 2)))
    if inf <= 0:
        warnings.warn(f"ellipticity violated on samples: inf = {inf:.3g}")
    return inf


# ---------------------------------------------------------------------------
# Robin nonlinearity on cavity boundaries
# ---------------------------------------------------------------------------

@dataclass
class RobinNonlinearity:
    """Boundary reaction a(x, u) with a(x, 0) = 0 and Lipschitz budget mu."""

    a: object                    # callable (x, y, u) -> complex array
    mu: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.mu < 0:
            raise GeometryError("mu must be nonnegative")

    def __call__(self, x, y, u):
        return self.a(x, y, u)

    @property
    def is_zero(self) -> bool:
        return self.mu == 0.0


def nonlinearity_preset(name: str, mu: float = 0.0) -> RobinNonlinearity:
    if name == "zero":
        return RobinNonlinearity(lambda x, y, u: np.zeros_like(np.asarray(u, dtype=complex)),
                                 0.0, "zero")
    if name == "linear":
        return RobinNonlinearity(lambda x, y, u: mu * np.asarray(u, dtype=complex), mu, "linear")
    if name == "saturating":
        def a(x, y, u):
            u = np.asarray(u, dtype=complex)
            return mu * u / (1.0 + np.abs(u))
        return RobinNonlinearity(a, mu, "saturating")
    raise KeyError(f"unknown nonlinearity preset {name!r}")


def check_lipschitz(nl: RobinNonlinearity, samples) -> float:
    """Sampled sup of |a(x,u1)-a(x,u2)| / |u1-u2|; warns when the declared
    budget mu is exceeded beyond rounding."""
    samples = list(samples)
    if not samples:
        raise ValueError("samples must be nonempty")
    xs = np.array([s[0] for s in samples], dtype=float)
    u1 = np.array([s[1] for s in samples], dtype=complex)
    u2 = np.array([s[2] for s in samples], dtype=complex)
    if np.any(u1 == u2):
        raise ValueError("samples require u1 != u2")
    num = np.abs(nl(xs[:, 0], xs[:, 1], u1) - nl(xs[:, 0], xs[:, 1], u2))
    ratio = float(np.max(num / np.abs(u1 - u2)))
    if ratio > nl.mu * (1.0 + 1e-9):
        warnings.warn(f"Lipschitz budget exceeded: ratio {ratio:.6g} > mu {nl.mu:.6g}")
    return ratio


# ---------------------------------------------------------------------------
# scaling laws eta(eps), mu(eps)
# ---------------------------------------------------------------------------

@dataclass
class ScalingLaw:
    """Cavity-size and nonlinearity-strength laws along the eps sweep.

    Power laws keep their exponents (eta = eps^gamma, mu = mu_coeff * eps^delta,
    delta = inf meaning mu == 0); only those support slope prediction.
    """

    eta: object                  # callable eps -> (0, 1]
    mu: object                   # callable eps -> [0, inf)
    description: str = ""
    gamma: float | None = None
    delta: float | None = None
    mu_coeff: float = 1.0

    @staticmethod
    def power(gamma: float, delta: float = math.inf, mu_coeff: float = 1.0) -> "ScalingLaw":
        def eta(eps):
            return min(1.0, eps ** gamma)

        def mu(eps):
            return 0.0 if math.isinf(delta) else mu_coeff * eps ** delta

        desc = f"eta=eps^{gamma:g}, " + ("mu=0" if math.isinf(delta)
                                         else f"mu={mu_coeff:g}*eps^{delta:g}")
        return ScalingLaw(eta, mu, desc, gamma, delta, mu_coeff)

    @property
    def is_power(self) -> bool:
        return self.gamma is not None and self.delta is not None

    def validate_on(self, eps_grid) -> list[str]:
        problems = []
        vals = [self.eta(e) for e in eps_grid]
        if any(not (0 < v <= 1) for v in vals):
            problems.append("eta leaves (0, 1] on the grid")
        if any(b > a * (1 + 1e-12) for a, b in zip(vals, vals[1:])):
            problems.append("eta increases along the (decreasing) grid")
        if any(self.mu(e) < 0 for e in eps_grid):
            problems.append("mu negative on the grid")
        return problems


@dataclass
class AdmissibilityResult:
    values: list[float]
    admissible: bool


def check_scaling_admissible(law: ScalingLaw, eps_grid, dim: int) -> AdmissibilityResult:
    """Per-eps value of (eps*eta*varkappa + eta^(dim-1)/eps) * mu and a decay verdict.

    The verdict is a necessary-condition check on the finite grid: the values
    must be identically zero, or strictly decrease and at least halve from the
    first grid point to the last.
    """
    if dim < 2:
        raise ValueError("dim must be at least 2")
    eps_grid = list(eps_grid)
    if not eps_grid or any(e <= 0 for e in eps_grid):
        raise ValueError("eps_grid must be positive")
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid must be strictly decreasing")
    vals = []
    for e in eps_grid:
        eta = law.eta(e)
        vals.append((e * eta * varkappa(eta, dim) + eta ** (dim - 1) / e) * law.mu(e))
    if all(v == 0.0 for v in vals):
        return AdmissibilityResult(vals, True)
    decreasing = all(b < a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    return AdmissibilityResult(vals, decreasing and vals[-1] <= 0.5 * vals[0])


# ---------------------------------------------------------------------------
# full problem description
# ---------------------------------------------------------------------------

F_PRESETS = {
    "zero": lambda x, y: np.zeros_like(np.asarray(x, dtype=float), dtype=complex),
    "one": lambda x, y: np.ones_like(np.asarray(x, dtype=float), dtype=complex),
    "sine": lambda x, y: (2 * np.pi ** 2 + 1) * np.sin(np.pi * x) * np.sin(np.pi * y)
                         + 0j,
    "bump": lambda x, y: np.exp(-((x - 0.5) ** 2 + (y - 0.5) ** 2) / 0.08) + 0j,
}


@dataclass
class ProblemSpec:
    """Everything needed to pose the perturbed problem on one perforation."""

    coefficients: Coefficients
    nonlinearity: RobinNonlinearity
    lam: complex
    f: object                        # callable (x, y) -> complex
    perforation: Perforation | None = None
    lambda0: float = -1.0

    def __post_init__(self):
        if complex(self.lam).real > self.lambda0 + 1e-12:
            raise GeometryError(
                f"Re(lambda) = {complex(self.lam).real:g} exceeds the declared "
                f"coercive shift lambda0 = {self.lambda0:g}")
        self.f = _as_field(self.f)
