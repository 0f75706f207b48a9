"""Closed-form layer: dimension-dependent log factors, rate-bound evaluators,
decaying radial profiles, and the desk-scale sharpness construction.

The rate formulas are parametric in the spatial dimension even though solves
are only performed in dimension 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.special import k0, k1, kv

from .errors import UnsupportedScalingError


def _check_dim(dim: int) -> int:
    dim = int(dim)
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    return dim


def kappa(eta: float, dim: int) -> float:
    """Log factor multiplying the eps^2 eta^2 mu rate term.

    0 in dimensions 2 and 3, sqrt(|ln eta|) in dimension 4, 1 from 5 on.
    """
    dim = _check_dim(dim)
    if not (0 < eta <= 1):
        raise ValueError("eta must lie in (0, 1]")
    if dim in (2, 3):
        return 0.0
    if dim == 4:
        return math.sqrt(abs(math.log(eta)))
    return 1.0


def varkappa(eta: float, dim: int) -> float:
    """Log factor of the two-dimensional trace inequality: |ln eta| in
    dimension 2, and 1 in dimension 3 and higher."""
    dim = _check_dim(dim)
    if not (0 < eta <= 1):
        raise ValueError("eta must lie in (0, 1]")
    if dim == 2:
        return abs(math.log(eta))
    return 1.0


# ---------------------------------------------------------------------------
# rate bounds
# ---------------------------------------------------------------------------

@dataclass
class RateBound:
    """Term-by-term evaluation of a convergence-rate bound (constants dropped)."""

    dim: int
    terms: list          # [(label, value), ...]

    def __post_init__(self):
        if any(v < 0 for _, v in self.terms):
            raise ValueError("rate terms must be nonnegative")
        self.total = sum(v for _, v in self.terms)

    def term(self, label: str) -> float:
        for lbl, v in self.terms:
            if lbl == label:
                return v
        raise KeyError(label)


def bound_w1(epsilon: float, eta: float, mu: float, dim: int) -> RateBound:
    """Gradient-norm rate: (e2h2k + h^{n/2} vk^{1/2} + h^{n-1}/e) mu + e h vk^{1/2} + h^{n/2}."""
    dim = _check_dim(dim)
    k = kappa(eta, dim)
    vk = varkappa(eta, dim)
    terms = [
        ("t1", epsilon ** 2 * eta ** 2 * k * mu),
        ("t2", eta ** (dim / 2) * math.sqrt(vk) * mu),
        ("t3", eta ** (dim - 1) / epsilon * mu),
        ("t4", epsilon * eta * math.sqrt(vk)),
        ("t5", eta ** (dim / 2)),
    ]
    return RateBound(dim, terms)


def bound_l2(epsilon: float, eta: float, mu: float, dim: int,
             f_norm_omega: float, f_norm_theta: float) -> RateBound:
    """Weaker-norm rate; weights the bulk and cavity-region norms of the data."""
    dim = _check_dim(dim)
    if f_norm_omega < 0 or f_norm_theta < 0:
        raise ValueError("data norms must be nonnegative")
    k = kappa(eta, dim)
    vk = varkappa(eta, dim)
    fo, ft = f_norm_omega, f_norm_theta
    terms = [
        ("l1", epsilon ** 2 * eta ** 2 * k * mu * fo),
        ("l2", eta ** (dim / 2) * math.sqrt(vk) * mu * fo),
        ("l3", eta ** (dim - 1) / epsilon * mu * fo),
        ("l4", epsilon ** 2 * eta ** 2 * vk * fo),
        ("l5", eta ** dim * fo),
        ("l6", epsilon * eta * math.sqrt(vk) * ft),
        ("l7", eta ** (dim / 2) * ft),
    ]
    return RateBound(dim, terms)


# ---------------------------------------------------------------------------
# decaying radial profile: -X'' - (n-1)/r X' + X = 0
# ---------------------------------------------------------------------------

def radial_X(r, dim: int):
    """Exponentially decaying solution, normalized by its leading behavior
    at zero: r^(2-dim) with unit coefficient (dim >= 3), -ln r for dim 2.

    dim 3 reduces to exp(-r)/r in closed form; other dimensions evaluate a
    modified Bessel function of the second kind.
    """
    dim = _check_dim(dim)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    if dim == 2:
        return k0(r)
    nu = dim / 2.0 - 1.0
    norm = 1.0 / (2.0 ** (nu - 1.0) * _gamma_fn(nu))
    return norm * r ** (-nu) * kv(nu, r)


def radial_X_deriv(r, dim: int):
    """d/dr of :func:`radial_X` (closed form via the Bessel recurrence)."""
    dim = _check_dim(dim)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    if dim == 2:
        return -k1(r)
    nu = dim / 2.0 - 1.0
    norm = 1.0 / (2.0 ** (nu - 1.0) * _gamma_fn(nu))
    return -norm * r ** (-nu) * kv(nu + 1.0, r)


def auxiliary_X(x_norm, epsilon: float, eta: float, dim: int, r3: float = 1.5):
    """Piecewise radial profile with unit Laplacian in the small ball
    B(r3*eps*eta), harmonic in the shell up to |x| = r3*eps, zero there.

    Only defined for dim >= 3 (the shell branch divides by 2-dim).
    """
    dim = _check_dim(dim)
    if dim == 2:
        raise ValueError("auxiliary profile unsupported in dimension 2")
    if not (0 < eta <= 1) or epsilon <= 0:
        raise ValueError("need epsilon > 0 and eta in (0, 1]")
    x = np.asarray(x_norm, dtype=float)
    r_out = r3 * epsilon
    r_in = r3 * epsilon * eta
    if np.any(x < 0) or np.any(x > r_out * (1 + 1e-12)):
        raise ValueError("x_norm must lie in [0, r3*eps]")
    n = dim
    const = r3 ** 2 * epsilon ** 2 * eta ** n / (n * (2.0 - n)) * (eta ** (2 - n) - 1.0)
    inner = (x ** 2 - r_in ** 2) / (2.0 * n) + const
    with np.errstate(divide="ignore", invalid="ignore"):
        shell = (r3 ** 2 * epsilon ** 2 * eta ** n / (n * (2.0 - n))
                 * ((r_out / np.where(x > 0, x, 1.0)) ** (n - 2) - 1.0))
    return np.where(x <= r_in, inner, shell)


def corrector_alpha(epsilon: float, eta: float, mu: float, dim: int):
    """Amplitudes (alpha_0, alpha_j) of the periodic two-scale corrector."""
    dim = _check_dim(dim)
    e, h = float(epsilon), float(eta)
    if not (0 < e < 1 and 0 < h < 1):
        raise ValueError("epsilon and eta must lie in (0, 1)")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    n = dim
    if n >= 3:
        a0 = e * h ** (n - 1) * mu / (1.0 + e * h * mu / (n - 2))
        aj = (1.0 + a0 / ((2.0 - n) * h ** (n - 2))) * e * h ** n / (n - 1.0 + e * h * mu)
    else:
        ln = math.log(h)
        a0 = e * h * mu / (1.0 - e * h * mu * ln)
        aj = (1.0 + a0 * ln) / (1.0 + e * h * mu) * e * h ** 2
    return a0, aj


# ---------------------------------------------------------------------------
# smooth cutoffs and the boundary-layer data profile
# ---------------------------------------------------------------------------

def _smoothstep(t):
    """Quintic step: 0 below 0, 1 above 1, C^2 across."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def _smoothstep_d1(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * tc ** 2 * (1.0 - tc) ** 2, 0.0)


def _smoothstep_d2(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 60.0 * tc * (1.0 - tc) * (1.0 - 2.0 * tc), 0.0)


def chi1(t):
    """Radial cutoff: 1 for |t| < 1/2, 0 for |t| > 2/3."""
    return 1.0 - _smoothstep((np.abs(t) - 0.5) * 6.0)


def chi1_deriv(t):
    t = np.asarray(t, dtype=float)
    return -_smoothstep_d1((np.abs(t) - 0.5) * 6.0) * 6.0 * np.sign(t)


_S_LO, _S_W = 1.02, 0.08   # bump cutoff: 1 up to 1.02, 0 beyond 1.1


def bump_profile(rho):
    """(rho - 1) * s(rho): vanishes at rho = 1 with unit radial slope there,
    supported in [1, 1.1]."""
    rho = np.asarray(rho, dtype=float)
    s = 1.0 - _smoothstep((rho - _S_LO) / _S_W)
    return np.where(rho >= 1.0, (rho - 1.0) * s, 0.0)


def bump_profile_d1(rho):
    rho = np.asarray(rho, dtype=float)
    s = 1.0 - _smoothstep((rho - _S_LO) / _S_W)
    ds = -_smoothstep_d1((rho - _S_LO) / _S_W) / _S_W
    return np.where(rho >= 1.0, s + (rho - 1.0) * ds, 0.0)


def bump_profile_d2(rho):
    rho = np.asarray(rho, dtype=float)
    ds = -_smoothstep_d1((rho - _S_LO) / _S_W) / _S_W
    dss = -_smoothstep_d2((rho - _S_LO) / _S_W) / _S_W ** 2
    return np.where(rho >= 1.0, 2.0 * ds + (rho - 1.0) * dss, 0.0)


# ---------------------------------------------------------------------------
# first sharpness construction (dimension 2)
# ---------------------------------------------------------------------------

def _gauss_panels(edges, order: int = 8):
    """Gauss-Legendre nodes/weights on consecutive panels given by ``edges``."""
    x, w = np.polynomial.legendre.leggauss(order)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * np.broadcast_to(w, nodes.shape)
    return nodes.ravel(), weights.ravel()


def _sharpness_values(epsilon: float, eta: float, panels: int):
    s = epsilon * eta

    # data profile concentrated on the scaled shell [s, 1.1 s]
    r, w = _gauss_panels(np.linspace(s, 1.1 * s, panels + 1))
    rho = r / s
    lap = (bump_profile_d2(rho) + bump_profile_d1(rho) / rho) / s ** 2
    f0 = -lap + bump_profile(rho)
    f_norm = math.sqrt(float(np.sum(w * np.abs(f0) ** 2 * 2.0 * math.pi * r)))

    # corrector (X * chi1) scaled by 1/(s X'(s)); integrand ~ 1/r^2 near s,
    # so panels are log-spaced up to the cutoff ring
    amp = 1.0 / (s * radial_X_deriv(s, 2))
    edges_core = np.exp(np.linspace(math.log(s), math.log(0.5), 2 * panels + 1))
    edges_ring = np.linspace(0.5, 2.0 / 3.0, panels + 1)
    r = np.concatenate([_gauss_panels(edges_core)[0], _gauss_panels(edges_ring)[0]])
    w = np.concatenate([_gauss_panels(edges_core)[1], _gauss_panels(edges_ring)[1]])
    g = radial_X_deriv(r, 2) * chi1(r) + radial_X(r, 2) * chi1_deriv(r)
    grad_norm = abs(amp) * math.sqrt(float(np.sum(w * g ** 2 * 2.0 * math.pi * r)))
    return f_norm, grad_norm


def sharpness_neumann(epsilon: float, eta: float, quadrature_resolution: int = 64) -> dict:
    """Desk-scale lower-bound construction around a single cavity (dimension 2).

    Returns the quadratured norm of the concentrated data, the gradient norm
    of the boundary-layer corrector, and their ratio normalized by the
    eps*eta*sqrt(|ln eta|) rate monomial.  The ratio staying bounded below
    along an eps sweep is the assertable sharpness statement.
    """
    if not (0 < eta < 1) or not (0 < epsilon < 1):
        raise ValueError("epsilon and eta must lie in (0, 1)")
    if epsilon * eta >= 0.25:
        raise ValueError("need eps*eta < 1/4 so the data shell and cutoff ring separate")
    f1, g1 = _sharpness_values(epsilon, eta, quadrature_resolution)
    f2, g2 = _sharpness_values(epsilon, eta, 2 * quadrature_resolution)
    if abs(f2 - f1) > 0.01 * f2 or abs(g2 - g1) > 0.01 * g2:
        raise ValueError("quadrature resolution insufficient: self-difference above 1%")
    vk = varkappa(eta, 2)
    ratio = g2 / (epsilon * eta * math.sqrt(vk) * f2)
    return {"f_norm_lower": f2, "corrector_grad_norm": g2, "ratio": ratio}
