"""Sweep orchestration: generate geometry per eps, solve both problems,
compare against the rate bounds, fit empirical slopes, emit reports.

Rows of a sweep are independent; geometry is re-sampled per eps with a seed
derived from (seed, row index) so runs are reproducible yet the perforations
are independent across eps.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedScalingError
from .geometry import DomainSpec, generate_perforation
from .meshing import mesh_perforated, mesh_unperforated
from .metrics import error_norms, lemma_constant
from .problem import (Coefficients, ProblemSpec, ScalingLaw, check_scaling_admissible,
                      coefficient_preset, nonlinearity_preset, F_PRESETS)
from .solver import p1_mass, p1_stiffness, solve_homogenized, solve_perturbed
from .theory import bound_l2, bound_w1

CSV_HEADER = "epsilon,eta,mu,h,error_l2,error_h1,bound_w1,bound_l2,ratio_h1,picard_iters"


def default_mesh_rule(eps: float, eta: float, h0: float = 0.05) -> float:
    """Far-field edge-length target.

    Near-cavity resolution min(h, eps*eta/4) is applied by the mesher itself,
    so the global target only needs to resolve the inter-cavity scale; eps/3
    keeps a few elements between neighboring guard balls.
    """
    return min(h0, eps / 3.0)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    eps_list: tuple
    law: ScalingLaw
    domain: object = "unit_square"        # preset name or DomainSpec
    coefficients: object = "laplacian"    # preset name or Coefficients
    nonlinearity: str = "zero"            # preset family; mu comes from the law
    lam: complex = -1.0
    f: object = "sine"                    # preset name or callable
    radii: tuple = (0.5, 1.0, 1.5)
    mesh_rule: object = None              # callable (eps, eta) -> h
    seed: int = 0
    dim: int = 2
    segments_per_cavity: int = 32
    target_count: object = "fill"         # "fill", an int, or a callable eps -> int
    shapes: tuple = ("unit_disk",)
    lemma_ids: tuple = ()
    compare_mu_zero: bool = False
    sanity_row: bool = True
    threads: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if any(not (0 < e < 1) for e in eps):
            raise ValueError("eps_list entries must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        self.eps_list = eps
        if self.mesh_rule is None:
            self.mesh_rule = default_mesh_rule
        problems = self.law.validate_on(eps)
        if problems:
            raise ValueError("; ".join(problems))

    def resolve_domain(self) -> DomainSpec:
        if isinstance(self.domain, DomainSpec):
            return self.domain
        if self.domain == "unit_square":
            return DomainSpec.unit_square()
        if self.domain == "disk":
            return DomainSpec.disk()
        raise KeyError(f"unknown domain preset {self.domain!r}")

    def resolve_coefficients(self) -> Coefficients:
        if isinstance(self.coefficients, Coefficients):
            return self.coefficients
        return coefficient_preset(self.coefficients)

    def resolve_f(self):
        if callable(self.f):
            return self.f
        return F_PRESETS[self.f]


# ---------------------------------------------------------------------------
# report rows
# ---------------------------------------------------------------------------

@dataclass
class SweepRow:
    epsilon: float
    eta: float
    mu: float
    h: float
    error_l2: float | None = None
    error_h1: float | None = None
    bound_w1_total: float | None = None
    bound_l2_total: float | None = None
    ratio_h1: float | None = None           # None encodes "degenerate"
    picard_iters: int | None = None
    contraction: float | None = None
    n_cavities: int | None = None
    n_vertices: int | None = None
    robin_vs_neumann_h1: float | None = None
    lemma_constants: dict = field(default_factory=dict)
    failure: str | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_dict(d: dict) -> "SweepRow":
        return SweepRow(**d)

    def csv_line(self) -> str:
        def num(v):
            return "" if v is None else repr(float(v))
        ratio = "degenerate" if (self.failure is None and self.ratio_h1 is None) \
            else num(self.ratio_h1)
        picard = "" if self.picard_iters is None else str(self.picard_iters)
        return ",".join([repr(float(self.epsilon)), repr(float(self.eta)),
                         repr(float(self.mu)), repr(float(self.h)),
                         num(self.error_l2), num(self.error_h1),
                         num(self.bound_w1_total), num(self.bound_l2_total),
                         ratio, picard])


@dataclass
class SweepReport:
    rows: list
    fitted: dict
    admissibility: dict
    config_echo: dict
    sanity: dict | None = None

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "fitted": self.fitted,
                "admissibility": self.admissibility, "config_echo": self.config_echo,
                "sanity": self.sanity}

    @staticmethod
    def from_dict(d: dict) -> "SweepReport":
        return SweepReport([SweepRow.from_dict(r) for r in d["rows"]], d["fitted"],
                           d["admissibility"], d["config_echo"], d.get("sanity"))

    def to_csv(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv_line() for r in self.rows]) + "\n"


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

def fit_rate(points) -> dict:
    """Log-log least squares; residual is the RMS of log deviations."""
    points = [(float(e), float(v)) for e, v in points]
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit a rate")
    if any(v <= 0 for _, v in points):
        raise ValueError("rate fitting requires positive values")
    x = np.log([e for e, _ in points])
    y = np.log([v for _, v in points])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ (slope, intercept) - y) ** 2)))
    return {"slope": float(slope), "intercept": float(intercept), "residual": resid}


def _monomial_exponents(law: ScalingLaw, dim: int, which: str):
    if not law.is_power:
        raise UnsupportedScalingError("slope prediction needs a power-law scaling")
    g, d = law.gamma, law.delta
    out = {}   # label -> (exponent, log_flag)
    mu_active = not math.isinf(d)
    if which == "w1":
        if mu_active:
            if dim >= 4:
                out["t1"] = (2 + 2 * g + d, dim == 4)
            out["t2"] = (g * dim / 2 + d, dim == 2)
            out["t3"] = (-1 + g * (dim - 1) + d, False)
        out["t4"] = (1 + g, dim == 2)
        out["t5"] = (g * dim / 2, False)
    elif which == "l2":
        if mu_active:
            if dim >= 4:
                out["l1"] = (2 + 2 * g + d, dim == 4)
            out["l2"] = (g * dim / 2 + d, dim == 2)
            out["l3"] = (-1 + g * (dim - 1) + d, False)
        out["l4"] = (2 + 2 * g, dim == 2)
        out["l5"] = (g * dim, False)
    else:
        raise ValueError("which must be 'w1' or 'l2'")
    return out


def predicted_dominant_slope(law: ScalingLaw, dim: int, which: str) -> dict:
    """Smallest eps-exponent among the active rate monomials under the law.

    Logarithmic factors are reported as flags per monomial, never folded into
    exponents.  The weaker-norm prediction covers the bulk-data group only.
    """
    exps = _monomial_exponents(law, dim, which)
    slope = min(e for e, _ in exps.values())
    return {"slope": slope,
            "exponents": {k: e for k, (e, _) in exps.items()},
            "log_flags": {k: fl for k, (_, fl) in exps.items()}}


# ---------------------------------------------------------------------------
# the sweep itself
# ---------------------------------------------------------------------------

def _row_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, index)).generate_state(1)[0])


def _run_row(config: ExperimentConfig, index: int, eps: float,
             h_override: float | None = None) -> SweepRow:
    eta = config.law.eta(eps)
    mu = config.law.mu(eps)
    h = h_override if h_override is not None else config.mesh_rule(eps, eta)
    row = SweepRow(epsilon=eps, eta=eta, mu=mu, h=h)
    domain = config.resolve_domain()
    coeffs = config.resolve_coefficients()
    f = config.resolve_f()

    target = config.target_count
    if callable(target):
        target = target(eps)

    stage = "generate"
    try:
        perf = generate_perforation(domain, eps, eta, config.radii,
                                    target, _row_seed(config.seed, index),
                                    shapes=config.shapes)
        row.n_cavities = len(perf.cavities)

        stage = "mesh"
        perf_mesh = mesh_perforated(perf, h, config.segments_per_cavity)
        base_mesh = mesh_unperforated(domain, h)
        row.n_vertices = perf_mesh.n_vertices

        stage = "solve_perturbed"
        nl = nonlinearity_preset(config.nonlinearity, mu) if mu > 0 \
            else nonlinearity_preset("zero")
        spec = ProblemSpec(coeffs, nl, config.lam, f, perf)
        res_eps = solve_perturbed(spec, perf_mesh)
        row.picard_iters = res_eps.picard_iterations
        row.contraction = res_eps.contraction_estimate

        stage = "solve_homogenized"
        res_0 = solve_homogenized(coeffs, config.lam, f, base_mesh)

        stage = "norms"
        en = error_norms(res_eps, res_0, perf_mesh, f)
        row.error_l2, row.error_h1 = en.l2, en.h1

        stage = "bounds"
        row.bound_w1_total = bound_w1(eps, eta, mu, config.dim).total
        row.bound_l2_total = bound_l2(eps, eta, mu, config.dim,
                                      en.f_l2_omega, en.f_l2_theta).total
        if en.h1 > 0 and row.bound_w1_total > 0:
            row.ratio_h1 = en.h1 / row.bound_w1_total

        if config.compare_mu_zero and mu > 0:
            stage = "robin_comparison"
            spec0 = ProblemSpec(coeffs, nonlinearity_preset("zero"), config.lam, f, perf)
            res_mu0 = solve_perturbed(spec0, perf_mesh)
            d = res_eps.solution.values - res_mu0.solution.values
            gram = p1_mass(perf_mesh) + p1_stiffness(perf_mesh)
            row.robin_vs_neumann_h1 = math.sqrt(max(0.0, float(
                np.real(np.vdot(d, gram @ d)))))

        for lid in config.lemma_ids:
            stage = f"lemma_{lid}"
            lc = lemma_constant(lid, eps, eta, config.shapes[0], radii=config.radii)
            row.lemma_constants[lid] = lc.best_constant
    except Exception as exc:
        row.failure = f"{stage}: {exc}"
    return row


def run_sweep(config: ExperimentConfig) -> SweepReport:
    """Run one row per eps (concurrently when config.threads > 1), fit the
    observed slopes and attach the admissibility verdict."""
    adm = check_scaling_admissible(config.law, config.eps_list, config.dim)

    jobs = [(i, e, None) for i, e in enumerate(config.eps_list)]
    sanity_job = None
    if config.sanity_row:
        e0 = config.eps_list[0]
        sanity_job = (0, e0, 0.5 * config.mesh_rule(e0, config.law.eta(e0)))

    def run(job):
        return _run_row(config, job[0], job[1], job[2])

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(run, jobs))
            sanity = run(sanity_job) if sanity_job else None
    else:
        rows = [run(j) for j in jobs]
        sanity = run(sanity_job) if sanity_job else None

    fitted = {"observed_h1_slope": None, "observed_l2_slope": None,
              "predicted_dominant_slope": None, "h1_fit": None, "l2_fit": None}
    good = [r for r in rows if r.failure is None and r.error_h1 and r.error_l2]
    if len(good) >= 3:
        fit_h1 = fit_rate([(r.epsilon, r.error_h1) for r in good])
        fit_l2 = fit_rate([(r.epsilon, r.error_l2) for r in good])
        fitted.update(observed_h1_slope=fit_h1["slope"], observed_l2_slope=fit_l2["slope"],
                      h1_fit=fit_h1, l2_fit=fit_l2)
    if config.law.is_power:
        fitted["predicted_dominant_slope"] = \
            predicted_dominant_slope(config.law, config.dim, "w1")["slope"]

    sanity_dict = None
    if sanity is not None and sanity.failure is None and rows[0].failure is None \
            and rows[0].error_h1:
        sanity_dict = {
            "epsilon": sanity.epsilon, "h": sanity.h,
            "error_h1": sanity.error_h1, "error_l2": sanity.error_l2,
            "h1_change_rel": abs(sanity.error_h1 - rows[0].error_h1) / rows[0].error_h1,
            "l2_change_rel": abs(sanity.error_l2 - rows[0].error_l2) / rows[0].error_l2,
        }

    echo = {
        "eps_list": list(config.eps_list), "law": config.law.description,
        "domain": config.domain if isinstance(config.domain, str) else "custom",
        "coefficients": config.coefficients if isinstance(config.coefficients, str)
                        else getattr(config.coefficients, "name", "custom"),
        "nonlinearity": config.nonlinearity,
        "lam": [complex(config.lam).real, complex(config.lam).imag],
        "f": config.f if isinstance(config.f, str) else "custom",
        "radii": list(config.radii), "seed": config.seed, "dim": config.dim,
        "segments_per_cavity": config.segments_per_cavity,
        "shapes": list(config.shapes),
    }
    return SweepReport(rows, fitted, {"values": adm.values, "admissible": adm.admissible},
                       echo, sanity_dict)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _svg_loglog(series, path, width=640, height=480, margin=60):
    """Minimal hand-rolled SVG: one polyline per series on log-log axes."""
    finite = [(x, y) for _, pts in series for x, y in pts if x > 0 and y > 0]
    if not finite:
        with open(path, "w") as fh:
            fh.write('<svg xmlns="http://www.w3.org/2000/svg"/>\n')
        return
    lx = [math.log10(x) for x, _ in finite]
    ly = [math.log10(y) for _, y in finite]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    spanx = max(x1, x0 + 1e-9) - x0
    spany = max(y1, y0 + 1e-9) - y0

    def sx(x):
        return margin + (math.log10(x) - x0) / spanx * (width - 2 * margin)

    def sy(y):
        return height - margin - (math.log10(y) - y0) / spany * (height - 2 * margin)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
             f'y2="{height - margin}" stroke="black"/>',
             f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
             f'y2="{height - margin}" stroke="black"/>']
    for i, (name, pts) in enumerate(series):
        pts = sorted((x, y) for x, y in pts if x > 0 and y > 0)
        if not pts:
            continue
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        col = colors[i % len(colors)]
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{col}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{width - margin + 4}" y="{margin + 16 * i}" '
                     f'fill="{col}" font-size="12">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_report(report: SweepReport, out_dir: str,
                formats=("csv", "json", "plot", "svg")) -> dict:
    """Write the report files; returns {format: path}."""
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    if "csv" in formats:
        path = os.path.join(out_dir, "report.csv")
        with open(path, "w") as fh:
            fh.write(report.to_csv())
        written["csv"] = path
    if "json" in formats:
        path = os.path.join(out_dir, "report.json")
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        written["json"] = path
    good = [r for r in report.rows if r.failure is None]
    series = {
        "error_h1": [(r.epsilon, r.error_h1) for r in good if r.error_h1],
        "error_l2": [(r.epsilon, r.error_l2) for r in good if r.error_l2],
        "bound_w1": [(r.epsilon, r.bound_w1_total) for r in good if r.bound_w1_total],
        "bound_l2": [(r.epsilon, r.bound_l2_total) for r in good if r.bound_l2_total],
    }
    if "plot" in formats:
        for name, pts in series.items():
            path = os.path.join(out_dir, f"{name}.dat")
            with open(path, "w") as fh:
                for x, y in pts:
                    fh.write(f"{x!r} {y!r}\n")
            written[name] = path
    if "svg" in formats:
        path = os.path.join(out_dir, "report.svg")
        _svg_loglog([("error_h1", series["error_h1"]),
                     ("bound_w1", series["bound_w1"])], path)
        written["svg"] = path
    return written
