"""Command-line front end.

Subcommands: generate, validate, solve, sweep, bound, lemma-constants,
sharpness, report.  Sweep and solve read a TOML config; exit codes are 0 on
success, 2 on validation failure, 3 on solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from .errors import GeometryError, SolverError
from .geometry import DomainSpec, Perforation, generate_perforation, validate_a1
from .harness import ExperimentConfig, SweepReport, emit_report, run_sweep
from .meshing import mesh_perforated
from .metrics import LEMMA_IDS, lemma_constant
from .problem import (ProblemSpec, ScalingLaw, coefficient_preset,
                      nonlinearity_preset, F_PRESETS)
from .solver import solve_perturbed, write_solution
from .theory import bound_l2, bound_w1, sharpness_neumann

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _domain_from_args(name: str) -> DomainSpec:
    if name == "unit_square":
        return DomainSpec.unit_square()
    if name == "disk":
        return DomainSpec.disk()
    raise GeometryError(f"unknown domain {name!r}")


def _load_toml(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _law_from_table(tab: dict) -> ScalingLaw:
    gamma = float(tab.get("eta_gamma", 1.0))
    if "mu_delta" in tab:
        return ScalingLaw.power(gamma, float(tab["mu_delta"]),
                                float(tab.get("mu_coeff", 1.0)))
    return ScalingLaw.power(gamma)


def _config_from_toml(path: str, seed=None, threads=None, out=None) -> ExperimentConfig:
    tab = _load_toml(path).get("sweep", {})
    if not tab:
        raise GeometryError(f"config {path!r} has no [sweep] table")
    h0 = float(tab.get("h0", 0.05))
    divisor = float(tab.get("eps_divisor", 3.0))
    target = tab.get("target_count", "fill")
    density = tab.get("target_density")
    if density is not None:
        target = (lambda c: (lambda eps: max(1, round(c / eps ** 2))))(float(density))
    return ExperimentConfig(
        eps_list=tuple(tab["eps_list"]),
        law=_law_from_table(tab),
        domain=tab.get("domain", "unit_square"),
        coefficients=tab.get("coefficients", "laplacian"),
        nonlinearity=tab.get("nonlinearity", "zero"),
        lam=complex(float(tab.get("lambda_re", -1.0)), float(tab.get("lambda_im", 0.0))),
        f=tab.get("f", "sine"),
        radii=tuple(tab.get("radii", (0.5, 1.0, 1.5))),
        mesh_rule=lambda eps, eta: min(h0, eps / divisor),
        seed=int(seed if seed is not None else tab.get("seed", 0)),
        segments_per_cavity=int(tab.get("segments_per_cavity", 32)),
        target_count=target,
        shapes=tuple(tab.get("shapes", ("unit_disk",))),
        lemma_ids=tuple(tab.get("lemma_ids", ())),
        compare_mu_zero=bool(tab.get("compare_mu_zero", False)),
        sanity_row=bool(tab.get("sanity_row", True)),
        threads=int(threads if threads is not None else tab.get("threads", 1)),
        out_dir=out,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_generate(args) -> int:
    radii = tuple(float(t) for t in args.radii.split(","))
    target = "fill" if args.fill or args.count is None else args.count
    perf = generate_perforation(_domain_from_args(args.domain), args.eps, args.eta,
                                radii, target, args.seed,
                                shapes=tuple(args.shapes.split(",")))
    perf.to_json(args.out)
    print(f"wrote {args.out}: {len(perf.cavities)} cavities, scale {perf.scale:g}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    perf = Perforation.from_json(args.infile)
    report = validate_a1(perf)
    if not report.violations:
        print(f"valid: {len(perf.cavities)} cavities satisfy the admissibility conditions")
        return EXIT_OK
    for v in report.violations:
        print(f"violation: {v}")
    return EXIT_VALIDATION


def _cmd_solve(args) -> int:
    tab = _load_toml(args.config).get("solve", {})
    if not tab:
        raise GeometryError(f"config {args.config!r} has no [solve] table")
    domain = _domain_from_args(tab.get("domain", "unit_square"))
    eps, eta = float(tab["eps"]), float(tab["eta"])
    perf = generate_perforation(domain, eps, eta,
                                tuple(tab.get("radii", (0.5, 1.0, 1.5))),
                                tab.get("target_count", "fill"),
                                int(tab.get("seed", 0)),
                                shapes=tuple(tab.get("shapes", ("unit_disk",))))
    mesh = mesh_perforated(perf, float(tab.get("h", min(0.05, eps / 3.0))),
                           int(tab.get("segments_per_cavity", 32)))
    mu = float(tab.get("mu", 0.0))
    nl = nonlinearity_preset(tab.get("nonlinearity", "linear" if mu else "zero"), mu)
    spec = ProblemSpec(coefficient_preset(tab.get("coefficients", "laplacian")), nl,
                       complex(float(tab.get("lambda_re", -1.0)),
                               float(tab.get("lambda_im", 0.0))),
                       F_PRESETS[tab.get("f", "sine")], perf)
    result = solve_perturbed(spec, mesh, tol=float(tab.get("tol", 1e-10)),
                             max_iter=int(tab.get("max_iter", 100)))
    write_solution(result, args.out)
    print(f"wrote {args.out}.json / .bin: {result.picard_iterations} iterations, "
          f"{mesh.n_vertices} vertices")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _config_from_toml(args.config, args.seed, args.threads, args.out)
    report = run_sweep(config)
    written = emit_report(report, args.out)
    failures = [r.failure for r in report.rows if r.failure]
    for f in failures:
        print(f"row failure: {f}")
    print(f"wrote {written['csv']}")
    if report.fitted["observed_h1_slope"] is not None:
        print(f"observed slopes: h1 {report.fitted['observed_h1_slope']:.3f}, "
              f"l2 {report.fitted['observed_l2_slope']:.3f} "
              f"(predicted {report.fitted['predicted_dominant_slope']})")
    print(f"admissible scaling: {report.admissibility['admissible']}")
    return EXIT_OK if not failures else EXIT_SOLVER


def _cmd_bound(args) -> int:
    if args.l2:
        rb = bound_l2(args.eps, args.eta, args.mu, args.dim, args.f_omega, args.f_theta)
    else:
        rb = bound_w1(args.eps, args.eta, args.mu, args.dim)
    for label, value in rb.terms:
        print(f"{label:>4}  {value:.12e}")
    print(f"{'sum':>4}  {rb.total:.12e}")
    return EXIT_OK


def _cmd_lemma(args) -> int:
    lc = lemma_constant(args.lemma, args.eps, args.eta, args.shape, args.resolution)
    line = (f"{lc.lemma_id},{lc.epsilon!r},{lc.eta!r},{lc.best_constant!r},"
            f"{lc.eigen_residual!r}")
    if args.out:
        new = not os.path.exists(args.out)
        with open(args.out, "a") as fh:
            if new:
                fh.write("lemma_id,epsilon,eta,best_constant,residual\n")
            fh.write(line + "\n")
    print(line)
    return EXIT_OK


def _cmd_sharpness(args) -> int:
    out = sharpness_neumann(args.eps, args.eta, args.resolution)
    for k, v in out.items():
        print(f"{k}: {v:.6e}")
    return EXIT_OK


def _cmd_report(args) -> int:
    with open(args.infile) as fh:
        report = SweepReport.from_dict(json.load(fh))
    written = emit_report(report, args.out, tuple(args.formats.split(",")))
    print("wrote " + ", ".join(sorted(written.values())))
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perfhom",
                                description="perforated-domain homogenization lab")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a perforation and write JSON")
    g.add_argument("--domain", default="unit_square", choices=("unit_square", "disk"))
    g.add_argument("--eps", type=float, required=True)
    g.add_argument("--eta", type=float, required=True)
    g.add_argument("--radii", default="0.5,1.0,1.5")
    g.add_argument("--count", type=int, default=None)
    g.add_argument("--fill", action="store_true")
    g.add_argument("--shapes", default="unit_disk")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="perforation.json")
    g.set_defaults(fn=_cmd_generate)

    v = sub.add_parser("validate", help="check a perforation JSON file")
    v.add_argument("--in", dest="infile", required=True)
    v.set_defaults(fn=_cmd_validate)

    s = sub.add_parser("solve", help="solve one perturbed problem from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="solution")
    s.set_defaults(fn=_cmd_solve)

    w = sub.add_parser("sweep", help="run an eps sweep from a TOML config")
    w.add_argument("--config", required=True)
    w.add_argument("--out", default="sweep_out")
    w.add_argument("--seed", type=int, default=None)
    w.add_argument("--threads", type=int, default=None)
    w.set_defaults(fn=_cmd_sweep)

    b = sub.add_parser("bound", help="print the rate-bound terms")
    b.add_argument("--dim", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--eta", type=float, required=True)
    b.add_argument("--mu", type=float, default=0.0)
    b.add_argument("--l2", action="store_true")
    b.add_argument("--f-omega", dest="f_omega", type=float, default=1.0)
    b.add_argument("--f-theta", dest="f_theta", type=float, default=0.0)
    b.set_defaults(fn=_cmd_bound)

    m = sub.add_parser("lemma-constants", help="best constant of a trace inequality")
    m.add_argument("--lemma", required=True, choices=LEMMA_IDS)
    m.add_argument("--eps", type=float, required=True)
    m.add_argument("--eta", type=float, required=True)
    m.add_argument("--shape", default="unit_disk")
    m.add_argument("--resolution", type=int, default=20)
    m.add_argument("--out", default=None, help="CSV file to append to")
    m.set_defaults(fn=_cmd_lemma)

    h = sub.add_parser("sharpness", help="lower-bound construction diagnostics")
    h.add_argument("--eps", type=float, required=True)
    h.add_argument("--eta", type=float, required=True)
    h.add_argument("--resolution", type=int, default=64)
    h.set_defaults(fn=_cmd_sharpness)

    r = sub.add_parser("report", help="re-emit report files from a report JSON")
    r.add_argument("--in", dest="infile", required=True)
    r.add_argument("--out", default="report_out")
    r.add_argument("--formats", default="csv,json,plot,svg")
    r.set_defaults(fn=_cmd_report)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (GeometryError, KeyError, ValueError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
