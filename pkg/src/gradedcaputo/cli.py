"""Command-line entry point: ``gradedcaputo {solve,converge,stability,weights}``."""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness
from .mesh import NBAR_MAX, build_aux_mesh, build_graded_mesh, choose_Nbar
from .pde import SchemeKind
from .problems import PROBLEM_IDS, fpde2, ml_homog
from .stability import PerturbationExperiment, lemma1_audit, run_perturbation
from .weights import hl1_coefficients, l1_weights, xi_weights

SCHEMES = [s.value for s in SchemeKind]


def _read_flat(path: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + Path(path).read_text())
    except OSError as exc:
        raise SystemExit(f"cannot read config file {path}: {exc}")
    return dict(parser["run"])


def _first(value: str) -> str:
    return value.replace(";", ",").split(",")[0].strip()


def _add_nbar_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--Nbar", type=int, help="start-up sub-intervals (default: by rule)")
    p.add_argument("--Nbar-rule", choices=["order", "literal", "coarse"],
                   help="rule choosing Nbar when --Nbar is not given")
    p.add_argument("--Nbar-max", type=int, default=NBAR_MAX)
    p.add_argument("--beta-aux", type=float, help="grading of the start-up mesh (default: beta)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gradedcaputo",
                                 description="Graded-mesh L1/HL1 solvers for Caputo equations.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one solver run; writes the solution grid as CSV")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--problem", choices=PROBLEM_IDS)
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float, help="grading exponent (default: optimal)")
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int, help="spatial intervals (default: N)")
    _add_nbar_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--force", action="store_true", help="ignore the cost guardrail")
    p.add_argument("--budget", type=float, default=harness.DEFAULT_BUDGET)

    p = sub.add_parser("converge", help="convergence sweep (MAE and EOC table)")
    p.add_argument("--preset", choices=sorted(harness.PRESETS))
    p.add_argument("--config", help="flat key = value sweep file")
    p.add_argument("--problem", choices=PROBLEM_IDS)
    p.add_argument("--schemes", help="comma separated scheme list")
    p.add_argument("--alphas", help="comma separated alpha list")
    p.add_argument("--beta", help="optimal | optimal-HL1 | optimal-L1 | number")
    p.add_argument("--Ns", help="comma list or range like 2^6..2^9")
    p.add_argument("--M", help="N | N2 | fixed integer")
    p.add_argument("--Nbar-rule", choices=["order", "literal", "coarse"])
    p.add_argument("--Nbar-max", type=int)
    p.add_argument("--beta-aux", type=float)
    p.add_argument("--full", action="store_true", help="add the largest-N rows of a preset")
    p.add_argument("--jobs", type=int, help=f"worker processes (default: ${harness.JOBS_ENV} or 1)")
    p.add_argument("--timings", action="store_true", help="record run times (output not byte-stable)")
    p.add_argument("--no-audit", action="store_true", help="skip the weight-identity audits")
    p.add_argument("--budget", type=float)
    p.add_argument("--force", action="store_true", help="ignore the cost guardrail")
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("stability", help="perturbation experiment on the initial data")
    p.add_argument("--problem", choices=["fpde2", "ml_homog"], default="fpde2")
    p.add_argument("--scheme", choices=["hl1-graded", "l1-graded", "hl1-uniform", "l1-uniform"],
                   default="hl1-graded")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--M", type=int)
    p.add_argument("--mode", choices=["pointwise", "fourier"], default="fourier")
    p.add_argument("--rho", type=int, help="Fourier wave number (default: M - 1)")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-12, help="weight-identity audit tolerance")
    _add_nbar_flags(p)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("weights", help="dump zeta, xi, gamma, delta and d at one level")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--j", type=int, required=True, help="coarse level, 1..N")
    p.add_argument("--T", type=float, default=1.0)
    _add_nbar_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    return ap


# {{{ subcommands


def _cmd_solve(args) -> int:
    conf = _read_flat(args.config) if args.config else {}
    problem = args.problem or conf.get("problem")
    if problem is None:
        raise SystemExit("solve needs --problem (or problem = ... in the config file)")
    scheme = SchemeKind(args.scheme or _first(conf.get("scheme", conf.get("schemes", "hl1-graded"))))
    alpha = args.alpha if args.alpha is not None else float(_first(conf.get("alpha", conf.get("alphas", "0.5"))))
    N = args.N if args.N is not None else harness._parse_int_power(_first(conf.get("N", conf.get("Ns", "64"))))
    beta = args.beta
    if beta is None and "beta" in conf:
        beta = harness.resolve_sweep_beta(conf["beta"], scheme, alpha)
    M = args.M if args.M is not None else (int(conf["M"]) if conf.get("M", "N").isdigit() else N)
    nbar_rule = args.Nbar_rule or conf.get("Nbar_rule")
    beta_aux = args.beta_aux if args.beta_aux is not None else (
        float(conf["beta_aux"]) if conf.get("beta_aux") else None)

    cost = harness.estimate_cost(problem, scheme, alpha, N, M,
                                 beta if beta is not None else harness.resolve_sweep_beta("optimal", scheme, alpha),
                                 Nbar=args.Nbar, Nbar_rule=nbar_rule, Nbar_max=args.Nbar_max)
    if cost > args.budget and not args.force:
        print(f"estimated cost {cost:.3g} exceeds the budget {args.budget:.3g}; use --force",
              file=sys.stderr)
        return 2

    out = Path(args.out)
    err, sol = harness.run_single(problem, scheme, alpha, N, M, beta, Nbar=args.Nbar,
                                  Nbar_rule=nbar_rule, Nbar_max=args.Nbar_max, beta_aux=beta_aux)
    if problem == "fdde1":
        from .dde import example1

        path = harness.write_series_csv(sol.times, sol.values, out / "solution.csv",
                                        exact=example1(alpha).exact)
    else:
        exact = _exact_for(problem, alpha)
        path = harness.write_solution_csv(sol, out / "solution.csv", exact=exact)
        harness.emit_error_grid(sol, exact, out / "errors.csv")
    info = " ".join(f"{k}={v}" for k, v in sol.info.items()
                    if not isinstance(v, (list, np.ndarray)))
    print(f"{problem} {scheme.value} alpha={alpha:g} N={N}"
          + ("" if problem == "fdde1" else f" M={M}") + f" {info}")
    print(f"max abs error {err:.6e}")
    print(f"wrote {path}")
    return 0 if np.isfinite(err) else 1


def _exact_for(problem: str, alpha: float):
    if problem == "nlex3":
        from .problems import nlex3_exact

        return nlex3_exact(alpha)
    return (fpde2(alpha) if problem == "fpde2" else ml_homog(alpha)).exact


def _cmd_converge(args) -> int:
    overrides = dict(
        problem=args.problem,
        schemes=harness._parse_list("schemes", args.schemes) if args.schemes else None,
        alphas=harness._parse_list("alphas", args.alphas) if args.alphas else None,
        beta=args.beta,
        Ns=harness._parse_list("Ns", args.Ns) if args.Ns else None,
        M=args.M,
        Nbar_rule=args.Nbar_rule,
        Nbar_max=args.Nbar_max,
        beta_aux=args.beta_aux,
        jobs=args.jobs if args.jobs is not None else harness.default_jobs(),
        budget=args.budget,
        out=args.out,
        deterministic=not args.timings,
        audit=not args.no_audit,
    )
    try:
        if args.preset:
            cfg = harness.preset(args.preset, full=args.full, **overrides)
        elif args.config:
            cfg = harness.load_config(args.config, **overrides)
        elif args.problem:
            cfg = harness.SweepConfig(**{k: v for k, v in overrides.items() if v is not None})
        else:
            raise SystemExit("converge needs --preset, --config or --problem")
        report = harness.run_sweep(cfg, force=args.force)
    except harness.BudgetExceededError as exc:
        print(exc, file=sys.stderr)
        return 2
    print(report.format_table())
    print(f"wrote {Path(cfg.out) / 'convergence.csv'}")
    failed = [r for r in report.rows if not r.ok]
    audits_ok = report.audits_passed()
    if failed:
        print(f"{len(failed)} cell(s) failed", file=sys.stderr)
    if not audits_ok:
        print("weight-identity audit failed", file=sys.stderr)
    return 0 if report.all_ok and audits_ok else 1


def _cmd_stability(args) -> int:
    spec = fpde2(args.alpha) if args.problem == "fpde2" else ml_homog(args.alpha)
    M = args.M or args.N
    exp = PerturbationExperiment(spec, epsilon=args.epsilon, mode=args.mode, rho=args.rho)
    ratios = run_perturbation(exp, args.N, M, args.beta, args.scheme, Nbar=args.Nbar,
                              Nbar_rule=args.Nbar_rule, Nbar_max=args.Nbar_max,
                              beta_aux=args.beta_aux)
    path = harness.write_ratio_csv(exp.times, ratios, Path(args.out) / "stability.csv")
    ok = True
    if exp.degenerate:
        print("degenerate experiment: the perturbation is zero on the grid")
    else:
        worst = exp.max_ratio
        ok = not exp.amplifies
        print(f"max amplification ratio {worst:.12g} ({'ok' if ok else 'AMPLIFIED'})")
    if SchemeKind(args.scheme).is_hl1:
        beta = exp.info["beta"]
        rep = lemma1_audit(args.N, beta, args.alpha, Nbar=min(exp.info["Nbar"], harness.AUDIT_NBAR_CAP),
                           beta_aux=args.beta_aux)
        print(f"weight identities: max violation {rep.max_violation:.3e}")
        ok = ok and rep.passed(args.tol)
    print(f"wrote {path}")
    return 0 if ok else 1


def _cmd_weights(args) -> int:
    mesh = build_graded_mesh(args.N, args.beta, args.T)
    if not 1 <= args.j <= args.N:
        raise SystemExit(f"--j must lie in 1..{args.N}")
    rule = args.Nbar_rule or ("coarse" if args.beta == 1.0 else "order")
    Nbar = args.Nbar or choose_Nbar(args.N, args.alpha, mesh.t1, Nbar_max=args.Nbar_max, rule=rule)
    aux = build_aux_mesh(Nbar, args.beta if args.beta_aux is None else args.beta_aux, mesh.t1)
    rows = []
    if args.j == 1:
        rows += [("zeta", k, v) for k, v in enumerate(l1_weights(aux.points, args.alpha, Nbar).zeta)]
    else:
        rows += [("zeta", k, v) for k, v in enumerate(l1_weights(mesh, args.alpha, args.j).zeta)]
        xi = xi_weights(aux, args.alpha, float(mesh.points[args.j])).xi
        rows += [("xi", k, v) for k, v in enumerate(xi)]
        c = hl1_coefficients(mesh, args.alpha, args.j)
        rows += [("gamma", k, v) for k, v in enumerate(c.gamma, start=1)]
        rows += [("delta", k, v) for k, v in enumerate(c.delta, start=1)]
        rows += [("d", k, v) for k, v in enumerate(c.d)]
    path = harness.write_weights_csv(rows, Path(args.out) / "weights.csv")
    print(f"N={args.N} beta={args.beta:g} alpha={args.alpha:g} j={args.j} Nbar={Nbar}: "
          f"{len(rows)} values")
    print(f"wrote {path}")
    return 0


# }}}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": _cmd_solve, "converge": _cmd_converge,
               "stability": _cmd_stability, "weights": _cmd_weights}[args.command]
    try:
        return handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
