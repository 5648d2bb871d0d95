"""Command-line interface: phantom generation, solving, parameter choice,
corpus verification, noise sweeps, and full experiment pipelines.

Exit codes: 0 when the command (and every requested check) succeeded, 2 when
a requested numerical check failed, 1 on operational errors such as missing
files or invalid configuration.  All randomness flows from the single seed
through the documented SplitMix64 stream, so identical invocations produce
byte-identical reports and field files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .checks import SweepExperiment, corpus_checks, delta_sweep
from .fields import Grid, ScalarField, l2_norm
from .io import (
    load_config,
    read_field_tvf,
    write_csv_report,
    write_field_tvf,
    write_json_report,
)
from .operators import operator_norm, parse_operator
from .phantoms import make_phantom, parse_phantom_spec, standard_corpus, noise_direction
from .rules import (
    RULE_KINDS,
    admissibility_check,
    fixed_point_alpha,
    morozov_bisection,
    tau_of,
)
from .solvers import Objective, SolveOptions, solve

SWEEP_HEADER = ["delta", "alpha", "error", "discrepancy", "tau_delta",
                "margin", "satisfied", "fitted_slope", "predicted_constant"]
VERIFY_HEADER = ["check_name", "instance", "lhs", "rhs", "slack", "passed"]


def _ints(text):
    return tuple(int(t) for t in text.split(","))


def _floats(text):
    return tuple(float(t) for t in text.split(","))


def _grid_from(args_or_cfg: dict) -> Grid:
    shape = _ints(args_or_cfg["grid"])
    extent = _floats(args_or_cfg["extent"])
    origin = _floats(args_or_cfg["origin"]) if args_or_cfg.get("origin") else None
    return Grid.regular(shape, extent, origin)


def _solve_options(cfg: dict, method: str) -> SolveOptions:
    return SolveOptions(
        method=method,
        grad_tol=float(cfg.get("grad_tol", 1e-8)),
        max_outer=int(cfg.get("max_outer", 2000)),
        cg_tol=float(cfg.get("cg_tol", 1e-12)),
        cg_max=int(cfg.get("cg_max", 5000)),
    )


def _kappa_from(text: str):
    if text == "auto":
        return None
    value = float(text)
    if not (value > 0.0):
        raise ValueError(f"kappa must be positive or 'auto', got {text}")
    return value


def _tau_from(text: str, t_norm: float) -> float:
    if text == "auto":
        return tau_of(t_norm)
    value = float(text)
    if value < 1.0:
        raise ValueError(f"tau must be >= 1 (discrepancy principle), got {value}")
    return value


# ---------------------------------------------------------------------------
# subcommands


def cmd_phantom(args) -> int:
    if args.standard_corpus:
        os.makedirs(args.standard_corpus, exist_ok=True)
        for name, field in standard_corpus():
            write_field_tvf(os.path.join(args.standard_corpus, f"{name}.tvf"), field)
        print(f"wrote 12 corpus phantoms to {args.standard_corpus}")
        return 0
    if not (args.spec and args.grid and args.extent and args.out):
        raise ValueError("phantom needs --spec/--grid/--extent/--out "
                         "(or --standard-corpus DIR)")
    grid = _grid_from(vars(args))
    spec = parse_phantom_spec(args.spec, grid, seed=args.seed)
    field = make_phantom(spec)
    write_field_tvf(args.out, field)
    kappa = spec.analytic_kappa
    print(f"wrote {args.out} ({spec.kind}, {grid.shape}, "
          f"analytic kappa {'n/a' if kappa is None else f'{kappa:.6g}'})")
    return 0


def cmd_solve(args) -> int:
    f_delta = read_field_tvf(args.data)
    T = parse_operator(args.op, f_delta.grid)
    opts = _solve_options(vars(args), args.method)
    result = solve(Objective(T, f_delta, args.alpha, args.beta), opts)
    if args.out:
        write_field_tvf(args.out, result.phi_alpha)
    if args.report:
        write_json_report(args.report, {
            "method": result.method,
            "alpha": args.alpha,
            "beta": args.beta,
            "iterations": result.outer_iterations,
            "objective_trace": result.objective_trace,
            "grad_norm": result.grad_norm,
            "discrepancy": result.discrepancy,
            "optimality_residual": result.optimality_residual,
            "converged": result.converged,
        })
    print(f"{result.method}: {result.outer_iterations} iterations, "
          f"discrepancy {result.discrepancy:.6e}, converged {result.converged}"
          + (f" ({result.message})" if result.message else ""))
    return 0 if result.converged else 2


def cmd_choose_alpha(args) -> int:
    f_delta = read_field_tvf(args.data)
    T = parse_operator(args.op, f_delta.grid)
    opts = _solve_options(vars(args), args.method)
    kappa = _kappa_from(args.kappa)
    t_norm = operator_norm(T).value
    tau = _tau_from(args.tau, t_norm)
    if args.rule == "morozov":
        res = morozov_bisection(T, f_delta, args.beta, args.delta, tau, opts=opts)
        alpha, phi, extra = res.alpha, res.phi_alpha, {
            "iterations": res.iterations, "degenerate": res.degenerate,
        }
        converged = not res.degenerate
    else:
        res = fixed_point_alpha(T, f_delta, args.beta, args.rule, args.delta,
                                opts=opts, kappa=kappa)
        alpha, phi = res.alpha, res.phi_alpha
        extra = {
            "alpha_trace": res.alpha_trace,
            "K_value": res.inputs.K_value,
            "kappa_used": res.inputs.kappa,
            "L_value": res.inputs.L_value,
        }
        converged = res.converged
    report = admissibility_check(T, phi, f_delta, args.delta, tau)
    if args.out:
        write_field_tvf(args.out, phi)
    payload = {
        "rule": RULE_KINDS[args.rule],
        "delta": args.delta,
        "beta": args.beta,
        "alpha": alpha,
        "tau": tau,
        "T_adjoint_norm": t_norm,
        "discrepancy": report.discrepancy,
        "bound": report.bound,
        "satisfied": report.satisfied,
        "margin": report.margin,
        "converged": converged,
    }
    payload.update(extra)
    if args.report:
        write_json_report(args.report, payload)
    print(f"{args.rule}: alpha {alpha:.6e}, discrepancy {report.discrepancy:.6e} "
          f"{'<=' if report.satisfied else '>'} tau*delta {report.bound:.6e}")
    return 0 if report.satisfied else 2


def cmd_verify(args) -> int:
    if not os.path.isdir(args.corpus):
        raise OSError(f"corpus directory not found: {args.corpus}")
    names = sorted(n for n in os.listdir(args.corpus) if n.endswith(".tvf"))
    if not names:
        raise ValueError(f"no .tvf instances in {args.corpus}")
    corpus = [(os.path.splitext(n)[0],
               read_field_tvf(os.path.join(args.corpus, n))) for n in names]
    rows = corpus_checks(corpus, args.beta)
    write_csv_report(args.report, VERIFY_HEADER,
                     [(r.check_name, r.instance, r.lhs, r.rhs, r.slack, r.passed)
                      for r in rows])
    checked = [r for r in rows if r.passed is not None]
    failed = [r for r in checked if not r.passed]
    print(f"verify: {len(checked)} checks on {len(corpus)} instances, "
          f"{len(failed)} failed; report {args.report}")
    for r in failed:
        print(f"  FAIL {r.check_name} on {r.instance}: "
              f"lhs {r.lhs!r} > rhs {r.rhs!r}")
    return 0 if not failed else 2


def _sweep_rows(result):
    rows = []
    for i, delta in enumerate(result.deltas):
        rows.append((delta, result.alphas[i], result.errors[i],
                     result.discrepancies[i], result.tau * delta,
                     result.margins[i], result.margins[i] >= 0.0,
                     result.fitted_slope, result.predicted_constant))
    return rows


def cmd_sweep(args) -> int:
    grid = _grid_from(vars(args))
    spec = parse_phantom_spec(args.phantom, grid, seed=args.seed)
    phi_true = make_phantom(spec)
    T = parse_operator(args.op, grid)
    deltas = _floats(args.deltas)
    if args.delta_mode == "relative":
        scale = l2_norm(T.apply(phi_true))
        deltas = tuple(d * scale for d in deltas)
    opts = _solve_options(vars(args), args.method)
    result = delta_sweep(SweepExperiment(
        T=T, phi_true=phi_true, deltas=deltas, rule=args.rule, beta=args.beta,
        seed=args.seed, opts=opts, kappa=_kappa_from(args.kappa),
    ))
    write_csv_report(args.report, SWEEP_HEADER, _sweep_rows(result))
    ok = result.completed and all(m >= 0.0 for m in result.margins)
    print(f"sweep: {len(result.deltas)} levels, slope {result.fitted_slope:.4f}, "
          f"all admissible {all(m >= 0.0 for m in result.margins)}; "
          f"report {args.report}")
    return 0 if ok else 2


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    for key in ("grid", "extent", "phantom", "deltas"):
        if key not in cfg:
            raise ValueError(f"config {args.config}: missing required key {key!r}")
    out_dir = args.out_dir or cfg.get("output_dir", "out")
    os.makedirs(out_dir, exist_ok=True)
    seed = int(cfg.get("seed", 0))
    grid = _grid_from(cfg)
    phi_true = make_phantom(parse_phantom_spec(cfg["phantom"], grid, seed=seed))
    T = parse_operator(cfg.get("operator", "identity"), grid)
    beta = float(cfg.get("beta", 1e-2))
    rule = cfg.get("rule", "rule3")
    if rule not in RULE_KINDS:
        raise ValueError(f"unknown rule {rule!r}")
    kappa = _kappa_from(cfg.get("kappa", "auto"))
    method = cfg.get("method", "lagged_diffusivity")
    opts = _solve_options(cfg, method)
    t_norm = operator_norm(T).value
    tau = _tau_from(cfg.get("tau", "auto"), t_norm)

    f_true = T.apply(phi_true)
    deltas = _floats(cfg["deltas"])
    if cfg.get("delta_mode", "relative") == "relative":
        scale = l2_norm(f_true)
        deltas = tuple(d * scale for d in deltas)
    direction = noise_direction(T.range_grid, seed)

    sweep_rows = []
    reconstructions = []
    all_ok = True
    errors = []
    for i, delta in enumerate(deltas):
        f_delta = ScalarField(T.range_grid, f_true.values + delta * direction.values)
        if rule == "morozov":
            chosen = morozov_bisection(T, f_delta, beta, delta, tau, opts=opts)
            alpha, phi = chosen.alpha, chosen.phi_alpha
            all_ok = all_ok and not chosen.degenerate
        else:
            chosen = fixed_point_alpha(T, f_delta, beta, rule, delta,
                                       opts=opts, kappa=kappa)
            alpha, phi = chosen.alpha, chosen.phi_alpha
            all_ok = all_ok and chosen.solve_result.converged
        adm = admissibility_check(T, phi, f_delta, delta, tau)
        all_ok = all_ok and adm.satisfied
        diff = phi.values - phi_true.values
        error = float(np.sqrt(np.sum(diff * diff) * grid.quad_weight))
        errors.append(error)
        sweep_rows.append([delta, alpha, error, adm.discrepancy, adm.bound,
                           adm.margin, adm.satisfied])
        reconstructions.append(phi)
        write_field_tvf(os.path.join(out_dir, f"phi_{i}.tvf"), phi)

    if len(errors) >= 2:
        slope = float(np.polyfit(np.log(deltas[: len(errors)]),
                                 np.log(errors), 1)[0])
    else:
        slope = math.nan
    for row in sweep_rows:
        row.extend([slope, 0.5 + t_norm])
    write_csv_report(os.path.join(out_dir, "sweep.csv"), SWEEP_HEADER, sweep_rows)

    instances = [("truth", phi_true)] + [
        (f"recon_{i}", phi) for i, phi in enumerate(reconstructions)
    ]
    rows = corpus_checks(instances, beta)
    write_csv_report(os.path.join(out_dir, "verify.csv"), VERIFY_HEADER,
                     [(r.check_name, r.instance, r.lhs, r.rhs, r.slack, r.passed)
                      for r in rows])
    check_fail = any(r.passed is False for r in rows)
    all_ok = all_ok and not check_fail

    write_json_report(os.path.join(out_dir, "run_report.json"), {
        "seed": seed,
        "rule": RULE_KINDS[rule],
        "beta": beta,
        "tau": tau,
        "T_adjoint_norm": t_norm,
        "deltas": list(deltas),
        "alphas": [row[1] for row in sweep_rows],
        "errors": errors,
        "fitted_slope": slope,
        "all_checks_passed": all_ok,
    })
    print(f"run: {len(deltas)} levels, slope {slope:.4f}, "
          f"checks {'passed' if all_ok else 'FAILED'}; outputs in {out_dir}")
    return 0 if all_ok else 2


# ---------------------------------------------------------------------------
# parser


def _add_solver_args(p):
    p.add_argument("--method", default="lagged_diffusivity",
                   choices=["lagged_diffusivity", "gradient_descent"])
    p.add_argument("--grad-tol", dest="grad_tol", type=float, default=1e-8)
    p.add_argument("--max-outer", dest="max_outer", type=int, default=2000)
    p.add_argument("--cg-tol", dest="cg_tol", type=float, default=1e-12)
    p.add_argument("--cg-max", dest="cg_max", type=int, default=5000)


def _add_grid_args(p, required=True):
    p.add_argument("--grid", required=required, help="points per axis, e.g. 16,16")
    p.add_argument("--extent", required=required, help="physical extents, e.g. 1,1")
    p.add_argument("--origin", default="", help="origin per axis (default zeros)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvreg",
        description="Smoothed-TV regularization: solvers, parameter rules, "
                    "and the numerical verification harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic field (TVF1)")
    p.add_argument("--spec", help="e.g. ramp:a=2 | product_sine:k=1,amplitude=0.5 "
                                  "| gaussian_bumps:n=2,width=0.2,amplitude=1 "
                                  "| smoothed_step:width=0.2,amplitude=1")
    _add_grid_args(p, required=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--standard-corpus", metavar="DIR",
                   help="write the shipped 12-phantom corpus into DIR")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("solve", help="minimize the objective for fixed alpha")
    p.add_argument("--op", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    _add_solver_args(p)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("choose-alpha", help="pick alpha by a rule or bisection")
    p.add_argument("--rule", required=True, choices=sorted(RULE_KINDS))
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--kappa", default="auto")
    p.add_argument("--op", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--tau", default="auto")
    _add_solver_args(p)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_choose_alpha)

    p = sub.add_parser("verify", help="run the inequality checks over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="noise-level sweep with rule-chosen alpha")
    p.add_argument("--deltas", required=True)
    p.add_argument("--rule", required=True, choices=["rule1", "rule2", "rule3"])
    p.add_argument("--report", required=True)
    p.add_argument("--op", default="identity")
    p.add_argument("--phantom", default="product_sine:k=1,amplitude=0.5")
    _add_grid_args(p, required=True)
    p.add_argument("--beta", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta-mode", dest="delta_mode", default="relative",
                   choices=["relative", "absolute"])
    p.add_argument("--kappa", default="auto")
    _add_solver_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="full experiment pipeline from a config file")
    p.add_argument("config")
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
