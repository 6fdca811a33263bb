"""Command-line entry point: solve serialized instances, run benchmark
grids, and verify stored certificates.

Exit codes: 0 success, 1 failed verification, 2 usage error, 3 solver
nonconvergence.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .adaptive_penalty import BaselineConfig, adaptive_penalty_admm, damped_multiplier_admm
from .bench import (
    AlgorithmSpec,
    DqpSpec,
    QpbcSpec,
    default_algorithms,
    emit_csv,
    emit_table,
    run_experiment,
)
from .blocks import BlockVector
from .certify import check_rho_eta_stationary
from .exceptions import BlockAdmmError, NonconvergenceError
from .fixed_penalty import StoppingRule, fixed_penalty_admm
from .problem import ToleranceConfig
from .serialization import load_certificate, load_instance, save_certificate

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_NONCONVERGENCE = 3


def _tolerances(args) -> ToleranceConfig:
    return ToleranceConfig(rho=args.rho, eta=args.eta, alpha=args.alpha, C=args.big_c)


def _add_tolerance_flags(parser):
    parser.add_argument("--rho", type=float, default=1e-5, help="residual tolerance")
    parser.add_argument("--eta", type=float, default=1e-5, help="feasibility tolerance")
    parser.add_argument("--alpha", type=float, default=1e-2,
                        help="multiplier-update aggressiveness (>= rho^2)")
    parser.add_argument("--big-c", type=float, default=1.0, dest="big_c",
                        help="residual gate for multiplier updates (>= rho)")


def _start_point(inst, seed):
    if inst.x0 is not None:
        return inst.x0
    rng = np.random.Generator(np.random.Philox(seed))
    x0 = BlockVector.zeros(inst.sizes)
    for t, blk in enumerate(inst.nonsmooth):
        radius = getattr(blk, "radius", None)
        if radius is not None:
            x0.block(t)[:] = rng.uniform(-radius, radius, blk.dim)
    return x0


def _write_trace(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,k,vsq,delta,T,feas,c,lam_min,lam_max\n")
        for r in rows:
            fh.write(
                f"{r.iteration},{r.epoch},{r.residual_sq!r},{r.slack!r},"
                f"{r.potential!r},{r.feasibility!r},{r.penalty!r},"
                f"{r.lam_min!r},{r.lam_max!r}\n"
            )


def _write_calls(calls, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("call,c,inner_iterations,feas,resid_sq_plus_slack,wall_time_s\n")
        for rec in calls:
            fh.write(
                f"{rec.index},{rec.penalty!r},{rec.iterations},"
                f"{rec.feasibility!r},{rec.residual_sq_plus_slack!r},"
                f"{rec.wall_time_s:.6f}\n"
            )


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    tol = _tolerances(args)
    x0 = _start_point(inst, args.seed)
    rule = (
        StoppingRule.relative(tol, inst, x0)
        if args.stop == "relative"
        else StoppingRule.absolute(tol)
    )
    keep_trace = args.trace is not None
    try:
        if args.algo == "aadmm":
            result = adaptive_penalty_admm(
                inst, x0, tol, gamma0=args.gamma0, c0=args.cap_c0,
                mode=args.mode, stop_rule=rule, keep_trace=keep_trace,
                max_total_iterations=args.max_iterations,
            )
            cert = result.certificate
            iterations = result.total_iterations
            if keep_trace and result.trace is not None:
                _write_trace(result.trace, args.trace)
            if args.calls is not None:
                _write_calls(result.calls, args.calls)
        elif args.algo == "sadmm":
            lam0 = args.gamma0
            if args.mode == "fixed" and inst.metadata is not None \
                    and inst.metadata.weak_convexity is not None:
                lam0 = 0.5 / np.asarray(inst.metadata.weak_convexity)
            c = args.cap_c0 if args.cap_c0 is not None else 1.0
            result = fixed_penalty_admm(
                inst, x0, np.zeros(inst.map.rows), lam0, c, tol,
                mode=args.mode, stop_rule=rule, keep_trace=keep_trace,
                max_iterations=args.max_iterations,
            )
            cert = result.certificate()
            iterations = result.iterations
            if keep_trace and result.trace is not None:
                _write_trace(result.trace, args.trace)
        elif args.algo == "dp":
            cfg = BaselineConfig(theta=args.theta, chi=args.chi, lam=args.lam,
                                 c=args.cap_c0 if args.cap_c0 is not None else 1.0)
            result = damped_multiplier_admm(inst, x0, cfg, tol, stop=args.stop,
                                            max_iterations=args.max_iterations)
            if not result.converged:
                print(f"nonconvergence after {result.iterations} iterations", file=sys.stderr)
                return EXIT_NONCONVERGENCE
            cert = result.certificate
            iterations = result.iterations
        else:  # pragma: no cover - argparse restricts choices
            raise ValueError(args.algo)
    except NonconvergenceError as err:
        print(f"nonconvergence: {err}", file=sys.stderr)
        return EXIT_NONCONVERGENCE

    report = check_rho_eta_stationary(inst, cert, tol)
    print(f"instance:    {inst.name or args.instance}")
    print(f"algorithm:   {args.algo} ({args.mode})")
    print(f"iterations:  {iterations}")
    print(f"residual^2:  {cert.residual_sq_plus_slack():.6e}")
    print(f"feasibility: {report.feasibility:.6e}")
    print(f"inclusion gap: {report.inclusion_gap:.6e}")
    print(f"stationary:  {report.ok}")
    if args.out is not None:
        save_certificate(cert, args.out)
        print(f"certificate written to {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.family == "dqp":
        specs = [
            DqpSpec(B=args.blocks, n=n, omega=omega, seed=args.seed + rep)
            for n in args.n
            for omega in args.omega
            for rep in range(args.reps)
        ]
    else:
        specs = [
            QpbcSpec(B=args.blocks, m=m, seed=args.seed + rep)
            for m in args.m
            for rep in range(args.reps)
        ]
    if args.algos:
        known = {a.tag: a for a in default_algorithms(args.family)}
        try:
            algorithms = [known[tag] for tag in args.algos.split(",")]
        except KeyError as missing:
            print(f"unknown algorithm tag {missing}", file=sys.stderr)
            return 2
    else:
        algorithms = None
    tol = _tolerances(args)
    records = run_experiment(specs, algorithms, tol, jobs=args.jobs)
    csv_text = emit_csv(records, path=args.out, deterministic=args.deterministic)
    if args.out is None:
        sys.stdout.write(csv_text)
    sys.stdout.write(emit_table(records))
    return EXIT_OK


def _cmd_verify(args) -> int:
    inst = load_instance(args.instance)
    cert = load_certificate(args.certificate)
    tol = _tolerances(args)
    report = check_rho_eta_stationary(inst, cert, tol)
    print(f"inclusion gap:  {report.inclusion_gap:.6e} (ok: {report.inclusion_ok})")
    print(f"residual^2:     {report.residual_sq_plus_slack:.6e} (ok: {report.residual_ok})")
    print(f"feasibility:    {report.feasibility:.6e} (ok: {report.feasibility_ok})")
    if report.multiplier_range_gap is not None:
        print(f"multiplier range gap: {report.multiplier_range_gap:.6e}")
    print(f"stationary:     {report.ok}")
    return EXIT_OK if report.ok else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockadmm",
        description="Block-decomposable adaptive proximal ADMM solver and benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve a serialized instance")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--algo", choices=["aadmm", "sadmm", "dp"], default="aadmm")
    solve.add_argument("--mode", choices=["fixed", "adaptive"], default="adaptive")
    _add_tolerance_flags(solve)
    solve.add_argument("--cap-c0", type=float, default=None, dest="cap_c0",
                       help="override the initial (or fixed) penalty")
    solve.add_argument("--gamma0", type=float, default=10.0,
                       help="initial prox stepsize per block")
    solve.add_argument("--theta", type=float, default=0.0, help="baseline dampening")
    solve.add_argument("--chi", type=float, default=1.0, help="baseline relaxation")
    solve.add_argument("--lam", type=float, default=0.5, help="baseline prox stepsize")
    solve.add_argument("--stop", choices=["absolute", "relative"], default="absolute")
    solve.add_argument("--seed", type=int, default=0,
                       help="seed for the start point when the instance has none")
    solve.add_argument("--max-iterations", type=int, default=500_000,
                       dest="max_iterations", help="sweep budget before giving up")
    solve.add_argument("--trace", default=None, help="write per-iteration CSV here")
    solve.add_argument("--calls", default=None, help="write per-call CSV here (aadmm)")
    solve.add_argument("--out", default=None, help="write the certificate JSON here")
    solve.set_defaults(func=_cmd_solve)

    bench = sub.add_parser("bench", help="run a benchmark grid")
    bench.add_argument("--family", choices=["dqp", "qpbc"], required=True)
    bench.add_argument("--blocks", type=int, default=None)
    bench.add_argument("--n", type=float, nargs="+", default=[10, 20])
    bench.add_argument("--omega", type=float, nargs="+", default=[1e1, 1e3])
    bench.add_argument("--m", type=int, nargs="+", default=[1, 2])
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--reps", type=int, default=1)
    bench.add_argument("--algos", default=None,
                       help="comma-separated tags, e.g. ad,dp1")
    _add_tolerance_flags(bench)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--out", default=None, help="write CSV here")
    bench.add_argument("--deterministic", action="store_true",
                       help="zero the wall-time column for byte-stable output")
    bench.set_defaults(func=_cmd_bench)

    verify = sub.add_parser("verify", help="check a stored certificate")
    verify.add_argument("--instance", required=True)
    verify.add_argument("--certificate", required=True)
    _add_tolerance_flags(verify)
    verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "bench":
        if args.blocks is None:
            args.blocks = 3 if args.family == "dqp" else 10
        args.n = [int(v) for v in args.n]
    try:
        return args.func(args)
    except BlockAdmmError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
