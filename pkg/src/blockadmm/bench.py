"""Benchmark instance generators, experiment runner, and table emission.

Two random families are provided.  The distributed family couples ``B``
box-constrained blocks through consensus constraints ``x_i = x_B`` while the
objective is a concave separable quadratic over the first ``B - 1`` blocks.
The box-constrained QP family has scalar blocks, a dense negative definite
quadratic, and a short fat constraint matrix, all scaled by a random
diagonal with entries up to 1000.

Instances are generated from a counter-based RNG so that the same seed
reproduces the same instance bit for bit on any platform, and solver runs
contain no unseeded randomness.
"""

from __future__ import annotations

import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .adaptive_penalty import BaselineConfig, adaptive_penalty_admm, damped_multiplier_admm
from .blocks import BlockLinearMap, BlockSizes, BlockVector
from .certify import Certificate, check_rho_eta_stationary, relative_error_ok
from .exceptions import BlockAdmmError, NonconvergenceError, ShapeError
from .fixed_penalty import StoppingRule
from .problem import (
    Box,
    DenseQuadraticOracle,
    InstanceMetadata,
    ProblemInstance,
    SeparableQuadraticOracle,
    ToleranceConfig,
)

__all__ = [
    "DqpSpec",
    "QpbcSpec",
    "AlgorithmSpec",
    "RunRecord",
    "gen_dqp",
    "gen_qpbc",
    "default_algorithms",
    "run_experiment",
    "emit_csv",
    "read_csv",
    "emit_table",
    "CSV_HEADER",
]

# Weak-convexity floor for the objective-free last block of the distributed
# family; zero would break the 1/(2 m_t) fixed-mode stepsize.
LAST_BLOCK_MODULUS_FLOOR = 1e-12

CSV_HEADER = (
    "algorithm,family,B,n_or_m,omega,seed,iterations,time_ms,"
    "converged,final_resid_sq,final_feas"
)


@dataclass(frozen=True)
class DqpSpec:
    """Distributed quadratic family: ``B`` blocks of dimension ``n`` with
    box radius ``omega``."""

    B: int = 3
    n: int = 10
    omega: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.B < 2 or self.n < 1 or self.omega <= 0:
            raise ShapeError(f"invalid spec {self}")

    @property
    def family(self) -> str:
        return "dqp"


@dataclass(frozen=True)
class QpbcSpec:
    """Box-constrained QP family: ``B`` scalar blocks, ``m`` constraints."""

    B: int = 10
    m: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.B < 1 or not 1 <= self.m < self.B:
            raise ShapeError(f"invalid spec {self}")

    @property
    def family(self) -> str:
        return "qpbc"

    @property
    def omega(self) -> float:
        return 1.0


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def gen_dqp(spec: DqpSpec) -> ProblemInstance:
    """Sample one distributed instance.

    Curvatures ``alpha_i ~ U[0,1]`` and linear terms ``beta_i ~ U[0,1]^n``
    enter the objective with a minus sign, so block ``i`` is exactly
    ``alpha_i``-weakly convex.  The right-hand side is built from a random
    box point, which doubles as the interior feasibility witness.
    """
    B, n, omega = spec.B, spec.n, spec.omega
    rng = _rng(spec.seed)
    alpha = rng.uniform(0.0, 1.0, B - 1)
    beta = rng.uniform(0.0, 1.0, (B - 1, n))
    x_b = rng.uniform(-omega, omega, B * n)
    x_start = rng.uniform(-omega, omega, B * n)

    sizes = BlockSizes([n] * B)
    quad = np.concatenate([np.repeat(-alpha, n), np.zeros(n)])
    linear = np.concatenate([-beta.reshape(-1), np.zeros(n)])
    smooth = SeparableQuadraticOracle(sizes, quad, linear)

    rows = (B - 1) * n
    eye = np.eye(n)
    mats = []
    for i in range(B - 1):
        block = np.zeros((rows, n))
        block[i * n : (i + 1) * n] = eye
        mats.append(block)
    mats.append(np.tile(-eye, (B - 1, 1)))
    lin_map = BlockLinearMap(
        mats,
        gram_diags=[np.ones(n)] * (B - 1) + [np.full(n, float(B - 1))],
        norm_hints=[1.0] * (B - 1) + [float(np.sqrt(B - 1))],
        min_sval_hint=1.0,
    )
    witness = BlockVector(sizes, x_b)
    rhs = lin_map.apply(witness)

    moduli = np.append(alpha, LAST_BLOCK_MODULUS_FLOOR)
    moduli = np.maximum(moduli, LAST_BLOCK_MODULUS_FLOOR)
    meta = InstanceMetadata(
        weak_convexity=moduli,
        cross_lipschitz=np.zeros(B - 1),
        feasible_point=x_b,
    )
    return ProblemInstance(
        smooth=smooth,
        nonsmooth=[Box(n, omega) for _ in range(B)],
        map=lin_map,
        rhs=rhs,
        metadata=meta,
        x0=BlockVector(sizes, x_start),
        name=f"dqp-B{B}-n{n}-omega{omega:g}-seed{spec.seed}",
    )


def gen_qpbc(spec: QpbcSpec) -> ProblemInstance:
    """Sample one box-constrained QP instance.

    The raw quadratic is made negative definite by normalizing a random
    Gram matrix and shifting its spectrum, then rescaling entries back into
    [-1, 1]; the diagonal scaling D stretches everything anisotropically.
    """
    B, m = spec.B, spec.m
    rng = _rng(spec.seed)
    d = rng.uniform(1.0, 1000.0, B)
    r_raw = rng.uniform(-1.0, 1.0, B)
    q = rng.uniform(-1.0, 1.0, (B, B))
    a_raw = rng.uniform(-1.0, 1.0, (m, B))
    x_b = rng.uniform(-1.0, 1.0, B)
    x_start = rng.uniform(-1.0, 1.0, B)

    gram = q @ q.T
    p_raw = -(gram / np.linalg.norm(gram, 2) + 1e-3 * np.eye(B)) / (1.0 + 1e-3)
    matrix = p_raw * np.outer(d, d)
    matrix = 0.5 * (matrix + matrix.T)
    a_mat = a_raw * d[None, :]
    linear = d * r_raw

    sizes = BlockSizes([1] * B)
    smooth = DenseQuadraticOracle(sizes, matrix, linear)
    lin_map = BlockLinearMap([a_mat[:, t : t + 1] for t in range(B)])
    rhs = a_mat @ x_b

    eigs = np.linalg.eigvalsh(matrix)
    modulus = float(abs(eigs[0]))
    cross = np.array([float(np.linalg.norm(matrix[t, t + 1 :])) for t in range(B - 1)])
    meta = InstanceMetadata(
        weak_convexity=np.full(B, modulus),
        cross_lipschitz=cross,
        feasible_point=x_b,
    )
    return ProblemInstance(
        smooth=smooth,
        nonsmooth=[Box(1, 1.0) for _ in range(B)],
        map=lin_map,
        rhs=rhs,
        metadata=meta,
        x0=BlockVector(sizes, x_start),
        name=f"qpbc-B{B}-m{m}-seed{spec.seed}",
    )


@dataclass(frozen=True)
class AlgorithmSpec:
    """How to run one solver on a benchmark instance.

    ``kind`` is ``"doubling"`` for the penalty-doubling driver or
    ``"baseline"`` for the damped-multiplier method.  Family defaults fill
    any field left to ``None``.
    """

    tag: str
    kind: str = "doubling"
    mode: str = "adaptive"
    gamma0: Optional[float] = None
    c0: Optional[float] = None
    theta: float = 0.0
    chi: float = 1.0
    lam: float = 0.5
    c: float = 1.0


def default_algorithms(family: str) -> List[AlgorithmSpec]:
    """The study configurations: the adaptive doubling driver against the
    damped baseline in its pragmatic and theory-backed parameterizations."""
    if family == "dqp":
        return [
            AlgorithmSpec("ad", kind="doubling", gamma0=10.0, c0=1.0),
            AlgorithmSpec("dp1", kind="baseline", theta=0.0, chi=1.0),
            AlgorithmSpec("dp2", kind="baseline", theta=0.5, chi=1.0 / 18.0),
        ]
    if family == "qpbc":
        return [
            AlgorithmSpec("ad1", kind="doubling", gamma0=1000.0, c0=10.0),
            AlgorithmSpec("ad2", kind="doubling", gamma0=1000.0, c0=1.0),
            AlgorithmSpec("ad3", kind="doubling", gamma0=1000.0, c0=0.1),
            AlgorithmSpec("dp1", kind="baseline", c=10.0),
            AlgorithmSpec("dp2", kind="baseline", c=1.0),
            AlgorithmSpec("dp3", kind="baseline", c=0.1),
        ]
    raise ShapeError(f"unknown family {family!r}")


@dataclass
class RunRecord:
    """Result of one (instance, algorithm) run."""

    algorithm: str
    family: str
    B: int
    n_or_m: int
    omega: float
    seed: int
    iterations: int
    time_ms: float
    converged: bool
    final_resid_sq: float
    final_feas: float
    penalty_trace: List[float] = field(default_factory=list)
    certificate: Optional[Certificate] = None
    certified: Optional[bool] = None


def _spec_fields(spec) -> tuple:
    if isinstance(spec, DqpSpec):
        return spec.B, spec.n, spec.omega
    return spec.B, spec.m, spec.omega


def _run_single(spec, algo: AlgorithmSpec, tol: ToleranceConfig,
                max_iterations: int) -> RunRecord:
    inst = gen_dqp(spec) if isinstance(spec, DqpSpec) else gen_qpbc(spec)
    x0 = inst.x0
    relative = isinstance(spec, QpbcSpec)
    rule = (
        StoppingRule.relative(tol, inst, x0)
        if relative
        else StoppingRule.absolute(tol)
    )
    B, n_or_m, omega = _spec_fields(spec)
    record = RunRecord(
        algorithm=algo.tag, family=spec.family, B=B, n_or_m=n_or_m,
        omega=omega, seed=spec.seed, iterations=max_iterations,
        time_ms=0.0, converged=False,
        final_resid_sq=float("nan"), final_feas=float("nan"),
    )
    started = time.perf_counter()
    try:
        if algo.kind == "doubling":
            gamma0 = algo.gamma0 if algo.gamma0 is not None else 10.0
            result = adaptive_penalty_admm(
                inst, x0, tol, gamma0=gamma0, c0=algo.c0, mode=algo.mode,
                max_total_iterations=max_iterations, stop_rule=rule,
            )
            record.iterations = result.total_iterations
            record.converged = result.converged
            record.penalty_trace = result.penalties
            record.certificate = result.certificate
            record.final_resid_sq = result.calls[-1].residual_sq_plus_slack
            record.final_feas = result.calls[-1].feasibility
        elif algo.kind == "baseline":
            cfg = BaselineConfig(theta=algo.theta, chi=algo.chi, lam=algo.lam, c=algo.c)
            result = damped_multiplier_admm(
                inst, x0, cfg, tol,
                stop="relative" if relative else "absolute",
                max_iterations=max_iterations,
            )
            record.iterations = result.iterations
            record.converged = result.converged
            record.penalty_trace = [cfg.c]
            record.certificate = result.certificate
            record.final_resid_sq = result.final_residual_sq_plus_slack
            record.final_feas = result.final_feasibility
        else:
            raise ShapeError(f"unknown algorithm kind {algo.kind!r}")
    except NonconvergenceError as err:
        partial = err.result
        if partial is not None and hasattr(partial, "total_iterations"):
            record.iterations = partial.total_iterations
            record.penalty_trace = partial.penalties
    except BlockAdmmError:
        pass  # recorded as a nonconverged run; the batch continues
    record.time_ms = (time.perf_counter() - started) * 1e3

    if record.converged and record.certificate is not None:
        report = check_rho_eta_stationary(inst, record.certificate, tol, check_range=False)
        if relative:
            record.certified = bool(
                report.inclusion_ok
                and relative_error_ok(inst, record.certificate, x0, tol.rho, tol.eta)
            )
        else:
            record.certified = report.ok
    return record


def run_experiment(
    specs: Sequence[Union[DqpSpec, QpbcSpec]],
    algorithms: Optional[Sequence[AlgorithmSpec]] = None,
    tol: ToleranceConfig = ToleranceConfig(),
    max_iterations: int = 500_000,
    jobs: int = 1,
) -> List[RunRecord]:
    """Run every (spec, algorithm) pair and certify converged runs.

    Individual failures are recorded as nonconverged runs; the batch never
    aborts.  Records come back sorted by (family, B, size, omega, seed,
    algorithm) regardless of worker scheduling.
    """
    if not specs:
        raise ShapeError("no specs supplied")
    tasks = []
    for spec in specs:
        algos = algorithms if algorithms is not None else default_algorithms(spec.family)
        for algo in algos:
            tasks.append((spec, algo))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(
                pool.map(_run_single, *zip(*[(s, a) for s, a in tasks]),
                         [tol] * len(tasks), [max_iterations] * len(tasks))
            )
    else:
        records = [_run_single(s, a, tol, max_iterations) for s, a in tasks]
    records.sort(key=lambda r: (r.family, r.B, r.n_or_m, r.omega, r.seed, r.algorithm))
    return records


def _format_float(x: float) -> str:
    return repr(float(x))


def emit_csv(records: Sequence[RunRecord], path=None, deterministic: bool = False) -> str:
    """Render records in the benchmark CSV schema.

    ``deterministic`` zeroes the wall-time column so reruns with the same
    seed are byte-identical; measured timings are inherently noisy.
    """
    if not records:
        raise ShapeError("no records to emit")
    lines = [CSV_HEADER]
    for r in records:
        time_ms = 0.0 if deterministic else r.time_ms
        lines.append(
            ",".join(
                [
                    r.algorithm,
                    r.family,
                    str(r.B),
                    str(r.n_or_m),
                    _format_float(r.omega),
                    str(r.seed),
                    str(r.iterations),
                    f"{time_ms:.3f}",
                    "true" if r.converged else "false",
                    _format_float(r.final_resid_sq),
                    _format_float(r.final_feas),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_csv(source) -> List[dict]:
    """Parse benchmark CSV back into typed rows (lossless round trip)."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, ValueError):
            text = source
    lines = [ln for ln in str(text).splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise ShapeError("unrecognized CSV header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            {
                "algorithm": parts[0],
                "family": parts[1],
                "B": int(parts[2]),
                "n_or_m": int(parts[3]),
                "omega": float(parts[4]),
                "seed": int(parts[5]),
                "iterations": int(parts[6]),
                "time_ms": float(parts[7]),
                "converged": parts[8] == "true",
                "final_resid_sq": float(parts[9]),
                "final_feas": float(parts[10]),
            }
        )
    return rows


def emit_table(records: Sequence[RunRecord]) -> str:
    """Aligned text table, one row per (instance, algorithm).

    Nonconverged entries render ``*`` in the iteration and time columns;
    within each instance group the converged run with the fewest iterations
    is flagged as best.
    """
    if not records:
        raise ShapeError("no records to tabulate")
    header = ["family", "B", "n|m", "omega", "seed", "algorithm",
              "iterations", "time_ms", "best"]
    groups = {}
    for r in records:
        groups.setdefault((r.family, r.B, r.n_or_m, r.omega, r.seed), []).append(r)
    rows = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda r: r.algorithm)
        converged = [r for r in members if r.converged]
        best = min(converged, key=lambda r: r.iterations) if converged else None
        for r in members:
            rows.append(
                [
                    r.family,
                    str(r.B),
                    str(r.n_or_m),
                    f"{r.omega:g}",
                    str(r.seed),
                    r.algorithm,
                    str(r.iterations) if r.converged else "*",
                    f"{r.time_ms:.3f}" if r.converged else "*",
                    "best" if r is best else "",
                ]
            )
    widths = [max(len(header[j]), *(len(row[j]) for row in rows)) for j in range(len(header))]
    out = io.StringIO()
    out.write("  ".join(h.ljust(widths[j]) for j, h in enumerate(header)).rstrip() + "\n")
    for row in rows:
        out.write("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip() + "\n")
    out.write("* = no stationary point within the iteration cap\n")
    return out.getvalue()
