"""Penalty-doubling outer driver and the damped-multiplier baseline.

:func:`adaptive_penalty_admm` repeatedly calls the fixed-penalty driver,
doubling the penalty after every call and warm-starting each call from the
previous output (iterate, multiplier, and stepsizes alike).  The first
penalty defaults to ``1 / (1 + ||A x0 - b||)`` unless overridden.  The loop
stops as soon as the output is feasible to tolerance; the residual half of
stationarity is already guaranteed by every inner call.

:func:`damped_multiplier_admm` is the fixed-parameter baseline: one fixed-
stepsize sweep per iteration followed by the damped multiplier update

    p_k = (1 - theta) [p_{k-1} + chi c (A x_k - b)].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .blocks import BlockVector
from .certify import Certificate
from .exceptions import NonconvergenceError, ShapeError
from .fixed_penalty import DEFAULT_ITERATION_CAP, StoppingRule, TraceRow, fixed_penalty_admm
from .problem import ProblemInstance, ToleranceConfig
from .sweeps import block_prox_sweep

__all__ = [
    "OuterCallRecord",
    "AadmmResult",
    "BaselineConfig",
    "BaselineResult",
    "adaptive_penalty_admm",
    "damped_multiplier_admm",
    "damped_pair_is_theoretical",
]


@dataclass
class OuterCallRecord:
    """One inner solve: the penalty it ran at and what it returned."""

    index: int
    penalty: float
    iterations: int
    feasibility: float
    residual_sq_plus_slack: float
    wall_time_s: float


@dataclass
class AadmmResult:
    certificate: Optional[Certificate]
    converged: bool
    calls: List[OuterCallRecord]
    total_iterations: int
    gamma: Optional[np.ndarray]
    c0: float
    c_final: float
    halvings: int = 0
    trace: Optional[List[TraceRow]] = None

    @property
    def penalties(self) -> List[float]:
        return [rec.penalty for rec in self.calls]


def adaptive_penalty_admm(
    inst: ProblemInstance,
    x0: BlockVector,
    tol: ToleranceConfig,
    gamma0=1.0,
    c0: Optional[float] = None,
    mode: str = "adaptive",
    outer_cap: int = 64,
    max_total_iterations: int = DEFAULT_ITERATION_CAP,
    stop_rule: Optional[StoppingRule] = None,
    subsolver: str = "auto",
    monitor=None,
    keep_trace: bool = False,
) -> AadmmResult:
    """Drive the fixed-penalty solver to a fully stationary point.

    Returns once ``||A x - b||`` passes the feasibility threshold; the
    returned certificate then satisfies the inclusion, the residual bound,
    and the feasibility bound together.  Raises
    :class:`NonconvergenceError` (partial result attached) when the outer
    cap or the total iteration budget runs out.
    """
    if not inst.in_domain(x0):
        raise ShapeError("starting point outside the domain")
    rule = stop_rule if stop_rule is not None else StoppingRule.absolute(tol)
    feas0 = inst.feasibility(x0)
    c = float(c0) if c0 is not None else 1.0 / (1.0 + feas0)
    if c <= 0:
        raise ShapeError("initial penalty must be positive")
    c_start = c
    x = x0.copy()
    p = np.zeros(inst.map.rows)
    gamma = np.broadcast_to(np.asarray(gamma0, dtype=float), (inst.block_count,)).copy()
    if np.any(gamma <= 0):
        raise ShapeError("initial stepsizes must be positive")
    if monitor is not None:
        monitor.on_outer_start(inst, x0, c, tol, rule.feas_threshold)

    calls: List[OuterCallRecord] = []
    trace: Optional[List[TraceRow]] = [] if keep_trace else None
    total = 0
    halvings = 0
    for ell in range(1, outer_cap + 1):
        budget = max_total_iterations - total
        if budget <= 0:
            break
        started = time.perf_counter()
        try:
            res = fixed_penalty_admm(
                inst, x, p, gamma, c, tol,
                mode=mode, stop_rule=rule, max_iterations=budget,
                subsolver=subsolver, monitor=monitor, keep_trace=keep_trace,
            )
        except NonconvergenceError as err:
            inner = err.result
            total += inner.iterations if inner is not None else budget
            calls.append(OuterCallRecord(ell, c, budget, float("nan"), float("nan"),
                                         time.perf_counter() - started))
            if inner is not None:
                halvings += inner.halvings
            partial = AadmmResult(None, False, calls, total, gamma, c_start, c,
                                  halvings, trace)
            raise NonconvergenceError(
                f"iteration budget exhausted inside call {ell}", result=partial
            ) from err
        elapsed = time.perf_counter() - started
        x, p, gamma = res.y, res.q, res.lam
        total += res.iterations
        halvings += res.halvings
        if trace is not None and res.trace is not None:
            trace.extend(res.trace)
        c_prev = c
        c = 2.0 * c
        calls.append(OuterCallRecord(ell, c_prev, res.iterations, res.feasibility,
                                     res.residual_sq_plus_slack(), elapsed))
        if monitor is not None:
            monitor.on_outer_call(ell, c_prev, c, p, res.feasibility)
        if res.feasibility <= rule.feas_threshold:
            cert = Certificate(x, p, res.v, res.delta)
            result = AadmmResult(cert, True, calls, total, gamma, c_start, c,
                                 halvings, trace)
            if monitor is not None:
                monitor.on_outer_end(result, tol)
            return result

    partial = AadmmResult(None, False, calls, total, gamma, c_start, c,
                          halvings, trace)
    raise NonconvergenceError(
        f"feasibility threshold not reached within {len(calls)} outer calls",
        result=partial,
    )


@dataclass(frozen=True)
class BaselineConfig:
    """Fixed parameters of the damped-multiplier baseline.

    ``theta`` dampens and ``chi`` relaxes the multiplier update; both the
    scalar prox stepsize and the penalty stay constant.
    """

    theta: float = 0.0
    chi: float = 1.0
    lam: float = 0.5
    c: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise ShapeError("theta must lie in [0, 1)")
        if self.chi <= 0 or self.lam <= 0 or self.c <= 0:
            raise ShapeError("chi, lam, and c must be positive")


def damped_pair_is_theoretical(theta: float, chi: float, blocks: int) -> bool:
    """Whether ``(theta, chi)`` satisfies the convergence-backed regime
    ``2 chi B (2 - theta)(1 - theta) <= theta^2``."""
    return 2.0 * chi * blocks * (2.0 - theta) * (1.0 - theta) <= theta**2


@dataclass
class BaselineResult:
    certificate: Optional[Certificate]
    converged: bool
    iterations: int
    x: BlockVector
    p: np.ndarray
    final_residual_sq_plus_slack: float
    final_feasibility: float


def damped_multiplier_admm(
    inst: ProblemInstance,
    x0: BlockVector,
    cfg: BaselineConfig,
    tol: ToleranceConfig,
    stop: str = "absolute",
    max_iterations: int = DEFAULT_ITERATION_CAP,
    subsolver: str = "auto",
    monitor=None,
) -> BaselineResult:
    """Run the baseline until its certificate passes the chosen criterion.

    The stopping certificate reuses the sweep's residual pair and the
    undamped multiplier ``p + c (A x - b)`` so that comparisons against the
    doubling driver measure algorithms, not stopping rules.  On hitting the
    cap the result carries ``converged=False`` (rendered as ``*`` in
    benchmark tables) instead of raising.
    """
    if stop == "absolute":
        rule = StoppingRule.absolute(tol)
    elif stop == "relative":
        rule = StoppingRule.relative(tol, inst, x0)
    else:
        raise ShapeError(f"unknown stopping rule {stop!r}")
    if not inst.in_domain(x0):
        raise ShapeError("starting point outside the domain")
    x = x0.copy()
    p = np.zeros(inst.map.rows)
    lam = np.full(inst.block_count, cfg.lam)
    vsq, feas = float("inf"), float("inf")
    for k in range(1, max_iterations + 1):
        res = block_prox_sweep(inst, x, p, lam, cfg.c, subsolver=subsolver, monitor=monitor)
        x = res.z_plus
        feas_vec = res.constraint_residual
        vsq = res.residual_sq_plus_slack()
        feas = res.feasibility()
        p_hat = p + cfg.c * feas_vec
        if vsq <= rule.vsq_threshold and feas <= rule.feas_threshold:
            cert = Certificate(x, p_hat, res.v_plus, res.delta_plus)
            return BaselineResult(cert, True, k, x, p_hat, vsq, feas)
        p = (1.0 - cfg.theta) * (p + cfg.chi * cfg.c * feas_vec)
    return BaselineResult(None, False, max_iterations, x, p, vsq, feas)
