"""Fixed-penalty ADMM with potential-gated multiplier updates.

The driver repeats block proximal sweeps on ``L_c(.; q)`` at a constant
penalty ``c``.  It terminates once the certified residual satisfies
``||v||^2 + delta <= rho^2`` (performing a last multiplier update), and in
between it updates the multiplier only when the accumulated potential

    T_i = T_{i-1} + [L_c(y^{i-1}; q^{i-1}) - L_c(y^i; q^{i-1})]

is small relative to the iteration count:

    ||v^i||^2 + delta_i <= C^2   and   rho^2 / (alpha (k+1)) >= T_i / i,

with ``k`` the number of updates committed so far.  The epoch structure,
the potential sequence, and the multiplier norms obey instance-level bounds
collected in :class:`TheoryConstants`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .blocks import BlockVector, block_norms
from .certify import Certificate
from .exceptions import MetadataIncompleteError, NonconvergenceError, ShapeError
from .problem import ProblemInstance, ToleranceConfig
from .sweeps import adaptive_block_prox_sweep, block_prox_sweep

__all__ = [
    "StoppingRule",
    "TraceRow",
    "AdmmResult",
    "TheoryConstants",
    "fixed_penalty_admm",
    "potential_update",
    "theory_constants",
]

DEFAULT_ITERATION_CAP = 500_000


@dataclass(frozen=True)
class StoppingRule:
    """Thresholds the driver compares against: ``||v||^2 + delta`` versus
    ``vsq_threshold`` and ``||Ax - b||`` versus ``feas_threshold``."""

    vsq_threshold: float
    feas_threshold: float
    kind: str = "absolute"

    @staticmethod
    def absolute(tol: ToleranceConfig) -> "StoppingRule":
        return StoppingRule(tol.rho**2, tol.eta, "absolute")

    @staticmethod
    def relative(tol: ToleranceConfig, inst: ProblemInstance, x0: BlockVector) -> "StoppingRule":
        """Residuals measured against the starting point: ``rho`` scales by
        ``1 + ||grad f(x0)||`` and ``eta`` by ``1 + ||A x0 - b||``."""
        grad0 = inst.smooth.full_gradient(x0).norm()
        feas0 = inst.feasibility(x0)
        return StoppingRule(
            (tol.rho * (1.0 + grad0)) ** 2,
            tol.eta * (1.0 + feas0),
            "relative",
        )


@dataclass
class TraceRow:
    iteration: int
    epoch: int
    residual_sq: float
    slack: float
    potential: float
    feasibility: float
    penalty: float
    lam_min: float
    lam_max: float


@dataclass
class AdmmResult:
    """Terminal state of one fixed-penalty run."""

    y: BlockVector
    q: np.ndarray
    v: BlockVector
    delta: float
    lam: np.ndarray
    iterations: int
    epoch_ends: List[int]
    potential: float
    feasibility: float
    converged: bool
    halvings: int = 0
    trace: Optional[List[TraceRow]] = None

    @property
    def epochs(self) -> int:
        return len(self.epoch_ends)

    def residual_sq_plus_slack(self) -> float:
        return float(self.v.norm() ** 2 + self.delta)

    def certificate(self) -> Certificate:
        return Certificate(self.y, self.q, self.v, self.delta)


def potential_update(previous: float, lagrangian_before: float, lagrangian_after: float) -> float:
    """Accumulate one Lagrangian decrease into the potential."""
    if not (math.isfinite(lagrangian_before) and math.isfinite(lagrangian_after)):
        raise ShapeError("potential update needs finite Lagrangian values")
    return previous + (lagrangian_before - lagrangian_after)


def fixed_penalty_admm(
    inst: ProblemInstance,
    y0: BlockVector,
    q0: np.ndarray,
    lam0,
    c: float,
    tol: ToleranceConfig,
    mode: str = "adaptive",
    stop_rule: Optional[StoppingRule] = None,
    max_iterations: int = DEFAULT_ITERATION_CAP,
    subsolver: str = "auto",
    monitor=None,
    keep_trace: bool = False,
) -> AdmmResult:
    """Run the constant-penalty driver until the residual test passes.

    ``mode`` selects the sweep: ``"fixed"`` keeps the input stepsizes
    (choose ``lam0_t = 1/(2 m_t)`` for the theory-backed regime),
    ``"adaptive"`` runs the stepsize-halving sweep and needs no moduli.

    Raises :class:`NonconvergenceError` (with the partial result attached)
    if the iteration cap is reached.
    """
    if mode not in ("fixed", "adaptive"):
        raise ShapeError(f"unknown mode {mode!r}")
    rule = stop_rule if stop_rule is not None else StoppingRule.absolute(tol)
    sweep = adaptive_block_prox_sweep if mode == "adaptive" else block_prox_sweep
    y = y0.copy()
    q = np.asarray(q0, dtype=float).copy()
    lam = np.broadcast_to(np.asarray(lam0, dtype=float), (inst.block_count,)).copy()
    if monitor is not None:
        monitor.on_admm_start(inst, y, q, lam, c, mode, tol)
    potential = 0.0
    k = 0
    halvings = 0
    epoch_ends: List[int] = []
    trace: Optional[List[TraceRow]] = [] if keep_trace else None

    for i in range(1, max_iterations + 1):
        res = sweep(inst, y, q, lam, c, subsolver=subsolver, monitor=monitor)
        vsq = res.residual_sq_plus_slack()
        y = res.z_plus
        lam = res.lam_plus
        halvings += res.halvings
        feas_vec = res.constraint_residual
        feas = res.feasibility()
        new_potential = potential + res.lagrangian_drop
        if monitor is not None:
            monitor.on_admm_iteration(i, k, vsq, potential, new_potential, lam, c,
                                      feas, drop_noise=1e-13 * (1.0 + res.drop_scale))

        if vsq <= rule.vsq_threshold:
            k += 1
            epoch_ends.append(i)
            q_new = q + c * feas_vec
            if monitor is not None:
                monitor.on_multiplier_update(i, k, q, q_new, y, new_potential, c, feas)
                monitor.on_admm_end(k, c, mode)
            if trace is not None:
                trace.append(TraceRow(i, k, vsq - res.delta_plus, res.delta_plus,
                                      new_potential, feas, c,
                                      float(lam.min()), float(lam.max())))
            return AdmmResult(
                y=y, q=q_new, v=res.v_plus, delta=res.delta_plus, lam=lam,
                iterations=i, epoch_ends=epoch_ends, potential=new_potential,
                feasibility=feas, converged=True, halvings=halvings, trace=trace,
            )

        potential = new_potential
        if vsq <= tol.C**2 and rule.vsq_threshold / (tol.alpha * (k + 1)) >= potential / i:
            k += 1
            epoch_ends.append(i)
            q_new = q + c * feas_vec
            if monitor is not None:
                monitor.on_multiplier_update(i, k, q, q_new, y, potential, c, feas)
            q = q_new
        if trace is not None:
            trace.append(TraceRow(i, k, vsq - res.delta_plus, res.delta_plus,
                                  potential, feas, c,
                                  float(lam.min()), float(lam.max())))

    partial = AdmmResult(
        y=y, q=q, v=BlockVector.zeros(inst.sizes), delta=float("inf"), lam=lam,
        iterations=max_iterations, epoch_ends=epoch_ends, potential=potential,
        feasibility=float(np.linalg.norm(inst.map.apply(y) - inst.rhs)),
        converged=False, halvings=halvings, trace=trace,
    )
    raise NonconvergenceError(
        f"no residual below threshold within {max_iterations} iterations",
        result=partial,
    )


@dataclass(frozen=True)
class TheoryConstants:
    """Instance-level constants bounding a fixed-penalty run.

    ``sigma1``/``sigma2`` bound the residual by the per-sweep Lagrangian
    decrease, ``kappa`` bounds the multiplier norms, ``gamma`` bounds the
    potential, and ``epoch_bound``/``iteration_bound`` follow from them.
    """

    sigma1: float
    sigma2: float
    kappa: float
    gamma: Optional[float]
    epoch_bound: int
    multiplier_bound: float
    iteration_bound: Optional[float]


def kappa_bound(inst: ProblemInstance, C: float) -> float:
    """Multiplier-norm constant
    ``[2 D M_Psi + (2 D + 1)(C + C^2 + G)] / (dbar nu+)`` with ``D`` the
    domain radius, ``G`` the gradient bound, ``dbar`` the witness boundary
    distance, and ``nu+`` the smallest positive singular value of the map."""
    meta = inst.metadata
    if meta is None or not meta.complete:
        raise MetadataIncompleteError("kappa needs complete instance metadata")
    numer = 2.0 * meta.domain_radius * meta.psi_lipschitz
    numer += (2.0 * meta.domain_radius + 1.0) * (C + C**2 + meta.grad_bound)
    return numer / (meta.boundary_distance * meta.min_singular_value)


def adaptive_sigma1(lam_min: float, lam_max: float, cross_lipschitz_sq: float) -> float:
    """Residual constant realized by adaptive stepsizes in
    ``[lam_min, lam_max]``: ``48 lam_max ||L||^2 + 50 / lam_min + 1``."""
    return 48.0 * lam_max * cross_lipschitz_sq + 50.0 / lam_min + 1.0


def theory_constants(
    inst: ProblemInstance,
    c: float,
    tol: ToleranceConfig,
    y0: Optional[BlockVector] = None,
    q0_norm: float = 0.0,
) -> TheoryConstants:
    """Evaluate the run-level bounds for penalty ``c``.

    ``gamma`` (the potential bound) and the resulting iteration bound need
    a starting point; they are ``None`` when neither ``y0`` nor the stored
    instance start is available.
    """
    meta = inst.metadata
    if meta is None or meta.weak_convexity is None or meta.cross_lipschitz is None:
        raise MetadataIncompleteError("theory constants need weak-convexity metadata")
    m = np.asarray(meta.weak_convexity, dtype=float)
    if np.any(m <= 0):
        raise MetadataIncompleteError("weak-convexity moduli must be positive")
    lsq = meta.cross_lipschitz_sq_sum()
    sigma1 = 8.0 * (25.0 * float(m.max()) + 6.0 * lsq / float(m.min())) + 1.0
    norms = block_norms(inst.map)
    sigma2 = 24.0 * inst.block_count * norms.total_sq
    kappa = kappa_bound(inst, tol.C)
    epoch_bound = math.ceil((sigma1 + c * sigma2) / tol.alpha)
    multiplier_bound = max(q0_norm, kappa)

    start = y0 if y0 is not None else inst.x0
    gamma = None
    iteration_bound = None
    if start is not None:
        feas0_sq = float(np.sum((inst.map.apply(start) - inst.rhs) ** 2))
        gamma = (
            meta.f_max
            - meta.f_min
            + c * feas0_sq
            + (4.0 * (sigma1 + c * sigma2) / (tol.alpha * c) + 1.0 / c)
            * (q0_norm**2 + kappa**2)
        )
        iteration_bound = (sigma1 + c * sigma2) / tol.rho**2 * gamma + 1.0
    return TheoryConstants(
        sigma1=sigma1,
        sigma2=sigma2,
        kappa=kappa,
        gamma=gamma,
        epoch_bound=epoch_bound,
        multiplier_bound=multiplier_bound,
        iteration_bound=iteration_bound,
    )
