"""Gauss-Seidel sweeps of inexact block proximal point on the augmented
Lagrangian.

One sweep visits the blocks in order.  Block ``t`` (with the earlier blocks
already updated) approximately minimizes

    lam_t * Lhat_c(z+_{<t}, u, z_{>t}; p) + (1/2)||u - z_t||^2 + lam_t Psi_t(u)

to an inexact stationary point with ``tau = 1/8`` relative accuracy, then the
sweep assembles a residual pair ``(v+, delta+)`` certifying

    v+  in  grad f(z+) + de_{delta+} Psi(z+) + A*[p + c(A z+ - b)].

:func:`block_prox_sweep` keeps the prox stepsizes fixed.
:func:`adaptive_block_prox_sweep` halves the block stepsize until the
accepted step decreases the augmented Lagrangian by at least

    (1/(8 lam_t)) ||z+_t - z_t||^2 + (c/4) ||A_t (z+_t - z_t)||^2,

which certifies descent without knowing any weak-convexity modulus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .blocks import BlockVector
from .certify import SubCertificate
from .exceptions import ShapeError, StepsizeCollapseError
from .problem import Box, ProblemInstance, ScaledBlock
from .subsolvers import (
    CompositeGradientConfig,
    SubproblemSpec,
    accelerated_gradient,
    composite_gradient,
    global_separable_quadratic_box,
)

__all__ = [
    "SweepResult",
    "AcceptedStep",
    "block_prox_sweep",
    "adaptive_block_prox_sweep",
    "residual_pair",
]

# Relative accuracy requested from every block subproblem solve.
BLOCK_TAU = 0.125
MAX_HALVINGS = 60


@dataclass
class AcceptedStep:
    """Bookkeeping for one accepted block update."""

    block: int
    stepsize: float
    drop: float          # Lagrangian decrease contributed by this block
    descent_floor: float  # right-hand side of the adaptive descent test
    halvings: int


@dataclass
class SweepResult:
    """Output of one sweep: iterate, residual pair, and realized stepsizes."""

    z_plus: BlockVector
    v_plus: BlockVector
    delta_plus: float
    lam_plus: np.ndarray
    residuals: List[np.ndarray]
    slacks: np.ndarray
    lagrangian_drop: float
    constraint_residual: np.ndarray
    inner_iterations: int
    halvings: int
    drop_scale: float = 0.0
    steps: List[AcceptedStep] = field(default_factory=list)

    def residual_sq_plus_slack(self) -> float:
        return float(self.v_plus.norm() ** 2 + self.delta_plus)

    def feasibility(self) -> float:
        return float(np.linalg.norm(self.constraint_residual))


SUBSOLVERS = ("auto", "exact", "gradient", "accelerated")


def _validate_sweep_args(inst, z, p, lam, c, subsolver):
    if subsolver not in SUBSOLVERS:
        raise ShapeError(f"unknown subsolver {subsolver!r}; choose from {SUBSOLVERS}")
    if not inst.in_domain(z):
        raise ShapeError("sweep start point outside the domain")
    p = np.asarray(p, dtype=float)
    if p.shape != (inst.map.rows,):
        raise ShapeError(f"multiplier must have length {inst.map.rows}")
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (inst.block_count,)).copy()
    if np.any(lam <= 0):
        raise ShapeError("prox stepsizes must be positive")
    if c <= 0:
        raise ShapeError("penalty parameter must be positive")
    return p, lam


def _solve_block(inst, t, work, z_t, lam_t, p, c, w, subsolver):
    """Inexactly solve the block-``t`` prox subproblem.

    ``work`` is the mixed point with block ``t`` equal to ``z_t`` and
    ``w = A(work) - b``.  Separable quadratic structure over a box is
    solved in closed form (exact certificate ``(z, 0, 0)``); everything
    else goes through a gradient subsolver at ``tau = 1/8``.
    """
    blk = inst.nonsmooth[t]
    if subsolver in ("auto", "exact"):
        hdiag = inst.smooth.block_hessian_diag(t)
        gdiag = inst.map.gram_diag(t)
        if isinstance(blk, Box) and hdiag is not None and gdiag is not None:
            curv = lam_t * (hdiag + c * gdiag) + 1.0
            grad0 = lam_t * (
                inst.smooth.partial_gradient(t, work)
                + inst.map.adjoint_block(t, p + c * w)
            )
            u = global_separable_quadratic_box(curv, grad0 - curv * z_t, blk.radius)
            return SubCertificate(u, np.zeros_like(u), 0.0, iterations=1)
        if subsolver == "exact":
            raise ShapeError(
                f"block {t} lacks separable quadratic structure over a box"
            )

    z_t = z_t.copy()

    def smooth_value(u):
        work.set_block(t, u)
        resid = w + inst.map.apply_block(t, u - z_t)
        val = lam_t * (
            inst.smooth.value(work)
            + float(np.dot(p, resid))
            + 0.5 * c * float(np.dot(resid, resid))
        ) + 0.5 * float(np.sum((u - z_t) ** 2))
        work.set_block(t, z_t)
        return val

    def smooth_grad(u):
        work.set_block(t, u)
        resid = w + inst.map.apply_block(t, u - z_t)
        g = lam_t * (
            inst.smooth.partial_gradient(t, work)
            + inst.map.adjoint_block(t, p + c * resid)
        ) + (u - z_t)
        work.set_block(t, z_t)
        return g

    smoothness = inst.smooth.block_smoothness(t)
    lipschitz = None
    if smoothness is not None:
        lipschitz = lam_t * (smoothness + c * inst.map.block_norm(t) ** 2) + 1.0
    mu = None
    if inst.metadata is not None and inst.metadata.weak_convexity is not None:
        cand = 1.0 - lam_t * float(inst.metadata.weak_convexity[t])
        if cand > 1e-12:
            mu = cand
    spec = SubproblemSpec(
        smooth_value=smooth_value,
        smooth_grad=smooth_grad,
        nonsmooth=ScaledBlock(blk, lam_t),
        start=z_t,
        tau=BLOCK_TAU,
        lipschitz=lipschitz,
        strong_convexity=mu,
    )
    if subsolver == "accelerated" or (subsolver == "auto" and mu is not None):
        return accelerated_gradient(spec, mu)
    return composite_gradient(spec, CompositeGradientConfig())


def _block_drop(inst, t, work, z_old, z_new, p, c, w):
    """Augmented-Lagrangian decrease of replacing block ``t``.

    Computed incrementally (only block ``t`` and the constraint residual
    change), which avoids the catastrophic cancellation of differencing two
    full Lagrangian values.  Returns the decrease, a magnitude scale for
    float-noise guards, and ``A_t (z_new - z_old)``.
    """
    delta = z_new - z_old
    at_delta = inst.map.apply_block(t, delta)
    df = inst.smooth.block_value_change(t, work, z_new)
    blk = inst.nonsmooth[t]
    dpsi = blk.value(z_new) - blk.value(z_old)
    lin = float(np.dot(p, at_delta))
    cross = float(np.dot(w, at_delta))
    sq = float(np.dot(at_delta, at_delta))
    drop = -(df + dpsi + lin + c * cross + 0.5 * c * sq)
    scale = (
        abs(df)
        + abs(dpsi)
        + float(np.linalg.norm(p)) * float(np.linalg.norm(at_delta))
        + c * float(np.linalg.norm(w)) * float(np.linalg.norm(at_delta))
        + 0.5 * c * sq
    )
    return drop, scale, at_delta


def residual_pair(inst, z, z_plus, residuals, slacks, lam_plus, c):
    """Residual pair ``(v+, delta+)`` for the sweep output ``z_plus``.

    Block ``t`` of ``v+`` is

        grad_t f(z+) - grad_t f(z+_{<=t}, z_{>t}) + r_t / lam_t
        + c A_t^T sum_{s>t} A_s (z+_s - z_s) - (z+_t - z_t) / lam_t,

    and ``delta+ = sum_t eps_t / lam_t``.
    """
    sizes = inst.sizes
    if z.sizes != sizes or z_plus.sizes != sizes:
        raise ShapeError("iterates do not match the instance partition")
    B = sizes.count
    lam_plus = np.asarray(lam_plus, dtype=float)

    suffix = [None] * B
    acc = np.zeros(inst.map.rows)
    for t in reversed(range(B)):
        suffix[t] = acc.copy()
        acc = acc + inst.map.apply_block(t, z_plus.block(t) - z.block(t))

    work = z.copy()
    mixed_grads = []
    for t in range(B):
        work.set_block(t, z_plus.block(t))
        mixed_grads.append(inst.smooth.partial_gradient(t, work))
    grad_new = inst.smooth.full_gradient(z_plus)

    v = BlockVector.zeros(sizes)
    delta_plus = 0.0
    for t in range(B):
        step = (z_plus.block(t) - z.block(t)) / lam_plus[t]
        v.block(t)[:] = (
            grad_new.block(t)
            - mixed_grads[t]
            + np.asarray(residuals[t]) / lam_plus[t]
            + c * inst.map.adjoint_block(t, suffix[t])
            - step
        )
        delta_plus += float(slacks[t]) / lam_plus[t]
    return v, delta_plus


def _finish_sweep(inst, z, work, w, lam_plus, residuals, slacks, c,
                  drop_total, inner, halvings, steps, drop_scale):
    v_plus, delta_plus = residual_pair(inst, z, work, residuals, slacks, lam_plus, c)
    return SweepResult(
        z_plus=work,
        v_plus=v_plus,
        delta_plus=delta_plus,
        lam_plus=lam_plus,
        residuals=residuals,
        slacks=np.asarray(slacks, dtype=float),
        lagrangian_drop=drop_total,
        constraint_residual=w,
        inner_iterations=inner,
        halvings=halvings,
        drop_scale=drop_scale,
        steps=steps,
    )


def block_prox_sweep(inst: ProblemInstance, z: BlockVector, p, lam, c,
                     subsolver: str = "auto", monitor=None) -> SweepResult:
    """One sweep with fixed prox stepsizes; ``lam_plus`` equals ``lam``."""
    p, lam = _validate_sweep_args(inst, z, p, lam, c, subsolver)
    work = z.copy()
    w = inst.map.apply(z) - inst.rhs
    residuals, slacks, steps = [], [], []
    drop_total, inner, drop_scale = 0.0, 0, 0.0
    for t in range(inst.block_count):
        z_t = work.block(t).copy()
        cert = _solve_block(inst, t, work, z_t, lam[t], p, c, w, subsolver)
        drop, scale, at_delta = _block_drop(inst, t, work, z_t, cert.z, p, c, w)
        if monitor is not None:
            monitor.on_block_accept(t, lam[t], drop, None, work, z_t, cert.z, p, c)
        work.set_block(t, cert.z)
        w = w + at_delta
        residuals.append(cert.r)
        slacks.append(cert.eps)
        steps.append(AcceptedStep(t, lam[t], drop, 0.0, 0))
        drop_total += drop
        drop_scale += scale
        inner += cert.iterations
    result = _finish_sweep(inst, z, work, w, lam, residuals, slacks, c,
                           drop_total, inner, 0, steps, drop_scale)
    if monitor is not None:
        monitor.on_sweep(z, result, p, c, np.asarray(lam))
    return result


def adaptive_block_prox_sweep(inst: ProblemInstance, z: BlockVector, p, lam, c,
                              subsolver: str = "auto", monitor=None,
                              max_halvings: int = MAX_HALVINGS) -> SweepResult:
    """One sweep that halves each block stepsize until its descent test holds.

    The accepted pair ``(z+_t, lam+_t)`` satisfies

        L_c(z+_{<t}, z_t, z_{>t}; p) - L_c(z+_{<t}, z+_t, z_{>t}; p)
            >= (1/(8 lam+_t)) ||z+_t - z_t||^2 + (c/4) ||A_t (z+_t - z_t)||^2

    up to a float-noise guard scaled by the magnitudes entering the
    left-hand side.  No weak-convexity metadata is consulted.
    """
    p, lam = _validate_sweep_args(inst, z, p, lam, c, subsolver)
    lam_plus = lam.copy()
    work = z.copy()
    w = inst.map.apply(z) - inst.rhs
    residuals, slacks, steps = [], [], []
    drop_total, inner, total_halvings, drop_scale = 0.0, 0, 0, 0.0
    for t in range(inst.block_count):
        z_t = work.block(t).copy()
        lam_t = lam_plus[t]
        halvings = 0
        while True:
            cert = _solve_block(inst, t, work, z_t, lam_t, p, c, w, subsolver)
            inner += cert.iterations
            drop, scale, at_delta = _block_drop(inst, t, work, z_t, cert.z, p, c, w)
            delta = cert.z - z_t
            floor = (
                float(np.dot(delta, delta)) / (8.0 * lam_t)
                + 0.25 * c * float(np.dot(at_delta, at_delta))
            )
            guard = 1e-13 * (1.0 + scale)
            if drop >= floor - guard:
                break
            lam_t *= 0.5
            halvings += 1
            if halvings > max_halvings:
                raise StepsizeCollapseError(
                    f"block {t}: descent test failed after {max_halvings} halvings",
                    block=t,
                )
        lam_plus[t] = lam_t
        if monitor is not None:
            monitor.on_block_accept(t, lam_t, drop, floor, work, z_t, cert.z, p, c)
        work.set_block(t, cert.z)
        w = w + at_delta
        residuals.append(cert.r)
        slacks.append(cert.eps)
        steps.append(AcceptedStep(t, lam_t, drop, floor, halvings))
        drop_total += drop
        drop_scale += scale
        total_halvings += halvings
    result = _finish_sweep(inst, z, work, w, lam_plus, residuals, slacks, c,
                           drop_total, inner, total_halvings, steps, drop_scale)
    if monitor is not None:
        monitor.on_sweep(z, result, p, c, np.asarray(lam))
    return result
