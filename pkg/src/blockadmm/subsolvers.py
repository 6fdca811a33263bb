"""Inexact solvers for one block proximal subproblem.

Each solver addresses ``min psi_s(z) + psi_n(z)`` with ``psi_s`` smooth and
``psi_n`` proper closed convex, and returns a :class:`SubCertificate`
``(z, r, eps)`` with ``r in grad psi_s(z) + de_eps psi_n(z)``.  All solvers
here extract ``r`` from the prox optimality of their last step and therefore
always return ``eps = 0``.

Three routes are provided:

* a closed form for separable quadratics over a box,
* a composite gradient method with a descent-certified stopping test,
* an accelerated gradient method for strongly convex subproblems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .certify import SubCertificate, check_tau_stationary
from .exceptions import NonconvergenceError, NotStronglyConvexError, ShapeError
from .problem import NonsmoothBlock

__all__ = [
    "SubproblemSpec",
    "CompositeGradientConfig",
    "exact_separable_quadratic_box",
    "global_separable_quadratic_box",
    "composite_gradient",
    "accelerated_gradient",
]

_MAX_INNER_ITERATIONS = 100_000


@dataclass
class SubproblemSpec:
    """One composite subproblem ``min psi_s + psi_n``.

    ``nonsmooth`` is the (already stepsize-scaled) convex term.  ``start``
    must lie in its domain.  ``tau`` requests a certificate satisfying
    ``||r||^2 + 2 eps <= tau ||start - z||^2`` on top of any solver-native
    stopping rule.  ``lipschitz`` and ``strong_convexity`` are estimates of
    the gradient Lipschitz constant and the modulus of ``psi_s + psi_n``.
    """

    smooth_value: Callable[[np.ndarray], float]
    smooth_grad: Callable[[np.ndarray], np.ndarray]
    nonsmooth: NonsmoothBlock
    start: np.ndarray
    tau: Optional[float] = None
    lipschitz: Optional[float] = None
    strong_convexity: Optional[float] = None

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        if not self.nonsmooth.contains(self.start):
            raise ShapeError("start point outside the nonsmooth domain")

    def objective(self, z: np.ndarray) -> float:
        return float(self.smooth_value(z)) + float(self.nonsmooth.value(z))


@dataclass
class CompositeGradientConfig:
    """Majorization constant ``M`` (``None`` = backtracking, doubling from 1)
    and the stopping parameters ``sigma``, ``vartheta``.

    The native test accepts iterate ``j`` once
    ``||v_j||^2 <= sigma [obj(z_0) - obj(z_j)] + vartheta^2``.
    """

    M: Optional[float] = None
    sigma: float = 1.0
    vartheta: float = 0.0
    max_iterations: int = _MAX_INNER_ITERATIONS

    def __post_init__(self):
        if self.M is not None and self.M <= 0:
            raise ShapeError("majorization constant must be positive")
        if self.sigma == 0 and self.vartheta == 0:
            raise ShapeError("sigma and vartheta cannot both be zero")


def exact_separable_quadratic_box(diag: np.ndarray, linear: np.ndarray, radius: float) -> np.ndarray:
    """Exact minimizer of ``sum_j (a_j/2) u_j^2 + b_j u_j`` over the box
    ``|u_j| <= radius``, requiring every ``a_j > 0``.

    Callers facing nonpositive curvature must reduce their prox stepsize
    (or use :func:`global_separable_quadratic_box`).
    """
    diag = np.asarray(diag, dtype=float)
    linear = np.asarray(linear, dtype=float)
    if np.any(diag <= 0):
        raise NotStronglyConvexError(
            f"nonpositive curvature (min a_j = {diag.min():.3e}); reduce the stepsize"
        )
    return np.clip(-linear / diag, -radius, radius)


def global_separable_quadratic_box(diag: np.ndarray, linear: np.ndarray, radius: float) -> np.ndarray:
    """Global minimizer of the separable quadratic over the box, any curvature.

    Convex coordinates clamp their vertex; concave and linear coordinates
    take the cheaper endpoint (ties resolve to the interior stationary
    point 0 when both terms vanish).
    """
    diag = np.asarray(diag, dtype=float)
    linear = np.asarray(linear, dtype=float)
    out = np.empty_like(linear)
    convex = diag > 0
    out[convex] = np.clip(-linear[convex] / diag[convex], -radius, radius)
    rest = ~convex
    if np.any(rest):
        # Endpoint comparison: g(r) - g(-r) = 2 b r, so the sign of b decides.
        out[rest] = np.where(linear[rest] > 0, -radius, radius)
        flat = rest & (diag == 0) & (linear == 0)
        out[flat] = 0.0
        concave_tie = rest & (diag < 0) & (linear == 0)
        out[concave_tie] = radius
    return out


def _prox_residual(spec, M, z_prev, g_prev, z_new):
    """Residual making the prox step stationarity-certified:
    ``M (z_prev - z_new) + grad(z_new) - grad(z_prev)`` lies in
    ``grad psi_s(z_new) + de psi_n(z_new)``."""
    return M * (z_prev - z_new) + np.asarray(spec.smooth_grad(z_new)) - g_prev


def _majorization_ok(spec, M, z_prev, f_prev, g_prev, z_new):
    delta = z_new - z_prev
    model = f_prev + float(np.dot(g_prev, delta)) + 0.5 * M * float(np.dot(delta, delta))
    return float(spec.smooth_value(z_new)) <= model + 1e-10 * (1.0 + abs(model))


def _tau_ok(spec, cert):
    if spec.tau is None:
        return True
    return check_tau_stationary(cert, spec.start, spec.tau)


def composite_gradient(spec: SubproblemSpec, cfg: CompositeGradientConfig) -> SubCertificate:
    """Prox-gradient descent with majorization stepsize ``1/M``.

    Each step minimizes the linearization of ``psi_s`` plus
    ``(M/2)||z - z_prev||^2`` plus ``psi_n``; the residual of step ``j``
    obeys ``8 M [obj(z_{j-1}) - obj(z_j)] >= ||v_j||^2``, which drives the
    descent-certified stopping test.  Works for weakly convex ``psi_s`` as
    long as ``M`` majorizes the curvature (backtracking doubles ``M`` until
    the majorization inequality holds).
    """
    M = cfg.M if cfg.M is not None else (spec.lipschitz or 1.0)
    z = spec.start.copy()
    f_start = spec.objective(z)
    best: Optional[SubCertificate] = None
    best_rsq = np.inf
    for j in range(1, cfg.max_iterations + 1):
        g_prev = np.asarray(spec.smooth_grad(z))
        f_prev = float(spec.smooth_value(z))
        while True:
            z_new = spec.nonsmooth.prox(1.0 / M, z - g_prev / M)
            if cfg.M is not None or _majorization_ok(spec, M, z, f_prev, g_prev, z_new):
                break
            M *= 2.0
        v = _prox_residual(spec, M, z, g_prev, z_new)
        cert = SubCertificate(z_new, v, 0.0, iterations=j)
        rsq = float(np.dot(v, v))
        obj_new = spec.objective(z_new)
        if rsq <= cfg.sigma * (f_start - obj_new) + cfg.vartheta**2 and _tau_ok(spec, cert):
            return cert
        if rsq < best_rsq:
            best, best_rsq = cert, rsq
        z = z_new
    raise NonconvergenceError(
        f"composite gradient exceeded {cfg.max_iterations} iterations", result=best
    )


def accelerated_gradient(
    spec: SubproblemSpec,
    strong_convexity: Optional[float] = None,
    max_iterations: int = _MAX_INNER_ITERATIONS,
) -> SubCertificate:
    """Accelerated prox gradient for strongly convex subproblems.

    Uses the constant momentum of the strongly convex regime with a restart
    on objective increase, and extracts the residual from the prox
    optimality of the last step.  Stops at the first iterate whose
    certificate satisfies the requested ``tau`` bound.
    """
    mu = strong_convexity if strong_convexity is not None else spec.strong_convexity
    if mu is None or mu <= 0:
        raise NotStronglyConvexError("accelerated route needs a strong convexity modulus")
    if spec.tau is None:
        raise ShapeError("accelerated route needs a target tau")
    M = spec.lipschitz or max(1.0, mu)
    M = max(M, mu)
    z = spec.start.copy()
    z_prev = z.copy()
    obj = spec.objective(z)
    for j in range(1, max_iterations + 1):
        ratio = np.sqrt(mu / M)
        beta = (1.0 - ratio) / (1.0 + ratio)
        y = z + beta * (z - z_prev)
        g_y = np.asarray(spec.smooth_grad(y))
        f_y = float(spec.smooth_value(y))
        while True:
            z_new = spec.nonsmooth.prox(1.0 / M, y - g_y / M)
            delta = z_new - y
            model = f_y + float(np.dot(g_y, delta)) + 0.5 * M * float(np.dot(delta, delta))
            if float(spec.smooth_value(z_new)) <= model + 1e-10 * (1.0 + abs(model)):
                break
            M *= 2.0
        v = _prox_residual(spec, M, y, g_y, z_new)
        cert = SubCertificate(z_new, v, 0.0, iterations=j)
        if _tau_ok(spec, cert):
            return cert
        obj_new = spec.objective(z_new)
        if obj_new > obj:
            # Momentum restart: fall back to a plain prox step next round.
            z_prev = z_new.copy()
        else:
            z_prev = z
        z = z_new
        obj = obj_new
    raise NonconvergenceError(f"accelerated gradient exceeded {max_iterations} iterations")
