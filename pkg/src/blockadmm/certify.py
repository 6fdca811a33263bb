"""Stationarity certificates and independent checking.

A candidate solution of the constrained problem is certified by a quadruple
``(x, p, v, eps)`` required to satisfy

    v  in  grad f(x) + de_eps Psi(x) + A* p,
    ||v||^2 + eps <= rho^2,
    ||A x - b|| <= eta,

where ``de_eps`` is the eps-subdifferential.  The inclusion is verified
constructively: the residual direction ``xi = v - grad f(x) - A* p`` must
have summed per-block eps-subgradient gap at most ``eps``.  For box
indicators that gap is a closed-form support function, so the check is an
oracle independent of how the certificate was produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blocks import BlockVector
from .exceptions import InvalidCertificateError, OutOfDomainError
from .problem import NonsmoothBlock, ProblemInstance, ToleranceConfig

__all__ = [
    "SubCertificate",
    "Certificate",
    "StationarityReport",
    "check_tau_stationary",
    "eps_subgradient_gap",
    "check_rho_eta_stationary",
    "relative_error_ok",
]

# Absolute floor added to the inclusion tolerance to absorb rounding in the
# support-gap arithmetic; the true inclusion is exact in real arithmetic.
INCLUSION_SLACK = 1e-8


@dataclass
class SubCertificate:
    """Inexact stationary point of one proximal subproblem.

    ``r`` is the stationarity residual vector and ``eps`` the subgradient
    slack: ``r in grad psi_s(z) + de_eps psi_n(z)``.
    """

    z: np.ndarray
    r: np.ndarray
    eps: float
    iterations: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.eps < 0:
            raise InvalidCertificateError(f"negative slack eps={self.eps}")


@dataclass
class Certificate:
    """Candidate stationary quadruple for the constrained problem."""

    x: BlockVector
    p: np.ndarray
    v: BlockVector
    eps: float

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.eps < 0:
            raise InvalidCertificateError(f"negative slack eps={self.eps}")

    def residual_sq_plus_slack(self) -> float:
        return float(self.v.norm() ** 2 + self.eps)


@dataclass
class StationarityReport:
    inclusion_gap: float
    residual_ok: bool
    feasibility_ok: bool
    inclusion_ok: bool
    feasibility: float
    residual_sq_plus_slack: float
    multiplier_range_gap: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.inclusion_ok and self.residual_ok and self.feasibility_ok


def check_tau_stationary(cert: SubCertificate, z0: np.ndarray, tau: float) -> bool:
    """Residual-size half of the inexact-stationarity definition:
    ``||r||^2 + 2 eps <= tau ||z0 - z||^2``.

    The inclusion half is checked separately through
    :func:`eps_subgradient_gap`.
    """
    if cert.eps < 0:
        raise InvalidCertificateError("negative slack")
    z0 = np.asarray(z0, dtype=float)
    lhs = float(np.dot(cert.r, cert.r)) + 2.0 * cert.eps
    rhs = tau * float(np.sum((z0 - cert.z) ** 2))
    return lhs <= rhs


def eps_subgradient_gap(block: NonsmoothBlock, xi: np.ndarray, y: np.ndarray) -> float:
    """Smallest ``eps`` such that ``xi`` is an eps-subgradient of the block
    term at ``y``; zero exactly when ``xi`` lies in the normal cone."""
    if not block.contains(np.asarray(y, dtype=float)):
        raise OutOfDomainError("gap evaluation point outside the block domain")
    return float(block.eps_gap(np.asarray(xi, dtype=float), np.asarray(y, dtype=float)))


def _range_gap(inst: ProblemInstance, p: np.ndarray, size_limit: int = 250_000) -> Optional[float]:
    """Distance from ``p`` to the column space of the stacked map, skipped
    for maps too large to factor."""
    if inst.map.rows * inst.sizes.total > size_limit:
        return None
    stacked = inst.map.stacked()
    coef, *_ = np.linalg.lstsq(stacked, p, rcond=None)
    return float(np.linalg.norm(stacked @ coef - p))


def check_rho_eta_stationary(
    inst: ProblemInstance,
    cert: Certificate,
    tol: ToleranceConfig,
    check_range: bool = True,
) -> StationarityReport:
    """Independently re-derive every part of the stationarity conditions.

    The inclusion passes when the summed per-block gap of
    ``xi = v - grad f(x) - A* p`` is at most ``eps`` plus a float-noise
    allowance of ``1e-8 (1 + ||xi||)`` plus a machine term.  The machine
    term is unavoidable: a float64 iterate resolves ``xi`` only to about
    ``eps_mach`` times the gradient magnitudes, and the support function
    stretches that uncertainty across the domain width.
    """
    x, p, v = cert.x, cert.p, cert.v
    if not inst.in_domain(x):
        raise InvalidCertificateError("certificate point outside the domain")
    grad = inst.smooth.full_gradient(x)
    shifted = inst.map.adjoint(p)
    xi = BlockVector(inst.sizes, v.data - grad.data - shifted.data)
    machine_scale = np.abs(v.data) + np.abs(grad.data) + np.abs(shifted.data)
    gap = 0.0
    machine_noise = 0.0
    eps_mach = np.finfo(float).eps
    for t, blk in enumerate(inst.nonsmooth):
        gap += eps_subgradient_gap(blk, xi.block(t), x.block(t))
        sl = inst.sizes.index(t)
        spread = blk.support_gap(machine_scale[sl], x.block(t)) + blk.support_gap(
            -machine_scale[sl], x.block(t)
        )
        machine_noise += 1024.0 * eps_mach * spread
    feas = inst.feasibility(x)
    resid_sq = cert.residual_sq_plus_slack()
    inclusion_ok = gap <= cert.eps + INCLUSION_SLACK * (1.0 + xi.norm()) + machine_noise
    report = StationarityReport(
        inclusion_gap=gap,
        residual_ok=resid_sq <= tol.rho**2,
        feasibility_ok=feas <= tol.eta,
        inclusion_ok=inclusion_ok,
        feasibility=feas,
        residual_sq_plus_slack=resid_sq,
    )
    if check_range:
        report.multiplier_range_gap = _range_gap(inst, p)
    return report


def relative_error_ok(
    inst: ProblemInstance,
    cert: Certificate,
    x0: BlockVector,
    rho: float,
    eta: float,
) -> bool:
    """Relative stopping test: the residual norm is measured against
    ``1 + ||grad f(x0)||`` and the infeasibility against ``1 + ||A x0 - b||``."""
    grad0 = inst.smooth.full_gradient(x0).norm()
    feas0 = inst.feasibility(x0)
    resid_ok = cert.v.norm() / (1.0 + grad0) <= rho
    feas_ok = inst.feasibility(cert.x) / (1.0 + feas0) <= eta
    return bool(resid_ok and feas_ok)
