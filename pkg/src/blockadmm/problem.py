"""Problem model: smooth oracle, prox-friendly blocks, linear constraint.

The target problem is

    minimize  f(y) + sum_t Psi_t(y_t)   subject to  sum_t A_t y_t = b,

with ``f`` differentiable and block weakly convex, and each ``Psi_t`` proper
closed convex with compact domain (here: boxes, plus a generic hook).  The
augmented Lagrangian with penalty ``c`` is

    L_c(y; p) = F(y) + <p, Ay - b> + (c/2) ||Ay - b||^2,

and its smooth part excludes the ``Psi_t`` terms.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blocks import BlockLinearMap, BlockSizes, BlockVector
from .exceptions import MetadataIncompleteError, OutOfDomainError, ShapeError

__all__ = [
    "SmoothOracle",
    "SeparableQuadraticOracle",
    "DenseQuadraticOracle",
    "FunctionOracle",
    "NonsmoothBlock",
    "Box",
    "ScaledBlock",
    "InstanceMetadata",
    "ProblemInstance",
    "ToleranceConfig",
    "augmented_lagrangian",
    "smooth_lagrangian",
    "derive_metadata",
]

logger = logging.getLogger("blockadmm")


class SmoothOracle:
    """Interface for the smooth objective term ``f``.

    Subclasses must provide :meth:`value` and :meth:`full_gradient`.
    ``partial_gradient(t, x)`` evaluates the block-``t`` gradient at a mixed
    point; callers splice the prefix (already-updated blocks) and suffix
    (not-yet-updated blocks) into one block vector before calling.
    """

    def value(self, x: BlockVector) -> float:
        raise NotImplementedError

    def full_gradient(self, x: BlockVector) -> BlockVector:
        raise NotImplementedError

    def partial_gradient(self, t: int, x: BlockVector) -> np.ndarray:
        return self.full_gradient(x).block(t).copy()

    def block_value_change(self, t: int, x: BlockVector, new_block: np.ndarray) -> float:
        """``f(x with block t replaced) - f(x)``.

        The default evaluates ``f`` twice; quadratic oracles override with a
        cancellation-free expansion so incremental Lagrangian bookkeeping
        stays accurate near stationary points.
        """
        old = x.block(t).copy()
        before = self.value(x)
        x.set_block(t, new_block)
        after = self.value(x)
        x.set_block(t, old)
        return after - before

    def block_hessian_diag(self, t: int) -> Optional[np.ndarray]:
        """Constant diagonal of the block-``t`` Hessian, if f has one."""
        return None

    def block_smoothness(self, t: int) -> Optional[float]:
        """Upper bound on the block-``t`` Hessian spectral norm, if known."""
        return None


class SeparableQuadraticOracle(SmoothOracle):
    """``f(x) = (1/2) sum_j q_j x_j^2 + sum_j r_j x_j``, fully separable."""

    def __init__(self, sizes: BlockSizes, quad_diag, linear):
        self.sizes = sizes
        self.quad_diag = np.asarray(quad_diag, dtype=float)
        self.linear = np.asarray(linear, dtype=float)
        if self.quad_diag.shape != (sizes.total,) or self.linear.shape != (sizes.total,):
            raise ShapeError("coefficient arrays must match the partition length")

    def value(self, x: BlockVector) -> float:
        v = x.data
        return float(0.5 * np.dot(self.quad_diag * v, v) + np.dot(self.linear, v))

    def full_gradient(self, x: BlockVector) -> BlockVector:
        return BlockVector(self.sizes, self.quad_diag * x.data + self.linear)

    def partial_gradient(self, t: int, x: BlockVector) -> np.ndarray:
        sl = self.sizes.index(t)
        return self.quad_diag[sl] * x.block(t) + self.linear[sl]

    def block_value_change(self, t: int, x: BlockVector, new_block: np.ndarray) -> float:
        sl = self.sizes.index(t)
        old = x.block(t)
        delta = new_block - old
        grad = self.quad_diag[sl] * old + self.linear[sl]
        return float(np.dot(grad, delta) + 0.5 * np.dot(self.quad_diag[sl] * delta, delta))

    def block_hessian_diag(self, t: int) -> np.ndarray:
        return self.quad_diag[self.sizes.index(t)]

    def block_smoothness(self, t: int) -> float:
        diag = self.quad_diag[self.sizes.index(t)]
        return float(np.abs(diag).max())


class DenseQuadraticOracle(SmoothOracle):
    """``f(x) = (1/2) x^T P x + r^T x`` with a dense symmetric ``P``."""

    def __init__(self, sizes: BlockSizes, matrix, linear):
        self.sizes = sizes
        self.matrix = np.asarray(matrix, dtype=float)
        self.linear = np.asarray(linear, dtype=float)
        n = sizes.total
        if self.matrix.shape != (n, n):
            raise ShapeError(f"matrix must be {n} x {n}")
        if self.linear.shape != (n,):
            raise ShapeError(f"linear term must have length {n}")
        if not np.allclose(self.matrix, self.matrix.T, rtol=0, atol=1e-12):
            raise ShapeError("matrix must be symmetric")

    def value(self, x: BlockVector) -> float:
        v = x.data
        return float(0.5 * np.dot(v, self.matrix @ v) + np.dot(self.linear, v))

    def full_gradient(self, x: BlockVector) -> BlockVector:
        return BlockVector(self.sizes, self.matrix @ x.data + self.linear)

    def partial_gradient(self, t: int, x: BlockVector) -> np.ndarray:
        sl = self.sizes.index(t)
        return self.matrix[sl, :] @ x.data + self.linear[sl]

    def block_value_change(self, t: int, x: BlockVector, new_block: np.ndarray) -> float:
        sl = self.sizes.index(t)
        delta = new_block - x.block(t)
        grad = self.matrix[sl, :] @ x.data + self.linear[sl]
        quad = self.matrix[sl, sl]
        return float(np.dot(grad, delta) + 0.5 * np.dot(delta, quad @ delta))

    def block_hessian_diag(self, t: int) -> Optional[np.ndarray]:
        sl = self.sizes.index(t)
        quad = self.matrix[sl, sl]
        if quad.shape == (1, 1):
            return np.diag(quad).copy()
        off = quad - np.diag(np.diag(quad))
        if np.abs(off).max() <= 1e-14 * max(1.0, np.abs(quad).max()):
            return np.diag(quad).copy()
        return None

    def block_smoothness(self, t: int) -> float:
        sl = self.sizes.index(t)
        return float(np.linalg.norm(self.matrix[sl, sl], 2))


class FunctionOracle(SmoothOracle):
    """Wrap plain callables ``value(x) -> float`` and ``gradient(x) -> array``."""

    def __init__(self, sizes: BlockSizes, value_fn, gradient_fn):
        self.sizes = sizes
        self._value = value_fn
        self._gradient = gradient_fn

    def value(self, x: BlockVector) -> float:
        return float(self._value(x.data))

    def full_gradient(self, x: BlockVector) -> BlockVector:
        return BlockVector(self.sizes, np.asarray(self._gradient(x.data), dtype=float))


class NonsmoothBlock:
    """Interface for one prox-friendly convex term ``Psi_t``.

    ``support_gap(xi, y)`` is ``sup_{z in dom Psi} <xi, z - y>``; for an
    indicator it equals the smallest ``eps`` with ``xi`` in the
    eps-subdifferential at ``y``.
    """

    dim: int

    def value(self, u: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, beta: float, u: np.ndarray) -> np.ndarray:
        """argmin of ``Psi(v) + ||v - u||^2 / (2 beta)``."""
        raise NotImplementedError

    def contains(self, u: np.ndarray) -> bool:
        return np.isfinite(self.value(u))

    def project(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support_gap(self, xi: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def eps_gap(self, xi: np.ndarray, y: np.ndarray) -> float:
        """Smallest ``eps`` such that ``xi`` is an eps-subgradient at ``y``.

        Equals ``sup_z [<xi, z - y> - Psi(z) + Psi(y)]``; indicator terms
        reduce to :meth:`support_gap`.
        """
        raise NotImplementedError

    def is_indicator(self) -> bool:
        return False


class Box(NonsmoothBlock):
    """Indicator of the centered box ``{u : |u_j| <= radius}``."""

    def __init__(self, dim: int, radius: float):
        if radius <= 0:
            raise ShapeError(f"box radius must be positive, got {radius}")
        self.dim = int(dim)
        self.radius = float(radius)

    def value(self, u: np.ndarray) -> float:
        u = np.asarray(u, dtype=float)
        return 0.0 if np.all(np.abs(u) <= self.radius) else float("inf")

    def prox(self, beta: float, u: np.ndarray) -> np.ndarray:
        # Independent of beta: the prox of an indicator is the projection.
        return self.project(u)

    def project(self, u: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), -self.radius, self.radius)

    def contains(self, u: np.ndarray) -> bool:
        return bool(np.all(np.abs(np.asarray(u, dtype=float)) <= self.radius))

    def support_gap(self, xi: np.ndarray, y: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        y = np.asarray(y, dtype=float)
        # Coordinate-wise maximizer of <xi, z - y> is z_j = radius * sign(xi_j).
        return float(np.sum(np.abs(xi) * self.radius - xi * y))

    def eps_gap(self, xi: np.ndarray, y: np.ndarray) -> float:
        if not self.contains(y):
            raise OutOfDomainError("evaluation point lies outside the box")
        return self.support_gap(xi, y)

    def is_indicator(self) -> bool:
        return True

    def __repr__(self) -> str:
        return f"Box(dim={self.dim}, radius={self.radius})"


class ScaledBlock(NonsmoothBlock):
    """``scale * Psi`` for a positive scale, used for prox-stepsize scaling."""

    def __init__(self, base: NonsmoothBlock, scale: float):
        if scale <= 0:
            raise ShapeError("scale must be positive")
        self.base = base
        self.scale = float(scale)
        self.dim = base.dim

    def value(self, u):
        return self.scale * self.base.value(u)

    def prox(self, beta, u):
        return self.base.prox(beta * self.scale, u)

    def project(self, u):
        return self.base.project(u)

    def contains(self, u):
        return self.base.contains(u)

    def support_gap(self, xi, y):
        return self.base.support_gap(xi, y)

    def eps_gap(self, xi, y):
        # Scaling identity: eps-gap of xi for s*Psi equals s * gap of xi/s for Psi.
        return self.scale * self.base.eps_gap(np.asarray(xi) / self.scale, y)

    def is_indicator(self):
        return self.base.is_indicator()


@dataclass
class InstanceMetadata:
    """Optional theory constants attached to an instance.

    ``weak_convexity`` holds per-block moduli m_t, ``cross_lipschitz`` the
    constants L_t (t = 1..B-1) bounding how the block-t gradient moves when
    later blocks move.  The remaining scalars bound the compact domain and
    the objective on it; all are diagnostics, never control flow.
    """

    weak_convexity: Optional[np.ndarray] = None
    cross_lipschitz: Optional[np.ndarray] = None
    feasible_point: Optional[np.ndarray] = None
    psi_lipschitz: float = 0.0
    domain_radius: Optional[float] = None
    boundary_distance: Optional[float] = None
    grad_bound: Optional[float] = None
    f_min: Optional[float] = None
    f_max: Optional[float] = None
    min_singular_value: Optional[float] = None

    def cross_lipschitz_sq_sum(self) -> Optional[float]:
        if self.cross_lipschitz is None:
            return None
        return float(np.sum(np.square(self.cross_lipschitz)))

    @property
    def complete(self) -> bool:
        return all(
            v is not None
            for v in (
                self.weak_convexity,
                self.cross_lipschitz,
                self.feasible_point,
                self.domain_radius,
                self.boundary_distance,
                self.grad_bound,
                self.f_min,
                self.f_max,
                self.min_singular_value,
            )
        )


@dataclass
class ProblemInstance:
    """A linearly constrained block composite program."""

    smooth: SmoothOracle
    nonsmooth: list
    map: BlockLinearMap
    rhs: np.ndarray
    metadata: Optional[InstanceMetadata] = None
    x0: Optional[BlockVector] = None
    name: str = ""

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        sizes = self.map.domain
        if len(self.nonsmooth) != sizes.count:
            raise ShapeError(
                f"{len(self.nonsmooth)} nonsmooth blocks for {sizes.count} map blocks"
            )
        for t, blk in enumerate(self.nonsmooth):
            if blk.dim != sizes.sizes[t]:
                raise ShapeError(f"nonsmooth block {t} has dim {blk.dim}, expected {sizes.sizes[t]}")
        if self.rhs.shape != (self.map.rows,):
            raise ShapeError(f"rhs must have length {self.map.rows}")
        if self.metadata is not None and self.metadata.feasible_point is not None:
            witness = BlockVector(sizes, np.asarray(self.metadata.feasible_point, dtype=float))
            resid = np.linalg.norm(self.map.apply(witness) - self.rhs)
            if resid > 1e-8 * (1.0 + np.linalg.norm(self.rhs)):
                raise ShapeError(f"feasibility witness violates the constraint by {resid:.3e}")

    @property
    def sizes(self) -> BlockSizes:
        return self.map.domain

    @property
    def block_count(self) -> int:
        return self.sizes.count

    def in_domain(self, x: BlockVector) -> bool:
        return all(blk.contains(x.block(t)) for t, blk in enumerate(self.nonsmooth))

    def nonsmooth_value(self, x: BlockVector) -> float:
        total = 0.0
        for t, blk in enumerate(self.nonsmooth):
            v = blk.value(x.block(t))
            if not np.isfinite(v):
                return float("inf")
            total += v
        return total

    def objective(self, x: BlockVector) -> float:
        psi = self.nonsmooth_value(x)
        if not np.isfinite(psi):
            return float("inf")
        return self.smooth.value(x) + psi

    def feasibility(self, x: BlockVector) -> float:
        return float(np.linalg.norm(self.map.apply(x) - self.rhs))


@dataclass(frozen=True)
class ToleranceConfig:
    """Residual tolerance ``rho``, feasibility tolerance ``eta``, and the
    multiplier-update parameters ``alpha`` in [rho^2, inf) and ``C`` in
    [rho, inf)."""

    rho: float = 1e-5
    eta: float = 1e-5
    alpha: float = 1e-2
    C: float = 1.0

    def __post_init__(self):
        if self.rho <= 0 or self.eta <= 0:
            raise ShapeError("tolerances must be positive")
        if self.alpha < self.rho**2:
            raise ShapeError(f"alpha={self.alpha} must be at least rho^2={self.rho ** 2}")
        if self.C < self.rho:
            raise ShapeError(f"C={self.C} must be at least rho={self.rho}")


def augmented_lagrangian(inst: ProblemInstance, y: BlockVector, p: np.ndarray, c: float) -> float:
    """``F(y) + <p, Ay-b> + (c/2)||Ay-b||^2``; ``+inf`` outside the domain."""
    if c <= 0:
        raise ShapeError("penalty parameter must be positive")
    p = np.asarray(p, dtype=float)
    if p.shape != (inst.map.rows,):
        raise ShapeError(f"multiplier must have length {inst.map.rows}")
    psi = inst.nonsmooth_value(y)
    if not np.isfinite(psi):
        return float("inf")
    resid = inst.map.apply(y) - inst.rhs
    return inst.smooth.value(y) + psi + float(np.dot(p, resid)) + 0.5 * c * float(np.dot(resid, resid))


def smooth_lagrangian(inst: ProblemInstance, t: int, mixed: BlockVector, p: np.ndarray, c: float):
    """Smooth part of the augmented Lagrangian at a mixed point, with the
    gradient taken in block ``t``.

    Returns ``(value, grad_t)`` where the value omits every ``Psi_s`` term and
    ``grad_t = grad_t f(mixed) + A_t^T [p + c (A(mixed) - b)]``.
    """
    p = np.asarray(p, dtype=float)
    resid = inst.map.apply(mixed) - inst.rhs
    value = inst.smooth.value(mixed) + float(np.dot(p, resid)) + 0.5 * c * float(np.dot(resid, resid))
    grad = inst.smooth.partial_gradient(t, mixed) + inst.map.adjoint_block(t, p + c * resid)
    return value, grad


def _corner_iter(radii):
    """Iterate over all sign corners of a box given per-coordinate radii."""
    n = len(radii)
    for mask in range(1 << n):
        yield np.array([radii[j] if (mask >> j) & 1 else -radii[j] for j in range(n)])


def derive_metadata(inst: ProblemInstance, feasible_point: Optional[np.ndarray] = None,
                    corner_limit: int = 16) -> InstanceMetadata:
    """Fill domain/objective bounds for box-constrained quadratic instances.

    Requires every nonsmooth block to be a :class:`Box` and the smooth term
    to be one of the quadratic oracles.  ``feasible_point`` (or the witness
    already stored in the metadata) must be strictly inside the boxes and
    satisfy the constraint.  Separable quadratics get exact bounds; dense
    ones get conservative interval bounds, which only feed diagnostics.
    """
    if not all(isinstance(b, Box) for b in inst.nonsmooth):
        raise MetadataIncompleteError("metadata derivation needs box domains")
    meta = inst.metadata if inst.metadata is not None else InstanceMetadata()
    witness = feasible_point if feasible_point is not None else meta.feasible_point
    if witness is None:
        raise MetadataIncompleteError("no feasible witness supplied")
    witness = np.asarray(witness, dtype=float)
    sizes = inst.sizes
    radii = np.empty(sizes.total)
    for t, blk in enumerate(inst.nonsmooth):
        radii[sizes.index(t)] = blk.radius

    if np.any(np.abs(witness) >= radii):
        raise MetadataIncompleteError("feasible witness must be strictly interior")
    boundary_distance = float(np.min(radii - np.abs(witness)))
    # Farthest box corner from the witness, coordinate by coordinate.
    domain_radius = float(np.linalg.norm(np.maximum(np.abs(-radii - witness), np.abs(radii - witness))))

    smooth = inst.smooth
    if isinstance(smooth, SeparableQuadraticOracle):
        q, r = smooth.quad_diag, smooth.linear
        per_coord_grad = np.maximum(np.abs(q * radii + r), np.abs(-q * radii + r))
        grad_bound = float(np.linalg.norm(per_coord_grad))
        lo = np.empty(sizes.total)
        hi = np.empty(sizes.total)
        for j in range(sizes.total):
            ends = [0.5 * q[j] * w * w + r[j] * w for w in (-radii[j], radii[j])]
            lo[j], hi[j] = min(ends), max(ends)
            if q[j] != 0 and abs(r[j] / q[j]) < radii[j]:
                vertex = -0.5 * r[j] ** 2 / q[j]
                if q[j] > 0:
                    lo[j] = min(lo[j], vertex)
                else:
                    hi[j] = max(hi[j], vertex)
        f_min, f_max = float(np.sum(lo)), float(np.sum(hi))
    elif isinstance(smooth, DenseQuadraticOracle):
        P, r = smooth.matrix, smooth.linear
        n = sizes.total
        if n <= corner_limit:
            corners = list(_corner_iter(radii))
            grad_bound = float(max(np.linalg.norm(P @ z + r) for z in corners))
        else:
            grad_bound = float(np.linalg.norm(P, 2) * np.linalg.norm(radii) + np.linalg.norm(r))
        # Interval bounds: sum of per-term extrema of (1/2) P_ij x_i x_j + r_i x_i.
        pairwise = 0.5 * np.abs(P) * np.outer(radii, radii)
        diag = 0.5 * np.diag(P) * radii**2
        off_sum = float(pairwise.sum() - np.abs(diag).sum())
        f_max = float(off_sum + np.sum(np.maximum(diag, 0.0)) + np.sum(np.abs(r) * radii))
        f_min = float(-off_sum + np.sum(np.minimum(diag, 0.0)) - np.sum(np.abs(r) * radii))
    else:
        raise MetadataIncompleteError("metadata derivation needs a quadratic smooth term")

    return dataclasses.replace(
        meta,
        feasible_point=witness,
        psi_lipschitz=0.0,  # indicators are constant on their domain
        domain_radius=domain_radius,
        boundary_distance=boundary_distance,
        grad_bound=grad_bound,
        f_min=f_min,
        f_max=f_max,
        min_singular_value=inst.map.min_positive_singular_value(),
    )
