"""Runtime invariant monitoring.

An :class:`InvariantMonitor` plugs into the sweeps and drivers through
optional hooks and re-derives, independently of the algorithm's own
bookkeeping, every inequality the method is supposed to maintain: descent
tests, inclusion gaps, potential monotonicity, residual-potential bounds,
epoch counts, and multiplier bounds.  Violations are collected as strings
rather than raised, so a test can run a whole solve and assert the list is
empty.

Checks that need instance metadata (weak-convexity moduli, domain bounds)
are skipped with a logged notice when the metadata is absent.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional

import numpy as np

from .blocks import BlockVector, block_norms
from .certify import eps_subgradient_gap
from .exceptions import MetadataIncompleteError
from .fixed_penalty import adaptive_sigma1, kappa_bound
from .problem import ProblemInstance, ToleranceConfig, augmented_lagrangian

__all__ = ["InvariantMonitor"]

logger = logging.getLogger("blockadmm")

# Flat allowance on inclusion gaps; the inclusion is exact in real arithmetic.
GAP_SLACK = 1e-8
REL_SLACK = 1e-9
FLOOR_SLACK = 1e-12


class InvariantMonitor:
    """Collects violations of the method's runtime invariants.

    Parameters
    ----------
    inst : ProblemInstance
        Instance the monitored run operates on.
    paranoid : bool
        Re-evaluate full augmented Lagrangians at every accepted block step
        and compare them against the incremental bookkeeping (slow).
    """

    def __init__(self, inst: ProblemInstance, paranoid: bool = False):
        self.inst = inst
        self.paranoid = paranoid
        self.violations: List[str] = []
        self.blocks_accepted = 0
        self.sweeps = 0
        self.iterations = 0
        self.multiplier_updates = 0
        self._notified = set()
        self._sigma2: Optional[float] = None
        self._kappa: Optional[float] = None
        self._kappa_C: Optional[float] = None
        # per fixed-penalty run state
        self._mode = "adaptive"
        self._tol: Optional[ToleranceConfig] = None
        self._q0_norm = 0.0
        self._lagrangian_start: Optional[float] = None
        self._sum_dq_sq = 0.0
        self._sigma1: Optional[float] = None
        # outer-driver state
        self._outer_feas_threshold: Optional[float] = None

    # -- helpers ---------------------------------------------------------

    def _flag(self, message: str) -> None:
        self.violations.append(message)

    def _notice(self, key: str, message: str) -> None:
        if key not in self._notified:
            self._notified.add(key)
            logger.info("%s", message)

    def _meta(self):
        return self.inst.metadata

    def sigma2(self) -> float:
        if self._sigma2 is None:
            self._sigma2 = 24.0 * self.inst.block_count * block_norms(self.inst.map).total_sq
        return self._sigma2

    def kappa(self, C: float) -> Optional[float]:
        if self._kappa is not None and self._kappa_C == C:
            return self._kappa
        try:
            self._kappa = kappa_bound(self.inst, C)
            self._kappa_C = C
        except MetadataIncompleteError:
            self._notice("kappa", "metadata incomplete: multiplier-bound checks skipped")
            return None
        return self._kappa

    def _cross_lipschitz_sq(self) -> Optional[float]:
        meta = self._meta()
        if meta is None or meta.cross_lipschitz is None:
            self._notice("lsq", "metadata incomplete: residual-potential checks skipped")
            return None
        return meta.cross_lipschitz_sq_sum()

    # -- sweep hooks -----------------------------------------------------

    def on_block_accept(self, t, lam_t, drop, floor, work, z_old, z_new, p, c):
        self.blocks_accepted += 1
        if self.paranoid:
            before = augmented_lagrangian(self.inst, work, p, c)
            work.set_block(t, z_new)
            after = augmented_lagrangian(self.inst, work, p, c)
            work.set_block(t, z_old)
            scale = 1.0 + abs(before) + abs(after)
            full_drop = before - after
            if abs(full_drop - drop) > 1e-10 * scale:
                self._flag(
                    f"block {t}: incremental drop {drop:.6e} disagrees with "
                    f"recomputed {full_drop:.6e}"
                )
            if floor is not None and full_drop < floor - 1e-10 * scale:
                self._flag(
                    f"block {t}: accepted step violates descent test "
                    f"({full_drop:.6e} < {floor:.6e})"
                )
        elif floor is not None and drop < floor - 1e-10 * (1.0 + abs(drop) + floor):
            self._flag(f"block {t}: accepted drop {drop:.6e} below floor {floor:.6e}")

    def on_sweep(self, z_before, result, p, c, lam_in):
        self.sweeps += 1
        inst = self.inst
        # Inclusion: v+ - grad f(z+) - A*[p + c(A z+ - b)] must be an
        # eps-subgradient direction with total gap at most delta+.
        shifted = p + c * result.constraint_residual
        xi = BlockVector(
            inst.sizes,
            result.v_plus.data
            - inst.smooth.full_gradient(result.z_plus).data
            - inst.map.adjoint(shifted).data,
        )
        gap = 0.0
        for t, blk in enumerate(inst.nonsmooth):
            gap += eps_subgradient_gap(blk, xi.block(t), result.z_plus.block(t))
        if gap > result.delta_plus + GAP_SLACK * (1.0 + xi.norm()):
            self._flag(
                f"sweep {self.sweeps}: inclusion gap {gap:.3e} exceeds "
                f"delta {result.delta_plus:.3e}"
            )
        # Stepsize floor from the halving guarantee, when moduli are known.
        meta = self._meta()
        if meta is not None and meta.weak_convexity is not None:
            floors = np.minimum(lam_in, 0.25 / np.asarray(meta.weak_convexity))
            if np.any(result.lam_plus < floors * (1.0 - FLOOR_SLACK)):
                self._flag(f"sweep {self.sweeps}: realized stepsize fell below its floor")
        # Aggregate descent: total drop dominates the summed per-block floors.
        total_floor = sum(s.descent_floor for s in result.steps)
        if result.lagrangian_drop < total_floor - 1e-9 * (1.0 + abs(result.lagrangian_drop)):
            self._flag(f"sweep {self.sweeps}: aggregate descent bound violated")

    # -- fixed-penalty hooks ----------------------------------------------

    def on_admm_start(self, inst, y0, q0, lam0, c, mode, tol):
        self._mode = mode
        self._tol = tol
        self._q0_norm = float(np.linalg.norm(q0))
        self._sum_dq_sq = 0.0
        self._lagrangian_start = augmented_lagrangian(inst, y0, q0, c)
        self._sigma1 = None
        meta = self._meta()
        if mode == "fixed" and meta is not None and meta.weak_convexity is not None:
            m = np.asarray(meta.weak_convexity, dtype=float)
            lsq = self._cross_lipschitz_sq()
            if lsq is not None and np.allclose(lam0, 0.5 / m, rtol=1e-9, atol=0.0):
                self._sigma1 = 8.0 * (25.0 * float(m.max()) + 6.0 * lsq / float(m.min())) + 1.0
            else:
                self._notice(
                    "fixed-lam",
                    "fixed mode run without the 1/(2m) stepsizes: theory checks off",
                )

    def _sigma_prime(self, lam) -> Optional[float]:
        if self._mode == "fixed":
            return self._sigma1
        lsq = self._cross_lipschitz_sq()
        if lsq is None:
            return None
        return adaptive_sigma1(float(np.min(lam)), float(np.max(lam)), lsq)

    def on_admm_iteration(self, i, k, vsq, t_prev, t_new, lam, c, feas,
                          drop_noise=0.0):
        self.iterations += 1
        if t_new < t_prev - 1e-10 * (1.0 + abs(t_new)) - drop_noise:
            self._flag(f"iteration {i}: potential decreased ({t_prev:.6e} -> {t_new:.6e})")
        sigma = self._sigma_prime(lam)
        if sigma is not None:
            # drop_noise bounds the rounding in the incremental Lagrangian
            # decrease; without it the check is vacuous near termination.
            bound = (sigma + c * self.sigma2()) * (t_new - t_prev + drop_noise)
            if vsq > bound * (1.0 + REL_SLACK) + 1e-12:
                self._flag(
                    f"iteration {i}: residual {vsq:.6e} exceeds potential bound {bound:.6e}"
                )
        tol = self._tol
        if tol is not None and vsq <= tol.C**2:
            kap = self.kappa(tol.C)
            if kap is not None:
                cap = 2.0 * max(self._q0_norm, kap)
                if c * feas > cap * (1.0 + REL_SLACK) + 1e-12:
                    self._flag(
                        f"iteration {i}: scaled infeasibility {c * feas:.6e} "
                        f"exceeds {cap:.6e}"
                    )

    def on_multiplier_update(self, i, k, q_old, q_new, y, potential, c, feas):
        self.multiplier_updates += 1
        tol = self._tol
        if tol is not None:
            kap = self.kappa(tol.C)
            if kap is not None:
                cap = max(self._q0_norm, kap)
                if np.linalg.norm(q_new) > cap * (1.0 + REL_SLACK) + 1e-12:
                    self._flag(
                        f"epoch {k}: multiplier norm {np.linalg.norm(q_new):.6e} "
                        f"exceeds {cap:.6e}"
                    )
        if self._lagrangian_start is not None:
            current = augmented_lagrangian(self.inst, y, q_old, c)
            expected = (self._lagrangian_start - current) + self._sum_dq_sq / c
            scale = 1.0 + abs(potential) + abs(self._lagrangian_start) + abs(current)
            if abs(potential - expected) > 1e-8 * scale:
                self._flag(
                    f"epoch {k}: potential {potential:.6e} disagrees with "
                    f"decomposition {expected:.6e}"
                )
        self._sum_dq_sq += float(np.sum((q_new - q_old) ** 2))

    def on_admm_end(self, k, c, mode):
        if mode == "fixed" and self._sigma1 is not None and self._tol is not None:
            bound = math.ceil((self._sigma1 + c * self.sigma2()) / self._tol.alpha)
            if k > bound:
                self._flag(f"epoch count {k} exceeds bound {bound}")

    # -- outer-driver hooks ------------------------------------------------

    def on_outer_start(self, inst, x0, c0, tol, feas_threshold=None):
        self._outer_feas_threshold = feas_threshold if feas_threshold is not None else tol.eta

    def on_outer_call(self, ell, c_prev, c_new, p, feas):
        tol = self._tol
        kap = self.kappa(tol.C) if tol is not None else None
        if kap is None:
            return
        if np.linalg.norm(p) > kap * (1.0 + REL_SLACK) + 1e-12:
            self._flag(f"outer call {ell}: multiplier norm exceeds kappa {kap:.6e}")
        if c_new * feas > 4.0 * kap * (1.0 + REL_SLACK) + 1e-12:
            self._flag(
                f"outer call {ell}: penalty-scaled infeasibility "
                f"{c_new * feas:.6e} exceeds 4 kappa"
            )

    def on_outer_end(self, result, tol):
        kap = self.kappa(tol.C)
        if kap is None:
            return
        eta = self._outer_feas_threshold if self._outer_feas_threshold is not None else tol.eta
        bound = math.log2(1.0 + 4.0 * kap / (result.c0 * eta)) + 1.0
        if len(result.calls) > bound + 1e-9:
            self._flag(
                f"outer calls {len(result.calls)} exceed bound {bound:.3f}"
            )

    def assert_clean(self):
        if self.violations:
            raise AssertionError(
                "invariant violations:\n" + "\n".join(self.violations)
            )
