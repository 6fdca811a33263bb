"""Penalty-doubling driver and the damped-multiplier baseline."""

import math

import numpy as np
import pytest

from blockadmm import (
    BaselineConfig,
    BlockLinearMap,
    BlockSizes,
    BlockVector,
    Box,
    InvariantMonitor,
    NonconvergenceError,
    ProblemInstance,
    SeparableQuadraticOracle,
    ShapeError,
    StoppingRule,
    ToleranceConfig,
    adaptive_penalty_admm,
    block_prox_sweep,
    check_rho_eta_stationary,
    damped_multiplier_admm,
    damped_pair_is_theoretical,
    derive_metadata,
    fixed_penalty_admm,
    gen_dqp,
    theory_constants,
)
from blockadmm.bench import DqpSpec


def make_dqp(seed=0, n=3, omega=10.0, with_bounds=True):
    inst = gen_dqp(DqpSpec(B=3, n=n, omega=omega, seed=seed))
    if with_bounds:
        inst.metadata = derive_metadata(inst)
    return inst


class TestPenaltyDoubling:
    def test_default_initial_penalty_formula(self):
        # ||A x0 - b|| = 1 gives c0 = 1/2; engineered via a unit shift.
        sizes = BlockSizes([1])
        smooth = SeparableQuadraticOracle(sizes, np.zeros(1), np.zeros(1))
        inst = ProblemInstance(
            smooth=smooth, nonsmooth=[Box(1, 2.0)],
            map=BlockLinearMap([np.array([[1.0]])]), rhs=np.array([1.0]),
        )
        x0 = BlockVector(sizes, np.array([0.0]))  # feasibility gap exactly 1
        res = adaptive_penalty_admm(inst, x0, ToleranceConfig(), gamma0=1.0)
        assert res.c0 == pytest.approx(0.5)

    def test_single_call_when_output_already_feasible(self):
        sizes = BlockSizes([1])
        smooth = SeparableQuadraticOracle(sizes, np.zeros(1), np.zeros(1))
        inst = ProblemInstance(
            smooth=smooth, nonsmooth=[Box(1, 1.0)],
            map=BlockLinearMap([np.array([[1.0]])]), rhs=np.array([0.0]),
        )
        x0 = BlockVector(sizes, np.array([0.0]))
        res = adaptive_penalty_admm(inst, x0, ToleranceConfig(), gamma0=1.0)
        assert res.converged
        assert len(res.calls) == 1

    def test_penalty_ledger_doubles(self):
        inst = make_dqp(seed=1, with_bounds=False)
        res = adaptive_penalty_admm(inst, inst.x0, ToleranceConfig(), gamma0=10.0, c0=1.0)
        for ell, c in enumerate(res.penalties):
            assert c == pytest.approx(2.0**ell)
        assert res.c_final == pytest.approx(2.0 ** len(res.calls))

    def test_certificate_passes_full_stationarity(self):
        tol = ToleranceConfig()
        for seed in range(3):
            inst = make_dqp(seed=seed, with_bounds=False)
            res = adaptive_penalty_admm(inst, inst.x0, tol, gamma0=10.0, c0=1.0)
            report = check_rho_eta_stationary(inst, res.certificate, tol)
            assert report.ok

    def test_matches_manual_warm_start_chain(self):
        # Replaying the doubling loop by hand reproduces the driver bitwise,
        # including the stepsize vector carried between calls.
        inst = make_dqp(seed=2, with_bounds=False)
        tol = ToleranceConfig()
        res = adaptive_penalty_admm(inst, inst.x0, tol, gamma0=10.0, c0=1.0)

        rule = StoppingRule.absolute(tol)
        x = inst.x0.copy()
        p = np.zeros(inst.map.rows)
        gamma = np.full(inst.block_count, 10.0)
        c = 1.0
        while True:
            inner = fixed_penalty_admm(inst, x, p, gamma, c, tol, stop_rule=rule)
            x, p, gamma = inner.y, inner.q, inner.lam
            c *= 2.0
            if inner.feasibility <= rule.feas_threshold:
                break
        assert np.array_equal(res.certificate.x.data, x.data)
        assert np.array_equal(res.certificate.p, p)
        assert np.array_equal(res.gamma, gamma)

    def test_monitored_run_satisfies_outer_bounds(self):
        inst = make_dqp(seed=3)
        tol = ToleranceConfig()
        monitor = InvariantMonitor(inst)
        res = adaptive_penalty_admm(
            inst, inst.x0, tol, gamma0=10.0, monitor=monitor,
        )
        assert res.converged
        monitor.assert_clean()
        tc = theory_constants(inst, res.c0, tol)
        bound = math.log2(1.0 + 4.0 * tc.kappa / (res.c0 * tol.eta)) + 1.0
        assert len(res.calls) <= bound

    def test_budget_exhaustion_raises_with_records(self):
        inst = make_dqp(seed=4, with_bounds=False)
        with pytest.raises(NonconvergenceError) as info:
            adaptive_penalty_admm(
                inst, inst.x0, ToleranceConfig(), gamma0=10.0, c0=1.0,
                max_total_iterations=4,
            )
        partial = info.value.result
        assert partial is not None and not partial.converged
        assert partial.calls

    def test_rejects_bad_start(self):
        inst = make_dqp(seed=5, with_bounds=False)
        bad = inst.x0.copy()
        bad.data[0] = 1e9
        with pytest.raises(ShapeError):
            adaptive_penalty_admm(inst, bad, ToleranceConfig(), gamma0=10.0)


class TestDampedBaseline:
    def test_theoretical_pair_arithmetic(self):
        # 2 chi B (2 - theta)(1 - theta) = 0.25 = theta^2 at the boundary.
        assert damped_pair_is_theoretical(0.5, 1.0 / 18.0, 3)
        assert not damped_pair_is_theoretical(0.0, 1.0, 3)

    def test_undamped_update_reduces_to_multiplier_step(self):
        inst = make_dqp(seed=6, with_bounds=False)
        cfg = BaselineConfig(theta=0.0, chi=1.0)
        x = inst.x0.copy()
        p = np.zeros(inst.map.rows)
        sweep = block_prox_sweep(inst, x, p, np.full(3, cfg.lam), cfg.c)
        expected_p1 = p + cfg.c * sweep.constraint_residual
        res = damped_multiplier_admm(inst, inst.x0, cfg, ToleranceConfig(), max_iterations=1)
        assert np.allclose(res.p, expected_p1)

    def test_damped_update_formula(self):
        inst = make_dqp(seed=7, with_bounds=False)
        cfg = BaselineConfig(theta=0.5, chi=1.0 / 18.0)
        sweep = block_prox_sweep(
            inst, inst.x0, np.zeros(inst.map.rows), np.full(3, cfg.lam), cfg.c
        )
        expected_p1 = (1 - cfg.theta) * (cfg.chi * cfg.c * sweep.constraint_residual)
        res = damped_multiplier_admm(inst, inst.x0, cfg, ToleranceConfig(), max_iterations=1)
        assert np.allclose(res.p, expected_p1)

    def test_feasible_fixed_point_keeps_zero_multiplier(self):
        sizes = BlockSizes([1])
        smooth = SeparableQuadraticOracle(sizes, np.zeros(1), np.zeros(1))
        inst = ProblemInstance(
            smooth=smooth, nonsmooth=[Box(1, 1.0)],
            map=BlockLinearMap([np.array([[1.0]])]), rhs=np.array([0.0]),
        )
        x0 = BlockVector(sizes, np.array([0.0]))
        res = damped_multiplier_admm(inst, x0, BaselineConfig(), ToleranceConfig())
        assert res.converged
        assert res.p == pytest.approx([0.0])

    def test_converges_and_certifies_on_dqp(self):
        inst = make_dqp(seed=8, with_bounds=False)
        tol = ToleranceConfig()
        res = damped_multiplier_admm(inst, inst.x0, BaselineConfig(), tol, max_iterations=50_000)
        assert res.converged
        report = check_rho_eta_stationary(inst, res.certificate, tol)
        assert report.ok

    def test_cap_marks_nonconvergence_without_raising(self):
        inst = make_dqp(seed=9, with_bounds=False)
        res = damped_multiplier_admm(
            inst, inst.x0, BaselineConfig(), ToleranceConfig(), max_iterations=3
        )
        assert not res.converged
        assert res.iterations == 3
        assert res.certificate is None
