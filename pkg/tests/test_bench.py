"""Benchmark generators, runner, and table emission."""

import io

import numpy as np
import pytest

from blockadmm import (
    AlgorithmSpec,
    DqpSpec,
    QpbcSpec,
    ShapeError,
    emit_csv,
    emit_table,
    gen_dqp,
    gen_qpbc,
    read_csv,
    run_experiment,
)
from blockadmm.bench import CSV_HEADER, default_algorithms


class TestDqpGenerator:
    def test_rhs_in_range_by_construction(self):
        for seed in range(5):
            inst = gen_dqp(DqpSpec(B=3, n=4, omega=10.0, seed=seed))
            stacked = np.hstack(inst.map.blocks)
            coef, *_ = np.linalg.lstsq(stacked, inst.rhs, rcond=None)
            gap = np.linalg.norm(stacked @ coef - inst.rhs)
            assert gap <= 1e-8

    def test_consensus_structure(self):
        inst = gen_dqp(DqpSpec(B=3, n=2, omega=5.0, seed=1))
        # Constraints encode x_i - x_B = const: any y with equal blocks and
        # rhs zero is feasible for the homogeneous system.
        x = np.tile(np.array([1.0, -2.0]), 3)
        from blockadmm import BlockVector

        out = inst.map.apply(BlockVector(inst.sizes, x))
        assert np.allclose(out, 0.0)
        assert inst.map.rows == 2 * 2  # (B-1) * n

    def test_block_weak_convexity_matches_curvature(self):
        inst = gen_dqp(DqpSpec(B=3, n=3, omega=10.0, seed=2))
        m = inst.metadata.weak_convexity
        for t in range(2):
            hess = np.diag(inst.smooth.block_hessian_diag(t))
            eigs = np.linalg.eigvalsh(hess + m[t] * np.eye(3))
            assert eigs.min() >= -1e-12
        assert np.all(inst.smooth.block_hessian_diag(2) == 0.0)

    def test_determinism(self):
        a = gen_dqp(DqpSpec(B=3, n=5, omega=100.0, seed=42))
        b = gen_dqp(DqpSpec(B=3, n=5, omega=100.0, seed=42))
        assert np.array_equal(a.smooth.quad_diag, b.smooth.quad_diag)
        assert np.array_equal(a.rhs, b.rhs)
        assert np.array_equal(a.x0.data, b.x0.data)

    def test_spec_validation(self):
        with pytest.raises(ShapeError):
            DqpSpec(B=1, n=4, omega=1.0, seed=0)
        with pytest.raises(ShapeError):
            DqpSpec(B=3, n=4, omega=0.0, seed=0)


class TestQpbcGenerator:
    def test_negative_definite_quadratic(self):
        for seed in range(5):
            inst = gen_qpbc(QpbcSpec(B=8, m=2, seed=seed))
            eigs = np.linalg.eigvalsh(inst.smooth.matrix)
            assert eigs.max() < 0
            assert np.all(inst.metadata.weak_convexity > 0)

    def test_entry_ranges_before_scaling(self):
        # Replay the sampling order to recover the diagonal scaling, then
        # undo it: the raw pieces must sit inside their documented ranges.
        B, m, seed = 6, 2, 3
        rng = np.random.Generator(np.random.Philox(seed))
        d = rng.uniform(1.0, 1000.0, B)
        inst = gen_qpbc(QpbcSpec(B=B, m=m, seed=seed))
        p_raw = inst.smooth.matrix / np.outer(d, d)
        a_raw = np.hstack(inst.map.blocks) / d[None, :]
        r_raw = inst.smooth.linear / d
        for arr in (p_raw, a_raw, r_raw):
            assert np.all(np.abs(arr) <= 1.0 + 1e-12)

    def test_rhs_feasible_and_witness_interior(self):
        inst = gen_qpbc(QpbcSpec(B=10, m=3, seed=4))
        assert np.all(np.abs(inst.metadata.feasible_point) < 1.0)
        from blockadmm import BlockVector

        w = BlockVector(inst.sizes, inst.metadata.feasible_point)
        assert np.allclose(inst.map.apply(w), inst.rhs)

    def test_scalar_blocks_and_unit_box(self):
        inst = gen_qpbc(QpbcSpec(B=5, m=1, seed=5))
        assert inst.sizes.sizes == (1,) * 5
        assert all(b.radius == 1.0 for b in inst.nonsmooth)

    def test_cross_lipschitz_from_row_tails(self):
        inst = gen_qpbc(QpbcSpec(B=5, m=1, seed=6))
        P = inst.smooth.matrix
        for t in range(4):
            assert inst.metadata.cross_lipschitz[t] == pytest.approx(
                np.linalg.norm(P[t, t + 1 :])
            )

    def test_spec_validation(self):
        with pytest.raises(ShapeError):
            QpbcSpec(B=5, m=5, seed=0)
        with pytest.raises(ShapeError):
            QpbcSpec(B=5, m=0, seed=0)


class TestRunner:
    def test_records_are_certified_and_sorted(self):
        specs = [DqpSpec(B=3, n=3, omega=10.0, seed=s) for s in (1, 0)]
        records = run_experiment(specs, [AlgorithmSpec("ad", gamma0=10.0, c0=1.0)])
        assert [r.seed for r in records] == [0, 1]
        for r in records:
            assert r.converged
            assert r.certified
            assert r.final_feas <= 1e-5
            assert r.penalty_trace[0] == pytest.approx(1.0)

    def test_rerun_is_bitwise_identical_except_time(self):
        spec = [DqpSpec(B=3, n=3, omega=10.0, seed=7)]
        algos = [AlgorithmSpec("ad", gamma0=10.0, c0=1.0)]
        a = run_experiment(spec, algos)[0]
        b = run_experiment(spec, algos)[0]
        assert a.iterations == b.iterations
        assert a.final_resid_sq == b.final_resid_sq  # bitwise float equality
        assert a.final_feas == b.final_feas
        assert a.penalty_trace == b.penalty_trace
        assert np.array_equal(a.certificate.x.data, b.certificate.x.data)

    def test_failures_recorded_not_raised(self):
        specs = [DqpSpec(B=3, n=3, omega=10.0, seed=1)]
        algos = [AlgorithmSpec("dp-tiny-cap", kind="baseline", theta=0.0, chi=1.0)]
        records = run_experiment(specs, algos, max_iterations=2)
        assert len(records) == 1
        assert not records[0].converged

    def test_default_algorithms_cover_study(self):
        tags = [a.tag for a in default_algorithms("dqp")]
        assert tags == ["ad", "dp1", "dp2"]
        tags = [a.tag for a in default_algorithms("qpbc")]
        assert tags == ["ad1", "ad2", "ad3", "dp1", "dp2", "dp3"]

    def test_empty_specs_rejected(self):
        with pytest.raises(ShapeError):
            run_experiment([], None)


class TestEmission:
    def make_records(self):
        specs = [DqpSpec(B=3, n=3, omega=10.0, seed=0)]
        algos = [
            AlgorithmSpec("ad", gamma0=10.0, c0=1.0),
            AlgorithmSpec("dp-cap", kind="baseline"),
        ]
        return run_experiment(specs, algos, max_iterations=40)

    def test_csv_schema_and_roundtrip(self):
        records = self.make_records()
        text = emit_csv(records)
        assert text.splitlines()[0] == CSV_HEADER
        rows = read_csv(io.StringIO(text))
        assert len(rows) == len(records)
        for row, rec in zip(rows, records):
            assert row["algorithm"] == rec.algorithm
            assert row["iterations"] == rec.iterations
            # repr-equality also covers the nan cells of capped runs
            assert repr(row["final_resid_sq"]) == repr(rec.final_resid_sq)
            assert row["time_ms"] == float(f"{rec.time_ms:.3f}")
        # Writing the parsed rows back reproduces the text byte for byte.
        again = emit_csv(records)
        assert again == text

    def test_deterministic_mode_zeroes_time(self):
        records = self.make_records()
        text = emit_csv(records, deterministic=True)
        for line in text.splitlines()[1:]:
            assert line.split(",")[7] == "0.000"

    def test_table_marks_nonconverged_and_best(self):
        records = self.make_records()
        table = emit_table(records)
        lines = table.splitlines()
        assert "best" in lines[0]
        starred = [ln for ln in lines if " * " in ln or ln.rstrip().endswith("*")]
        assert any("dp-cap" in ln for ln in starred)
        assert any(ln.rstrip().endswith("best") for ln in lines)

    def test_single_converged_record_flagged_best(self):
        specs = [DqpSpec(B=3, n=3, omega=10.0, seed=0)]
        records = run_experiment(specs, [AlgorithmSpec("ad", gamma0=10.0, c0=1.0)])
        table = emit_table(records)
        assert "best" in table.splitlines()[1]

    def test_empty_records_rejected(self):
        with pytest.raises(ShapeError):
            emit_csv([])
        with pytest.raises(ShapeError):
            emit_table([])
