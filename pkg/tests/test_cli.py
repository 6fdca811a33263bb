"""Command-line interface: solve, bench, verify."""

import numpy as np
import pytest

from blockadmm import DqpSpec, gen_dqp
from blockadmm.cli import main
from blockadmm.serialization import save_instance


@pytest.fixture
def instance_path(tmp_path):
    inst = gen_dqp(DqpSpec(B=3, n=3, omega=10.0, seed=5))
    path = tmp_path / "dqp.json"
    save_instance(inst, path)
    return str(path)


def test_solve_then_verify_roundtrip(instance_path, tmp_path, capsys):
    cert_path = str(tmp_path / "cert.json")
    code = main(["solve", "--instance", instance_path, "--algo", "aadmm",
                 "--cap-c0", "1.0", "--out", cert_path])
    assert code == 0
    out = capsys.readouterr().out
    assert "stationary:  True" in out
    code = main(["verify", "--instance", instance_path, "--certificate", cert_path])
    assert code == 0


def test_solve_writes_trace_and_calls(instance_path, tmp_path):
    trace = tmp_path / "trace.csv"
    calls = tmp_path / "calls.csv"
    code = main(["solve", "--instance", instance_path, "--cap-c0", "1.0",
                 "--trace", str(trace), "--calls", str(calls)])
    assert code == 0
    header = trace.read_text().splitlines()[0]
    assert header == "i,k,vsq,delta,T,feas,c,lam_min,lam_max"
    assert calls.read_text().splitlines()[0].startswith("call,c,")


def test_solve_dp_theoretical_configuration(instance_path):
    # The damped theoretical pair converges very slowly; loose tolerances
    # keep the configuration check fast.
    code = main(["solve", "--instance", instance_path, "--algo", "dp",
                 "--theta", "0.5", "--chi", "0.0555555",
                 "--rho", "1e-2", "--eta", "1e-2", "--max-iterations", "20000"])
    assert code in (0, 3)


def test_verify_rejects_tampered_certificate(instance_path, tmp_path, capsys):
    cert_path = tmp_path / "cert.json"
    assert main(["solve", "--instance", instance_path, "--cap-c0", "1.0",
                 "--out", str(cert_path)]) == 0
    text = cert_path.read_text()
    doc = text.replace('"eps": 0.0', '"eps": 0.0')  # no-op; tamper x below
    import json

    parsed = json.loads(doc)
    parsed["x"][0] = min(9.0, parsed["x"][0] + 3.0)
    cert_path.write_text(json.dumps(parsed))
    code = main(["verify", "--instance", instance_path, "--certificate", str(cert_path)])
    assert code == 1


def test_bench_deterministic_output_is_byte_identical(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    args = ["bench", "--family", "dqp", "--n", "3", "--omega", "10",
            "--seed", "7", "--algos", "ad", "--deterministic"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_bench_table_on_stdout(tmp_path, capsys):
    code = main(["bench", "--family", "dqp", "--n", "3", "--omega", "10",
                 "--seed", "1", "--algos", "ad", "--out", str(tmp_path / "r.csv")])
    assert code == 0
    out = capsys.readouterr().out
    assert "iterations" in out
    assert "best" in out


def test_bad_arguments_exit_nonzero(instance_path):
    with pytest.raises(SystemExit) as info:
        main(["solve"])  # missing --instance
    assert info.value.code == 2
    code = main(["solve", "--instance", "/nonexistent/path.json"])
    assert code == 2


def test_nonconvergence_exit_code(instance_path):
    code = main(["solve", "--instance", instance_path, "--algo", "dp",
                 "--max-iterations", "2"])
    assert code == 3
    code = main(["solve", "--instance", instance_path, "--algo", "aadmm",
                 "--cap-c0", "1.0", "--max-iterations", "2"])
    assert code == 3
