import io
import json

import numpy as np
import pytest

from bilocal import acceptance, cli
from bilocal.acceptance import CriterionResult, load_corpus
from bilocal.oracle import entanglement_swapping_model, serialize_model
from bilocal.scenario import (Scenario, parse_distribution, serialize_distribution, shared_bit_distribution,
                              uniform_distribution)
from bilocal.sdp import parse_sdpa, solve


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def report(line):
    return dict(field.split("=", 1) for field in line.split(", "))


@pytest.fixture
def uniform_file(tmp_path):
    path = tmp_path / "uniform.json"
    path.write_text(serialize_distribution(uniform_distribution(Scenario.binary())))
    return str(path)


@pytest.fixture
def trivial_file(tmp_path):
    path = tmp_path / "trivial.json"
    path.write_text(serialize_distribution(uniform_distribution(Scenario((1, 1, 1), (1, 1, 1)))))
    return str(path)


def test_simulate_uniform(capsys):
    code, out, _ = run(capsys, "simulate", "uniform", "--settings", "2,1,2", "--outcomes", "2,3,2")
    assert code == 0
    d = parse_distribution(out)
    assert np.all(d.p == d.p.flat[0])


def test_simulate_classical_is_reproducible(capsys):
    first = run(capsys, "simulate", "classical", "--seed", "7")[1]
    second = run(capsys, "simulate", "classical", "--seed", "7")[1]
    assert first == second
    assert parse_distribution(first).scenario == Scenario((2, 2, 2), (2, 2, 2))


def test_simulate_entanglement_swapping(capsys, tmp_path):
    out = tmp_path / "es.json"
    code, _, _ = run(capsys, "simulate", "entanglement-swapping", "--out", str(out))
    assert code == 0
    assert parse_distribution(out.read_text()).scenario == Scenario((2, 1, 2), (2, 4, 2))


def test_simulate_model_file(capsys, tmp_path):
    path = tmp_path / "model.json"
    path.write_text(serialize_model(entanglement_swapping_model()))
    from_file = run(capsys, "simulate", "--model-file", str(path))[1]
    builtin = run(capsys, "simulate", "entanglement-swapping")[1]
    assert from_file == builtin


@pytest.mark.parametrize("argv", [["simulate", "nonsense"], ["simulate"],
                                  ["simulate", "uniform", "--settings", "0,1,1"]])
def test_simulate_input_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == cli.EXIT_INPUT
    assert "error" in err


def test_check_uniform_report(capsys, uniform_file):
    code, out, _ = run(capsys, "check", "--input", uniform_file, "--k", "1")
    assert code == 0
    rec = report(out.strip())
    assert list(rec) == ["hierarchy", "n", "k", "value", "certified_lower_bound", "status", "verdict"]
    assert rec["hierarchy"] == "inflation" and rec["n"] == "2" and rec["k"] == "1"
    assert float(rec["value"]) <= 1e-5
    assert rec["status"] == "optimal"
    assert rec["verdict"] == "compatible-at-this-level"


def test_check_reads_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(serialize_distribution(shared_bit_distribution())))
    code, out, _ = run(capsys, "check", "--input", "-", "--hierarchy", "polarization", "--k", "1")
    assert code == 0
    rec = report(out.strip())
    assert rec["n"] == "4"
    bound = float(rec["certified_lower_bound"])
    assert rec["verdict"] == ("incompatible" if bound > 1e-5 else "compatible-at-this-level")
    assert bound <= float(rec["value"]) + 1e-6


def test_check_both_reports_max_certified_bound(capsys, tmp_path):
    path = tmp_path / "sb.json"
    path.write_text(serialize_distribution(shared_bit_distribution()))
    out_path = tmp_path / "report.txt"
    code, _, _ = run(capsys, "check", "--input", str(path), "--hierarchy", "both", "--k", "1",
                     "--out", str(out_path))
    assert code == 0
    lines = [report(l) for l in out_path.read_text().splitlines()]
    assert [l["hierarchy"] for l in lines] == ["inflation", "polarization", "both"]
    assert lines[2]["n"] == "2/4"
    best = max(float(l["certified_lower_bound"]) for l in lines[:2])
    assert float(lines[2]["certified_lower_bound"]) == best


def test_check_epsilon_controls_verdict(capsys, trivial_file):
    rec = report(run(capsys, "check", "--input", trivial_file, "--k", "1", "--epsilon", "-1")[1].strip())
    assert rec["verdict"] == "incompatible"


@pytest.mark.parametrize("argv", [
    ["check", "--input", "/nonexistent/file.json"],
    ["check", "--input", "{uniform}", "--n", "1"],
    ["check", "--input", "{uniform}", "--hierarchy", "polarization", "--n", "3"],
])
def test_check_input_errors(capsys, uniform_file, argv):
    argv = [a.replace("{uniform}", uniform_file) for a in argv]
    code, _, err = run(capsys, *argv)
    assert code == cli.EXIT_INPUT
    assert err.startswith("error:")


def test_check_rejects_malformed_distribution(capsys, tmp_path):
    path = tmp_path / "bad.json"
    obj = json.loads(serialize_distribution(shared_bit_distribution()))
    obj["p"][0][0][0][0][0][0] = 0.7
    path.write_text(json.dumps(obj))
    code, _, err = run(capsys, "check", "--input", str(path))
    assert code == cli.EXIT_INPUT
    assert "residual" in err


def test_size_cap_exit_code(capsys, uniform_file):
    code, _, err = run(capsys, "export", "--input", uniform_file, "--k", "3", "--cap", "50")
    assert code == cli.EXIT_SIZE
    assert "50" in err and any(ch.isdigit() for ch in err.replace("50", ""))


def test_solver_failure_exit_code(capsys, monkeypatch, trivial_file):
    real = cli.solve_level

    def failing(*args, **kwargs):
        res = real(*args, **kwargs)
        res.solution.status = "numerical_failure"
        return res

    monkeypatch.setattr(cli, "solve_level", failing)
    code, _, err = run(capsys, "check", "--input", trivial_file, "--k", "1")
    assert code == cli.EXIT_SOLVER
    assert "solver failed" in err


def test_export_trivial_resolves_to_zero(capsys, trivial_file, tmp_path):
    out = tmp_path / "trivial.dat-s"
    code, _, err = run(capsys, "export", "--input", trivial_file, "--k", "1", "--out", str(out))
    assert code == 0
    assert "free_variables=0" in err
    text = out.read_text()
    assert text.endswith("\n") and "\r" not in text
    assert solve(parse_sdpa(text)).primal_objective == 0.0


def test_export_round_trip(capsys, uniform_file):
    code, out, _ = run(capsys, "export", "--input", uniform_file, "--k", "1")
    assert code == 0
    from bilocal.sdp import export_sdpa
    problem = parse_sdpa(out)
    assert problem.nvars > 0
    body = [l for l in out.splitlines() if not l.startswith("*")]
    assert "\n".join(body) + "\n" == export_sdpa(problem)


def test_export_needs_single_hierarchy(capsys, uniform_file):
    assert run(capsys, "export", "--input", uniform_file, "--hierarchy", "both")[0] == cli.EXIT_INPUT


def test_thread_variable(capsys, monkeypatch, trivial_file):
    monkeypatch.setenv("BILOC_THREADS", "lots")
    assert run(capsys, "check", "--input", trivial_file, "--k", "1")[0] == cli.EXIT_INPUT
    monkeypatch.setenv("BILOC_THREADS", "1")
    assert run(capsys, "check", "--input", trivial_file, "--k", "1")[0] == 0


def test_selftest_exit_status(capsys, monkeypatch):
    def fake(solver_options=None, corpus_dir=None, quick=False):
        toy = solve(acceptance.toy_problem(), solver_options)
        return [CriterionResult("4", "toy", abs(toy.primal_objective - 1.0) <= 1e-7)]

    monkeypatch.setattr(acceptance, "run_all", fake)
    code, out, _ = run(capsys, "selftest", "--quick")
    assert code == 0 and "[PASS]" in out
    code, out, _ = run(capsys, "selftest", "--quick", "--gap-tol", "0.5")
    assert code == 1 and "[FAIL]" in out


def test_missing_corpus_is_regenerated(tmp_path):
    root = tmp_path / "corpus"
    first = load_corpus(root)
    assert sorted(p.stem for p in root.glob("*.json")) == sorted(first)
    again = load_corpus(root)
    assert all(again[k] == first[k] for k in first)
