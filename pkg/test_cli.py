"""Tests for the command-line interface."""

import json

import pytest

from cstarpert import Toolkit
from cstarpert.cli.commands import EXIT_BREAKDOWN, EXIT_ERROR, EXIT_OK, EXIT_TOO_FAR, main
from cstarpert.utils.exceptions import ConjugationFailed, TooFar


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_scenarios_listing(capsys):
    code, out, _ = run(capsys, "scenarios")
    assert code == EXIT_OK
    assert "Catalog scenarios:" in out
    assert "  - M2-in-M4-tower" in out


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "cstarpert" in capsys.readouterr().out


def test_index_json(capsys):
    code, out, _ = run(capsys, "--json", "index", "--scenario", "diag-in-M3")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["scenario"] == "diag-in-M3"
    assert data["norm"] == pytest.approx(3.0)
    assert data["min_eigenvalue"] == pytest.approx(3.0)
    assert data["expected"] == {"index": 3.0}


def test_options_after_subcommand(capsys):
    code, out, _ = run(capsys, "index", "--scenario", "scalars-in-M2", "--json")
    assert code == EXIT_OK
    assert json.loads(out)["norm"] == pytest.approx(4.0)


def test_index_text(capsys):
    code, out, _ = run(capsys, "index", "--scenario", "M2-in-M4")
    assert code == EXIT_OK
    assert "||Index E|| = 4" in out
    assert "expected: 4 I" in out


def test_quasi_basis_unit_ball(capsys):
    code, out, _ = run(capsys, "--json", "quasi-basis", "--scenario", "scalars-in-M2", "--unit-ball")
    assert code == EXIT_OK
    data = json.loads(out)["quasi_basis"]
    assert data["unit_ball"] is True
    assert len(data["elements"]) == 8



def test_quasi_basis_json_includes_the_expectation(capsys):
    code, out, _ = run(capsys, "--json", "quasi-basis", "--scenario", "diag-in-M2")
    assert code == EXIT_OK
    expectation = json.loads(out)["expectation"]
    assert expectation["source"]["ambient_dim"] == 2
    assert len(expectation["source"]["basis"]) == 4
    assert len(expectation["target"]["basis"]) == 2


def test_jones_projections(capsys):
    code, out, _ = run(capsys, "jones", "--scenario", "M2-in-M4-tower")
    assert code == EXIT_OK
    assert "module dim = 16" in out
    assert "rank e_C = 1, rank e_A = 4" in out


def test_jones_projections_json(capsys):
    code, out, _ = run(capsys, "--json", "jones", "--scenario", "M2-in-M4-tower")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["module_dim"] == 16
    assert data["e_c"]["module_hash"] == data["e_a"]["module_hash"]
    assert data["e_a"]["matrix"]["dim"] == 16


def test_perturb_json(capsys):
    code, out, _ = run(
        capsys, "--json", "--samples", "20", "perturb", "--scenario", "M2-in-M4-tower", "--eps", "1e-3", "--seed", "4"
    )
    assert code == EXIT_OK
    data = json.loads(out)
    report = data["report"]
    assert data["seed"] == 4
    assert report["conjugation_residual"] <= 1e-7
    assert report["n_quasi_basis"] == 64
    assert report["psi_bound"]["lhs"] <= report["psi_bound"]["certified_lhs"] + 1e-12
    assert "timings" not in report
    assert all(b["slack"] >= -1e-7 for b in report["bounds"])


def test_perturb_json_is_reproducible(capsys):
    argv = ["--json", "--samples", "10", "perturb", "--scenario", "M2-in-M4-tower", "--eps", "0"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_perturb_timings(capsys):
    code, out, _ = run(
        capsys, "--json", "--samples", "5", "perturb", "--scenario", "M2-in-M4-tower", "--eps", "0", "--timings"
    )
    assert code == EXIT_OK
    assert "close_homomorphism" in json.loads(out)["report"]["timings"]


def test_demo(capsys):
    code, out, _ = run(capsys, "--samples", "10", "demo")
    assert code == EXIT_OK
    assert "Scenario: M2-in-M4-tower" in out


def test_audit(capsys):
    code, out, _ = run(capsys, "--json", "audit", "--trials", "2", "--seed", "3")
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["passed"] is True
    assert data["limit"] == 1e-7
    assert len(data["audits"]) == 6


def test_distance(capsys):
    code, out, _ = run(capsys, "--json", "distance", "--scenario", "M2-in-M4-tower", "--eps", "1e-2")
    assert code == EXIT_OK
    distance = json.loads(out)["distance"]
    assert distance["lower"] <= distance["upper"]
    assert distance["upper"] <= 2e-2 + 1e-9
    assert distance["method_notes"]["witness_bound"] == pytest.approx(2e-2)


def test_cluster(capsys):
    code, out, _ = run(capsys, "--json", "--samples", "10", "cluster", "--scenario", "M2-in-M4-tower")
    assert code == EXIT_OK
    assert json.loads(out)["cluster"]["classes"] == [[0, 1], [2]]


def test_unknown_scenario(capsys):
    code, _, err = run(capsys, "index", "--scenario", "nope")
    assert code == EXIT_ERROR
    assert "Unknown scenario" in err


def test_eps_out_of_range(capsys):
    code, _, err = run(capsys, "perturb", "--scenario", "M2-in-M4", "--eps", "2.5")
    assert code == EXIT_ERROR
    assert "eps" in err


def test_bad_tolerance(capsys):
    code, _, _ = run(capsys, "--tol", "-1", "scenarios")
    assert code == EXIT_ERROR


def test_too_far_exit_code(capsys, monkeypatch):
    def refuse(self, name, eps, seed):
        raise TooFar("close_homomorphism", 0.75, 0.5)

    monkeypatch.setattr(Toolkit, "recover", refuse)
    code, _, err = run(capsys, "perturb", "--scenario", "M2-in-M4-tower", "--eps", "0.5")
    assert code == EXIT_TOO_FAR
    assert "close_homomorphism" in err


def test_too_far_on_a_distant_planted_pair(capsys):
    code, _, err = run(capsys, "perturb", "--scenario", "M2-in-M4-tower", "--eps", "1.9", "--seed", "42")
    assert code == EXIT_TOO_FAR
    assert "Too far at stage 'close_homomorphism'" in err


def test_breakdown_exit_code(capsys, monkeypatch):
    def break_down(self, name, eps, seed):
        raise ConjugationFailed(1.0)

    monkeypatch.setattr(Toolkit, "recover", break_down)
    code, _, err = run(capsys, "perturb", "--scenario", "M2-in-M4-tower", "--eps", "0.5")
    assert code == EXIT_BREAKDOWN
    assert "Numerical breakdown" in err


def test_subcommand_required():
    with pytest.raises(SystemExit):
        main([])
