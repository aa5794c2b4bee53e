import json
import os
import subprocess
import sys

import pytest

from fourier_ratio.cli import build_parser, main


def _files(path):
    return {name: open(os.path.join(path, name), "rb").read() for name in sorted(os.listdir(path))}


def test_threshold_prints_exact_value(capsys):
    assert main(["threshold", "--d", "2", "--alpha", "1", "--kappa", "0"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["p_star"] == 4 and res["regime"] == "classical"


def test_threshold_rigid_and_rational(capsys):
    assert main(["threshold", "--d", "3", "--alpha", "2", "--kappa", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["p_star"] == "inf"
    assert main(["threshold", "--d", "2", "--alpha", "1", "--kappa", "1/8"]) == 0
    assert json.loads(capsys.readouterr().out)["p_star_exact"] == "14/3"


def test_threshold_inverse_roundtrip(capsys, tmp_path):
    assert main(["threshold-inverse", "--d", "2", "--alpha", "1", "--p", "6", "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["kappa_exact"] == "1/4" and res["p_star_check"] == "6"
    assert (tmp_path / "threshold_inverse.json").exists() and (tmp_path / "manifest.json").exists()


@pytest.mark.parametrize("argv", [
    ["threshold", "--d", "2", "--alpha", "3", "--kappa", "0"],
    ["threshold", "--d", "2", "--alpha", "1"],
    ["threshold-inverse", "--d", "2", "--alpha", "1", "--p", "3"],
    ["kappa", "--measure", "segment", "--psi", "gaussian"],
    ["kappa", "--measure", "spiral"],
    ["fr-ladder", "--measure", "cantor", "--ladder", "3^2..3^12"],
])
def test_invalid_input_exits_2(argv, tmp_path, capsys):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] not in ("threshold",) else [])) == 2
    assert "error" in capsys.readouterr().err


def test_sweep_curve(tmp_path):
    assert main(["sweep-curve", "--d", "2", "--alpha", "1", "--points", "5", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sweep_curve.csv").read_text().splitlines()
    assert lines[0] == "kappa,kappa_exact,p_star,regime" and lines[1].startswith("0,0,4,")
    assert lines[-1].endswith("inf,rigid")
    assert (tmp_path / "sweep_curve.svg").read_text().startswith("<svg")


def test_kappa_run_is_byte_identical_and_replayable(tmp_path, capsys):
    a, b, c = (str(tmp_path / x) for x in "abc")
    argv = ["kappa", "--measure", "cantor", "--param", "depth=8", "--ladder", "3^1..3^5"]
    assert main(argv + ["--out", a]) == 0
    assert main(argv + ["--out", b]) == 0
    fa, fb = _files(a), _files(b)
    assert fa == fb
    assert set(fa) >= {"kappa.json", "fr_ladder.csv", "fr_ladder.svg", "run_config.ini", "manifest.json",
                       "checks.json"}
    # the recorded configuration alone reproduces the run
    assert main(["kappa", "--config", os.path.join(a, "run_config.ini"), "--out", c]) == 0
    fc = _files(c)
    assert fc["kappa.json"] == fa["kappa.json"] and fc["fr_ladder.csv"] == fa["fr_ladder.csv"]


def test_kappa_expectation_failure_sets_exit_status(tmp_path, capsys):
    argv = ["kappa", "--measure", "cantor", "--param", "depth=8", "--ladder", "3^1..3^5", "--expect", "5:6",
            "--out", str(tmp_path)]
    assert main(argv) == 1
    assert json.loads((tmp_path / "failures.json").read_text())


def test_fr_ladder_and_sandwich(tmp_path):
    argv = ["--measure", "segment", "--d", "2", "--n", "2048", "--ladder", "8,16,32,64"]
    assert main(["fr-ladder", *argv, "--out", str(tmp_path / "f")]) == 0
    header = (tmp_path / "f" / "fr_ladder.csv").read_text().splitlines()[0]
    assert header == "label,R,X1,X2,Xp,FR,eps_tail"
    assert main(["sandwich", *argv, "--out", str(tmp_path / "s")]) == 0
    assert json.loads((tmp_path / "s" / "checks.json").read_text())["passed"]


def test_proof_chain_command(tmp_path, capsys):
    argv = ["proof-chain", "--measure", "segment", "--d", "2", "--n", "2048", "--ladder", "8,16,32,64",
            "--out", str(tmp_path)]
    assert main(argv) == 0
    summary = json.loads((tmp_path / "proof_chain.json").read_text())
    assert summary["chain"] == "chain consistent" and summary["exponent_sign"] == -1


def test_torus_ladder_command(tmp_path, capsys):
    assert main(["torus-ladder", "--measure", "sub-torus", "--d", "2", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "kappa_M.json").read_text())
    assert 0.4 <= res["kappa_M"] <= 0.6
    checks = json.loads((tmp_path / "checks.json").read_text())["checks"]
    assert any("parseval" in k.lower() for k in checks)


def test_torus_propagation_command_and_negative_control(tmp_path):
    base = ["torus-propagation", "--measure", "sub-torus", "--d", "2", "--ladder", "16,32"]
    assert main(base + ["--out", str(tmp_path / "ok"), "--export-field", "16"]) == 0
    assert (tmp_path / "ok" / "field_R16.csv").exists()
    assert main(base + ["--support-shift", "0.5", "--out", str(tmp_path / "bad")]) == 1


def test_verify_command(tmp_path):
    assert main(["verify", "--corpus", "", "--out", str(tmp_path / "e")]) == 0
    assert json.loads((tmp_path / "e" / "verify.json").read_text()) == {"failures": [], "rows": []}
    assert main(["verify", "--corpus", "cantor,torus-dirac-1", "--out", str(tmp_path / "v")]) == 0


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("fr-ladder", "kappa", "threshold", "threshold-inverse", "sweep-curve", "sandwich", "proof-chain",
                 "torus-ladder", "torus-propagation", "verify"):
        assert name in text


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "fourier_ratio.cli", "threshold", "--d", "3", "--alpha", "2",
                          "--kappa", "1/2"], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["p_star"] == 4
