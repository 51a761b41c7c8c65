import io
import json
import math

import numpy as np
import pytest

from fqhe_torus.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, run
from fqhe_torus.integration import WORKERS_ENV
from fqhe_torus.report import parse_report, strip_timestamp


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_gram_example():
    code, out, _ = call("gram", "--k", "3", "--tau", "0+1i", "--xi-a", "0.2", "--xi-b", "0.1", "--grid", "64")
    assert code == EXIT_OK
    rep = parse_report(out)
    expected = math.sqrt(1 / 6) * math.exp(2 * math.pi * 0.04 / 3)
    assert rep["results"]["closed_form_diag"] == pytest.approx(expected, rel=1e-15)
    assert rep["results"]["gram"].shape == (3, 3)
    assert rep["results"]["offdiag_max"] < 1e-12
    assert rep["results"]["evaluations"] == 64 * 64
    assert rep["verdicts"]["closed_form"] == "PASS"
    assert "wall_time_s" in rep["timestamp"]


def test_wen_validate_example():
    code, out, _ = call("wen-validate", "--K", "2 1; 1 2", "--n", "1 1")
    assert code == EXIT_OK
    res = parse_report(out)["results"]
    assert (res["d"], res["delta"], res["cyclic"]) == (3, 3, True)


def test_wen_validate_mixed_parity():
    code, out, err = call("wen-validate", "--K", "2 0; 0 3", "--n", "1 1")
    assert code == EXIT_INVALID
    assert out == ""
    assert "MixedParityDiagonal" in err


@pytest.mark.parametrize("argv", [[], ["nonsense"], ["gram", "--bogus", "1"], ["gram", "--tau", "i"]])
def test_usage_errors(argv):
    code, out, err = call(*argv)
    assert code == EXIT_USAGE
    assert out == ""
    assert "usage:" in err


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == EXIT_OK
    assert "COMMAND" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["gram", "--k", "2", "--tau", "1-1i"],
    ["gram", "--k", "0"],
    ["gram", "--k", "2", "--tau", "not-a-number"],
    ["norm", "--backend", "qmc"],
    ["norm", "--model", "fay"],
    ["curvature", "--backend", "spline"],
    ["verify", "--criteria", "9"],
])
def test_invalid_inputs(argv):
    code, _, err = call(*argv)
    assert code == EXIT_INVALID
    assert err.startswith("error:")


def test_numerical_failure_exit_code():
    code, _, err = call("curvature", "--model", "wen", "--n", "1 1", "--tau", "3i")
    assert code == EXIT_NUMERICAL
    assert "GridTooCoarse" in err


def test_fail_verdict_gives_exit_one():
    # a grid far too coarse for 1e-9 agreement
    code, out, _ = call("gram", "--k", "5", "--tau", "0.3+0.8i", "--grid", "4")
    assert code == EXIT_NUMERICAL
    assert parse_report(out)["verdicts"]["overall"] == "FAIL"


def test_reports_identical_modulo_timestamp():
    argv = ["norm", "--model", "laughlin", "--m", "2", "--n", "2", "--backend", "qmc",
            "--samples", "4096", "--seed", "7", "--xi-a", "0.3"]
    _, first, _ = call(*argv)
    _, second, _ = call(*argv)
    assert strip_timestamp(first) == strip_timestamp(second)
    _, other_seed, _ = call(*argv[:-3], "8", "--xi-a", "0.3")
    assert strip_timestamp(first) != strip_timestamp(other_seed)


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    out_path = tmp_path / "report.txt"
    cfg.write_text(json.dumps({"k": 2, "tau": "0.3+0.8i", "xi_a": 0.4, "grid": 16, "output": str(out_path)}))
    code, out, _ = call("gram", "--config", str(cfg), "--grid", "32")
    assert code == EXIT_OK and out == ""
    rep = parse_report(out_path.read_text())
    assert rep["inputs"]["grid"] == 32
    assert rep["inputs"]["k"] == 2
    assert rep["inputs"]["tau"] == 0.3 + 0.8j


def test_config_equivalent_to_flags(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "center-gram", "K": [[2, 1], [1, 2]], "grid": 12}))
    _, from_cfg, _ = call("center-gram", "--config", str(cfg))
    _, from_flags, _ = call("center-gram", "--K", "2 1; 1 2", "--grid", "12")
    assert strip_timestamp(from_cfg) == strip_timestamp(from_flags)


@pytest.mark.parametrize("content", ['{"kk": 1}', "{", "[1, 2]", '{"command": "norm"}'])
def test_bad_config(tmp_path, content):
    cfg = tmp_path / "bad.json"
    cfg.write_text(content)
    code, _, _ = call("gram", "--k", "2", "--config", str(cfg))
    assert code == EXIT_INVALID


def test_missing_config_file(tmp_path):
    code, _, err = call("gram", "--k", "2", "--config", str(tmp_path / "absent.json"))
    assert code == EXIT_INVALID and "cannot read" in err


def test_workers_flag_does_not_change_report(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    _, one, _ = call("gram", "--k", "2", "--grid", "32")
    _, three, _ = call("gram", "--k", "2", "--grid", "32", "--workers", "3")
    assert strip_timestamp(one) == strip_timestamp(three)
    assert WORKERS_ENV not in __import__("os").environ


def test_theta_command():
    code, out, _ = call("theta", "--z", "0", "--tau", "i")
    assert code == EXIT_OK
    rep = parse_report(out)["results"]
    assert rep["value"].real == pytest.approx(1.08643481, abs=1e-8)


def test_norm_slater_grid():
    code, out, _ = call("norm", "--n", "2", "--grid", "24")
    assert code == EXIT_OK
    assert parse_report(out)["results"]["norm"] == pytest.approx(0.5, rel=1e-9)


def test_kvw_command_explicit_configuration():
    code, out, _ = call("kvw", "--K", "3", "--n", "2", "--z", "0.1+0.2i 0.5+0.4i", "--xi-a", "0.1")
    assert code == EXIT_OK
    res = parse_report(out)["results"]
    assert "value_c2" in res and res["automorphy_defect"] < 1e-10
    code, _, _ = call("kvw", "--K", "3", "--n", "2", "--z", "0.1+0.2i")
    assert code == EXIT_INVALID


def test_center_gram_command():
    code, out, _ = call("center-gram", "--K", "2 1; 1 2", "--grid", "16")
    assert code == EXIT_OK
    res = parse_report(out)["results"]
    assert res["kappa_closed"] == pytest.approx(1 / (2 * math.sqrt(3)), rel=1e-14)
    assert res["relative_error_printed"] > 0.5


@pytest.mark.parametrize("model,n,degree", [("center_mass", "2", -2), ("wen", "1 1", -2),
                                            ("laughlin", "2", -1), ("one_particle", "2", -1)])
def test_curvature_command(model, n, degree):
    code, out, _ = call("curvature", "--model", model, "--n", n)
    assert code == EXIT_OK
    res = parse_report(out)["results"]
    assert res["degree"] == pytest.approx(degree, abs=1e-6)
    assert res["coefficient_at_origin"].shape in ((2, 2), (3, 3))


def test_curvature_qmc_uses_profile():
    code, out, _ = call("curvature", "--model", "laughlin", "--backend", "qmc", "--seed", "1",
                        "--grid", "8", "--samples", "4096")
    assert code == EXIT_OK
    res = parse_report(out)["results"]
    assert res["method"] == "profile"
    assert res["degree"] == pytest.approx(-1, abs=0.02)


def test_verify_subset():
    code, out, err = call("verify", "--criteria", "5")
    assert code == EXIT_OK
    assert "PASS criterion 5" in err
    assert parse_report(out)["verdicts"]["criterion_5"] == "PASS"


def test_output_to_unwritable_path(tmp_path):
    code, _, err = call("gram", "--k", "1", "--output", str(tmp_path / "missing" / "r.txt"))
    assert code == EXIT_INVALID and "cannot write" in err


def test_report_matrix_entries_round_trip():
    _, out, _ = call("gram", "--k", "2", "--grid", "16")
    gram = parse_report(out)["results"]["gram"]
    assert gram.dtype == complex and np.allclose(gram, gram.conj().T)
