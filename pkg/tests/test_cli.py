"""Problem-file loader, canonical formatter, and the command-line entry
point with its exit-code contract:

    0  solved / all hypotheses hold
    2  a hypothesis fails or no scheme is licensed
    3  iteration budget exhausted before the tolerance
    4  unusable input (file, flags, expressions)
"""

import json
import math

import numpy as np
import pytest

from fracbvp import (
    ProblemFileError,
    format_problem,
    load_problem,
    packaged_problem_names,
    resolve_problem,
)
from fracbvp.cli import main

_LIPS = "\n".join(f"b{i}{k} = exp(-t)" for i in (1, 2) for k in range(1, 5))

MINIMAL = f"""
[orders]
alpha1 = 2.5
alpha2 = 1.5

[rhs]
f1 = exp(-t)
f2 = exp(-2*t)

[lipschitz]
{_LIPS}
"""


def _with(extra):
    return MINIMAL + "\n" + extra


def test_load_minimal():
    lp = load_problem(MINIMAL, origin="tiny.prob")
    assert lp.spec.alpha1.q == 2.5
    assert lp.spec.alpha2.q == 1.5
    assert lp.spec.h1 is None and lp.spec.h2 is None
    assert lp.spec.monotone is False
    assert lp.spec.name == "tiny"
    assert lp.solver.n == 64
    assert lp.solver.scheme == "auto"
    assert lp.solver.tol is None
    assert lp.expected == {}


def test_missing_required_section():
    with pytest.raises(ProblemFileError, match=r"\[orders\] is missing"):
        load_problem("[rhs]\nf1 = t\nf2 = t\n")


def test_missing_rhs_key():
    text = MINIMAL.replace("f2 = exp(-2*t)\n", "")
    with pytest.raises(ProblemFileError, match=r"\[rhs\] is missing.*f2"):
        load_problem(text)


def test_alpha_ranges_enforced():
    with pytest.raises(ProblemFileError, match=r"alpha1.*\(2, 3\]"):
        load_problem(MINIMAL.replace("alpha1 = 2.5", "alpha1 = 1.9"))
    with pytest.raises(ProblemFileError, match=r"alpha2.*\(1, 2\]"):
        load_problem(MINIMAL.replace("alpha2 = 1.5", "alpha2 = 2.5"))


def test_unknown_section_rejected():
    with pytest.raises(ProblemFileError, match=r"unknown section \[extras\]"):
        load_problem(_with("[extras]\nx = 1\n"))


def test_unknown_key_rejected():
    with pytest.raises(ProblemFileError, match=r"unknown key.*alpha3"):
        load_problem(MINIMAL.replace("alpha2 = 1.5",
                                     "alpha2 = 1.5\nalpha3 = 0.5"))


def test_keys_outside_sections_rejected():
    with pytest.raises(ProblemFileError, match="outside any section"):
        load_problem("[DEFAULT]\nstray = 1\n" + MINIMAL)
    with pytest.raises(ProblemFileError, match="bad INI syntax"):
        load_problem("stray = 1\n" + MINIMAL)


def test_ini_syntax_error():
    with pytest.raises(ProblemFileError, match="bad INI syntax"):
        load_problem("[orders\nalpha1 = 2.5\n")


def test_expression_errors_carry_location():
    with pytest.raises(ProblemFileError, match=r"\[rhs\] f1"):
        load_problem(MINIMAL.replace("f1 = exp(-t)", "f1 = exp(-t"))
    # Boundary weights may only mention t.
    with pytest.raises(ProblemFileError, match=r"\[boundary\] h1.*allowed"):
        load_problem(_with("[boundary]\nh1 = exp(-t)*u1\n"))


def test_growth_needs_every_key():
    block = "[growth]\na10 = exp(-t)\nlambda1 = 0.1, 0.2, 0.3, 0.4\n"
    with pytest.raises(ProblemFileError, match=r"\[growth\] is missing"):
        load_problem(_with(block))


def test_exponent_lists_need_four_entries():
    rows = "\n".join(f"a{i}{k} = exp(-t)" for i in (1, 2) for k in range(5))
    block = (f"[growth]\n{rows}\nlambda1 = 0.1, 0.2\n"
             f"lambda2 = 0.1, 0.2, 0.3, 0.4\n")
    with pytest.raises(ProblemFileError, match="4 comma-separated"):
        load_problem(_with(block))


def test_bool_parsing():
    for word in ("true", "Yes", "ON", "1"):
        lp = load_problem(MINIMAL.replace(
            "f2 = exp(-2*t)", f"f2 = exp(-2*t)\nmonotone = {word}"))
        assert lp.spec.monotone is True
    with pytest.raises(ProblemFileError, match="monotone"):
        load_problem(MINIMAL.replace(
            "f2 = exp(-2*t)", "f2 = exp(-2*t)\nmonotone = maybe"))


def test_boundary_annotations_require_weight():
    with pytest.raises(ProblemFileError, match="h1_decay"):
        load_problem(_with("[boundary]\nh1_decay = 1.0\n"))


def test_expected_accepts_constant_expressions():
    lp = load_problem(_with("[expected]\ntau2 = pi/8000\nL = 4.03638\n"))
    assert lp.expected["tau2"] == pytest.approx(math.pi / 8000.0)
    assert lp.expected["L"] == 4.03638
    with pytest.raises(ProblemFileError, match=r"unknown key.*zeta"):
        load_problem(_with("[expected]\nzeta = 1\n"))
    with pytest.raises(ProblemFileError, match=r"\[expected\] tau1"):
        load_problem(_with("[expected]\ntau1 = pi/t\n"))


def test_solver_section_validation():
    assert load_problem(_with(
        "[solver]\nn = 48\ntheta = 4.0\ntol = 5e-4\nmax_iter = 77\n"
        "scheme = contraction\ninterp = pchip\n")).solver.max_iter == 77
    for bad, msg in (
            ("n = 8", "at least 16"),
            ("scheme = downhill", "monotone or contraction"),
            ("interp = spline", "linear or pchip"),
            ("tol = -1e-4", "must be positive"),
            ("max_iter = 0", "at least 1")):
        with pytest.raises(ProblemFileError, match=msg):
            load_problem(_with(f"[solver]\n{bad}\n"))


def test_packaged_problems_present():
    assert packaged_problem_names() == ("lipschitz", "sublinear")


def test_resolve_by_name_and_path(tmp_path):
    by_name = resolve_problem("sublinear")
    with_ext = resolve_problem("sublinear.prob")
    assert by_name.sections == with_ext.sections
    p = tmp_path / "local.prob"
    p.write_text(MINIMAL)
    lp = resolve_problem(str(p))
    assert lp.spec.name == "local"
    with pytest.raises(ProblemFileError, match="packaged"):
        resolve_problem("no-such-problem")


def test_format_is_canonical(sublinear_lp, lipschitz_lp):
    for lp in (sublinear_lp, lipschitz_lp, load_problem(MINIMAL)):
        once = format_problem(lp)
        again = format_problem(load_problem(once, origin=lp.origin))
        assert once == again
        assert once.lstrip().startswith("[orders]")


def test_format_normalizes_values():
    text = _with("[solver]\nn = 48\n[expected]\ntau2 = pi/8000\n")
    out = format_problem(load_problem(text))
    assert "tau2 = 0.00039269908169872416" in out
    assert "n = 48" in out
    assert "f2 = exp(-2.0 * t)" in out


# -- the executable ------------------------------------------------------


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "check" in capsys.readouterr().out


def test_usage_errors_exit_four(capsys):
    assert main(["check", "sublinear", "--wat"]) == 4
    assert main(["frobnicate"]) == 4
    assert main([]) == 4


def test_missing_problem_exits_four(capsys):
    assert main(["check", "no-such-problem"]) == 4
    assert "packaged" in capsys.readouterr().err


def test_broken_file_exits_four(tmp_path, capsys):
    p = tmp_path / "broken.prob"
    p.write_text(MINIMAL.replace("alpha1 = 2.5", "alpha1 = nine"))
    assert main(["check", str(p)]) == 4
    assert "alpha1" in capsys.readouterr().err


def test_check_passes_on_packaged(capsys):
    assert main(["check", "sublinear"]) == 0
    out = capsys.readouterr().out
    assert "H1 pass" in out
    assert "H4 pass" in out
    assert "result: all applicable hypotheses hold" in out


def test_check_reports_declared_mismatch(capsys):
    assert main(["check", "lipschitz"]) == 0
    out = capsys.readouterr().out
    assert "declared-value mismatch: tau2" in out


def test_check_json(capsys):
    assert main(["check", "lipschitz", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is True
    assert doc["m"] == pytest.approx(0.985740294457121, abs=1e-9)
    assert [d["name"] for d in doc["discrepancies"]] == ["tau2"]


def test_check_fails_on_vanishing_forcing(tmp_path, capsys):
    p = tmp_path / "zero.prob"
    p.write_text(MINIMAL.replace("f1 = exp(-t)", "f1 = u1"))
    assert main(["check", str(p)]) == 2
    out = capsys.readouterr().out
    assert "H1 FAIL" in out
    assert "result: FAILED: H1" in out


def test_solve_refuses_unlicensed_scheme(capsys):
    assert main(["solve", "sublinear", "--scheme", "contraction"]) == 2
    err = capsys.readouterr().err
    assert "no scheme is licensed" in err
    assert "no Lipschitz data" in err


def test_solve_contraction_json(capsys):
    code = main(["solve", "lipschitz", "--json",
                 "--grid-n", "32", "--tol", "1e-3"])
    doc = json.loads(capsys.readouterr().out)
    assert code == 0
    assert doc["scheme"] == "contraction"
    assert doc["converged"] is True
    assert doc["config"]["grid_n"] == 32
    assert len(doc["solution"]["t"]) == 32
    assert len(doc["solution"]["u"]) == 32
    assert doc["verification"]["error_bound"]["ok"] is True
    assert doc["trace"]["diffs"]
    assert doc["hypothesis"]["passed"] is True


def test_solve_monotone_writes_outputs(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code = main(["solve", "sublinear", "--tol", "1e-4",
                 "--out", str(out_dir)])
    assert code == 0
    names = sorted(f.name for f in out_dir.iterdir())
    assert names == ["solution-lower.csv", "solution-upper.csv",
                     "trace-lower.csv", "trace-upper.csv",
                     "verification.json"]
    text = (out_dir / "solution-lower.csv").read_text()
    assert text.startswith("# problem: sublinear\n")
    rows = [line for line in text.splitlines()
            if line and not line.startswith("#")]
    assert rows[0] == "t,u,v,du,dv"
    data = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
    assert data.shape == (64, 5)
    assert np.all(data[:, 1:] >= 0.0)  # the lower solution is nonnegative
    ver = json.loads((out_dir / "verification.json").read_text())
    assert ver["ordering"]["ok"] is True
    assert ver["config"]["scheme"] == "monotone"
    summary = capsys.readouterr().out
    assert "sandwich gap" in summary


def test_solve_iteration_budget_exit(capsys):
    code = main(["solve", "lipschitz", "--grid-n", "32",
                 "--tol", "1e-9", "--max-iter", "2"])
    assert code == 3
    assert "not converged in 2 steps" in capsys.readouterr().out


def test_kernel_dump_csv(capsys):
    code = main(["kernel-dump", "sublinear", "--points", "4",
                 "--t-min", "0.5", "--t-max", "2.0"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    body = [line for line in lines if not line.startswith("#")]
    assert body[0] == ("t,s,k1,k1_bound,k2,k2_bound,"
                       "kstar1,kstar1_bound,kstar2,kstar2_bound")
    assert len(body) == 1 + 16
    data = np.array([[float(x) for x in r.split(",")] for r in body[1:]])
    t, s = data[:, 0], data[:, 1]
    assert t.min() == pytest.approx(0.5) and t.max() == pytest.approx(2.0)
    for col in (2, 4, 6, 8):
        vals, bound = data[:, col], data[:, col + 1]
        assert np.all(vals >= 0.0)
        assert np.all(vals <= bound * (1.0 + 1e-12))


def test_kernel_dump_json_and_file(tmp_path, capsys):
    target = tmp_path / "kernels.json"
    code = main(["kernel-dump", "lipschitz", "--points", "4",
                 "--json", "--out", str(target)])
    assert code == 0
    doc = json.loads(target.read_text())
    assert len(doc["t"]) == 4
    assert len(doc["k1"]) == 4 and len(doc["k1"][0]) == 4
