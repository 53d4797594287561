import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from achgjms import io as aio
from achgjms.background import build_background_from_chart, constant_background, heisenberg_chart, sublaplacian
from achgjms.cli import main
from achgjms.gjms import gjms_apply
from achgjms.series import QI
from achgjms.solver import SolveConfig, solve

FAST = dict(check_cotton=False, check_variation=False)
fractions = st.fractions(max_denominator=10 ** 6).filter(lambda q: abs(q.numerator) < 10 ** 12)


@given(fractions, fractions)
def test_exact_scalar_roundtrip(re, im):
    z = QI(re, im)
    back = aio.load_scalar(json.loads(json.dumps(aio.dump_scalar(z))))
    assert back == z and isinstance(back, QI)


@given(st.lists(st.tuples(fractions, fractions), min_size=1, max_size=12))
def test_exact_array_roundtrip_has_no_floats(pairs):
    a = np.array([QI(*p) for p in pairs], dtype=object).reshape(len(pairs), 1)
    d = aio.dump_array(a)
    text = json.dumps(d)
    assert all(isinstance(v, str) for p in d["data"] for v in p)
    b = aio.load_array(json.loads(text))
    assert b.shape == a.shape and all(x == y for x, y in zip(a.ravel(), b.ravel()))


def test_float_array_roundtrip_is_bit_identical():
    a = np.random.default_rng(0).normal(size=(3, 4)) + 1j / 3
    b = aio.load_array(json.loads(json.dumps(aio.dump_array(a))))
    assert np.array_equal(a, b)


def test_exact_result_roundtrip_reproduces_gjms(tmp_path):
    bg = constant_background(3, QI(1, 2))
    r = solve(bg, SolveConfig(order=9, lam=QI(2), **FAST))
    aio.save_result(tmp_path / "r.json", r, aio.provenance({"x": 1}))
    back = aio.load_result(tmp_path / "r.json", bg)
    assert back.lam == r.lam and back.obstruction.data == r.obstruction.data
    for k in r.coefficients:
        assert list(back.coefficients[k]) == list(r.coefficients[k])
    for k in (1, 2, 3):
        assert gjms_apply(back, k, QI(1)).value.data == gjms_apply(r, k, QI(1)).value.data


def test_float_result_roundtrip_reproduces_gjms(tmp_path):
    bg = build_background_from_chart(heisenberg_chart(), (8, 8, 1), derivatives="symbolic")
    r = solve(bg, SolveConfig(order=9, lam=1.0, **FAST))
    aio.save_result(tmp_path / "r.json", r)
    back = aio.load_result(tmp_path / "r.json", bg)
    x, y, _ = bg.grid.coords
    f = np.cos(x) * np.sin(2 * y) + 0j
    assert np.array_equal(gjms_apply(back, 2, f).value.data, gjms_apply(r, 2, f).value.data)


def test_residual_csv_and_provenance():
    r = solve(constant_background(1, 0), SolveConfig(order=9, **FAST))
    rows = list(csv.reader(io.StringIO(aio.residual_csv(r))))
    assert rows[0] == ["order", "component", "max_norm"]
    assert all(float(row[2]) == 0 for row in rows[1:]) and len(rows) > 1
    h1, h2 = aio.provenance({"a": 1, "b": 2}), aio.provenance({"b": 2, "a": 1})
    assert h1["config_hash"] == h2["config_hash"] != aio.provenance({"a": 2})["config_hash"]


# ---------------------------------------------------------------- command line

def run(tmp_path, *argv):
    out = tmp_path / "out.json"
    code = main([*argv, "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_cli_solve_flat_model(tmp_path):
    code, d = run(tmp_path, "solve", "--background", "heisenberg", "--order", "14", "--lambda", "0",
                  "--csv", str(tmp_path / "res.csv"))
    assert code == 0
    assert d["provenance"]["tool"] == "achgjms" and len(d["provenance"]["config_hash"]) == 16
    for comp in d["ansatz"].values():
        assert all(p == ["0", "0"] for order in comp for p in order["data"])
    assert (tmp_path / "res.csv").read_text().startswith("order,component")


def test_cli_gjms_matches_sublaplacian(tmp_path):
    code, d = run(tmp_path, "gjms", "--background", "heisenberg", "--k", "1", "--order", "9",
                  "--resolution", "8", "--function", "cos(x)*sin(2*y)")
    assert code == 0
    bg = build_background_from_chart(heisenberg_chart(), (8, 8, 1), derivatives="symbolic")
    x, y, _ = bg.grid.coords
    want = sublaplacian(bg, np.cos(x) * np.sin(2 * y) + 0j).data
    assert np.abs(aio.load_array(d["Pf"]) - want).max() < 1e-10
    assert len(d["recursion"]) == 2


def test_cli_indicial(tmp_path):
    code, d = run(tmp_path, "indicial", "--kmax", "200")
    assert code == 0 and d["pencil"]["matches"] == 201


def test_cli_constant_json_background_and_lambda_batch(tmp_path):
    spec = tmp_path / "c.json"
    spec.write_text(json.dumps({"kind": "constant", "scal": 3, "a11": [1, 2],
                                "jets": {"A11,0": ["-12", "6"]}}))
    code, d = run(tmp_path, "verify", "--background", str(spec), "--order", "9",
                  "--lambda", "0,1,-2", "--fast")
    assert code == 0
    assert d["lambda_batch"]["degree_bound_ok"]
    assert all(rep["einstein_ok"] for rep in d["reports"])


def test_cli_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ACHGJMS_OUT", str(tmp_path / "artifacts"))
    assert main(["indicial", "--kmax", "3"]) == 0
    files = list((tmp_path / "artifacts").glob("indicial-*.json"))
    assert len(files) == 1


@pytest.mark.parametrize("argv,needle", [
    (["solve", "--background", "nowhere"], "unknown background"),
    (["solve", "--background", "heisenberg", "--order", "8"], "order"),
    (["solve", "--background", "constant:1:2"], "constant"),
    (["solve", "--background", "constant-scal:1", "--mode", "float"], "exact"),
    (["gjms", "--background", "constant-scal:1", "--k", "1"], "grid"),
    (["gjms", "--background", "heisenberg", "--k", "4", "--order", "9"], "2k + 2"),
    (["solve", "--background", "heisenberg", "--lambda", "x"], "x"),
])
def test_cli_config_errors_exit_1(tmp_path, capsys, argv, needle):
    assert main([*argv, "--out", str(tmp_path / "o.json")]) == 1
    assert needle in capsys.readouterr().err


def test_cli_bad_files_exit_1(tmp_path, capsys):
    chart = tmp_path / "chart.json"
    chart.write_text(json.dumps({"periods": [6.283, 6.283, 6.283], "z": ["1", "0", "0"]}))
    assert main(["solve", "--background", str(chart)]) == 1
    assert "'theta'" in capsys.readouterr().err
    bad_jets = tmp_path / "c.json"
    bad_jets.write_text(json.dumps({"kind": "constant", "scal": 3, "a11": [1, 2],
                                    "jets": {"A11,0": [1, 0]}}))
    assert main(["solve", "--background", str(bad_jets)]) == 1
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert main(["solve", "--background", str(junk)]) == 1


def test_cli_verification_failure_exits_2(tmp_path):
    spec = tmp_path / "torus.json"
    spec.write_text(json.dumps({"torus": {"upsilon": "0.02*sin(x)", "mu": "0.02*cos(x)"},
                                "resolution": [8, 8, 8], "residual_tol": 1e-5}))
    code = main(["solve", "--background", str(spec), "--order", "9", "--lambda", "1",
                 "--fast", "--tol", "1e-30", "--out", str(tmp_path / "o.json")])
    assert code == 2


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "achgjms.cli", "indicial", "--kmax", "5",
                        "--out", str(tmp_path / "i.json")], capture_output=True, text=True)
    assert p.returncode == 0 and "6 exact matches" in p.stdout
