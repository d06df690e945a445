import json
from fractions import Fraction

import numpy as np
import pytest

from multinorm.cli import dumps, main
from multinorm.free_objects import FreeSpace
from multinorm.lspace_core import (
    Paving,
    ambient_norm,
    instance_to_json,
    make_min_space,
    make_spec_space,
    make_well_composed,
    oplus1_sum,
    paving_to_json,
)
from multinorm.morphisms import LOperator, operator_to_json
from multinorm.normed_core import LpNorm, PolytopeVertices

P = Paving(1, 3, [(0, 1), (1, 2)])


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norm_of_vector(tmp_path, capsys):
    spec = write(tmp_path, "s.json", {"kind": "lp", "p": 1, "dim": 2})
    vec = write(tmp_path, "v.json", [3, 4])
    code, out, _ = run(capsys, "norm", spec, vec)
    assert code == 0 and json.loads(out) == {"lower": 7.0, "upper": 7.0, "exact": True}


def test_dual_and_auerbach(tmp_path, capsys):
    spec = write(tmp_path, "s.json", {"kind": "lp", "p": 1, "dim": 3})
    code, out, _ = run(capsys, "dual", spec)
    assert code == 0 and json.loads(out)["spec"] == {"kind": "lp", "p": "inf", "dim": 3}
    hexagon = write(tmp_path, "h.json", {"kind": "poly_v", "vertices": [[1, 0], [0.5, 0.8660254037844386],
                                                                         [-0.5, 0.8660254037844386]]})
    code, out, _ = run(capsys, "auerbach", hexagon)
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["determinant"] == pytest.approx(np.sqrt(3) / 2, abs=1e-12)


def test_min_with_w_is_exactly_one(tmp_path, capsys):
    n = 3
    l_spec = write(tmp_path, "l.json", {"kind": "lp", "p": 1, "dim": n})
    e_spec = write(tmp_path, "e.json", {"kind": "lp", "p": "inf", "dim": n})
    w = write(tmp_path, "w.json", {"l_dim": n, "e_dim": n, "coeffs": np.eye(n).tolist()})
    code, out, _ = run(capsys, "inj-norm", l_spec, e_spec, w)
    assert code == 0 and json.loads(out) == {"lower": 1.0, "upper": 1.0, "exact": True}


def test_free_output_round_trips_through_norm(tmp_path, capsys):
    pav = write(tmp_path, "p.json", paving_to_json(P))
    code, out, _ = run(capsys, "free", "--paving", pav, "--labels", "a,b")
    assert code == 0
    doc = json.loads(out)
    assert doc["dim"] == 2 * (2 + 2)
    free = write(tmp_path, "f.json", doc)
    rng = np.random.default_rng(0)
    F = FreeSpace.from_json(doc)
    for _ in range(3):
        U = rng.standard_normal((3, doc["dim"]))
        t = write(tmp_path, "t.json", {"l_dim": 3, "e_dim": doc["dim"], "coeffs": U.tolist()})
        code, out, _ = run(capsys, "norm", free, t)
        got = json.loads(out)
        ref = ambient_norm(F.instance, U)
        assert code == 0 and abs(got["lower"] - ref.lower) <= 1e-12 and abs(got["upper"] - ref.upper) <= 1e-12


def test_check_identity_is_certified_coisometry(tmp_path, capsys):
    E = make_min_space(P, LpNorm(1, 2))
    op = write(tmp_path, "id.json", operator_to_json(LOperator.identity(E)))
    code, out, _ = run(capsys, "check", op, "--coisometry", "strict", "--seed", 0)
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["verdict"] == "strict" and doc["certified"]
    half = write(tmp_path, "half.json", operator_to_json(LOperator(0.5 * np.eye(2), E, E)))
    code, out, _ = run(capsys, "check", half, "--coisometry", "strict", "--seed", 0)
    assert code == 1 and not json.loads(out)["passed"]


def test_check_contractibility_detects_adversary(tmp_path, capsys):
    good = write(tmp_path, "good.json", instance_to_json(make_min_space(P, LpNorm(1, 2))))
    code, out, _ = run(capsys, "check", good, "--contractibility", "--samples", 50, "--seed", 1)
    assert code == 0 and json.loads(out)["passed"]
    Q = Paving(1, 2, [(0, 1)])
    bad = make_spec_space(Q, 1, [PolytopeVertices([[1, 0], [0, 0.5]])])
    path = write(tmp_path, "bad.json", instance_to_json(bad))
    code, out, _ = run(capsys, "check", path, "--contractibility", "--samples", 200, "--seed", 1)
    doc = json.loads(out)
    assert code == 1 and not doc["passed"] and doc["witnesses"]


def test_lift_and_pi(tmp_path, capsys):
    E = make_min_space(P, LpNorm(1, 2))
    Gp = make_min_space(P, LpNorm(1, 1))
    G, _ = oplus1_sum([E, Gp])
    tau = LOperator(np.hstack([np.eye(2), [[0.5], [0.25]]]), G, E)
    phi = LOperator(np.array([[0.3, -0.2], [0.1, 0.4]]), E, E)
    t, f = write(tmp_path, "tau.json", operator_to_json(tau)), write(tmp_path, "phi.json", operator_to_json(phi))
    code, out, _ = run(capsys, "lift", t, f)
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    psi = np.array([[float(Fraction(x)) for x in r] for r in doc["psi"]["matrix_exact"]])
    assert np.allclose(tau.matrix @ psi, phi.matrix, atol=0)

    space = write(tmp_path, "E.json", instance_to_json(E))
    rows = [{"t": 0, "rows": {"0": {"l_dim": 2, "e_dim": 2, "coeffs": [[0.5, 0], [0, 0.5]]},
                              "1": {"l_dim": 2, "e_dim": 2, "coeffs": [[0.25, 0.25], [0, 0]]}}}]
    code, out, _ = run(capsys, "pi", space, write(tmp_path, "rows.json", rows))
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and doc["rows"][0]["exact_image"]


def test_scenario_writes_reports(tmp_path, capsys):
    code, out, _ = run(capsys, "scenario", "polygon-gap", "--vertices", 8, "--trials", 3, "--seed", 0,
                       "--out-dir", tmp_path / "rep")
    assert code == 0
    assert all(line.startswith(("PASS", "report:")) for line in out.strip().splitlines())
    files = sorted(p.name for p in (tmp_path / "rep").iterdir())
    assert any(f.endswith(".json") for f in files) and any(f.endswith("-trials.csv") for f in files)
    first = (tmp_path / "rep" / [f for f in files if f.endswith(".json")][0]).read_text()
    run(capsys, "scenario", "polygon-gap", "--vertices", 8, "--trials", 3, "--seed", 0, "--out-dir", tmp_path / "rep")
    again = (tmp_path / "rep" / [f for f in files if f.endswith(".json")][0]).read_text()
    assert first == again


def test_usage_errors(tmp_path, capsys):
    assert run(capsys, "scenario", "polygon-gap")[0] == 2
    assert run(capsys, "norm", tmp_path / "missing.json", tmp_path / "x.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"kind\": ")
    code, _, err = run(capsys, "dual", bad)
    assert code == 2 and "line 2" in err
    spec = write(tmp_path, "s.json", {"kind": "lp", "p": 1, "dim": 2})
    code, _, err = run(capsys, "norm", spec, write(tmp_path, "v.json", [1, 2, 3]))
    assert code == 2 and "dimension" in err
    assert run(capsys, "scenario", "polygon-gap", "--seed", -1)[0] == 2
    assert run(capsys, "scenario", "polygon-gap", "--seed", 0, "--vertices", 3)[0] == 2
    assert run(capsys, "bogus")[0] == 2


def test_lift_needs_seed_for_curved_codomain(tmp_path, capsys):
    E = make_min_space(P, LpNorm(2, 2))
    tau = write(tmp_path, "id.json", operator_to_json(LOperator.identity(E)))
    W = make_well_composed(P, [P.level_spec(0)])
    phi = write(tmp_path, "phi.json", operator_to_json(LOperator(0.5 * np.eye(2, W.e_dim), W, E)))
    assert run(capsys, "lift", tau, phi)[0] == 2
    code, out, _ = run(capsys, "lift", tau, phi, "--seed", 0)
    doc = json.loads(out)
    assert code == 0 and doc["passed"] and not doc["tau"]["certified"]


def test_dumps_is_strict_json():
    text = dumps({"a": float("inf"), "b": np.float64(0.1), "c": np.arange(2)})
    assert json.loads(text) == {"a": None, "b": 0.1, "c": [0, 1]}
