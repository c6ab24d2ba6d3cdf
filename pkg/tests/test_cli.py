from __future__ import annotations

import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracdyn import cli
from fracdyn.config import ScenarioConfig
from fracdyn.errors import InputError
from fracdyn.fields import REGISTRY, FieldSpec
from fracdyn.mlf import mittag_leffler
from fracdyn.solver import Trajectory


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {
        "field": {"name": "linear_diag", "params": {"a1": -1.0}},
        "alpha": 0.5,
        "x0": [1.0],
        "horizon": 1e4,
        "mesh": {"kind": "geometric", "n": 2000},
    } | overrides
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


# {{{ ml


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["--alpha", "1", "--beta", "1", "--z", "1"], "2.718281828459045"),
        (["--alpha", "0.5", "--beta", "2", "--z", "0"], "1.0"),
    ],
)
def test_ml_exact_outputs(capsys, argv, expected):
    code, out, err = run(capsys, "ml", *argv)
    assert code == 0 and out.strip() == expected
    assert "region=" in err


def test_ml_half_order(capsys):
    code, out, _ = run(capsys, "ml", "--alpha", "0.5", "--z", "-1")
    assert code == 0 and float(out) == pytest.approx(0.427584, abs=1e-6)
    code, out, _ = run(capsys, "ml", "--alpha", "0.5", "--z", "1+2j")
    assert code == 0 and complex(out.strip()) == pytest.approx(complex(mittag_leffler(1 + 2j, 0.5)))


def test_ml_accuracy_failure_exit_code(capsys):
    code, out, err = run(capsys, "ml", "--alpha", "0.5", "--z", "-8", "--tol", "1e-18")
    assert code == cli.EXIT_ML_ACCURACY
    assert float(out) == pytest.approx(mittag_leffler(-8.0, 0.5), rel=1e-10)
    assert "error" in err


def test_usage_errors(capsys):
    assert run(capsys, "ml", "--alpha", "0.5", "--z", "abc")[0] == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["ml", "--alpha", "0.5"])
    assert info.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == cli.EXIT_USAGE
    assert run(capsys, "ml", "--alpha", "3", "--z", "1")[0] == cli.EXIT_BAD_CONFIG


# }}}


# {{{ solve


def test_solve_linear_config(capsys, tmp_path):
    cfg = write_config(tmp_path)
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0 and out.startswith("completed")
    traj = Trajectory.from_csv(tmp_path / "o" / "trajectory.csv")
    assert (tmp_path / "o" / "trajectory.csv").read_text().splitlines()[0] == "t,x1"
    exact = np.asarray(mittag_leffler(-(traj.times**0.5), 0.5))
    assert np.max(np.abs(traj.states[:, 0] - exact)) <= 2e-3
    rep = json.loads((tmp_path / "o" / "solve.json").read_text())
    assert rep["schema_version"] == 1 and rep["status"] == "completed"
    assert rep["residual"]["ok"] and rep["residual"]["nodes_max"] <= 1e-3


def test_solve_zero_field(capsys, tmp_path):
    cfg = write_config(tmp_path, field={"name": "zero", "params": {"d": 2}}, x0=[0.5, -2.0], horizon=10.0)
    assert run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))[0] == 0
    traj = Trajectory.from_csv(tmp_path / "trajectory.csv")
    assert np.all(traj.states == [0.5, -2.0])


def test_solve_non_lipschitz_config(capsys, tmp_path):
    alpha = 0.5
    cfg = write_config(tmp_path, field={"name": "power_sign", "params": {"beta": 0.5}}, horizon=100.0)
    assert run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))[0] == 0
    traj = Trajectory.from_csv(tmp_path / "trajectory.csv")
    x = traj.states[:, 0]
    assert np.all(x > 0) and np.all(np.diff(x) < 0)
    assert np.max(x * (1 + traj.times ** (alpha / 0.5))) <= 3.0
    assert json.loads((tmp_path / "solve.json").read_text())["residual"]["ok"]


def test_solve_incomplete_exit_code(capsys, tmp_path):
    cfg = write_config(
        tmp_path, field={"name": "semilinear", "params": {"lam": 1.0, "k": 0.0}}, horizon=50.0, domain_radius=2.0
    )
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == cli.EXIT_INCOMPLETE and out.startswith("domain_exit")
    rep = json.loads((tmp_path / "solve.json").read_text())
    assert rep["status"] == "domain_exit" and rep["exit_time"] > 0
    assert abs(rep["exit_state"][0] - 1.0) >= 2.0


@pytest.mark.parametrize(
    "overrides",
    [
        {"alpha": 1.5},
        {"colour": "blue"},
        {"field": {"name": "nope"}},
        {"field": {"name": "power_sign", "params": {}}},
        {"field": {"name": "linear_diag", "params": {"a1": -1.0, "bogus": 2.0}}},
        {"x0": [1.0, 2.0]},
        {"mesh": {"kind": "spiral"}},
        {"analyses": [{"op": "sector", "extra": 1}]},
    ],
)
def test_bad_configs(capsys, tmp_path, overrides):
    cfg = write_config(tmp_path, **overrides)
    code, _, err = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == cli.EXIT_BAD_CONFIG and "error" in err


def test_missing_or_broken_config(capsys, tmp_path):
    assert run(capsys, "solve", "--config", str(tmp_path / "absent.json"))[0] == cli.EXIT_BAD_CONFIG
    (tmp_path / "broken.json").write_text("{not json")
    assert run(capsys, "solve", "--config", str(tmp_path / "broken.json"))[0] == cli.EXIT_BAD_CONFIG
    assert run(capsys, "solve")[0] == cli.EXIT_BAD_CONFIG


def _strip_meta(path):
    doc = json.loads(path.read_text())
    doc.pop("meta")
    return doc


def test_solve_is_deterministic(capsys, tmp_path):
    cfg = write_config(tmp_path, field={"name": "power_sign", "params": {"beta": 3.0}}, x0=[0.5], horizon=100.0)
    for d in ("a", "b"):
        assert run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path / d))[0] == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert _strip_meta(tmp_path / "a" / "solve.json") == _strip_meta(tmp_path / "b" / "solve.json")
    assert set(json.loads((tmp_path / "a" / "solve.json").read_text())["meta"]) == {"timestamp", "version"}


# }}}


# {{{ analyze


def test_analyze_cubic_pipeline(capsys, tmp_path):
    cfg = write_config(
        tmp_path,
        field={"name": "power_sign", "params": {"beta": 3.0}},
        x0=[0.5],
        mesh={"kind": "geometric", "n": 3000},
        analyses=[{"op": "decay"}, {"op": "certificate"}, {"op": "sector"}, {"op": "comparison"}],
    )
    code, out, _ = run(capsys, "analyze", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 0, out
    rep = json.loads((tmp_path / "report.json").read_text())
    assert set(rep["reports"]) == {"sector", "certificate", "comparison", "decay"}
    assert rep["reports"]["sector"]["verdict"] == "zero_eigenvalue"
    cert = rep["reports"]["certificate"]
    assert cert["verdict"] == "pass" and cert["constants"]["predicted_exponent"] == 0.125
    assert cert["constants"]["reference_sharp_rate"] == pytest.approx(0.5 / 3)
    assert rep["reports"]["comparison"]["verdict"] == "ordering_holds"
    gamma = rep["reports"]["decay"]["constants"]["fits"][0]["gamma"]
    assert gamma >= 0.125 - 0.05 and rep["reports"]["decay"]["verdict"] == "pass"
    for r in rep["reports"].values():
        assert set(r) == {"operation", "inputs", "verdict", "margins", "constants", "grids", "tolerances", "warnings"}


def test_pipeline_runs_in_fixed_order():
    cfg = ScenarioConfig.from_dict(
        {
            "field": {"name": "power_sign", "params": {"beta": 3.0}},
            "alpha": 0.5,
            "x0": [0.5],
            "horizon": 1.0,
            "analyses": [{"op": "certificate", "samples": 10000}, {"op": "sector"}],
        }
    )
    assert list(cli.run_analyses(cfg)["reports"]) == ["sector", "certificate"]


def test_analyze_linear_pipeline(capsys, tmp_path):
    cfg = write_config(
        tmp_path,
        alpha=0.6,
        analyses=[{"op": "sector"}, {"op": "constants"}, {"op": "radius"}, {"op": "decay"}, {"op": "no_fast_decay", "beta_test": 0.8}],
    )
    code, _, _ = run(capsys, "analyze", "--config", str(cfg), "--out", str(tmp_path))
    rep = json.loads((tmp_path / "report.json").read_text())
    assert code == 0 and rep["verdict"] == "stable_sector"
    assert rep["reports"]["constants"]["constants"]["C3"] == [pytest.approx(1.0, abs=1e-9)]
    assert rep["reports"]["radius"]["constants"]["q"] == 0
    assert rep["reports"]["decay"]["constants"]["fits"][0]["gamma"] == pytest.approx(0.6, abs=0.05)
    assert rep["reports"]["no_fast_decay"]["verdict"] == "pass"


def test_analyze_slow_decay_windows(capsys, tmp_path):
    cfg = write_config(
        tmp_path,
        field={"name": "exp_reciprocal"},
        x0=[0.5],
        analyses=[{"op": "decay", "windows": [[10, 100], [100, 1000], [1000, 10000]], "decades_from": 100}],
    )
    assert run(capsys, "analyze", "--config", str(cfg), "--out", str(tmp_path))[0] == 0
    consts = json.loads((tmp_path / "report.json").read_text())["reports"]["decay"]["constants"]
    assert len(consts["fits"]) == 3
    dec = [d["gamma"] for d in consts["decades"]]
    assert len(dec) == 2 and dec[1] < dec[0]


def test_analyze_failure_exit_code(capsys, tmp_path):
    # the non-Lipschitz field decays faster than any Lipschitz field could
    cfg = write_config(
        tmp_path,
        field={"name": "power_sign", "params": {"beta": 0.5}},
        analyses=[{"op": "no_fast_decay", "beta_test": 0.7}],
    )
    code, out, _ = run(capsys, "analyze", "--config", str(cfg), "--out", str(tmp_path))
    assert code == cli.EXIT_FAILED and "no_fast_decay" in out


# }}}


# {{{ reproduce


def test_reproduce_cubic(capsys, tmp_path):
    code, out, _ = run(capsys, "reproduce", "ex2", "--beta", "3", "--alpha", "0.5", "--out", str(tmp_path))
    assert code == 0
    lines = out.strip().splitlines()
    assert lines and all(line.startswith("PASS ex2:") for line in lines)
    rep = json.loads((tmp_path / "ex2" / "report.json").read_text())
    assert rep["passed"]
    assert (tmp_path / "ex2" / "trajectory.csv").exists()


def test_reproduce_separation(capsys, tmp_path):
    code, out, _ = run(capsys, "reproduce", "separation", "--out", str(tmp_path))
    assert code == 0 and "FAIL" not in out


def test_reproduce_unknown(capsys, tmp_path):
    code, _, err = run(capsys, "reproduce", "ex9", "--out", str(tmp_path))
    assert code == cli.EXIT_USAGE and "unknown example" in err


# }}}


# {{{ config and plumbing

params = {
    "linear_diag": st.lists(st.floats(-5, -0.1), min_size=1, max_size=3).map(
        lambda v: {f"a{i + 1}": x for i, x in enumerate(v)}
    ),
    "power_sign": st.floats(0.2, 4.0).map(lambda b: {"beta": b}),
    "cubic_plus_g": st.fixed_dictionaries({"k": st.floats(-2, 2), "n": st.floats(3.5, 6)}),
    "twodim": st.just({}),
    "exp_reciprocal": st.just({}),
    "semilinear": st.fixed_dictionaries({"lam": st.floats(-3, -0.1)}),
    "zero": st.integers(1, 3).map(lambda d: {"d": d}),
}


@st.composite
def configs(draw):
    name = draw(st.sampled_from(sorted(params)))
    p = draw(params[name])
    dim = FieldSpec(name, p).dim
    return {
        "field": {"name": name, "params": p},
        "alpha": draw(st.floats(0.01, 0.99)),
        "x0": draw(st.lists(st.floats(-1, 1), min_size=dim, max_size=dim)),
        "horizon": draw(st.floats(0.1, 1e4)),
        "mesh": {"kind": draw(st.sampled_from(["uniform", "graded", "geometric"])), "n": draw(st.integers(2, 5000))},
        "analyses": draw(st.lists(st.sampled_from([{"op": "sector"}, {"op": "decay", "windows": [[1, 10]]}]), max_size=2)),
        "seed": draw(st.integers(0, 100)),
    }


@settings(max_examples=60, deadline=None)
@given(data=configs())
def test_config_round_trip(data):
    cfg = ScenarioConfig.from_dict(data)
    again = ScenarioConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_registry_is_complete():
    assert {"linear_diag", "power_sign", "cubic_plus_g", "twodim", "exp_reciprocal"} <= set(REGISTRY)
    with pytest.raises(InputError):
        FieldSpec("cubic_plus_g", {"n": 3.0}).build()
    with pytest.raises(InputError):
        FieldSpec("linear_diag", {"a1": -1.0, "a3": -1.0})
    assert FieldSpec("exp_reciprocal").build()(np.array([0.0]))[0] == 0.0
    assert math.isclose(FieldSpec("exp_reciprocal").build()(np.array([-0.5]))[0], math.exp(-2) * 0.5)


def test_parallel_map(monkeypatch):
    monkeypatch.setenv("FRACDYN_THREADS", "3")
    assert cli.worker_count() == 3
    seen = set()

    def work(x):
        seen.add(threading.get_ident())
        return x * x

    assert cli.parallel_map(work, range(20)) == [x * x for x in range(20)]
    monkeypatch.setenv("FRACDYN_THREADS", "0")
    assert cli.worker_count() >= 1
    monkeypatch.setenv("FRACDYN_THREADS", "lots")
    with pytest.raises(InputError):
        cli.worker_count()


# }}}
