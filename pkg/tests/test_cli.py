import json

import numpy as np
import pytest

from lorentzlattice import cli
from lorentzlattice.lattice import SpacetimeField
from lorentzlattice.models import CoinOperator


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path / "run")])


def load(tmp_path, name="run"):
    return json.loads((tmp_path / f"{name}.json").read_text())


def test_simulate_writes_json_and_csv(tmp_path):
    assert run(tmp_path, "simulate", "--model", "dirac", "--m", "1", "--steps", "6") == 0
    f = SpacetimeField.load_json(tmp_path / "run.json")
    assert f.meta["t1"] == 6 and abs(f.layer_norm(6) - 1) < 1e-12
    head = (tmp_path / "run.csv").read_text().splitlines()[0]
    assert "r" in head and "l" in head


@pytest.mark.parametrize("model", ["dirac", "fd_dirac", "clock_qw", "clock_qca"])
def test_simulate_every_model(tmp_path, model):
    assert run(tmp_path, "simulate", "--model", model, "--m", "0.5", "--steps", "4", "--init", "random", "--seed", "1") == 0


def test_simulate_qca_from_config_string(tmp_path):
    assert run(tmp_path, "simulate", "--model", "clock_qca", "--sites", "4", "--init", "01q0", "--steps", "3") == 0
    out = load(tmp_path)
    assert len(out["occupations"]) == 4 and abs(out["norms"][-1] - 1) < 1e-12


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--model", "schrodinger"],
        ["simulate", "--eps", "0"],
        ["simulate", "--alpha", "0"],
        ["simulate", "--init", "gaussian"],
        ["simulate", "--model", "clock_qca", "--sites", "4", "--init", "01x0"],
        ["simulate", "--steps", "-1"],
        ["verify", "norm", "--swaps", "0"],
        ["transform", "--alpha", "2"],
        ["simulate", "--no-such-flag"],
    ],
)
def test_bad_configuration_exits_2(tmp_path, args):
    assert run(tmp_path, *args) == 2


def test_norm_drift_exits_3(tmp_path, monkeypatch):
    leaky = CoinOperator(1.01 * np.eye(2), "dirac", {"m": 0.0, "eps": 0.1}, 1, 1, unitary=True)
    monkeypatch.setattr(cli, "build_gate", lambda model, params: leaky)
    assert run(tmp_path, "simulate", "--steps", "5") == 3
    assert (tmp_path / "run.json").exists()


def test_fd_dirac_growth_is_not_a_failure(tmp_path):
    assert run(tmp_path, "simulate", "--model", "fd_dirac", "--m", "3", "--steps", "10") == 0


def test_transform_exit_codes(tmp_path):
    src = tmp_path / "clock.json"
    cli.main(["simulate", "--model", "clock_qw", "--p", "2", "--m", "1", "--steps", "4", "--init", "random", "--out", str(src)])
    assert run(tmp_path, "transform", "--in", str(src), "--alpha", "2", "--beta", "3") == 0
    out = load(tmp_path)
    assert out["meta"]["params"]["p"] == 4 and out["provenance"]["gluing_mismatch"] < 1e-12

    dirac = tmp_path / "dirac.json"
    cli.main(["simulate", "--m", "1", "--steps", "4", "--init", "random", "--out", str(dirac)])
    assert run(tmp_path, "transform", "--in", str(dirac), "--alpha", "2") == 1
    assert load(tmp_path)["provenance"]["gluing_mismatch"] > 1e-6
    assert run(tmp_path, "transform", "--in", str(tmp_path / "missing.json"), "--alpha", "2") == 2


def test_identity_transform_keeps_payload(tmp_path):
    src = tmp_path / "a.json"
    cli.main(["simulate", "--m", "1", "--steps", "4", "--init", "random", "--out", str(src)])
    assert run(tmp_path, "transform", "--in", str(src)) == 0
    a, b = json.loads(src.read_text()), load(tmp_path)
    a.pop("provenance"), b.pop("provenance")
    lz = b["meta"].pop("lorentz")
    assert (lz["source_t0"], lz["source_t1"]) == (a["meta"].pop("t0"), a["meta"].pop("t1"))
    assert a == b


def test_nonhomog_transform(tmp_path, capsys):
    nh = tmp_path / "nh.json"
    nh.write_text(json.dumps({"alpha_runs": [], "beta_runs": [[2, 6, 2]]}))
    assert run(tmp_path, "transform", "--model", "clock_qca", "--sites", "4", "--nonhomog", str(nh)) == 0
    out = load(tmp_path)
    assert out["gluing_mismatch"] < 1e-12 and out["provenance"]["transform"]["beta_runs"] == [[2, 6, 2]]
    assert run(tmp_path, "transform", "--model", "dirac", "--m", "1", "--sites", "4", "--nonhomog", str(nh)) == 1
    assert "homogeneity condition" in capsys.readouterr().err
    nh.write_text("{not json")
    assert run(tmp_path, "transform", "--model", "clock_qca", "--nonhomog", str(nh)) == 2


def test_verify_covariance(tmp_path):
    assert run(tmp_path, "verify", "covariance", "--model", "clock_qca", "--alpha", "2", "--beta", "3") == 0
    assert load(tmp_path)["status"] == "exact"
    assert run(tmp_path, "verify", "covariance", "--model", "dirac", "--m", "1", "--alpha", "2", "--sweep-eps") == 0
    rep = load(tmp_path)
    assert rep["status"] == "order_2" and abs(rep["slope"] - 2) < 0.1
    assert run(tmp_path, "verify", "covariance", "--model", "dirac", "--m", "1", "--alpha", "2") == 1


def test_verify_norm(tmp_path):
    args = ["verify", "norm", "--m", "1", "--sites", "6", "--surfaces", "3", "--swaps", "4", "--seed", "2"]
    assert run(tmp_path, *args, "--alpha", "2") == 0
    rep = load(tmp_path)
    assert rep["status"] == "pass" and rep["details"]["max_gap"] < 1e-12 and rep["details"]["lorentz_gap"] < 1e-12


@pytest.mark.parametrize(
    "analysis,extra",
    [
        ("counterexample", []),
        ("kg", ["--p", "2", "--q", "3", "--m", "1", "--steps", "40"]),
        ("velocity", ["--alpha", "3"]),
        ("zitterbewegung", ["--m", "1", "--steps", "8"]),
        ("uniqueness", ["--alpha", "2"]),
    ],
)
def test_analyze(tmp_path, analysis, extra):
    assert run(tmp_path, "analyze", analysis, *extra) == 0
    assert load(tmp_path)["status"] in ("pass", "order_2")


def test_counterexample_is_second_order(tmp_path):
    run(tmp_path, "analyze", "counterexample")
    rows = list((tmp_path / "run.csv").read_text().splitlines())
    assert rows[0].startswith("eps,") and len(rows) == 5
    assert load(tmp_path)["status"] == "order_2"


def test_runs_are_deterministic(tmp_path):
    for name in ("a", "b"):
        cli.main(["simulate", "--m", "1", "--init", "random", "--seed", "7", "--out", str(tmp_path / name)])
    a, b = load(tmp_path, "a"), load(tmp_path, "b")
    assert a.pop("provenance")["seed"] == 7
    b.pop("provenance")
    assert a == b
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_thread_cap(tmp_path, monkeypatch):
    args = ["verify", "covariance", "--model", "dirac", "--m", "1", "--alpha", "2", "--sweep-eps"]
    monkeypatch.setenv("LORENTZLATTICE_THREADS", "1")
    assert run(tmp_path, *args) == 0
    serial = load(tmp_path)
    monkeypatch.setenv("LORENTZLATTICE_THREADS", "4")
    run(tmp_path, *args)
    assert load(tmp_path)["details"]["residuals"] == serial["details"]["residuals"]
    monkeypatch.setenv("LORENTZLATTICE_THREADS", "many")
    assert run(tmp_path, *args) == 2


def test_version_flag(capsys):
    assert cli.main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == cli.__version__
