import io

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from grcoincide.cli import main
from grcoincide.fixtures import FIXTURES, get_fixture
from grcoincide.io import read_matrix, write_key_values, write_matrix


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def parse(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


@pytest.mark.parametrize("name", FIXTURES)
def test_demo_files_reparse_bit_identically(tmp_path, name):
    code, text = run("demo", "--name", name, "--out", tmp_path)
    assert code == 0
    kv = parse(text)
    fx = get_fixture(name)
    for key, M in fx.matrices().items():
        assert read_matrix(kv[f"file.{key}"]).tobytes() == np.asarray(M, dtype=float).reshape(M.shape[0], -1).tobytes()
    for key, verdict in fx.expected.items():
        assert kv[f"expected.{key}"] == ("true" if verdict else "false")


def test_demo_counterexample_prints_rho(tmp_path):
    _, text = run("demo", "--name", "counterexample", "--out", tmp_path)
    assert parse(text)["rho"] == "-0.6180339887498949"


@pytest.mark.parametrize("name", FIXTURES)
def test_check_demo_matches_expected_verdicts(name):
    code, text = run("check", "--demo", name, "--verify")
    assert code == 0
    kv = parse(text)
    expected = get_fixture(name).expected
    assert kv["equal"] == ("true" if expected["equal"] else "false")
    assert kv["agree"] == "true"
    for key, verdict in expected.items():
        if f"condition.{key}" in kv:
            assert kv[f"condition.{key}"] == ("true" if verdict else "false")


def test_counterexample_equal_but_sufficient_condition_silent():
    code, text = run("check", "--demo", "counterexample", "--method", "auto")
    kv = parse(text)
    assert code == 0
    assert kv["equal"] == "true"
    assert kv["fired_condition"] == "column_space"
    assert kv["condition.spatial_sufficient"] == "false"
    assert kv["condition.spatial_sufficient.kind"] == "sufficient"


@pytest.mark.parametrize("method", ["thm1", "thm2", "decomposition", "column_space", "oracle"])
def test_methods_agree_on_counterexample(method):
    assert parse(run("check", "--demo", "counterexample", "--method", method)[1])["equal"] == "true"


def test_identity_model_coincides(tmp_path):
    write_matrix(tmp_path / "x.txt", np.random.default_rng(0).standard_normal((6, 2)))
    code, text = run("check", "--X", tmp_path / "x.txt", "--model", "explicit:identity", "--K", "ridge:1")
    assert code == 0 and parse(text)["equal"] == "true"


def test_all_rho_on_nullspace_files(tmp_path):
    run("demo", "--name", "sma-nullspace", "--out", tmp_path)
    code, text = run(
        "check", "--X", tmp_path / "X.txt", "--K", tmp_path / "K.txt", "--model", f"sma1:{tmp_path / 'W.txt'}",
        "--all-rho",
    )
    kv = parse(text)
    assert code == 0
    assert kv["equal"] == "true" and kv["scope"] == "all_rho"


def test_all_rho_rejects_non_spatial_model():
    assert run("check", "--demo", "rao-zero-gamma", "--all-rho")[0] == 1


def test_unknown_parameter_is_a_usage_error(tmp_path):
    write_matrix(tmp_path / "x.txt", np.ones((9, 1)))
    assert run("check", "--X", tmp_path / "x.txt", "--model", "sar1:lattice:3x3")[0] == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["check", "--method", "magic"],
        ["frobnicate"],
        [],
        ["estimate", "--demo", "counterexample"],
        ["check", "--X", "missing-file.txt", "--model", "explicit:identity"],
        ["check", "--demo", "counterexample", "--K", "ridge:abc"],
        ["demo", "--name", "no-such-fixture"],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    assert run(*argv)[0] == 1


def test_numerical_failure_exits_two(tmp_path):
    write_matrix(tmp_path / "x.txt", np.ones((4, 2)))
    code, _ = run("check", "--X", tmp_path / "x.txt", "--model", "explicit:identity")
    assert code == 2


def test_non_positive_definite_omega_exits_two(tmp_path):
    write_matrix(tmp_path / "x.txt", np.eye(3, 1))
    write_matrix(tmp_path / "o.txt", -np.eye(3))
    assert run("check", "--X", tmp_path / "x.txt", "--model", f"explicit:{tmp_path / 'o.txt'}")[0] == 2


def test_estimate_known_and_two_step_on_sur_blocks(tmp_path):
    run("demo", "--name", "sur-orthogonal", "--out", tmp_path)
    X = read_matrix(tmp_path / "X.txt")
    rng = np.random.default_rng(5)
    y = X @ np.ones(X.shape[1]) + rng.standard_normal(X.shape[0])
    write_matrix(tmp_path / "y.txt", y)
    code, known = run("estimate", "--demo", "sur-orthogonal", "--y", tmp_path / "y.txt")
    assert code == 0
    kv = parse(known)
    assert kv["mode"] == "known"
    assert float(kv["gap"]) > 0
    code, fitted = run("estimate", "--demo", "sur-orthogonal", "--y", tmp_path / "y.txt", "--two-step")
    kv2 = parse(fitted)
    assert code == 0 and kv2["mode"] == "two_step"
    assert "param.sigma12" in kv2
    assert kv2["beta_cov_free"] == kv["beta_cov_free"]
    beta = np.array(kv["beta"].split(","), dtype=float)
    beta2 = np.array(kv2["beta"].split(","), dtype=float)
    assert beta.shape == beta2.shape == (4,)


def test_estimate_identity_model_has_zero_gap(tmp_path):
    rng = np.random.default_rng(1)
    write_matrix(tmp_path / "x.txt", rng.standard_normal((8, 2)))
    write_matrix(tmp_path / "y.txt", rng.standard_normal(8))
    code, text = run(
        "estimate", "--X", tmp_path / "x.txt", "--y", tmp_path / "y.txt", "--model", "explicit:identity",
        "--K", "ridge:0.5",
    )
    assert code == 0 and float(parse(text)["gap"]) == 0.0


def test_estimate_length_mismatch_exits_two(tmp_path):
    write_matrix(tmp_path / "y.txt", np.ones(3))
    assert run("estimate", "--demo", "counterexample", "--y", tmp_path / "y.txt")[0] == 2


# --------------------------------------------------------------------------
# simulate


def _config(tmp_path, **extra):
    values = {
        "model": "sar1",
        "X": "generate:16:2:3",
        "W": "lattice:4x4",
        "rho": "0.5",
        "beta": "1,2",
        "replications": "20",
        "seed": "42",
    }
    values.update(extra)
    path = tmp_path / "study.cfg"
    write_key_values(path, values)
    return path


def test_simulate_writes_reports(tmp_path):
    cfg = _config(tmp_path, replications="1")
    code, text = run("simulate", "--config", cfg, "--out", tmp_path / "out" / "r")
    kv = parse(text)
    assert code == 0
    assert kv["seed"] == "42" and kv["replications"] == "1" and kv["failed"] == "0"
    csv_text = (tmp_path / "out" / "r.csv").read_text()
    assert csv_text.splitlines()[0].startswith("grid_parameter,grid_value,estimator,mse")
    assert len(csv_text.splitlines()) == 4
    assert "replications" in (tmp_path / "out" / "r.txt").read_text()


def test_simulate_is_repeatable_and_worker_independent(tmp_path):
    cfg = _config(tmp_path)
    run("simulate", "--config", cfg, "--out", tmp_path / "a", "--workers", "1")
    run("simulate", "--config", cfg, "--out", tmp_path / "b", "--workers", "4")
    run("simulate", "--config", cfg, "--out", tmp_path / "c", "--workers", "1")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_simulate_seed_changes_results(tmp_path):
    run("simulate", "--config", _config(tmp_path), "--out", tmp_path / "a")
    run("simulate", "--config", _config(tmp_path, seed="43"), "--out", tmp_path / "b")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


def test_simulate_equivalent_model_has_zero_gap(tmp_path):
    cfg = _config(tmp_path, model="explicit", Omega="identity", K="ridge:1", replications="5")
    del_keys = {"W", "rho"}
    text = cfg.read_text().splitlines()
    cfg.write_text("\n".join(l for l in text if l.split(" = ")[0] not in del_keys) + "\n")
    code, _ = run("simulate", "--config", cfg, "--out", tmp_path / "eq")
    assert code == 0
    rows = (tmp_path / "eq.csv").read_text().splitlines()
    header = rows[0].split(",")
    for row in rows[1:]:
        rec = dict(zip(header, row.split(",")))
        if rec["estimator"] == "oracle":
            assert float(rec["gap_max"]) == 0.0


def test_simulate_grid_sweep(tmp_path):
    cfg = _config(tmp_path, grid="0,0.5", replications="3")
    code, _ = run("simulate", "--config", cfg, "--out", tmp_path / "g")
    rows = (tmp_path / "g.csv").read_text().splitlines()[1:]
    assert code == 0
    assert {r.split(",")[0] for r in rows} == {"rho"}
    assert {r.split(",")[1] for r in rows} == {"0", "0.5"}


@pytest.mark.parametrize("extra", [{"colour": "blue"}, {"replications": "0"}, {"beta": "1"}])
def test_bad_config_exits_one(tmp_path, extra):
    assert run("simulate", "--config", _config(tmp_path, **extra), "--out", tmp_path / "x")[0] == 1


def test_missing_config_exits_one(tmp_path):
    assert run("simulate", "--config", tmp_path / "none.cfg", "--out", tmp_path / "x")[0] == 1
