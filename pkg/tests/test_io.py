import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_array_equal

from grcoincide.config import (
    config_from_mapping,
    dump_config,
    load_config,
    parse_model_spec,
    parse_penalty,
    resolve_matrix,
    resolve_serial_A,
    resolve_weights,
)
from grcoincide.errors import FormatError, SpecError
from grcoincide.io import (
    format_matrix,
    parse_matrix_text,
    read_contiguity,
    read_edge_list,
    read_key_values,
    read_matrix,
    write_edge_list,
    write_key_values,
    write_matrix,
)
from grcoincide.models import RaoModel, Sar1Model, SerialModel, Sma1Model, SurModel, ar1_A, intraclass_A
from grcoincide.weights import ContiguityMatrix, lattice_contiguity, row_normalize

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=100, deadline=None)
@given(M=arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite))
def test_matrix_text_round_trip_is_bit_identical(M):
    back = parse_matrix_text(format_matrix(M))
    assert back.tobytes() == M.tobytes()
    assert_array_equal(back, M)


def test_matrix_file_round_trip_with_comment(tmp_path):
    M = np.array([[0.1, 1 / 3], [-2e-300, 7.0]])
    write_matrix(tmp_path / "m.txt", M, comment="two lines\nof notes")
    text = (tmp_path / "m.txt").read_text()
    assert text.startswith("# two lines\n# of notes\n2 2\n")
    assert read_matrix(tmp_path / "m.txt").tobytes() == M.tobytes()


def test_vector_is_written_as_a_column():
    assert parse_matrix_text(format_matrix([1.0, 2.0])).shape == (2, 1)


def test_comments_and_blank_lines_are_ignored():
    text = "# header\n\n2 1  # rows cols\n1.5\n# between\n2.5\n"
    assert_array_equal(parse_matrix_text(text), [[1.5], [2.5]])


@pytest.mark.parametrize(
    "text, line",
    [
        ("2 2\n1 2\n3\n", "line 3"),
        ("2 2\n1 x\n3 4\n", "line 2"),
        ("2\n1 2\n", "line 1"),
        ("1 1\n1\n2\n", "line 3"),
        ("a b\n", "line 1"),
        ("1 1\nnan\n", "line 2"),
    ],
)
def test_malformed_matrix_reports_line(text, line):
    with pytest.raises(FormatError, match=line):
        parse_matrix_text(text)


def test_empty_and_missing_files(tmp_path):
    with pytest.raises(FormatError, match="empty"):
        parse_matrix_text("# nothing\n")
    with pytest.raises(FormatError, match="cannot read"):
        read_matrix(tmp_path / "absent.txt")


def test_edge_list_round_trip(tmp_path):
    C = lattice_contiguity(3, 3)
    write_edge_list(tmp_path / "e.txt", C)
    assert_array_equal(read_edge_list(tmp_path / "e.txt").entries, C.entries)
    assert_array_equal(read_contiguity(tmp_path / "e.txt").entries, C.entries)


def test_contiguity_detects_dense_format(tmp_path):
    C = lattice_contiguity(2, 2)
    write_matrix(tmp_path / "c.txt", C.entries)
    assert_array_equal(read_contiguity(tmp_path / "c.txt").entries, C.entries)


@pytest.mark.parametrize("body", ["n 3\n1 4\n", "n 3\n2 2\n", "n 3\n1 2 3\n", "m 3\n"])
def test_bad_edge_lists(tmp_path, body):
    (tmp_path / "e.txt").write_text(body)
    with pytest.raises(FormatError):
        read_edge_list(tmp_path / "e.txt")


def test_key_values(tmp_path):
    write_key_values(tmp_path / "c.cfg", {"a": "1", "b": "x y"})
    assert read_key_values(tmp_path / "c.cfg") == {"a": "1", "b": "x y"}
    (tmp_path / "d.cfg").write_text("a = 1\n# c\na = 2\n")
    with pytest.raises(FormatError, match="line 3: duplicate"):
        read_key_values(tmp_path / "d.cfg")
    (tmp_path / "e.cfg").write_text("novalue\n")
    with pytest.raises(FormatError, match="line 1"):
        read_key_values(tmp_path / "e.cfg")


# --------------------------------------------------------------------------
# specs


def test_parse_penalty(tmp_path):
    assert parse_penalty("zero").kind == "zero"
    assert parse_penalty("ridge:2.5").describe() == "ridge:2.5"
    assert parse_penalty("shrink:0.5").kind == "shrinkage"
    write_matrix(tmp_path / "k.txt", np.eye(2))
    p = parse_penalty("k.txt", tmp_path)
    assert p.kind == "custom"
    assert_array_equal(p.matrix, np.eye(2))
    with pytest.raises(SpecError):
        parse_penalty("ridge:abc")


def test_resolve_matrix_specs():
    assert_array_equal(resolve_matrix("identity", n=3), np.eye(3))
    X = resolve_matrix("generate:10:3:5")
    assert X.shape == (10, 3)
    assert_array_equal(X[:, 0], 1.0)
    assert_array_equal(X, resolve_matrix("generate:10:3:5"))
    assert resolve_matrix("fixture:counterexample:X").shape == (5, 2)
    for bad in ["identity", "generate:3", "generate:2:5", "fixture:counterexample:Q", "fixture:nope:X"]:
        with pytest.raises(SpecError):
            resolve_matrix(bad)


def test_resolve_weights(tmp_path):
    assert_array_equal(resolve_weights("lattice:2x3"), row_normalize(lattice_contiguity(2, 3)).entries)
    assert resolve_weights("cycle:5").shape == (5, 5)
    assert resolve_weights("counterexample").shape == (5, 5)
    write_edge_list(tmp_path / "e.txt", ContiguityMatrix.from_edges(3, [(1, 2), (2, 3)]))
    assert_array_equal(resolve_weights("e.txt", tmp_path).sum(axis=1), 1.0)
    raw = np.array([[0.0, 0.3], [0.7, 0.0]])
    write_matrix(tmp_path / "w.txt", raw)
    assert_array_equal(resolve_weights("w.txt", tmp_path), raw)
    with pytest.raises(SpecError):
        resolve_weights("lattice:3")


def test_resolve_serial_presets():
    assert_array_equal(resolve_serial_A("ar1", 4), ar1_A(4))
    assert_array_equal(resolve_serial_A("intraclass", 4), intraclass_A(4))
    with pytest.raises(SpecError):
        resolve_serial_A("ar1", None)


def test_parse_model_spec(tmp_path):
    X = resolve_matrix("generate:9:2")
    assert isinstance(parse_model_spec("sar1:lattice:3x3", X, rho=0.3), Sar1Model)
    m = parse_model_spec("sma1:cycle:9", X)
    assert isinstance(m, Sma1Model) and m.unknowns == ("rho",)
    assert isinstance(parse_model_spec("serial:ar1", X, theta=0.2), SerialModel)
    assert isinstance(parse_model_spec("rao", X), RaoModel)
    write_matrix(tmp_path / "x1.txt", resolve_matrix("generate:4:1"))
    write_matrix(tmp_path / "x2.txt", resolve_matrix("generate:4:2"))
    sur = parse_model_spec("sur:x1.txt:x2.txt", None, tmp_path, sigma12=0.1)
    assert isinstance(sur, SurModel) and sur.design.shape == (8, 3)
    for bad in ["sar1", "sur:only", "car:x", "rao"]:
        with pytest.raises(SpecError):
            parse_model_spec(bad, X if bad != "rao" else None)


# --------------------------------------------------------------------------
# config files


def _config_values():
    return {
        "model": "sar1",
        "X": "generate:16:2:3",
        "W": "lattice:4x4",
        "rho": "0.4",
        "beta": "1, -0.5",
        "K": "ridge:0.25",
        "replications": "7",
        "seed": "11",
        "grid": "0.1,0.3",
    }


def _same_config(a, b):
    assert type(a.model) is type(b.model)
    for p in a.model.parameters:
        assert getattr(a.model, p) == getattr(b.model, p)
    assert_array_equal(a.X, b.X)
    assert_array_equal(a.beta_true, b.beta_true)
    assert (a.sigma2, a.replications, a.seed, a.estimate, a.grid, a.workers) == (
        b.sigma2, b.replications, b.seed, b.estimate, b.grid, b.workers,
    )
    assert a.K.describe() == b.K.describe()


def test_config_round_trip(tmp_path):
    cfg = config_from_mapping(_config_values())
    path = dump_config(cfg, tmp_path / "study.cfg")
    back = load_config(path)
    _same_config(cfg, back)
    assert_array_equal(back.model.W, cfg.model.W)


def test_config_round_trip_keeps_explicit_estimate_list(tmp_path):
    values = dict(_config_values(), estimate="none")
    cfg = config_from_mapping(values)
    assert cfg.estimate == ()
    _same_config(cfg, load_config(dump_config(cfg, tmp_path / "s.cfg")))


def test_config_paths_are_relative_to_the_file(tmp_path):
    (tmp_path / "sub").mkdir()
    write_matrix(tmp_path / "sub" / "x.txt", resolve_matrix("generate:5:2"))
    write_key_values(
        tmp_path / "sub" / "c.cfg",
        {"model": "serial", "X": "x.txt", "A": "ar1", "theta": "0.2", "beta": "1,1"},
    )
    cfg = load_config(tmp_path / "sub" / "c.cfg")
    assert cfg.X.shape == (5, 2) and cfg.replications == 100 and cfg.seed == 0


@pytest.mark.parametrize(
    "change",
    [{"colour": "red"}, {"model": "car"}, {"rho": "abc"}, {"replications": "2.5"}],
)
def test_config_errors(change):
    values = dict(_config_values(), **change)
    with pytest.raises(SpecError):
        config_from_mapping(values)


def test_config_missing_model_key():
    values = _config_values()
    del values["model"]
    with pytest.raises(SpecError, match="model"):
        config_from_mapping(values)
