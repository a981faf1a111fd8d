"""Plain-text formats.

Matrix file::

    # optional comments anywhere
    3 2
    1.0 0.0
    0.5 2.0
    0.0 1.0

Edge list (1-based, each pair listed once, contiguity is symmetric)::

    n 4
    1 2
    2 3

Config file: ``key = value`` per line, ``#`` starts a comment.

Numbers are written with 17 significant digits, so every float read back
is bit-identical to the one written.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError
from .weights import ContiguityMatrix

__all__ = [
    "format_float",
    "read_matrix",
    "write_matrix",
    "parse_matrix_text",
    "format_matrix",
    "read_edge_list",
    "write_edge_list",
    "read_contiguity",
    "read_key_values",
    "write_key_values",
]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _ints(tokens, lineno, what):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise FormatError(f"line {lineno}: expected integers for {what}, got {' '.join(tokens)!r}") from None


def parse_matrix_text(text: str, source: str = "<string>") -> np.ndarray:
    lines = list(_content_lines(text))
    if not lines:
        raise FormatError(f"{source}: empty matrix file")
    lineno, header = lines[0]
    tokens = header.split()
    if len(tokens) != 2:
        raise FormatError(f"{source}: line {lineno}: header must be '<rows> <cols>'")
    rows, cols = _ints(tokens, lineno, "the header")
    if rows < 1 or cols < 1:
        raise FormatError(f"{source}: line {lineno}: dimensions must be positive")
    body = lines[1:]
    if len(body) != rows:
        where = body[rows][0] if len(body) > rows else (body[-1][0] if body else lineno)
        raise FormatError(f"{source}: line {where}: expected {rows} data rows, found {len(body)}")
    M = np.empty((rows, cols))
    for i, (ln, line) in enumerate(body):
        parts = line.split()
        if len(parts) != cols:
            raise FormatError(f"{source}: line {ln}: expected {cols} values, found {len(parts)}")
        try:
            M[i] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"{source}: line {ln}: not a number in {line!r}") from None
        if not np.all(np.isfinite(M[i])):
            raise FormatError(f"{source}: line {ln}: non-finite value")
    return M


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_matrix_text(text, str(path))


def format_matrix(M, comment: str | None = None) -> str:
    A = np.asarray(M, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    out = []
    if comment:
        out.extend(f"# {c}" for c in comment.splitlines())
    out.append(f"{A.shape[0]} {A.shape[1]}")
    out.extend(" ".join(format_float(v) for v in row) for row in A)
    return "\n".join(out) + "\n"


def write_matrix(path, M, comment: str | None = None) -> None:
    Path(path).write_text(format_matrix(M, comment))


def _parse_edge_list(lines, source: str) -> ContiguityMatrix:
    lineno, header = lines[0]
    tokens = header.split()
    if len(tokens) != 2 or tokens[0] != "n":
        raise FormatError(f"{source}: line {lineno}: edge list must start with 'n <count>'")
    (n,) = _ints(tokens[1:], lineno, "the region count")
    edges = []
    for ln, line in lines[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{source}: line {ln}: expected 'i j'")
        i, j = _ints(parts, ln, "an edge")
        if not (1 <= i <= n and 1 <= j <= n) or i == j:
            raise FormatError(f"{source}: line {ln}: invalid edge ({i}, {j}) for n={n}")
        edges.append((i, j))
    return ContiguityMatrix.from_edges(n, edges)


def read_edge_list(path) -> ContiguityMatrix:
    path = Path(path)
    lines = list(_content_lines(path.read_text()))
    if not lines:
        raise FormatError(f"{path}: empty edge list")
    return _parse_edge_list(lines, str(path))


def write_edge_list(path, C: ContiguityMatrix) -> None:
    body = [f"n {C.n}"] + [f"{i} {j}" for i, j in C.edges()]
    Path(path).write_text("\n".join(body) + "\n")


def read_contiguity(path) -> ContiguityMatrix:
    """Edge list or dense 0/1 matrix, told apart by the header."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    lines = list(_content_lines(text))
    if lines and lines[0][1].split()[0] == "n":
        return _parse_edge_list(lines, str(path))
    return ContiguityMatrix(parse_matrix_text(text, str(path)))


def read_key_values(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc
    out: dict[str, str] = {}
    for lineno, line in _content_lines(text):
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise FormatError(f"{path}: line {lineno}: expected 'key = value'")
        if key in out:
            raise FormatError(f"{path}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def write_key_values(path, values: dict[str, str]) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
