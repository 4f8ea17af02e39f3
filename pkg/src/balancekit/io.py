"""Matrix Market input, JSON-lines traces and diagonal output."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import DimensionMismatch, ParseError
from .model import BalancingProblem, CoordMatrix, TraceRecord

_FIELDS = ("real", "integer", "double")
_SYMMETRIES = ("general", "symmetric")


def read_matrix_market(path: str | os.PathLike) -> CoordMatrix:
    """Read a square coordinate Matrix Market file into 0-based coordinates.

    Symmetric files are expanded, duplicate coordinates are summed downstream.
    Only ``real``/``integer`` fields are accepted: weights are required.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise ParseError("missing '%%MatrixMarket' banner", 1)
    obj, fmt, fld, sym = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(f"unsupported object/format '{obj} {fmt}'", 1)
    if fld not in _FIELDS:
        raise ParseError(f"unsupported field '{fld}' (weights required)", 1)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unsupported symmetry '{sym}'", 1)

    body = ((no, ln.strip()) for no, ln in enumerate(lines[1:], start=2))
    body = [(no, ln) for no, ln in body if ln and not ln.startswith("%")]
    if not body:
        raise ParseError("missing size line", len(lines))
    no, size = body[0]
    try:
        nrows, ncols, nnz = (int(t) for t in size.split())
    except ValueError:
        raise ParseError(f"bad size line '{size}'", no) from None
    if nrows != ncols:
        raise DimensionMismatch(f"matrix is {nrows}x{ncols}, balancing needs a square matrix")
    if nrows < 1 or nnz < 0:
        raise ParseError(f"bad size line '{size}'", no)

    entries = []
    for no, ln in body[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'row col value', got '{ln}'", no)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse entry '{ln}'", no) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) outside {nrows}x{ncols}", no)
        entries.append((i - 1, j - 1, v))
        if sym == "symmetric" and i != j:
            entries.append((j - 1, i - 1, v))
    stored = sum(1 for _ in body[1:])
    if stored != nnz:
        raise ParseError(f"header declares {nnz} entries, found {stored}", body[-1][0])
    return CoordMatrix.from_entries(nrows, entries)


def write_matrix_market(path: str | os.PathLike, matrix: BalancingProblem | CoordMatrix) -> None:
    if isinstance(matrix, BalancingProblem):
        n, entries = matrix.n, matrix.arcs
    else:
        n, entries = matrix.n, list(zip(matrix.rows, matrix.cols, matrix.values))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{n} {n} {len(entries)}\n")
        for i, j, v in entries:
            fh.write(f"{i + 1} {j + 1} {v!r}\n")


class JsonlTraceSink:
    """Append-only trace writer: one header object, then one record per line."""

    def __init__(self, target: str | os.PathLike | IO[str], header: dict | None = None):
        if isinstance(target, (str, os.PathLike)):
            self._fh = open(target, "w", encoding="utf-8")
            self._owned = True
        else:
            self._fh = target
            self._owned = False
        self.count = 0
        if header is not None:
            self._fh.write(json.dumps({"header": header}) + "\n")

    def append(self, record: TraceRecord) -> None:
        self._fh.write(json.dumps(record.as_dict()) + "\n")
        self.count += 1

    def close(self) -> None:
        if self._owned:
            self._fh.close()
        else:
            self._fh.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def trace_header(problem: BalancingProblem, scheduler: str, eps: float,
                 seed: int | None, cap: int | None, **extra) -> dict:
    return {**problem.digest(), "scheduler": scheduler, "eps": eps, "seed": seed, "cap": cap, **extra}


def read_trace(path: str | os.PathLike) -> tuple[dict, list[TraceRecord]]:
    header: dict = {}
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if "header" in obj:
                header = obj["header"]
            else:
                records.append(TraceRecord(**obj))
    return header, records


def write_diagonal(target: str | os.PathLike | IO[str], d: Iterable[float]) -> None:
    """One value per line with 17 significant digits (binary64 round-trip safe)."""
    text = "".join(f"{v:.17g}\n" for v in d)
    if isinstance(target, (str, os.PathLike)):
        Path(target).write_text(text, encoding="ascii")
    else:
        target.write(text)


def read_diagonal(path: str | os.PathLike) -> list[float]:
    return [float(t) for t in Path(path).read_text().split()]
