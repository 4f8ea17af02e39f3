"""Problem representation, the log-domain objective and the balance criterion.

A matrix ``A`` is balanced by a diagonal similarity ``D A D^-1`` with
``D = diag(exp(x))``.  The scaled entry on arc ``(i, j)`` is
``a_ij * exp(x_i - x_j)`` and the objective is the sum of all scaled
entries.  Nodes are 0-based throughout the Python API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import EmptyMatrix, NotBalanceable, Overflow

# Full recomputation interval for incrementally maintained sums.
REFRESH_INTERVAL = 10_000

# exp() of anything above this overflows binary64.
_MAX_EXPONENT = 709.0


@dataclass(frozen=True)
class CoordMatrix:
    """Square matrix in coordinate form; duplicate coordinates are summed."""

    n: int
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    values: tuple[float, ...]

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int, float]]) -> "CoordMatrix":
        rows, cols, values = [], [], []
        for i, j, v in entries:
            rows.append(int(i))
            cols.append(int(j))
            values.append(float(v))
        return cls(n, tuple(rows), tuple(cols), tuple(values))

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        np.add.at(out, (np.asarray(self.rows, dtype=int), np.asarray(self.cols, dtype=int)),
                  np.asarray(self.values, dtype=float))
        return out

    def tosparse(self) -> sp.coo_matrix:
        return sp.coo_matrix((self.values, (self.rows, self.cols)), shape=(self.n, self.n))


@dataclass(frozen=True, eq=False)
class BalancingProblem:
    """Non-negative matrix with zero diagonal whose arc digraph is strongly connected.

    Arcs are stored sorted by ``(i, j)``.  ``src``, ``dst`` and ``weight`` are the
    per-arc columns; ``out_adj[i]`` / ``in_adj[i]`` list arc indices leaving and
    entering node ``i``.
    """

    n: int
    src: tuple[int, ...]
    dst: tuple[int, ...]
    weight: tuple[float, ...]
    out_adj: tuple[tuple[int, ...], ...] = field(repr=False)
    in_adj: tuple[tuple[int, ...], ...] = field(repr=False)
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    a_min: float
    total_weight: float

    @property
    def m(self) -> int:
        return len(self.weight)

    @property
    def w(self) -> float:
        return self.total_weight / self.a_min

    @property
    def arcs(self) -> list[tuple[int, int, float]]:
        return list(zip(self.src, self.dst, self.weight))

    def degree(self, i: int) -> int:
        return len(self.out_adj[i]) + len(self.in_adj[i])

    def arc_index(self, i: int, j: int) -> int | None:
        """Index of arc ``(i, j)`` or ``None`` when absent."""
        for k in self.out_adj[i]:
            if self.dst[k] == j:
                return k
        return None

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        out[list(self.src), list(self.dst)] = self.weight
        return out

    def scaled_dense(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        src = np.asarray(self.src)
        dst = np.asarray(self.dst)
        out = np.zeros((self.n, self.n))
        out[src, dst] = np.asarray(self.weight) * np.exp(x[src] - x[dst])
        return out

    def digest(self) -> dict:
        return {"n": self.n, "m": self.m, "w": self.w, "a_min": self.a_min}

    @classmethod
    def from_arcs(cls, n: int, arcs: Iterable[tuple[int, int, float]]) -> "BalancingProblem":
        """Build a problem from positive off-diagonal arcs, checking strong connectivity."""
        merged: dict[tuple[int, int], float] = {}
        for i, j, v in arcs:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"arc ({i}, {j}) outside a {n}x{n} matrix")
            if i == j:
                raise ValueError("diagonal arcs are not allowed")
            v = float(v)
            if not v > 0 or not math.isfinite(v):
                raise ValueError(f"arc ({i}, {j}) has non-positive or non-finite weight {v}")
            merged[(i, j)] = merged.get((i, j), 0.0) + v
        if not merged:
            raise EmptyMatrix("matrix has no off-diagonal non-zero entries")
        keys = sorted(merged)
        src = tuple(k[0] for k in keys)
        dst = tuple(k[1] for k in keys)
        weight = tuple(merged[k] for k in keys)

        labels = _scc_labels(n, src, dst)
        if len(set(labels)) != 1:
            raise NotBalanceable(
                f"arc digraph has {len(set(labels))} strongly connected components; "
                "split it with scc_split first")

        out_adj = [[] for _ in range(n)]
        in_adj = [[] for _ in range(n)]
        for k, (i, j) in enumerate(keys):
            out_adj[i].append(k)
            in_adj[j].append(k)
        neighbors = tuple(
            tuple(sorted({dst[k] for k in out_adj[i]} | {src[k] for k in in_adj[i]}))
            for i in range(n))
        total = 0.0
        for v in weight:
            total += v
        return cls(
            n=n, src=src, dst=dst, weight=weight,
            out_adj=tuple(map(tuple, out_adj)), in_adj=tuple(map(tuple, in_adj)),
            neighbors=neighbors, a_min=min(weight), total_weight=total)


def _scc_labels(n: int, src: Sequence[int], dst: Sequence[int]) -> np.ndarray:
    graph = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    _, labels = connected_components(graph, directed=True, connection="strong")
    return labels


def _coordinates(raw) -> tuple[int, list[tuple[int, int, float]]]:
    """Return ``(n, entries)`` for a dense, scipy.sparse or CoordMatrix input."""
    if isinstance(raw, CoordMatrix):
        coo = raw.tosparse()
    elif sp.issparse(raw):
        coo = sp.coo_matrix(raw)
    else:
        arr = np.asarray(raw, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        coo = sp.coo_matrix(arr)
    if coo.shape[0] != coo.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {coo.shape}")
    n = coo.shape[0]
    if n < 1:
        raise EmptyMatrix("matrix has dimension zero")
    coo.sum_duplicates()
    return n, list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))


def _offdiagonal(entries):
    for i, j, v in entries:
        if i != j and v != 0.0:
            yield i, j, abs(v)


def canonicalize(raw) -> BalancingProblem:
    """Take absolute values, drop the diagonal and zeros, and check balanceability.

    ``raw`` may be a dense array-like, a scipy sparse matrix or a ``CoordMatrix``.
    Raises ``NotBalanceable`` unless the arc digraph is strongly connected.
    """
    n, entries = _coordinates(raw)
    return BalancingProblem.from_arcs(n, _offdiagonal(entries))


@dataclass(frozen=True)
class SccSplit:
    """Result of :func:`scc_split`.

    ``problems[c]`` balances the nodes ``nodes[c]`` (original ids, in the order
    used as local ids).  ``residue`` holds arcs joining different components.
    """

    problems: list[BalancingProblem]
    nodes: list[tuple[int, ...]]
    residue: list[tuple[int, int, float]]

    def __iter__(self):
        return iter(self.problems)

    def __len__(self):
        return len(self.problems)


def scc_split(raw) -> SccSplit:
    """One problem per strongly connected component that carries at least one arc."""
    n, entries = _coordinates(raw)
    arcs = list(_offdiagonal(entries))
    if not arcs:
        return SccSplit([], [], [])
    labels = _scc_labels(n, [a[0] for a in arcs], [a[1] for a in arcs])
    members: dict[int, list[int]] = {}
    for v in range(n):
        members.setdefault(int(labels[v]), []).append(v)
    inside: dict[int, list[tuple[int, int, float]]] = {}
    residue = []
    for i, j, v in sorted(arcs):
        if labels[i] == labels[j]:
            inside.setdefault(int(labels[i]), []).append((i, j, v))
        else:
            residue.append((i, j, v))
    problems, nodes = [], []
    for label in sorted(inside, key=lambda c: members[c][0]):
        group = members[label]
        local = {v: k for k, v in enumerate(group)}
        problems.append(BalancingProblem.from_arcs(
            len(group), ((local[i], local[j], v) for i, j, v in inside[label])))
        nodes.append(tuple(group))
    return SccSplit(problems, nodes, residue)


def _scaled(weight: float, diff: float) -> float:
    if diff > _MAX_EXPONENT:
        raise Overflow(f"exponent difference {diff:.6g} overflows binary64")
    value = weight * math.exp(diff)
    if value == 0.0 or math.isinf(value):
        raise Overflow(f"scaled entry {weight:.6g}*exp({diff:.6g}) is out of range")
    return value


class BalanceState:
    """Scaling vector ``x`` plus the derived scaled entries and row/column L1 sums.

    Entries are always recomputed from ``x`` as ``a_ij * exp(x_i - x_j)``.  Row
    and column sums are maintained incrementally and periodically rebuilt.
    ``arc_updates`` counts recomputed entries, so per-step work can be audited.
    """

    __slots__ = ("problem", "x", "entries", "row_sum", "col_sum", "f",
                 "arc_updates", "_since_refresh")

    def __init__(self, problem: BalancingProblem, x: Sequence[float] | None = None):
        self.problem = problem
        if x is None:
            self.x = [0.0] * problem.n
        else:
            if len(x) != problem.n:
                raise ValueError(f"scaling vector has length {len(x)}, expected {problem.n}")
            self.x = [float(v) for v in x]
            if not all(math.isfinite(v) for v in self.x):
                raise ValueError("scaling vector must be finite")
        self.arc_updates = 0
        self.refresh()

    def refresh(self) -> None:
        """Recompute entries, sums and ``f`` from scratch."""
        p = self.problem
        x = self.x
        self.entries = [_scaled(a, x[i] - x[j]) for i, j, a in zip(p.src, p.dst, p.weight)]
        row = [0.0] * p.n
        col = [0.0] * p.n
        for i, j, v in zip(p.src, p.dst, self.entries):
            row[i] += v
            col[j] += v
        self.row_sum = row
        self.col_sum = col
        self.f = math.fsum(row)
        self._since_refresh = 0

    @property
    def refresh_due(self) -> bool:
        return self._since_refresh >= REFRESH_INTERVAL

    def move(self, i: int, value: float) -> None:
        """Set ``x_i = value`` and update the O(deg(i)) affected entries and sums."""
        p = self.problem
        x = self.x
        entries = self.entries
        row, col = self.row_sum, self.col_sum
        old_xi = x[i]
        x[i] = value
        try:
            new_row = 0.0
            for k in p.out_adj[i]:
                j = p.dst[k]
                v = _scaled(p.weight[k], value - x[j])
                col[j] += v - entries[k]
                entries[k] = v
                new_row += v
            new_col = 0.0
            for k in p.in_adj[i]:
                j = p.src[k]
                v = _scaled(p.weight[k], x[j] - value)
                row[j] += v - entries[k]
                entries[k] = v
                new_col += v
        except Overflow:
            x[i] = old_xi
            self.refresh()
            raise
        self.f += (new_row - row[i]) + (new_col - col[i])
        row[i] = new_row
        col[i] = new_col
        self.arc_updates += len(p.out_adj[i]) + len(p.in_adj[i])
        self._since_refresh += 1

    def shift(self, i: int, delta: float) -> None:
        self.move(i, self.x[i] + delta)

    def gain(self, i: int) -> float:
        """Decrease of ``f`` obtained by balancing node ``i``."""
        d = math.sqrt(self.col_sum[i]) - math.sqrt(self.row_sum[i])
        return d * d

    def grad_norms(self) -> tuple[float, float]:
        """``(||grad f||_1, ||grad f||_2)`` from the maintained sums."""
        l1 = 0.0
        sq = 0.0
        for r, c in zip(self.row_sum, self.col_sum):
            d = r - c
            l1 += abs(d)
            sq += d * d
        return l1, math.sqrt(sq)

    def scaled_entry(self, i: int, j: int) -> float:
        k = self.problem.arc_index(i, j)
        if k is None:
            raise KeyError(f"no arc ({i}, {j})")
        return self.entries[k]

    def copy(self) -> "BalanceState":
        return BalanceState(self.problem, self.x)


def objective(state: BalanceState) -> float:
    """``f(x)`` summed from scratch over all arcs (independent of maintained sums)."""
    p = state.problem
    x = np.asarray(state.x)
    src = np.asarray(p.src)
    dst = np.asarray(p.dst)
    diff = x[src] - x[dst]
    if diff.max() > _MAX_EXPONENT:
        raise Overflow("exponent difference overflows binary64")
    return math.fsum(np.asarray(p.weight) * np.exp(diff))


def gradient(state: BalanceState) -> np.ndarray:
    """Row sum minus column sum per node."""
    return np.asarray(state.row_sum) - np.asarray(state.col_sum)


def imbalance(state: BalanceState) -> float:
    """``||grad f||_2 / f`` of the current scaled matrix."""
    return state.grad_norms()[1] / state.f


def is_eps_balanced(state: BalanceState, eps: float) -> bool:
    if not eps > 0:
        raise ValueError("eps must be positive")
    return imbalance(state) <= eps


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One audited iteration.  Gradient norms and imbalance refer to the pre-step state."""

    iter: int
    node: int | None
    alpha: float
    f_before: float
    f_after: float
    grad_l1: float
    grad_l2: float
    imbalance: float
    ns: int = 0

    def as_dict(self) -> dict:
        return {
            "iter": self.iter, "node": self.node, "alpha": self.alpha,
            "f_before": self.f_before, "f_after": self.f_after,
            "grad_l1": self.grad_l1, "grad_l2": self.grad_l2,
            "imbalance": self.imbalance, "ns": self.ns,
        }


def replay(problem: BalancingProblem, records: Iterable[TraceRecord]) -> BalanceState:
    """Re-apply the ``(node, alpha)`` moves of a trace to a fresh state."""
    state = BalanceState(problem)
    for rec in records:
        if rec.node is not None and rec.alpha != 0.0:
            state.shift(rec.node, rec.alpha)
    return state
