"""Backtracking solver that counts the assignments satisfying a clue set.

Search order is fixed: non-name columns left to right, items in pool order,
rows ascending. Each clue is checked exactly once per branch, at the first
step where all of its atoms have a row, so pruning happens as early as the
ordering allows without any propagation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from prime.catalog import CatalogItem, Column, ColumnSpec, Group
from prime.core import And, Atom, Clue, Link, Not, Or, SolutionGrid, UnknownItem


@dataclass(frozen=True)
class SolveResult:
    count: int
    solutions: tuple[SolutionGrid, ...]
    nodes: int

    @property
    def first(self) -> SolutionGrid | None:
        return self.solutions[0] if self.solutions else None


@dataclass(frozen=True)
class NotUnique:
    witnesses: tuple[SolutionGrid, SolutionGrid]
    count: int = 2


@dataclass(frozen=True)
class Unsat:
    pass


def domain_from_grid(grid: SolutionGrid, pools: Sequence[Sequence[str]] | None = None) -> ColumnSpec:
    """Solver domain for a stored grid: row order from the names column.

    ``pools`` gives the item order per non-name column; by default labels are
    sorted so the search order carries no trace of the solution.
    """
    cols = [Column(grid.columns[0][0], Group(grid.columns[0][1]),
                   tuple(CatalogItem(x) for x in grid.row_names))]
    for c in range(1, len(grid.columns)):
        labels = list(pools[c - 1]) if pools is not None else sorted(grid.column(c))
        if sorted(labels) != sorted(grid.column(c)):
            raise ValueError(f"pool for {grid.columns[c][0]!r} does not match the grid column")
        cols.append(Column(grid.columns[c][0], Group(grid.columns[c][1]),
                           tuple(CatalogItem(x) for x in labels)))
    return ColumnSpec(tuple(cols))


class _Compiled:
    def __init__(self, spec: ColumnSpec, clues: Iterable[Clue]):
        self.spec = spec
        self.p = spec.p
        self.ncols = spec.q
        self.col_of = {col.name: c for c, col in enumerate(spec.columns)}
        self.idx_of = [{lab: k for k, lab in enumerate(col.labels)} for col in spec.columns]
        for c, col in enumerate(spec.columns):
            if len(col.items) != self.p:
                raise ValueError(f"column {col.name!r} has {len(col.items)} items, expected {self.p}")
        nsteps = self.p * (self.ncols - 1)
        buckets: list[list[str]] = [[] for _ in range(nsteps)]
        self.always_false = False
        for clue in clues:
            src, trigger = self._compile(clue)
            if trigger < 0:
                # only name atoms: constant truth value
                if not eval(src, {}, {"pos": None}):
                    self.always_false = True
                continue
            buckets[trigger].append(src)
        self.checks = [
            eval("lambda pos: " + " and ".join(b), {}) if b else None  # noqa: S307 - generated from ints
            for b in buckets
        ]

    def _ref(self, atom: Atom) -> tuple[str, int]:
        c = self.col_of.get(atom.category)
        if c is None or atom.item not in self.idx_of[c]:
            raise UnknownItem(str(atom))
        k = self.idx_of[c][atom.item]
        if c == 0:
            return str(k), -1
        return f"pos[{c}][{k}]", (c - 1) * self.p + k

    def _compile(self, clue: Clue) -> tuple[str, int]:
        trigger = -1

        def walk(e) -> str:
            nonlocal trigger
            if isinstance(e, Link):
                (a, ta), (b, tb) = self._ref(e.left), self._ref(e.right)
                trigger = max(trigger, ta, tb)
                return f"({a} == {b})"
            if isinstance(e, Not):
                return f"(not {walk(e.operand)})"
            joiner = " and " if isinstance(e, And) else " or "
            assert isinstance(e, (And, Or))
            return "(" + joiner.join(walk(op) for op in e.operands) + ")"

        return walk(clue.expr), trigger

    def to_grid(self, pos: list[list[int]]) -> SolutionGrid:
        cols = self.spec.columns
        rows = []
        for r in range(self.p):
            row = [cols[0].labels[r]]
            for c in range(1, self.ncols):
                row.append(cols[c].labels[pos[c].index(r)])
            rows.append(tuple(row))
        return SolutionGrid(tuple((col.name, col.group.value) for col in cols), tuple(rows))


def count_solutions(spec: ColumnSpec, clues: Iterable[Clue], limit: int = 2) -> SolveResult:
    """Count satisfying assignments, stopping once ``limit`` have been found.

    Up to two solutions are kept (enough for an ambiguity witness).
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    comp = _Compiled(spec, clues)
    if comp.always_false:
        return SolveResult(0, (), 0)
    p, ncols = comp.p, comp.ncols
    nsteps = p * (ncols - 1)
    checks = comp.checks
    pos = [[-1] * p for _ in range(ncols)]
    pos[0] = list(range(p))
    used = [0] * ncols
    found: list[SolutionGrid] = []
    count = 0
    nodes = 0

    def step(t: int) -> bool:
        nonlocal count, nodes
        if t == nsteps:
            count += 1
            if len(found) < 2:
                found.append(comp.to_grid(pos))
            return count >= limit
        c, k = 1 + t // p, t % p
        col = pos[c]
        check = checks[t]
        for r in range(p):
            bit = 1 << r
            if used[c] & bit:
                continue
            nodes += 1
            col[k] = r
            if check is not None and not check(pos):
                continue
            used[c] |= bit
            stop = step(t + 1)
            used[c] &= ~bit
            if stop:
                col[k] = -1
                return True
        col[k] = -1
        return False

    step(0)
    return SolveResult(count, tuple(found), nodes)


def solve_unique(spec: ColumnSpec, clues: Iterable[Clue]) -> SolutionGrid | NotUnique | Unsat:
    res = count_solutions(spec, clues, limit=2)
    if res.count == 0:
        return Unsat()
    if res.count == 1:
        return res.solutions[0]
    return NotUnique((res.solutions[0], res.solutions[1]))


def is_unique_to(spec: ColumnSpec, clues: Iterable[Clue], target: SolutionGrid) -> bool:
    res = count_solutions(spec, clues, limit=2)
    return res.count == 1 and res.solutions[0] == target
