"""Grids, clue expressions and their truth semantics.

Clues are trees over atoms ``(Category = item)``. The only relation is
``Link(a, b)``: the two atoms belong to the same person. ``Not``, ``And`` and
``Or`` are the usual connectives. Names atoms resolve through row identity
(row ``r`` is the ``r``-th name); every other column is a bijection from items
to rows.

Layman notation grammar (used by :func:`format_logic` / :func:`parse_logic`)::

    expr  := '¬' expr
           | '(' expr ' ⇔ ' expr ')'                 -- both sides atoms
           | '(' expr (' ∧ ' expr)+ ')'
           | '(' expr (' ∨ ' expr)+ ')'
           | atom
    atom  := '(' category ' = ' item ')'
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Sequence, Union

NOT, AND, OR, IFF = "¬", "∧", "∨", "⇔"


class ClueKind(str, Enum):
    TRUE_FALSE = "TrueFalse"
    NEITHER_NOR = "NeitherNor"
    EITHER_OR = "EitherOr"
    UNALIGNED_PAIR = "UnalignedPair"
    MULTI_ELIMINATION = "MultiElimination"


class UnknownItem(KeyError):
    pass


class LogicParseError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Atom:
    category: str
    item: str

    def __str__(self) -> str:
        return f"({self.category} = {self.item})"


@dataclass(frozen=True)
class Link:
    left: Atom
    right: Atom


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    operands: tuple["Expr", ...]


Expr = Union[Link, Not, And, Or]


def iter_atoms(expr: Expr) -> Iterator[Atom]:
    if isinstance(expr, Link):
        yield expr.left
        yield expr.right
    elif isinstance(expr, Not):
        yield from iter_atoms(expr.operand)
    else:
        for op in expr.operands:
            yield from iter_atoms(op)


def iter_links(expr: Expr) -> Iterator[Link]:
    if isinstance(expr, Link):
        yield expr
    elif isinstance(expr, Not):
        yield from iter_links(expr.operand)
    else:
        for op in expr.operands:
            yield from iter_links(op)


def map_atoms(expr: Expr, fn) -> Expr:
    """Rebuild ``expr`` with every atom replaced by ``fn(atom)``; shape is kept."""
    if isinstance(expr, Link):
        return Link(fn(expr.left), fn(expr.right))
    if isinstance(expr, Not):
        return Not(map_atoms(expr.operand, fn))
    return type(expr)(tuple(map_atoms(op, fn) for op in expr.operands))


def canonical_key(expr: Expr) -> tuple:
    """Structural key that ignores operand order of ⇔, ∧ and ∨."""
    if isinstance(expr, Link):
        return ("L",) + tuple(sorted((expr.left, expr.right)))
    if isinstance(expr, Not):
        return ("N", canonical_key(expr.operand))
    tag = "A" if isinstance(expr, And) else "O"
    return (tag,) + tuple(sorted(canonical_key(op) for op in expr.operands))


# --- kind templates -------------------------------------------------------

def true_false(a: Atom, b: Atom, positive: bool) -> Expr:
    link = Link(a, b)
    return link if positive else Not(link)


def neither_nor(a: Atom, b: Atom, c: Atom) -> Expr:
    return And((Not(Link(a, c)), Not(Link(b, c))))


def either_or(a: Atom, b: Atom, c: Atom) -> Expr:
    la, lb = Link(a, c), Link(b, c)
    return And((Or((la, lb)), Not(And((la, lb)))))


def unaligned_pair(x: Atom, y: Atom, u: Atom, v: Atom) -> Expr:
    """``x`` and ``y`` belong to different people, and those people are ``u`` and ``v``."""
    return And((
        Not(Link(x, y)),
        Or((Link(x, u), Link(x, v))),
        Or((Link(y, u), Link(y, v))),
    ))


def multi_elimination(a: Atom, b: Atom, c: Atom) -> Expr:
    return And((Not(Link(a, b)), Not(Link(a, c)), Not(Link(b, c))))


def _link_pair(e) -> tuple[Atom, Atom] | None:
    return (e.left, e.right) if isinstance(e, Link) else None


def _neg_link(e) -> tuple[Atom, Atom] | None:
    return _link_pair(e.operand) if isinstance(e, Not) else None


def _cross(a: Atom, b: Atom) -> bool:
    return a.category != b.category


def template_roles(kind: ClueKind, expr: Expr) -> dict[str, Atom] | None:
    """Recover the template slots of ``expr`` for ``kind``, or ``None`` if it doesn't fit."""
    if kind is ClueKind.TRUE_FALSE:
        pair = _link_pair(expr) or _neg_link(expr)
        if pair and _cross(*pair):
            return {"a": pair[0], "b": pair[1]}
        return None
    if not isinstance(expr, And):
        return None
    ops = expr.operands
    if kind is ClueKind.NEITHER_NOR and len(ops) == 2:
        p1, p2 = _neg_link(ops[0]), _neg_link(ops[1])
        if p1 and p2 and p1[1] == p2[1]:
            a, b, c = p1[0], p2[0], p1[1]
            if a.category == b.category and a != b and _cross(a, c):
                return {"a": a, "b": b, "c": c}
        return None
    if kind is ClueKind.EITHER_OR and len(ops) == 2:
        if not (isinstance(ops[0], Or) and isinstance(ops[1], Not) and isinstance(ops[1].operand, And)):
            return None
        pos, neg = ops[0].operands, ops[1].operand.operands
        if len(pos) != 2 or pos != neg:
            return None
        p1, p2 = _link_pair(pos[0]), _link_pair(pos[1])
        if p1 and p2 and p1[1] == p2[1]:
            a, b, c = p1[0], p2[0], p1[1]
            if a.category == b.category and a != b and _cross(a, c):
                return {"a": a, "b": b, "c": c}
        return None
    if kind is ClueKind.UNALIGNED_PAIR and len(ops) == 3:
        xy = _neg_link(ops[0])
        if not (xy and isinstance(ops[1], Or) and isinstance(ops[2], Or)):
            return None
        x, y = xy
        if len(ops[1].operands) != 2 or len(ops[2].operands) != 2:
            return None
        xu, xv = (_link_pair(o) for o in ops[1].operands)
        yu, yv = (_link_pair(o) for o in ops[2].operands)
        if not (xu and xv and yu and yv):
            return None
        u, v = xu[1], xv[1]
        if (xu[0], xv[0], yu, yv) != (x, x, (y, u), (y, v)):
            return None
        cats = {x.category, y.category}
        if _cross(x, y) and u.category == v.category and u != v and u.category not in cats:
            return {"x": x, "y": y, "u": u, "v": v}
        return None
    if kind is ClueKind.MULTI_ELIMINATION and len(ops) == 3:
        pairs = [_neg_link(o) for o in ops]
        if not all(pairs):
            return None
        (a, b), (a2, c), (b2, c2) = pairs
        if a == a2 and b == b2 and c == c2 and len({a.category, b.category, c.category}) == 3:
            return {"a": a, "b": b, "c": c}
        return None
    return None


def infer_kind(expr: Expr) -> ClueKind:
    for kind in ClueKind:
        if template_roles(kind, expr) is not None:
            return kind
    raise ValueError(f"expression matches no clue template: {format_logic(expr)}")


@dataclass(frozen=True)
class Clue:
    kind: ClueKind
    expr: Expr
    english: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if template_roles(self.kind, self.expr) is None:
            raise ValueError(f"{self.kind.value} clue has the wrong shape: {format_logic(self.expr)}")

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return tuple(dict.fromkeys(iter_atoms(self.expr)))

    @property
    def logic_text(self) -> str:
        return format_logic(self.expr)

    @property
    def roles(self) -> dict[str, Atom]:
        return template_roles(self.kind, self.expr)

    def relabel(self, fn) -> "Clue":
        return Clue(self.kind, map_atoms(self.expr, fn))

    def with_english(self, text: str | None) -> "Clue":
        return Clue(self.kind, self.expr, text)

    @classmethod
    def from_logic(cls, text: str, kind: ClueKind | str | None = None, english: str | None = None) -> "Clue":
        expr = parse_logic(text)
        kind = infer_kind(expr) if kind is None else ClueKind(kind)
        return cls(kind, expr, english)


# --- layman notation --------------------------------------------------------

def format_logic(expr: Expr) -> str:
    if isinstance(expr, Link):
        return f"({expr.left} {IFF} {expr.right})"
    if isinstance(expr, Not):
        return NOT + format_logic(expr.operand)
    glyph = AND if isinstance(expr, And) else OR
    return "(" + f" {glyph} ".join(format_logic(op) for op in expr.operands) + ")"


class _Parser:
    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def error(self, msg: str) -> LogicParseError:
        return LogicParseError(f"{msg} at offset {self.i} in {self.s!r}")

    def skip(self):
        while self.i < len(self.s) and self.s[self.i] == " ":
            self.i += 1

    def peek(self) -> str:
        self.skip()
        return self.s[self.i] if self.i < len(self.s) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.i += 1

    def parse(self):
        # the outermost parentheses may be omitted
        operands, glyph = self.sequence()
        node = operands[0] if glyph is None else self.combine(operands, glyph)
        if self.peek():
            raise self.error("trailing text")
        if isinstance(node, Atom):
            raise self.error("a bare atom is not a clue")
        return node

    def node(self):
        ch = self.peek()
        if ch == NOT:
            self.i += 1
            operand = self.node()
            if isinstance(operand, Atom):
                raise self.error("negation of a bare atom")
            return Not(operand)
        if ch != "(":
            raise self.error("expected '(' or '¬'")
        j = self.i + 1
        while j < len(self.s) and self.s[j] == " ":
            j += 1
        if j < len(self.s) and self.s[j] in "(" + NOT:
            return self.compound()
        return self.atom()

    def atom(self) -> Atom:
        self.expect("(")
        end = self.s.find(")", self.i)
        if end < 0:
            raise self.error("unterminated atom")
        body = self.s[self.i:end]
        if " = " not in body:
            raise self.error("atom without ' = '")
        cat, item = body.split(" = ", 1)
        self.i = end + 1
        return Atom(cat.strip(), item.strip())

    def sequence(self):
        operands = [self.node()]
        glyph = None
        while self.peek() and self.peek() in (AND, OR, IFF):
            g = self.s[self.i]
            if glyph is not None and g != glyph:
                raise self.error("mixed connectives without parentheses")
            glyph = g
            self.i += 1
            operands.append(self.node())
        return operands, glyph

    def compound(self):
        self.expect("(")
        operands, glyph = self.sequence()
        self.expect(")")
        if glyph is None:
            raise self.error("parenthesised expression without connective")
        return self.combine(operands, glyph)

    def combine(self, operands, glyph):
        if glyph == IFF:
            if len(operands) != 2 or not all(isinstance(o, Atom) for o in operands):
                raise self.error("⇔ must join exactly two atoms")
            return Link(*operands)
        if any(isinstance(o, Atom) for o in operands):
            raise self.error("bare atom inside ∧/∨")
        return (And if glyph == AND else Or)(tuple(operands))


def parse_logic(text: str) -> Expr:
    return _Parser(text).parse()


# --- grids and assignments --------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    """Row index of every item; names resolve through row identity."""

    name_category: str
    names: tuple[str, ...]
    positions: Mapping[str, Mapping[str, int]]

    def person_of(self, atom: Atom) -> int:
        return person_of(self, atom)


def person_of(assignment: Assignment, atom: Atom) -> int:
    if atom.category == assignment.name_category:
        try:
            return assignment.names.index(atom.item)
        except ValueError:
            raise UnknownItem(str(atom)) from None
    try:
        return assignment.positions[atom.category][atom.item]
    except KeyError:
        raise UnknownItem(str(atom)) from None


def eval_expr(expr: Expr, assignment: Assignment) -> bool:
    if isinstance(expr, Link):
        return person_of(assignment, expr.left) == person_of(assignment, expr.right)
    if isinstance(expr, Not):
        return not eval_expr(expr.operand, assignment)
    if isinstance(expr, And):
        return all([eval_expr(op, assignment) for op in expr.operands])
    return any([eval_expr(op, assignment) for op in expr.operands])


def eval_clue(clue: Clue, assignment: Assignment) -> bool:
    """Truth value of ``clue``; every atom is resolved so unknown items always raise."""
    return eval_expr(clue.expr, assignment)


@dataclass(frozen=True)
class SolutionGrid:
    """A ``p x q`` grid: rows are people, columns categories, column 0 the names."""

    columns: tuple[tuple[str, str], ...]  # (category name, group)
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        q = len(self.columns)
        if q < 2 or not self.rows:
            raise ValueError("grid needs at least one row and two columns")
        for r in self.rows:
            if len(r) != q:
                raise ValueError("ragged grid row")
        for c in range(q):
            col = self.column(c)
            if len(set(col)) != len(col):
                raise ValueError(f"column {self.columns[c][0]!r} repeats an item")

    @property
    def size(self) -> tuple[int, int]:
        return len(self.rows), len(self.columns)

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.columns)

    @property
    def name_category(self) -> str:
        return self.columns[0][0]

    @property
    def row_names(self) -> tuple[str, ...]:
        return self.column(0)

    def column(self, c: int) -> tuple[str, ...]:
        return tuple(r[c] for r in self.rows)

    def to_assignment(self) -> Assignment:
        positions = {
            cat: {item: r for r, item in enumerate(self.column(c))}
            for c, cat in enumerate(self.categories)
            if c > 0
        }
        return Assignment(self.name_category, self.row_names, positions)

    def as_dict(self) -> dict[str, dict[str, str]]:
        cats = self.categories
        return {row[0]: {cats[c]: row[c] for c in range(1, len(cats))} for row in self.rows}

    def to_json(self) -> dict:
        return {"columns": [list(c) for c in self.columns], "rows": [list(r) for r in self.rows]}

    @classmethod
    def from_json(cls, doc: Mapping) -> "SolutionGrid":
        return cls(tuple(tuple(c) for c in doc["columns"]), tuple(tuple(r) for r in doc["rows"]))


def grid_from_columns(
    columns: Sequence[tuple[str, str]], values: Sequence[Sequence[str]]
) -> SolutionGrid:
    """Build a grid from per-column value lists (each in row order)."""
    rows = tuple(zip(*values))
    return SolutionGrid(tuple(tuple(c) for c in columns), tuple(tuple(r) for r in rows))
