import itertools

import pytest
from hypothesis import given, settings, strategies as st

from oracles import truth_value
from prime.core import (
    And,
    Atom,
    Clue,
    ClueKind,
    Link,
    LogicParseError,
    Not,
    Or,
    SolutionGrid,
    UnknownItem,
    canonical_key,
    either_or,
    eval_clue,
    format_logic,
    grid_from_columns,
    infer_kind,
    multi_elimination,
    neither_nor,
    parse_logic,
    true_false,
    unaligned_pair,
)

GOLF, KIA = Atom("Sports", "golf"), Atom("Car", "kia forte")


def test_true_false_notation():
    clue = Clue(ClueKind.TRUE_FALSE, true_false(GOLF, KIA, False))
    assert clue.logic_text == "¬((Sports = golf) ⇔ (Car = kia forte))"


def test_unaligned_pair_reference_formula_parses():
    text = ("¬((Birth Year = 1980) ⇔ (Toy = train)) ∧ (((Birth Year = 1980) ⇔ (Name = sarah)) ∨ "
            "((Birth Year = 1980) ⇔ (Name = kenneth))) ∧ (((Toy = train) ⇔ (Name = sarah)) ∨ "
            "((Toy = train) ⇔ (Name = kenneth)))")
    clue = Clue.from_logic(text)
    assert clue.kind is ClueKind.UNALIGNED_PAIR
    assert clue.roles == {"x": Atom("Birth Year", "1980"), "y": Atom("Toy", "train"),
                          "u": Atom("Name", "sarah"), "v": Atom("Name", "kenneth")}


def test_either_or_and_neither_nor_shapes():
    a, b, c = Atom("Pet", "cat"), Atom("Pet", "dog"), Atom("Hobby", "fishing")
    assert format_logic(neither_nor(a, b, c)) == "(¬((Pet = cat) ⇔ (Hobby = fishing)) ∧ ¬((Pet = dog) ⇔ (Hobby = fishing)))"
    eo = format_logic(either_or(a, b, c))
    assert eo == ("((((Pet = cat) ⇔ (Hobby = fishing)) ∨ ((Pet = dog) ⇔ (Hobby = fishing))) ∧ "
                  "¬(((Pet = cat) ⇔ (Hobby = fishing)) ∧ ((Pet = dog) ⇔ (Hobby = fishing))))")


@pytest.mark.parametrize("kind, expr", [
    (ClueKind.TRUE_FALSE, true_false(Atom("Pet", "cat"), Atom("Pet", "dog"), True)),
    (ClueKind.NEITHER_NOR, neither_nor(Atom("Pet", "cat"), Atom("Hobby", "x"), Atom("Car", "y"))),
    (ClueKind.EITHER_OR, either_or(Atom("Pet", "cat"), Atom("Pet", "cat"), Atom("Car", "y"))),
    (ClueKind.UNALIGNED_PAIR, unaligned_pair(Atom("A", "1"), Atom("B", "1"), Atom("A", "2"), Atom("A", "3"))),
    (ClueKind.MULTI_ELIMINATION, multi_elimination(Atom("A", "1"), Atom("A", "2"), Atom("B", "1"))),
])
def test_template_constraints_rejected(kind, expr):
    with pytest.raises(ValueError):
        Clue(kind, expr)


def test_kind_mismatch_rejected():
    with pytest.raises(ValueError):
        Clue(ClueKind.NEITHER_NOR, true_false(GOLF, KIA, True))


# --- exhaustive truth tables on a 2x3 instance ---------------------------------

COLUMNS = [("Names", ("alice", "ben")), ("Occupation", ("doctor", "nurse")), ("Train", ("tram", "bullet train"))]


def _atoms():
    return [Atom(c, i) for c, items in COLUMNS for i in items]


def all_instances():
    atoms = _atoms()
    out = []
    for a, b in itertools.combinations(atoms, 2):
        if a.category != b.category:
            out += [Clue(ClueKind.TRUE_FALSE, true_false(a, b, s)) for s in (True, False)]
    for a, b, c in itertools.permutations(atoms, 3):
        if a.category == b.category and a < b and c.category != a.category:
            out.append(Clue(ClueKind.NEITHER_NOR, neither_nor(a, b, c)))
            out.append(Clue(ClueKind.EITHER_OR, either_or(a, b, c)))
    for x, y, u, v in itertools.permutations(atoms, 4):
        if (x.category != y.category and u.category == v.category and u < v
                and u.category not in (x.category, y.category)):
            out.append(Clue(ClueKind.UNALIGNED_PAIR, unaligned_pair(x, y, u, v)))
    return out


def test_truth_tables_match_independent_evaluator():
    clues = all_instances()
    kinds = {c.kind for c in clues}
    assert kinds == set(ClueKind) - {ClueKind.MULTI_ELIMINATION}
    for occ in itertools.permutations(COLUMNS[1][1]):
        for train in itertools.permutations(COLUMNS[2][1]):
            grid = grid_from_columns(
                [("Names", "Names"), ("Occupation", "BiasProbing"), ("Train", "General")],
                [COLUMNS[0][1], occ, train])
            asg = grid.to_assignment()
            row_of = {("Names", n): r for r, n in enumerate(COLUMNS[0][1])}
            row_of.update({("Occupation", x): r for r, x in enumerate(occ)})
            row_of.update({("Train", x): r for r, x in enumerate(train)})
            for clue in clues:
                assert eval_clue(clue, asg) == truth_value(clue.expr, row_of)


def test_hand_checked_rows():
    grid = grid_from_columns([("Names", "Names"), ("Occupation", "BiasProbing"), ("Train", "General")],
                             [("alice", "ben"), ("nurse", "doctor"), ("tram", "bullet train")])
    asg = grid.to_assignment()
    alice, nurse, tram = Atom("Names", "alice"), Atom("Occupation", "nurse"), Atom("Train", "tram")
    doctor = Atom("Occupation", "doctor")
    assert eval_clue(Clue(ClueKind.TRUE_FALSE, true_false(alice, nurse, True)), asg)
    assert not eval_clue(Clue(ClueKind.TRUE_FALSE, true_false(alice, doctor, True)), asg)
    assert eval_clue(Clue(ClueKind.EITHER_OR, either_or(nurse, doctor, tram)), asg)
    with pytest.raises(UnknownItem):
        eval_clue(Clue(ClueKind.TRUE_FALSE, true_false(alice, Atom("Occupation", "pilot"), True)), asg)


# --- notation round trip --------------------------------------------------------

labels = st.text(alphabet="abcdefghijklmnopqrstuvwxyz 0123456789-'", min_size=1, max_size=8).map(str.strip).filter(bool)
categories = st.sampled_from(["Names", "Occupation", "Train", "Pet", "Birth Year"])


@st.composite
def clues(draw):
    kind = draw(st.sampled_from(list(ClueKind)))
    cats = draw(st.permutations(["Names", "Occupation", "Train", "Pet", "Birth Year"]))
    items = draw(st.lists(labels, min_size=4, max_size=4, unique=True))
    A = Atom
    if kind is ClueKind.TRUE_FALSE:
        return Clue(kind, true_false(A(cats[0], items[0]), A(cats[1], items[1]), draw(st.booleans())))
    if kind is ClueKind.NEITHER_NOR:
        return Clue(kind, neither_nor(A(cats[0], items[0]), A(cats[0], items[1]), A(cats[1], items[2])))
    if kind is ClueKind.EITHER_OR:
        return Clue(kind, either_or(A(cats[0], items[0]), A(cats[0], items[1]), A(cats[1], items[2])))
    if kind is ClueKind.UNALIGNED_PAIR:
        return Clue(kind, unaligned_pair(A(cats[0], items[0]), A(cats[1], items[1]),
                                         A(cats[2], items[2]), A(cats[2], items[3])))
    return Clue(kind, multi_elimination(A(cats[0], items[0]), A(cats[1], items[1]), A(cats[2], items[2])))


@settings(max_examples=300, deadline=None)
@given(clues())
def test_logic_text_round_trip(clue):
    back = Clue.from_logic(clue.logic_text)
    assert back == clue
    assert infer_kind(back.expr) is clue.kind
    assert back.logic_text == clue.logic_text


@settings(max_examples=100, deadline=None)
@given(clues(), st.randoms())
def test_canonical_key_ignores_operand_order(clue, rnd):
    def shuffle(e):
        if isinstance(e, Link):
            return Link(e.right, e.left) if rnd.random() < 0.5 else e
        if isinstance(e, Not):
            return Not(shuffle(e.operand))
        ops = [shuffle(o) for o in e.operands]
        rnd.shuffle(ops)
        return type(e)(tuple(ops))
    assert canonical_key(shuffle(clue.expr)) == canonical_key(clue.expr)


@pytest.mark.parametrize("text", [
    "", "(Pet = cat)", "¬(Pet = cat)", "((Pet = cat) ⇔ (Car = kia)", "((Pet = cat) ⇔ (Car = kia)) extra",
    "((Pet = cat) ∧ (Car = kia))", "(((Pet = cat) ⇔ (Car = kia)) ∧ ((Pet = cat) ⇔ (Car = kia)) ∨ ((A = b) ⇔ (C = d)))",
    "((Pet cat) ⇔ (Car = kia))",
])
def test_parse_errors(text):
    with pytest.raises(LogicParseError):
        parse_logic(text)


def test_grid_validation_and_json():
    cols = (("Names", "Names"), ("Pet", "General"))
    with pytest.raises(ValueError):
        SolutionGrid(cols, (("a", "cat"), ("b", "cat")))
    g = SolutionGrid(cols, (("a", "cat"), ("b", "dog")))
    assert SolutionGrid.from_json(g.to_json()) == g
    assert g.as_dict() == {"a": {"Pet": "cat"}, "b": {"Pet": "dog"}}
    assert g.size == (2, 2)


def test_and_or_are_nary():
    e = parse_logic("(((A = 1) ⇔ (B = 1)) ∨ ((A = 1) ⇔ (B = 2)) ∨ ((A = 1) ⇔ (B = 3)))")
    assert isinstance(e, Or) and len(e.operands) == 3
    e = parse_logic("(¬((A = 1) ⇔ (B = 1)) ∧ ¬((A = 1) ⇔ (C = 1)) ∧ ¬((B = 1) ⇔ (C = 1)))")
    assert isinstance(e, And) and infer_kind(e) is ClueKind.MULTI_ELIMINATION
