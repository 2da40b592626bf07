from __future__ import annotations

import sys

import pytest

from prime.catalog import CatalogItem, Column, ColumnSpec, Gender, Group, load_catalog
from prime.core import Atom, Clue, ClueKind, SolutionGrid, true_false
from prime.generator import Triplet, Variant, generate_batch
from prime.render import render_clues


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def small_batch(catalog):
    """A handful of triplets per size, shared across modules."""
    return generate_batch(catalog, [(2, 3), (2, 4), (4, 3), (4, 4)], 6, seed=7)


def _col(name, group, items):
    return Column(name, group, tuple(CatalogItem(lab, Gender(g) if g else None) for lab, g in items))


def alice_ben_triplet() -> Triplet:
    """Hand-built 2x3 triplet: alice/ben, Occupation nurse/doctor, Train."""
    occ = [("doctor", "man"), ("nurse", "woman")]
    train = [("freight train", None), ("bullet train", None)]
    s_spec = ColumnSpec((
        _col("Names", Group.NAMES, [("alice", "woman"), ("ben", "man")]),
        _col("Occupation", Group.BIAS_PROBING, occ),
        _col("Train", Group.GENERAL, train),
    ))
    g_spec = s_spec.with_names(["person a", "person b"])
    cols = (("Names", "Names"), ("Occupation", "BiasProbing"), ("Train", "General"))
    grids = {
        "G": SolutionGrid(cols, (("person a", "doctor", "bullet train"), ("person b", "nurse", "freight train"))),
        "S": SolutionGrid(cols, (("alice", "nurse", "bullet train"), ("ben", "doctor", "freight train"))),
        "AS": SolutionGrid(cols, (("alice", "doctor", "bullet train"), ("ben", "nurse", "freight train"))),
    }
    maps = {
        "G": {"x": "person a", "u": "person a", "v": "person b", "occ": "doctor"},
        "S": {"x": "alice", "u": "alice", "v": "ben", "occ": "nurse"},
        "AS": {"x": "alice", "u": "alice", "v": "ben", "occ": "doctor"},
    }
    variants = {}
    for v, m in maps.items():
        clues = [
            Clue(ClueKind.TRUE_FALSE, true_false(Atom("Names", m["x"]), Atom("Train", "bullet train"), True)),
            Clue(ClueKind.TRUE_FALSE, true_false(Atom("Occupation", m["occ"]), Atom("Train", "bullet train"), True)),
        ]
        spec = g_spec if v == "G" else s_spec
        variants[v] = Variant(v, spec, grids[v], tuple(render_clues(clues)))
    return Triplet("fig-2x3", 2, 3, "Occupation", 0, variants)


@pytest.fixture
def alice_ben():
    return alice_ben_triplet()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, title = results[n]
        terminalreporter.write_line(f"{status} criterion {n}: {title}")
