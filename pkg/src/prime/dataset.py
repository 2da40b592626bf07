"""Puzzle set files: a JSON array of triplets.

Each triplet looks like::

    {"id": "2x3-0000", "size": "2x3", "p": 2, "q": 3, "bp_category": "Occupation",
     "seed": 123, "stats": {...},
     "variants": {"G": VARIANT, "S": VARIANT, "AS": VARIANT}}

and each variant carries its columns (names in row order, other items in pool
order, gender tags where present), the solution grid and the clue list.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from prime.catalog import CatalogItem, Column, ColumnSpec, Gender, Group
from prime.core import Clue, SolutionGrid
from prime.generator import VARIANTS, Triplet, Variant


class PuzzleFileError(ValueError):
    pass


def _column_json(col: Column) -> dict:
    items = []
    for it in col.items:
        entry = {"label": it.label}
        if it.gender is not None:
            entry["gender"] = it.gender.value
        items.append(entry)
    return {"name": col.name, "group": col.group.value, "items": items}


def variant_to_json(v: Variant) -> dict:
    return {
        "columns": [_column_json(c) for c in v.spec.columns],
        "grid": v.grid.to_json(),
        "clues": [{"kind": c.kind.value, "logic": c.logic_text, "english": c.english} for c in v.clues],
    }


def triplet_to_json(t: Triplet) -> dict:
    return {
        "id": t.id,
        "size": t.size,
        "p": t.p,
        "q": t.q,
        "bp_category": t.bp_category,
        "seed": t.seed,
        "stats": t.stats,
        "variants": {name: variant_to_json(t.variants[name]) for name in VARIANTS},
    }


def _column_from_json(doc: dict) -> Column:
    items = tuple(
        CatalogItem(it["label"], Gender(it["gender"]) if it.get("gender") else None)
        for it in doc["items"]
    )
    return Column(doc["name"], Group(doc["group"]), items)


def variant_from_json(name: str, doc: dict, seed: int | None = None) -> Variant:
    spec = ColumnSpec(tuple(_column_from_json(c) for c in doc["columns"]), seed)
    grid = SolutionGrid.from_json(doc["grid"])
    if grid.columns != tuple((c.name, c.group.value) for c in spec.columns):
        raise PuzzleFileError(f"variant {name}: grid columns differ from the column list")
    if grid.row_names != spec.names.labels:
        raise PuzzleFileError(f"variant {name}: grid rows differ from the names column")
    for c, col in enumerate(spec.columns[1:], 1):
        if sorted(col.labels) != sorted(grid.column(c)):
            raise PuzzleFileError(f"variant {name}: column {col.name!r} items differ from the grid")
    clues = tuple(Clue.from_logic(c["logic"], c.get("kind"), c.get("english")) for c in doc["clues"])
    return Variant(name, spec, grid, clues)


def triplet_from_json(doc: dict) -> Triplet:
    try:
        variants = {v: variant_from_json(v, doc["variants"][v], doc.get("seed")) for v in VARIANTS}
        return Triplet(doc["id"], int(doc["p"]), int(doc["q"]), doc["bp_category"],
                       doc.get("seed"), variants, doc.get("stats", {}))
    except PuzzleFileError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise PuzzleFileError(f"triplet {doc.get('id', '?')}: {exc}") from exc


def dumps_puzzles(triplets: Iterable[Triplet]) -> str:
    return json.dumps([triplet_to_json(t) for t in triplets], ensure_ascii=False, indent=1) + "\n"


def save_puzzles(path: str | Path, triplets: Iterable[Triplet]) -> None:
    Path(path).write_text(dumps_puzzles(triplets), encoding="utf-8")


def load_puzzles(path: str | Path) -> list[Triplet]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PuzzleFileError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, list):
        raise PuzzleFileError(f"{path}: expected a JSON array of triplets")
    return [triplet_from_json(t) for t in doc]
