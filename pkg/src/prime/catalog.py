"""Category catalog: names, bias-probing and general categories.

The catalog document is a single JSON file so the cross-category overlap rule
can be validated atomically::

    {"provenance": "...",
     "categories": [{"name": "Food", "group": "BiasProbing",
                     "items": [{"label": "steak", "gender": "man"}, ...]}, ...]}
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable

from prime._seeds import derive_seed

FORBIDDEN_LABEL_CHARS = set("()=¬∧∨⇔\n\"")


class Group(str, Enum):
    NAMES = "Names"
    BIAS_PROBING = "BiasProbing"
    GENERAL = "General"


class Gender(str, Enum):
    MAN = "man"
    WOMAN = "woman"

    @property
    def other(self) -> "Gender":
        return Gender.WOMAN if self is Gender.MAN else Gender.MAN


class CatalogError(ValueError):
    """Raised for malformed or invalid catalog documents."""

    def __init__(self, message: str, problems: Iterable[str] = ()):
        self.problems = list(problems)
        if self.problems:
            message = message + ":\n  - " + "\n  - ".join(self.problems)
        super().__init__(message)


class InfeasibleSpec(ValueError):
    """The catalog cannot supply the requested puzzle shape."""


@dataclass(frozen=True)
class CatalogItem:
    label: str
    gender: Gender | None = None
    added: bool = False


@dataclass(frozen=True)
class Category:
    name: str
    group: Group
    items: tuple[CatalogItem, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(it.label for it in self.items)

    def subset(self, gender: Gender) -> tuple[CatalogItem, ...]:
        return tuple(it for it in self.items if it.gender is gender)


@dataclass(frozen=True)
class Catalog:
    categories: tuple[Category, ...]
    provenance: str = ""

    @property
    def names(self) -> Category:
        return next(c for c in self.categories if c.group is Group.NAMES)

    @property
    def bias_probing(self) -> tuple[Category, ...]:
        return tuple(c for c in self.categories if c.group is Group.BIAS_PROBING)

    @property
    def general(self) -> tuple[Category, ...]:
        return tuple(c for c in self.categories if c.group is Group.GENERAL)

    def category(self, name: str) -> Category:
        for c in self.categories:
            if c.name == name:
                return c
        raise KeyError(name)

    def gender_of(self, label: str) -> Gender | None:
        for c in self.categories:
            for it in c.items:
                if it.label == label:
                    return it.gender
        raise KeyError(label)


@dataclass(frozen=True)
class Column:
    """One sampled puzzle column: a category plus the items drawn for it.

    For the names column ``items`` is in row order; for every other column it
    is the pool order, which is shuffled independently of any grid.
    """

    name: str
    group: Group
    items: tuple[CatalogItem, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(it.label for it in self.items)


@dataclass(frozen=True)
class ColumnSpec:
    columns: tuple[Column, ...]
    seed: int | None = None

    @property
    def p(self) -> int:
        return len(self.columns[0].items)

    @property
    def q(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> Column:
        return self.columns[0]

    @property
    def bias_column(self) -> Column:
        return self.columns[1]

    def with_names(self, labels: Iterable[str]) -> "ColumnSpec":
        names = Column(self.names.name, Group.NAMES, tuple(CatalogItem(x) for x in labels))
        return ColumnSpec((names,) + self.columns[1:], self.seed)

    def genders(self) -> dict[str, str]:
        return {
            it.label: it.gender.value
            for col in self.columns
            for it in col.items
            if it.gender is not None
        }


def _parse_item(raw, where: str) -> CatalogItem:
    if isinstance(raw, str):
        raw = {"label": raw}
    if not isinstance(raw, dict) or "label" not in raw:
        raise CatalogError(f"{where}: item must be an object with a 'label'")
    label = str(raw["label"]).strip().lower()
    gender = raw.get("gender")
    try:
        gender = Gender(str(gender).lower()) if gender is not None else None
    except ValueError:
        raise CatalogError(f"{where}: unknown gender {gender!r}") from None
    return CatalogItem(label, gender, bool(raw.get("added", False)))


def parse_catalog(doc: dict) -> Catalog:
    if not isinstance(doc, dict) or not isinstance(doc.get("categories"), list):
        raise CatalogError("catalog document needs a top-level 'categories' list")
    cats = []
    for i, raw in enumerate(doc["categories"]):
        if not isinstance(raw, dict):
            raise CatalogError(f"categories[{i}] is not an object")
        name = str(raw.get("name", "")).strip()
        try:
            group = Group(raw.get("group"))
        except ValueError:
            raise CatalogError(f"category {name or i!r}: unknown group {raw.get('group')!r}") from None
        items = tuple(_parse_item(it, f"{name}[{j}]") for j, it in enumerate(raw.get("items", [])))
        cats.append(Category(name, group, items))
    catalog = Catalog(tuple(cats), str(doc.get("provenance", "")))
    validate_catalog(catalog)
    return catalog


def validate_catalog(catalog: Catalog) -> None:
    problems: list[str] = []
    groups = [c.group for c in catalog.categories]
    if groups.count(Group.NAMES) != 1:
        problems.append(f"expected exactly one Names category, found {groups.count(Group.NAMES)}")
    if Group.BIAS_PROBING not in groups:
        problems.append("no BiasProbing category")
    if Group.GENERAL not in groups:
        problems.append("no General category")

    seen_names: set[str] = set()
    owner: dict[str, str] = {}
    for cat in catalog.categories:
        if not cat.name or FORBIDDEN_LABEL_CHARS & set(cat.name):
            problems.append(f"invalid category name {cat.name!r}")
        if cat.name in seen_names:
            problems.append(f"duplicate category name {cat.name!r}")
        seen_names.add(cat.name)
        if not cat.items:
            problems.append(f"{cat.name}: no items")
        gendered = cat.group in (Group.NAMES, Group.BIAS_PROBING)
        local: set[str] = set()
        for it in cat.items:
            if not it.label or FORBIDDEN_LABEL_CHARS & set(it.label):
                problems.append(f"{cat.name}: invalid label {it.label!r}")
            if it.label in local:
                problems.append(f"{cat.name}: duplicate label {it.label!r}")
            local.add(it.label)
            if gendered and it.gender is None:
                problems.append(f"{cat.name}: item {it.label!r} lacks a gender tag")
            if not gendered and it.gender is not None:
                problems.append(f"{cat.name}: item {it.label!r} must not carry a gender tag")
            if it.label in owner and owner[it.label] != cat.name:
                problems.append(f"label {it.label!r} appears in both {owner[it.label]!r} and {cat.name!r}")
            owner.setdefault(it.label, cat.name)
        if gendered:
            for g in Gender:
                if not cat.subset(g):
                    problems.append(f"{cat.name}: empty {g.value} subset")
    if problems:
        raise CatalogError("invalid catalog", problems)


def load_catalog(path: str | Path | None = None) -> Catalog:
    """Load and validate a catalog; ``None`` loads the bundled seed catalog."""
    if path is None:
        text = resources.files("prime.resources").joinpath("seed_catalog.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"cannot parse catalog: {exc}") from exc
    return parse_catalog(doc)


def sample_column_spec(
    catalog: Catalog,
    p: int,
    q: int,
    seed: int,
    bp_category: str | None = None,
) -> ColumnSpec:
    """Draw the categories and item pools for one ``p x q`` puzzle triplet.

    Column 1 is the names column (``p/2`` names per gender, row order shuffled),
    column 2 a bias-probing category with ``p/2`` items per gender, and columns
    3..q distinct general categories with ``p`` items each.
    """
    if p < 2 or p % 2:
        raise ValueError(f"p must be even and >= 2, got {p}")
    if q < 3:
        raise ValueError(f"q must be >= 3, got {q}")
    general = catalog.general
    if len(general) < q - 2:
        raise InfeasibleSpec(f"need {q - 2} general categories, catalog has {len(general)}")

    rng = random.Random(derive_seed(seed, "column-spec"))
    half = p // 2

    names = []
    for g in Gender:
        pool = catalog.names.subset(g)
        if len(pool) < half:
            raise InfeasibleSpec(f"Names has {len(pool)} {g.value} names, need {half}")
        names.extend(rng.sample(pool, half))
    rng.shuffle(names)

    if bp_category is None:
        bp = rng.choice(catalog.bias_probing)
    else:
        bp = catalog.category(bp_category)
        if bp.group is not Group.BIAS_PROBING:
            raise ValueError(f"{bp_category!r} is not a BiasProbing category")
    bp_items = []
    for g in Gender:
        pool = bp.subset(g)
        if len(pool) < half:
            raise InfeasibleSpec(f"{bp.name} has {len(pool)} {g.value} items, need {half}")
        bp_items.extend(rng.sample(pool, half))
    rng.shuffle(bp_items)

    columns = [
        Column(catalog.names.name, Group.NAMES, tuple(names)),
        Column(bp.name, Group.BIAS_PROBING, tuple(bp_items)),
    ]
    for cat in rng.sample(general, q - 2):
        if len(cat.items) < p:
            raise InfeasibleSpec(f"{cat.name} has {len(cat.items)} items, need {p}")
        columns.append(Column(cat.name, Group.GENERAL, tuple(rng.sample(cat.items, p))))
    return ColumnSpec(tuple(columns), seed)


def catalog_summary(catalog: Catalog) -> dict:
    """Counts per group, used by ``prime catalog``."""
    out: dict = {"provenance": catalog.provenance, "groups": {}}
    for g in Group:
        cats = [c for c in catalog.categories if c.group is g]
        entry: dict = {"categories": len(cats), "items": sum(len(c.items) for c in cats)}
        if g is not Group.GENERAL:
            entry.update({gd.value: sum(len(c.subset(gd)) for c in cats) for gd in Gender})
        out["groups"][g.value] = entry
    return out


__all__ = [
    "Catalog",
    "CatalogError",
    "CatalogItem",
    "Category",
    "Column",
    "ColumnSpec",
    "Gender",
    "Group",
    "InfeasibleSpec",
    "catalog_summary",
    "load_catalog",
    "parse_catalog",
    "sample_column_spec",
    "validate_catalog",
]
