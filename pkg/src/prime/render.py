"""English clue text and prompt construction."""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Iterable, Mapping, Sequence

from prime._seeds import derive_seed
from prime.core import Atom, Clue, ClueKind, Not

PROMPT_VERSION = "v1"
_VOWELS = set("aeiou")


def _resource(name: str) -> str:
    return resources.files("prime.resources").joinpath(name).read_text("utf-8")


@lru_cache(maxsize=None)
def _phrase_table() -> dict:
    table = json.loads(_resource("clue_phrases.json"))
    table.pop("_comment", None)
    return table


@lru_cache(maxsize=None)
def prompt_parts(version: str = PROMPT_VERSION) -> dict:
    return json.loads(_resource(f"prompt_parts.{version}.json"))


@lru_cache(maxsize=None)
def _prompt_template(version: str = PROMPT_VERSION) -> Template:
    return Template(_resource(f"puzzle_prompt.{version}.txt"))


@lru_cache(maxsize=None)
def explicit_frames() -> dict:
    frames = json.loads(_resource("explicit_frames.json"))
    frames.pop("_comment", None)
    return frames


def with_article(text: str) -> str:
    return ("an " if text[:1] in _VOWELS else "a ") + text


@dataclass(frozen=True)
class Phrase:
    verb: str
    neg: str
    pre: str = ""
    tail: str = ""
    article: bool = False
    subject: str | None = None

    def obj(self, item: str, tail: bool = True) -> str:
        core = self.pre + item
        if self.article:
            core = with_article(core)
        return core + (self.tail if tail else "")


def phrase_for(category: str) -> Phrase:
    entry = _phrase_table().get(category)
    if entry is None:
        return Phrase("has", "does not have", tail=f" as their {category.lower()}")
    return Phrase(**entry)


class ClueRenderer:
    """Deterministic template phrasing; ``name_category`` marks atoms that are people."""

    def __init__(self, name_category: str):
        self.name_category = name_category

    def is_name(self, atom: Atom) -> bool:
        return atom.category == self.name_category

    def np(self, atom: Atom) -> str:
        if self.is_name(atom):
            return atom.item
        ph = phrase_for(atom.category)
        if ph.subject:
            return ph.subject.format(item=atom.item)
        return "the person who " + self.pred(atom)

    def pred(self, atom: Atom, negative: bool = False) -> str:
        if self.is_name(atom):
            return ("is not " if negative else "is ") + atom.item
        ph = phrase_for(atom.category)
        return (ph.neg if negative else ph.verb) + " " + ph.obj(atom.item)

    def either_pred(self, a: Atom, b: Atom) -> str:
        if self.is_name(a):
            return f"is either {a.item} or {b.item}"
        ph = phrase_for(a.category)
        return f"{ph.verb} either {ph.obj(a.item, False)} or {ph.obj(b.item, False)}{ph.tail}"

    def render(self, clue: Clue) -> str:
        r = clue.roles
        kind = clue.kind
        if kind is ClueKind.TRUE_FALSE:
            a, b = r["a"], r["b"]
            if self.is_name(b) and not self.is_name(a):
                a, b = b, a
            positive = not isinstance(clue.expr, Not)
            text = f"{self.np(a)} {self.pred(b, negative=not positive)}"
        elif kind is ClueKind.NEITHER_NOR:
            text = f"neither {self.np(r['a'])} nor {self.np(r['b'])} {self.pred(r['c'])}"
        elif kind is ClueKind.EITHER_OR:
            text = f"{self.np(r['c'])} {self.either_pred(r['a'], r['b'])}"
        elif kind is ClueKind.UNALIGNED_PAIR:
            text = (f"of {self.np(r['u'])} and {self.np(r['v'])}, one {self.pred(r['x'])}, "
                    f"and the other {self.pred(r['y'])}")
        else:
            text = f"the three people are {self.np(r['a'])}, {self.np(r['b'])}, and {self.np(r['c'])}"
        return text[:1].upper() + text[1:] + "."


def render_clue(clue: Clue, name_category: str = "Names") -> str:
    return ClueRenderer(name_category).render(clue)


def render_clues(clues: Iterable[Clue], name_category: str = "Names") -> list[Clue]:
    renderer = ClueRenderer(name_category)
    return [c.with_english(renderer.render(c)) for c in clues]


# --- puzzle prompt --------------------------------------------------------------

def categories_block(columns: Sequence[tuple[str, Sequence[str]]]) -> str:
    """JSON object of non-name categories to their items, in pool order."""
    return json.dumps({name: list(items) for name, items in columns}, ensure_ascii=False)


def empty_grid_block(names: Sequence[str], categories: Sequence[str]) -> str:
    grid = {n: {c: "?" for c in categories} for n in names}
    return json.dumps(grid, indent=2, ensure_ascii=False)


def clues_block(
    clues: Sequence[Clue],
    clue_format: str = "english",
    shuffle_seed: int | None = None,
) -> str:
    order = list(range(len(clues)))
    if shuffle_seed is not None:
        random.Random(derive_seed(shuffle_seed, "clue-order")).shuffle(order)
    lines = []
    for n, i in enumerate(order, 1):
        clue = clues[i]
        if clue_format == "logic":
            text = clue.logic_text
        elif clue_format == "english":
            if clue.english is None:
                raise ValueError("clue has no English text; render it first")
            text = clue.english
        else:
            raise ValueError(f"unknown clue format {clue_format!r}")
        lines.append(f"{n}. {text}")
    return "\n" + "\n".join(lines) + "\n"


def build_puzzle_prompt(
    names: Sequence[str],
    columns: Sequence[tuple[str, Sequence[str]]],
    clues: Sequence[Clue],
    *,
    cot: bool = False,
    debias: bool = False,
    clue_format: str = "english",
    shuffle_seed: int | None = None,
    version: str = PROMPT_VERSION,
) -> str:
    """Full solving prompt.

    ``columns`` lists the non-name categories with their items in pool order;
    ``names`` gives the grid's row order.
    """
    parts = prompt_parts(version)
    return _prompt_template(version).substitute(
        debias_prefix=parts["debias_prefix"] + " " if debias else "",
        cot_instruction=" " + parts["cot_instruction"] if cot else "",
        cot_header=parts["cot_header"] if cot else "",
        no_explanation="" if cot else parts["no_explanation"],
        categories=categories_block(columns),
        clues=clues_block(clues, clue_format, shuffle_seed),
        grid=empty_grid_block(names, [c for c, _ in columns]),
    )


# --- explicit bias and name probes ---------------------------------------------

@dataclass(frozen=True)
class ExplicitPrompt:
    kind: str  # "MG" or "IG"
    category: str
    text: str
    options: tuple[str, str]
    # MG: gender of the item asked about; IG: gender of the subject
    gender: str
    item: str | None = None
    pair: tuple[str, str] | None = None


def _frame_item(frame: Mapping, item: str) -> str:
    text = frame.get("item_template", "{item}").format(item=item)
    return with_article(text) if frame.get("article") else text


def _act(frame: Mapping, item: str) -> str:
    act = frame.get("act", "")
    return f"{act} {_frame_item(frame, item)}" if act else _frame_item(frame, item)


def explicit_prompts(catalog, version: str = PROMPT_VERSION) -> list[ExplicitPrompt]:
    """Multi-gender prompts per item and individual-gender prompts per man/woman item pair.

    Individual-gender prompts cover every man-item x woman-item combination, man item first.
    """
    parts = prompt_parts(version)
    frames = explicit_frames()
    out: list[ExplicitPrompt] = []
    for cat in catalog.bias_probing:
        frame = frames.get(cat.name)
        if frame is None:
            raise KeyError(f"no explicit-bias frame for category {cat.name!r}")
        for it in cat.items:
            text = parts["explicit_mg"].format(scene=frame["scene"], act_item=_act(frame, it.label))
            out.append(ExplicitPrompt("MG", cat.name, text, ("the man", "the woman"),
                                      it.gender.value, item=it.label))
        men = [it.label for it in cat.items if it.gender.value == "man"]
        women = [it.label for it in cat.items if it.gender.value == "woman"]
        for m, w in itertools.product(men, women):
            for subject, pronoun in (("man", "he"), ("woman", "she")):
                i1, i2 = _frame_item(frame, m), _frame_item(frame, w)
                text = parts["explicit_ig"].format(
                    gender=subject, scene=frame["scene"], pronoun=pronoun,
                    act_item1=_act(frame, m), item1=i1, item2=i2,
                )
                out.append(ExplicitPrompt("IG", cat.name, text, (i1, i2), subject, pair=(m, w)))
    return out


def name_probe_prompts(name: str, version: str = PROMPT_VERSION) -> list[str]:
    shown = name.title()
    return [t.format(name=shown) for t in prompt_parts(version)["name_probe"]]


KIND_DISPLAY = {
    ClueKind.TRUE_FALSE: "True/False",
    ClueKind.NEITHER_NOR: "Neither/Nor",
    ClueKind.EITHER_OR: "Either/Or",
    ClueKind.UNALIGNED_PAIR: "Unaligned Pair",
    ClueKind.MULTI_ELIMINATION: "Multi-Elimination",
}


def clue_translation_messages(
    clue: Clue, examples: Sequence[Clue], version: str = PROMPT_VERSION
) -> list[dict]:
    """Chat messages asking a model to phrase ``clue``; ``examples`` carry English text."""
    parts = prompt_parts(version)
    system = parts["clue_translation_system"].format(kind=KIND_DISPLAY[clue.kind])
    for ex in examples:
        system += "\n" + parts["clue_translation_example"].format(logic=ex.logic_text, english=ex.english)
    user = parts["clue_translation_user"].format(logic=clue.logic_text)
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


def render_clue_text(clue: Clue, grid_context) -> str:
    """English sentence for ``clue``; ``grid_context`` supplies the name category."""
    return render_clue(clue, grid_context.name_category)


def empty_grid_document(grid) -> str:
    return empty_grid_block(grid.row_names, grid.categories[1:])


MODES = ("base", "cot", "debias")


def variant_prompt(variant, mode: str = "base", clue_format: str = "english",
                   shuffle_seed: int | None = None) -> str:
    """Prompt for a generated puzzle variant (anything with ``grid``, ``spec`` and ``clues``)."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    columns = [(col.name, col.labels) for col in variant.spec.columns[1:]]
    return build_puzzle_prompt(
        variant.grid.row_names, columns, variant.clues,
        cot=mode == "cot", debias=mode == "debias",
        clue_format=clue_format, shuffle_seed=shuffle_seed,
    )


def explicit_bias_prompts(catalog, bp_category=None) -> list[ExplicitPrompt]:
    prompts = explicit_prompts(catalog)
    if bp_category is None:
        return prompts
    name = getattr(bp_category, "name", bp_category)
    return [p for p in prompts if p.category == name]
