"""Puzzle triplet generation.

One triplet shares a column spec and the general columns of its grid. The
generic variant (G) uses placeholder names and a random bias-probing column,
the stereotypical variant (S) gives every person a bias-probing item tagged
with their own gender, and the anti-stereotypical variant (AS) swaps those
items between paired man/woman rows. Clues are searched and pruned on G only,
then carried over to S and AS by relabelling items row for row.
"""

from __future__ import annotations

import itertools
import logging
import random
import string
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from prime._seeds import derive_seed
from prime.catalog import Catalog, ColumnSpec, Gender, InfeasibleSpec, sample_column_spec
from prime.core import (
    Atom,
    Clue,
    ClueKind,
    SolutionGrid,
    canonical_key,
    either_or,
    multi_elimination,
    neither_nor,
    true_false,
    unaligned_pair,
)
from prime.render import render_clues
from prime.solver import count_solutions, is_unique_to

log = logging.getLogger(__name__)

VARIANTS = ("G", "S", "AS")
SUBSET_START = 10


class ExhaustedCandidates(RuntimeError):
    """Even the full candidate clue set does not pin down the target grid."""


class SubstitutionError(RuntimeError):
    """A relabelled clue set lost uniqueness or minimality."""


class GenerationFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class Variant:
    name: str
    spec: ColumnSpec
    grid: SolutionGrid
    clues: tuple[Clue, ...]

    @property
    def genders(self) -> dict[str, str]:
        return self.spec.genders()

    @property
    def categories_in_pool_order(self) -> list[tuple[str, tuple[str, ...]]]:
        return [(col.name, col.labels) for col in self.spec.columns[1:]]


@dataclass(frozen=True)
class Triplet:
    id: str
    p: int
    q: int
    bp_category: str
    seed: int
    variants: dict[str, Variant]
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> str:
        return f"{self.p}x{self.q}"

    def __getitem__(self, name: str) -> Variant:
        return self.variants[name]


def placeholder_names(p: int) -> tuple[str, ...]:
    if p > 26:
        raise ValueError("at most 26 placeholder names")
    return tuple(f"person {ch}" for ch in string.ascii_lowercase[:p])


def _grid(spec: ColumnSpec, values: Sequence[Sequence[str]]) -> SolutionGrid:
    cols = tuple((c.name, c.group.value) for c in spec.columns)
    return SolutionGrid(cols, tuple(tuple(r) for r in zip(*values)))


def build_grids(spec: ColumnSpec, seed: int) -> tuple[ColumnSpec, dict[str, SolutionGrid]]:
    """Grids for G, S and AS plus the column spec of the generic variant."""
    rng = random.Random(derive_seed(seed, "grids"))
    p = spec.p
    genders = [it.gender for it in spec.names.items]
    general = []
    for col in spec.columns[2:]:
        labels = list(col.labels)
        rng.shuffle(labels)
        general.append(labels)

    bp = spec.bias_column
    by_gender = {g: [it.label for it in bp.items if it.gender is g] for g in Gender}
    for pool in by_gender.values():
        rng.shuffle(pool)
    queues = {g: iter(pool) for g, pool in by_gender.items()}
    stereo = [next(queues[g]) for g in genders]

    men = [r for r, g in enumerate(genders) if g is Gender.MAN]
    women = [r for r, g in enumerate(genders) if g is Gender.WOMAN]
    anti = list(stereo)
    for m, w in zip(men, women):
        anti[m], anti[w] = stereo[w], stereo[m]

    generic_bp = list(bp.labels)
    rng.shuffle(generic_bp)

    g_spec = spec.with_names(placeholder_names(p))
    names = list(spec.names.labels)
    grids = {
        "G": _grid(g_spec, [g_spec.names.labels, generic_bp, *general]),
        "S": _grid(spec, [names, stereo, *general]),
        "AS": _grid(spec, [names, anti, *general]),
    }
    return g_spec, grids


def enumerate_clues(grid: SolutionGrid) -> list[Clue]:
    """Every template instance that is true in ``grid``, deduplicated structurally."""
    q = len(grid.columns)
    cats = grid.categories
    row = {}
    items: list[list[Atom]] = []
    for c in range(q):
        atoms = [Atom(cats[c], x) for x in sorted(grid.column(c))]
        items.append(atoms)
        for r, x in enumerate(grid.column(c)):
            row[Atom(cats[c], x)] = r

    out: list[Clue] = []
    seen: set = set()

    def add(kind: ClueKind, expr) -> None:
        key = canonical_key(expr)
        if key not in seen:
            seen.add(key)
            out.append(Clue(kind, expr))

    for c1, c2 in itertools.combinations(range(q), 2):
        for a in items[c1]:
            for b in items[c2]:
                add(ClueKind.TRUE_FALSE, true_false(a, b, row[a] == row[b]))

    for cab in range(q):
        for a, b in itertools.combinations(items[cab], 2):
            for cz in range(q):
                if cz == cab:
                    continue
                for z in items[cz]:
                    hits = (row[a] == row[z]) + (row[b] == row[z])
                    if hits == 0:
                        add(ClueKind.NEITHER_NOR, neither_nor(a, b, z))
                    elif hits == 1:
                        add(ClueKind.EITHER_OR, either_or(a, b, z))

    for cuv in range(q):
        for u, v in itertools.combinations(items[cuv], 2):
            rows_uv = {row[u], row[v]}
            others = [c for c in range(q) if c != cuv]
            for cx, cy in itertools.combinations(others, 2):
                for x in items[cx]:
                    if row[x] not in rows_uv:
                        continue
                    for y in items[cy]:
                        if row[y] in rows_uv and row[y] != row[x]:
                            add(ClueKind.UNALIGNED_PAIR, unaligned_pair(x, y, u, v))

    if len(grid.rows) >= 3:
        for c1, c2, c3 in itertools.combinations(range(q), 3):
            for a in items[c1]:
                for b in items[c2]:
                    if row[b] == row[a]:
                        continue
                    for c in items[c3]:
                        if row[c] not in (row[a], row[b]):
                            add(ClueKind.MULTI_ELIMINATION, multi_elimination(a, b, c))
    return out


@dataclass(frozen=True)
class SubsetResult:
    clues: tuple[Clue, ...]
    sizes_tried: tuple[int, ...]


def find_solvable_subset(
    candidates: Sequence[Clue],
    target: SolutionGrid,
    spec: ColumnSpec,
    seed: int,
    start: int = SUBSET_START,
) -> SubsetResult:
    """Draw random subsets of growing size until one has ``target`` as its only solution.

    A fresh sample is drawn at every size.
    """
    rng = random.Random(derive_seed(seed, "subset"))
    n = min(start, len(candidates))
    tried = []
    while n <= len(candidates):
        tried.append(n)
        subset = rng.sample(list(candidates), n)
        if is_unique_to(spec, subset, target):
            return SubsetResult(tuple(subset), tuple(tried))
        n += 1
    raise ExhaustedCandidates(f"{len(candidates)} candidate clues do not determine the grid")


def prune_to_minimal(clues: Sequence[Clue], target: SolutionGrid, spec: ColumnSpec) -> tuple[Clue, ...]:
    """Drop clues in list order while uniqueness survives, until nothing more can go."""
    kept = list(clues)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(kept):
            trial = kept[:i] + kept[i + 1:]
            if is_unique_to(spec, trial, target):
                kept = trial
                changed = True
            else:
                i += 1
    return tuple(kept)


def is_minimal(clues: Sequence[Clue], spec: ColumnSpec) -> bool:
    clues = list(clues)
    return all(
        count_solutions(spec, clues[:i] + clues[i + 1:], limit=2).count >= 2
        for i in range(len(clues))
    )


def relabel_map(src: SolutionGrid, dst: SolutionGrid) -> Callable[[Atom], Atom]:
    if src.columns != dst.columns:
        raise ValueError("grids have different columns")
    table = {}
    for c, cat in enumerate(src.categories):
        for a, b in zip(src.column(c), dst.column(c)):
            table[Atom(cat, a)] = Atom(cat, b)
    return table.__getitem__


def substitute_clues(
    clues: Sequence[Clue],
    src: SolutionGrid,
    dst: SolutionGrid,
    dst_spec: ColumnSpec,
) -> tuple[Clue, ...]:
    """Carry clues from ``src`` to ``dst`` row for row and re-verify them there."""
    fn = relabel_map(src, dst)
    out = tuple(c.relabel(fn) for c in clues)
    if not is_unique_to(dst_spec, out, dst):
        raise SubstitutionError("substituted clues do not single out the target grid")
    if not is_minimal(out, dst_spec):
        raise SubstitutionError("substituted clues are not minimal")
    return out


def build_triplet(
    catalog: Catalog,
    p: int,
    q: int,
    seed: int,
    bp_category: str | None = None,
    triplet_id: str | None = None,
    max_attempts: int = 5,
) -> Triplet:
    """Generate one G/S/AS triplet, retrying with derived sub-seeds on failure."""
    errors = []
    for attempt in range(max_attempts):
        sub = seed if attempt == 0 else derive_seed(seed, "retry", attempt)
        try:
            return _build_once(catalog, p, q, sub, bp_category, triplet_id, seed, attempt)
        except (InfeasibleSpec, ExhaustedCandidates, SubstitutionError) as exc:
            log.warning("triplet %s attempt %d failed: %s", triplet_id, attempt, exc)
            errors.append(f"attempt {attempt}: {exc}")
    raise GenerationFailed(f"triplet {triplet_id or seed} failed: " + "; ".join(errors))


def _build_once(catalog, p, q, sub, bp_category, triplet_id, seed, attempt) -> Triplet:
    spec = sample_column_spec(catalog, p, q, sub, bp_category)
    g_spec, grids = build_grids(spec, sub)
    candidates = enumerate_clues(grids["G"])
    subset = find_solvable_subset(candidates, grids["G"], g_spec, sub)
    minimal = prune_to_minimal(subset.clues, grids["G"], g_spec)
    name_cat = spec.names.name
    clue_sets = {"G": minimal}
    for v in ("S", "AS"):
        clue_sets[v] = substitute_clues(minimal, grids["G"], grids[v], spec)
    variants = {
        v: Variant(v, g_spec if v == "G" else spec, grids[v], tuple(render_clues(clue_sets[v], name_cat)))
        for v in VARIANTS
    }
    stats = {
        "candidates": len(candidates),
        "subset_sizes_tried": list(subset.sizes_tried),
        "solvable_size": len(subset.clues),
        "minimal_size": len(minimal),
        "attempt": attempt,
    }
    return Triplet(triplet_id or f"{p}x{q}-{seed}", p, q, spec.bias_column.name, seed, variants, stats)


def _job(args) -> Triplet:
    catalog, p, q, seed, bp, tid, max_attempts = args
    return build_triplet(catalog, p, q, seed, bp, tid, max_attempts)


def batch_jobs(
    catalog: Catalog,
    sizes: Iterable[tuple[int, int]],
    per_size: int,
    seed: int,
    max_attempts: int = 5,
) -> list[tuple]:
    """Job list with bias-probing categories assigned round-robin within each size."""
    bps = [c.name for c in catalog.bias_probing]
    jobs = []
    for p, q in sizes:
        for i in range(per_size):
            tid = f"{p}x{q}-{i:04d}"
            jobs.append((catalog, p, q, derive_seed(seed, p, q, i), bps[i % len(bps)], tid, max_attempts))
    return jobs


def generate_batch(
    catalog: Catalog,
    sizes: Iterable[tuple[int, int]],
    per_size: int,
    seed: int,
    workers: int = 1,
    max_attempts: int = 5,
    progress: Callable[[Triplet], None] | None = None,
) -> list[Triplet]:
    """Generate ``per_size`` triplets for every size; output order is independent of ``workers``."""
    jobs = batch_jobs(catalog, sizes, per_size, seed, max_attempts)
    out = []
    if workers <= 1:
        results = map(_job, jobs)
        for t in results:
            out.append(t)
            if progress:
                progress(t)
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for t in pool.map(_job, jobs, chunksize=4):
            out.append(t)
            if progress:
                progress(t)
    return out


__all__ = [
    "ExhaustedCandidates",
    "GenerationFailed",
    "SubstitutionError",
    "Triplet",
    "VARIANTS",
    "Variant",
    "batch_jobs",
    "build_grids",
    "build_triplet",
    "enumerate_clues",
    "find_solvable_subset",
    "generate_batch",
    "is_minimal",
    "placeholder_names",
    "prune_to_minimal",
    "relabel_map",
    "substitute_clues",
]
