"""Aggregate run files into delta tables, category breakdowns, error scatter and run comparisons.

All reports are plain rows (lists of dicts) that can be written as CSV or a
markdown table.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from prime.harness import read_records
from prime.metrics import bias_difference

SCOPES = ("All", "BP", "General")
_SCOPE_FIELD = {"All": "ed_all", "BP": "ed_bp", "General": "ed_general"}
LEGEND = "delta = mean ED(S) - mean ED(AS); negative: stereotypical, positive: anti-stereotypical, zero: no bias"


def load_runs(paths: Iterable[str | Path]) -> list[dict]:
    out = []
    for p in paths:
        out.extend(read_records(p))
    return out


def _scored(records: Iterable[Mapping]) -> list[Mapping]:
    return [r for r in records if r.get("score") is not None]


def _direction(delta: float) -> str:
    if delta < 0:
        return "stereotypical"
    if delta > 0:
        return "anti-stereotypical"
    return "zero"


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs) if xs else math.nan


def pair_records(records: Iterable[Mapping]) -> tuple[dict, list]:
    """Group S/AS records by (size, endpoint, mode) and triplet; return pairs and unpaired ids."""
    by = defaultdict(dict)
    for r in _scored(records):
        by[(r["size"], r["endpoint"], r["mode"], r["puzzle_id"])][r["variant"]] = r
    pairs = defaultdict(list)
    unpaired = []
    for (size, ep, mode, pid), vs in sorted(by.items()):
        if "S" in vs and "AS" in vs:
            pairs[(size, ep, mode)].append((pid, vs))
        elif "S" in vs or "AS" in vs:
            unpaired.append((size, ep, mode, pid))
    return pairs, unpaired


def aggregate_deltas(records: Iterable[Mapping], scopes: Sequence[str] = SCOPES) -> tuple[list[dict], list]:
    """Mean ED of G/S/AS and paired Δ per (size, endpoint, mode, scope)."""
    records = list(records)
    pairs, unpaired = pair_records(records)
    g_eds = defaultdict(list)
    for r in _scored(records):
        if r["variant"] == "G":
            g_eds[(r["size"], r["endpoint"], r["mode"])].append(r["score"])
    rows = []
    for key in sorted(pairs):
        size, ep, mode = key
        for scope in scopes:
            f = _SCOPE_FIELD[scope]
            d = bias_difference([(vs["S"]["score"][f], vs["AS"]["score"][f]) for _, vs in pairs[key]])
            rows.append({
                "size": size, "endpoint": ep, "mode": mode, "scope": scope,
                "mean_G": _mean([s[f] for s in g_eds.get(key, [])]),
                "mean_S": d.mean_s, "mean_AS": d.mean_as, "delta": d.delta,
                "t": d.t, "p": d.p, "stars": d.stars, "n": d.n,
                "direction": _direction(d.delta),
            })
    return rows, unpaired


def per_category_deltas(records: Iterable[Mapping], min_pairs: int = 10) -> list[dict]:
    """Δ_BP per bias-probing category, sorted by Δ; sparse categories are flagged."""
    pairs, _ = pair_records(records)
    groups = defaultdict(list)
    for (size, ep, mode), items in pairs.items():
        for _, vs in items:
            groups[(ep, mode, vs["S"]["bp_category"])].append((vs["S"]["score"]["ed_bp"], vs["AS"]["score"]["ed_bp"]))
    rows = []
    for (ep, mode, cat), prs in groups.items():
        d = bias_difference(prs)
        rows.append({"endpoint": ep, "mode": mode, "bp_category": cat, "delta_bp": d.delta,
                     "t": d.t, "p": d.p, "stars": d.stars, "n": d.n, "low_n": d.n < min_pairs})
    rows.sort(key=lambda r: (r["endpoint"], r["mode"], r["delta_bp"], r["bp_category"]))
    return rows


def _rows_of(size: str) -> int:
    return int(size.split("x")[0])


def error_scatter(records: Iterable[Mapping], min_rows: int = 4) -> tuple[list[dict], list[dict]]:
    """Raw (correctness, bias) points for S/AS records with BP errors, plus per-group means."""
    points = []
    for r in _scored(records):
        s = r["score"]
        if r["variant"] not in ("S", "AS") or _rows_of(r["size"]) < min_rows:
            continue
        if s["ed_bp"] <= 0 or s["bias_score"] is None:
            continue
        points.append({"endpoint": r["endpoint"], "mode": r["mode"], "variant": r["variant"],
                       "size": r["size"], "puzzle_id": r["puzzle_id"],
                       "correctness": s["correctness_score"], "bias": s["bias_score"]})
    groups = defaultdict(list)
    for pt in points:
        groups[(pt["endpoint"], pt["mode"], pt["variant"])].append(pt)
    means = [{"endpoint": ep, "mode": mode, "variant": v, "n": len(pts),
              "correctness": _mean([p["correctness"] for p in pts]),
              "bias": _mean([p["bias"] for p in pts])}
             for (ep, mode, v), pts in sorted(groups.items())]
    return points, means


def _per_triplet(records: Iterable[Mapping], label: str) -> dict:
    combos = {(r["endpoint"], r["mode"]) for r in _scored(records)}
    if len(combos) > 1:
        raise ValueError(f"run {label} mixes several endpoint/mode combinations: {sorted(combos)}")
    out = defaultdict(dict)
    for r in _scored(records):
        out[r["puzzle_id"]][r["variant"]] = r
    return out


def compare_runs(run_a: Iterable[Mapping], run_b: Iterable[Mapping]) -> tuple[list[dict], list[str]]:
    """Per size: share of triplets where A or B is more biased (|Δ_BP|) or makes more errors (ED_all)."""
    a, b = _per_triplet(run_a, "A"), _per_triplet(run_b, "B")
    common = sorted(set(a) & set(b))
    mismatch = sorted(set(a) ^ set(b))
    tally = defaultdict(lambda: defaultdict(int))
    for pid in common:
        va, vb = a[pid], b[pid]
        if not all(v in va and v in vb for v in ("G", "S", "AS")):
            mismatch.append(pid)
            continue
        size = va["S"]["size"]
        bias_a = abs(va["S"]["score"]["ed_bp"] - va["AS"]["score"]["ed_bp"])
        bias_b = abs(vb["S"]["score"]["ed_bp"] - vb["AS"]["score"]["ed_bp"])
        err_a = sum(va[v]["score"]["ed_all"] for v in ("G", "S", "AS"))
        err_b = sum(vb[v]["score"]["ed_all"] for v in ("G", "S", "AS"))
        tally[size]["n"] += 1
        tally[size]["bias:" + ("A" if bias_a > bias_b else "B" if bias_b > bias_a else "equal")] += 1
        tally[size]["error:" + ("A" if err_a > err_b else "B" if err_b > err_a else "equal")] += 1
    rows = []
    for size in sorted(tally):
        t = tally[size]
        n = t["n"]
        for dim in ("bias", "error"):
            rows.append({"size": size, "dimension": dim, "n": n,
                         "A_more_pct": 100.0 * t[f"{dim}:A"] / n,
                         "B_more_pct": 100.0 * t[f"{dim}:B"] / n,
                         "equal_pct": 100.0 * t[f"{dim}:equal"] / n})
    return rows, sorted(set(mismatch))


def accuracy_table(records: Iterable[Mapping]) -> list[dict]:
    groups = defaultdict(list)
    for r in _scored(records):
        groups[(r["size"], r["endpoint"], r["mode"], r["variant"])].append(r["score"]["puzzle_correct"])
    return [{"size": s, "endpoint": ep, "mode": m, "variant": v, "n": len(xs),
             "accuracy_pct": 100.0 * sum(xs) / len(xs)}
            for (s, ep, m, v), xs in sorted(groups.items())]


# --- output ----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.4f}"
    return str(v)


def to_csv(rows: Sequence[Mapping]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def to_markdown(rows: Sequence[Mapping], legend: str | None = None) -> str:
    if not rows:
        return "(no rows)\n"
    cols = list(rows[0])
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    lines = ["| " + " | ".join(c.ljust(w) for c, w in zip(cols, widths)) + " |",
             "| " + " | ".join("-" * w for w in widths) + " |"]
    lines += ["| " + " | ".join(v.ljust(w) for v, w in zip(row, widths)) + " |" for row in cells]
    out = "\n".join(lines) + "\n"
    if legend:
        out += "\n" + legend + "\n"
    return out


__all__ = [
    "LEGEND",
    "accuracy_table",
    "aggregate_deltas",
    "compare_runs",
    "error_scatter",
    "load_runs",
    "pair_records",
    "per_category_deltas",
    "to_csv",
    "to_markdown",
]
