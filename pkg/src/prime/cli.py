"""``prime`` command line: catalog, generate, render, solve, eval, probe, report.

Exit codes: 0 ok, 1 data or verification error, 2 usage, 3 transport.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from prime.catalog import CatalogError, InfeasibleSpec, catalog_summary, load_catalog
from prime.core import LogicParseError, SolutionGrid
from prime.dataset import PuzzleFileError, load_puzzles, save_puzzles
from prime.generator import VARIANTS, GenerationFailed, generate_batch
from prime.harness import (
    MOCK_POLICIES,
    ChatClient,
    EndpointResponder,
    MockResponder,
    ModelEndpoint,
    TransportError,
    classify_gender_names,
    explicit_table,
    run_evaluation,
    run_explicit_bias,
)
from prime.render import explicit_bias_prompts, variant_prompt
from prime import report
from prime.solver import NotUnique, Unsat, domain_from_grid, solve_unique

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_TRANSPORT = 0, 1, 2, 3


class DataError(Exception):
    pass


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for part in text.split(","):
        try:
            p, q = part.lower().split("x")
            out.append((int(p), int(q)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {part!r}, expected PxQ") from None
    return out


def _csv(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def _print_grid(grid: SolutionGrid, out=sys.stdout) -> None:
    print(json.dumps(grid.as_dict(), ensure_ascii=False), file=out)


# --- subcommands ------------------------------------------------------------------

def cmd_catalog(args) -> int:
    cat = load_catalog(args.catalog)
    print(json.dumps(catalog_summary(cat), indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_generate(args) -> int:
    cat = load_catalog(args.catalog)
    workers = args.workers or os.cpu_count() or 1
    done = 0

    def progress(_t):
        nonlocal done
        done += 1
        if args.verbose and done % 50 == 0:
            print(f"{done} triplets", file=sys.stderr)

    triplets = generate_batch(cat, args.sizes, args.per_size, args.seed, workers=workers,
                              max_attempts=args.max_attempts, progress=progress)
    save_puzzles(args.out, triplets)
    print(f"wrote {len(triplets)} triplets ({3 * len(triplets)} puzzles) to {args.out}")
    return EXIT_OK


def _select(triplets, ids):
    if not ids:
        return triplets
    wanted = set(ids)
    picked = [t for t in triplets if t.id in wanted]
    missing = wanted - {t.id for t in picked}
    if missing:
        raise DataError(f"unknown triplet ids: {sorted(missing)}")
    return picked


def cmd_render(args) -> int:
    if args.explicit:
        cat = load_catalog(args.catalog)
        for pr in explicit_bias_prompts(cat, args.bp_category):
            print(json.dumps({"setting": pr.kind, "category": pr.category, "gender": pr.gender,
                              "prompt": pr.text}, ensure_ascii=False))
        return EXIT_OK
    if not args.puzzles:
        raise DataError("render needs a puzzle file (or --explicit)")
    triplets = _select(load_puzzles(args.puzzles), args.id)
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for t in triplets:
        for v in args.variants:
            for mode in args.modes:
                text = variant_prompt(t[v], mode, args.clue_format, args.shuffle_clues)
                if out_dir:
                    (out_dir / f"{t.id}.{v}.{mode}.txt").write_text(text, encoding="utf-8")
                else:
                    print(f"=== {t.id} {v} {mode} ===")
                    print(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    status = EXIT_OK
    for t in load_puzzles(args.puzzles):
        for v in VARIANTS:
            var = t[v]
            res = solve_unique(domain_from_grid(var.grid), var.clues)
            if isinstance(res, Unsat):
                print(f"{t.id} {v}: no solution")
                status = EXIT_DATA
            elif isinstance(res, NotUnique):
                print(f"{t.id} {v}: not unique, two witnesses:")
                _print_grid(res.witnesses[0])
                _print_grid(res.witnesses[1])
                status = EXIT_DATA
            else:
                tag = "ok" if res == var.grid else "MISMATCH"
                if res != var.grid:
                    status = EXIT_DATA
                print(f"{t.id} {v}: unique solution ({tag})")
                _print_grid(res)
    return status


def _responder(args):
    if args.mock:
        return MockResponder(args.mock, args.seed)
    if not args.model:
        raise DataError("pass --model (with PRIME_BASE_URL or --base-url) or --mock")
    ep = ModelEndpoint(model=args.model, base_url=args.base_url, temperature=args.temperature,
                       max_retries=args.max_retries, timeout=args.timeout, rate_limit=args.rate_limit)
    return EndpointResponder(ChatClient(ep))


def cmd_eval(args) -> int:
    triplets = _select(load_puzzles(args.puzzles), args.id)
    if args.limit:
        triplets = triplets[: args.limit]
    responder = _responder(args)
    summary = run_evaluation(triplets, responder, args.out, modes=args.modes, variants=args.variants,
                             workers=args.workers, clue_format=args.clue_format,
                             shuffle_seed=args.shuffle_clues)
    print(json.dumps({"total": summary.total, "executed": summary.executed, "skipped": summary.skipped,
                      "exact": summary.exact, "parse_failures": summary.parse_failures,
                      "transport_failures": summary.transport_failures,
                      "complete": summary.complete}))
    return EXIT_OK if summary.complete else EXIT_TRANSPORT


def _probe_complete(args, cat):
    if args.mock:
        genders = {it.label: it.gender.value for c in (cat.names, *cat.bias_probing) for it in c.items}
        if args.mock == "refuse":
            return lambda prompt: "I can't make assumptions based on gender."
        if args.kind == "names":
            def answer(prompt):
                name = prompt.split("Is ", 1)[-1].split(" ", 1)[0] if prompt.startswith("Is ") else prompt.split(" is ", 1)[0]
                return genders.get(name.lower(), "unknown")
            return answer
        return lambda prompt: "1)"
    if not args.model:
        raise DataError("pass --model or --mock")
    ep = ModelEndpoint(model=args.model, base_url=args.base_url, temperature=args.temperature,
                       max_retries=args.max_retries, timeout=args.timeout, rate_limit=args.rate_limit)
    client = ChatClient(ep)
    return lambda prompt: client.complete(prompt).text


def cmd_probe(args) -> int:
    cat = load_catalog(args.catalog)
    complete = _probe_complete(args, cat)
    if args.kind == "explicit":
        records = run_explicit_bias(cat, complete, workers=args.workers)
        table = explicit_table(records)
        payload = {"records": records, "table": table}
        print(report.to_markdown(table), end="")
    else:
        names = {it.label: it.gender.value for it in cat.names.items}
        res = classify_gender_names(names, complete)
        payload = {"labels": res.labels, "votes": res.votes, "accuracy": res.accuracy}
        print(report.to_markdown([{"man": res.accuracy["man"], "woman": res.accuracy["woman"]}]), end="")
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    return EXIT_OK


def _emit(name: str, rows, out_dir: Path | None, legend: str | None = None) -> None:
    if out_dir:
        (out_dir / f"{name}.csv").write_text(report.to_csv(rows), encoding="utf-8")
        (out_dir / f"{name}.md").write_text(report.to_markdown(rows, legend), encoding="utf-8")
    else:
        print(report.to_markdown(rows, legend), end="")


def cmd_report(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "compare":
        if len(args.runs) != 2:
            raise DataError("--kind compare needs exactly two run files")
        rows, mismatch = report.compare_runs(report.load_runs([args.runs[0]]), report.load_runs([args.runs[1]]))
        if mismatch:
            print(f"coverage mismatch ({len(mismatch)} triplets): {', '.join(mismatch[:10])}", file=sys.stderr)
        _emit("compare", rows, out_dir)
        return EXIT_OK
    records = report.load_runs(args.runs)
    if args.kind == "deltas":
        rows, unpaired = report.aggregate_deltas(records)
        if unpaired:
            print(f"excluded {len(unpaired)} unpaired triplets", file=sys.stderr)
        _emit("deltas", rows, out_dir, report.LEGEND)
    elif args.kind == "categories":
        _emit("categories", report.per_category_deltas(records, args.min_pairs), out_dir, report.LEGEND)
    elif args.kind == "scatter":
        points, means = report.error_scatter(records)
        if not points:
            print("no records with bias-probing errors at p >= 4", file=sys.stderr)
        _emit("scatter_points", points, out_dir)
        _emit("scatter_means", means, out_dir)
    elif args.kind == "accuracy":
        _emit("accuracy", report.accuracy_table(records), out_dir)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

def _endpoint_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="model identifier sent to the endpoint")
    p.add_argument("--base-url", help="chat-completion base URL (default: $PRIME_BASE_URL)")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-retries", type=int, default=5)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--rate-limit", type=float, default=None, help="requests per second")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prime", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="JSON file of option defaults")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("catalog", help="validate a catalog and print its summary")
    p.add_argument("--catalog", help="catalog JSON (default: bundled seed catalog)")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("generate", help="generate puzzle triplets")
    p.add_argument("--catalog")
    p.add_argument("--sizes", type=_sizes, default=_sizes("2x3,2x4,4x3,4x4"))
    p.add_argument("--per-size", type=int, default=504)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="default: CPU count")
    p.add_argument("--max-attempts", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("render", help="print solving prompts or explicit-bias prompts")
    p.add_argument("puzzles", nargs="?")
    p.add_argument("--id", type=_csv, default=None, help="comma-separated triplet ids")
    p.add_argument("--variants", type=_csv, default=list(VARIANTS))
    p.add_argument("--modes", "--mode", type=_csv, default=["base"])
    p.add_argument("--clue-format", choices=["english", "logic"], default="english")
    p.add_argument("--shuffle-clues", type=int, default=None, metavar="SEED")
    p.add_argument("--explicit", action="store_true", help="explicit-bias prompts instead")
    p.add_argument("--catalog")
    p.add_argument("--bp-category")
    p.add_argument("--out", help="directory for one file per prompt")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("solve", help="solve every puzzle and check it against the stored grid")
    p.add_argument("puzzles")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="run a model or mock over a puzzle file")
    p.add_argument("--puzzles", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--modes", "--mode", type=_csv, default=["base"])
    p.add_argument("--variants", type=_csv, default=list(VARIANTS))
    p.add_argument("--mock", choices=MOCK_POLICIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--id", type=_csv, default=None)
    p.add_argument("--limit", type=int, default=None, help="first N triplets only")
    p.add_argument("--clue-format", choices=["english", "logic"], default="english")
    p.add_argument("--shuffle-clues", type=int, default=None, metavar="SEED")
    _endpoint_opts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="explicit-bias or name-gender probe")
    p.add_argument("--kind", choices=["explicit", "names"], required=True)
    p.add_argument("--catalog")
    p.add_argument("--mock", choices=["oracle", "refuse"])
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out")
    _endpoint_opts(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("report", help="aggregate run files")
    p.add_argument("--runs", type=_csv, required=True, help="comma-separated run files")
    p.add_argument("--kind", choices=["deltas", "categories", "scatter", "compare", "accuracy"], default="deltas")
    p.add_argument("--min-pairs", type=int, default=10)
    p.add_argument("--out", help="output directory (default: print markdown)")
    p.set_defaults(func=cmd_report)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError("config must be a JSON object")
    common = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    sub_action = next(a for a in ap._actions if isinstance(a, argparse._SubParsersAction))
    for name, parser in sub_action.choices.items():
        dests = {a.dest for a in parser._actions}
        values = {**common, **cfg.get(name, {})}
        values = {k.replace("-", "_"): v for k, v in values.items()}
        parser.set_defaults(**{k: v for k, v in values.items() if k in dests})


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        _apply_config(ap, argv)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"transport error ({exc.kind}): {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except CatalogError as exc:
        print(f"catalog error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, PuzzleFileError, InfeasibleSpec, GenerationFailed, LogicParseError,
            ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
