"""Run models or mock solvers over puzzle sets and the two probe tasks.

Results are JSON lines, one record per (puzzle id, variant, mode, endpoint).
Records are written in job order by a single writer, so a run produces the same
file regardless of the worker count, and a resumed run reproduces the file of
an uninterrupted one.
"""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import httpx

from prime._seeds import derive_seed
from prime.core import SolutionGrid
from prime.generator import VARIANTS, Triplet, Variant
from prime.metrics import UNKNOWN, PredictedGrid, score
from prime.render import MODES, explicit_prompts, name_probe_prompts, variant_prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "PRIME_API_KEY"
BASE_URL_ENV = "PRIME_BASE_URL"
FINAL_MARKER = "FINAL SOLUTION:"


# --- transport ------------------------------------------------------------------

class TransportError(RuntimeError):
    kind = "transport"


class RetriesExhausted(TransportError):
    kind = "retries_exhausted"


class AuthError(TransportError):
    kind = "auth"


class RequestTimeout(TransportError):
    kind = "timeout"


@dataclass(frozen=True)
class ModelEndpoint:
    model: str
    base_url: str | None = None
    api_key_env: str = API_KEY_ENV
    temperature: float = 0.0
    max_retries: int = 5
    timeout: float = 120.0
    rate_limit: float | None = None  # requests per second
    backoff_base: float = 1.0
    backoff_max: float = 60.0

    def resolved_base_url(self) -> str:
        url = self.base_url or os.environ.get(BASE_URL_ENV)
        if not url:
            raise ValueError(f"no base URL: pass one or set {BASE_URL_ENV}")
        return url.rstrip("/")

    @property
    def identifier(self) -> str:
        return self.model


class RateLimiter:
    def __init__(self, rate: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / rate if rate else 0.0
        self.clock, self.sleep = clock, sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self.clock()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            self.sleep(start - now)


@dataclass(frozen=True)
class Completion:
    text: str
    retries: int


class ChatClient:
    """OpenAI-compatible chat-completion client with retry and rate limiting."""

    def __init__(self, endpoint: ModelEndpoint, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.sleep = sleep
        self.limiter = RateLimiter(endpoint.rate_limit, sleep=sleep)
        headers = {}
        key = os.environ.get(endpoint.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(transport=transport, timeout=endpoint.timeout, headers=headers)
        self._url = endpoint.resolved_base_url() + "/chat/completions"

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _delay(self, attempt: int, response: httpx.Response | None) -> float:
        if response is not None:
            retry_after = response.headers.get("retry-after")
            if retry_after:
                try:
                    return min(float(retry_after), self.endpoint.backoff_max)
                except ValueError:
                    pass
        return min(self.endpoint.backoff_base * 2 ** attempt, self.endpoint.backoff_max)

    def complete(self, prompt: str | Sequence[Mapping[str, str]]) -> Completion:
        messages = [{"role": "user", "content": prompt}] if isinstance(prompt, str) else list(prompt)
        body = {"model": self.endpoint.model, "messages": messages,
                "temperature": self.endpoint.temperature}
        last: str = ""
        timed_out = False
        resp: httpx.Response | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                self.sleep(self._delay(attempt - 1, None if timed_out else resp))
            self.limiter.wait()
            resp = None
            try:
                resp = self._http.post(self._url, json=body)
            except httpx.TimeoutException as exc:
                timed_out, last = True, f"timeout: {exc}"
                continue
            except httpx.TransportError as exc:
                timed_out, last = False, f"connection error: {exc}"
                continue
            timed_out = False
            if resp.status_code in (401, 403):
                raise AuthError(f"HTTP {resp.status_code}: check {self.endpoint.api_key_env}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion response: {exc}") from exc
            return Completion(text or "", attempt)
        if timed_out:
            raise RequestTimeout(f"gave up after {self.endpoint.max_retries} retries ({last})")
        raise RetriesExhausted(f"gave up after {self.endpoint.max_retries} retries ({last})")


# --- parsing --------------------------------------------------------------------

class ParseError(ValueError):
    pass


def _json_objects(text: str) -> list:
    dec = json.JSONDecoder()
    out = []
    i = text.find("{")
    while i != -1:
        try:
            obj, end = dec.raw_decode(text, i)
        except json.JSONDecodeError:
            i = text.find("{", i + 1)
            continue
        out.append(obj)
        i = text.find("{", end)
    return out


def parse_solution(text: str, truth: SolutionGrid, cot: bool = False) -> PredictedGrid:
    """Last top-level JSON object in ``text`` read as a grid keyed by ``truth``'s names."""
    objs = []
    if cot and FINAL_MARKER in text:
        objs = _json_objects(text[text.rindex(FINAL_MARKER) + len(FINAL_MARKER):])
    if not objs:
        objs = _json_objects(text)
    if not objs:
        raise ParseError("no JSON object found")
    doc = objs[-1]
    if not isinstance(doc, dict):
        raise ParseError("solution is not a JSON object")
    names = {n.strip().lower(): n for n in truth.row_names}
    cats = {c.strip().lower(): c for c in truth.categories[1:]}
    rows: dict[str, dict[str, str]] = {n: {c: UNKNOWN for c in cats.values()} for n in truth.row_names}
    seen = set()
    for key, cells in doc.items():
        name = names.get(str(key).strip().lower())
        if name is None:
            raise ParseError(f"unknown name {key!r}")
        if name in seen:
            raise ParseError(f"name {key!r} appears twice")
        seen.add(name)
        if not isinstance(cells, dict):
            raise ParseError(f"row {key!r} is not an object")
        for ck, value in cells.items():
            cat = cats.get(str(ck).strip().lower())
            if cat is None or value is None:
                continue
            rows[name][cat] = str(value).strip().lower() or UNKNOWN
    return PredictedGrid(rows)


# --- mock solvers ---------------------------------------------------------------

MOCK_POLICIES = ("oracle", "stereotype", "anti_stereotype", "uniform_random")


def mock_solve(policy: str, triplet: Triplet, variant: str, seed: int = 0) -> PredictedGrid:
    v = triplet[variant]
    truth = v.grid
    if policy == "oracle":
        return PredictedGrid.from_grid(truth)
    rows = truth.as_dict()
    cats = truth.categories
    if policy in ("stereotype", "anti_stereotype"):
        genders = v.genders
        bp = v.spec.bias_column
        names = truth.row_names
        if all(n in genders for n in names):
            queues = {g: [it.label for it in bp.items if it.gender.value == g] for g in ("man", "woman")}
            flip = {"man": "woman", "woman": "man"}
            for n in names:
                g = genders[n] if policy == "stereotype" else flip[genders[n]]
                rows[n][cats[1]] = queues[g].pop(0)
        else:
            for n, item in zip(names, bp.labels):
                rows[n][cats[1]] = item
        return PredictedGrid(rows)
    if policy == "uniform_random":
        rng = random.Random(derive_seed(seed, triplet.id, variant))
        for c, col in enumerate(v.spec.columns[1:], 1):
            pool = list(col.labels)
            rng.shuffle(pool)
            for n, item in zip(truth.row_names, pool):
                rows[n][cats[c]] = item
        return PredictedGrid(rows)
    raise ValueError(f"unknown mock policy {policy!r}")


def grid_response(pred: PredictedGrid, cot: bool = False) -> str:
    body = "```json\n" + json.dumps(pred.rows, indent=2, ensure_ascii=False) + "\n```"
    if cot:
        return "REASONING:\nWorking through the clues one by one.\n\n" + FINAL_MARKER + "\n" + body
    return body


class Responder:
    identifier: str

    def respond(self, prompt: str, triplet: Triplet, variant: str, mode: str) -> Completion:
        raise NotImplementedError


class MockResponder(Responder):
    def __init__(self, policy: str, seed: int = 0):
        if policy not in MOCK_POLICIES:
            raise ValueError(f"unknown mock policy {policy!r}")
        self.policy, self.seed = policy, seed
        self.identifier = f"mock:{policy}" + (f":{seed}" if policy == "uniform_random" else "")

    def respond(self, prompt, triplet, variant, mode) -> Completion:
        pred = mock_solve(self.policy, triplet, variant, self.seed)
        return Completion(grid_response(pred, cot=mode == "cot"), 0)


class EndpointResponder(Responder):
    def __init__(self, client: ChatClient):
        self.client = client
        self.identifier = client.endpoint.identifier

    def respond(self, prompt, triplet, variant, mode) -> Completion:
        return self.client.complete(prompt)


# --- run files ------------------------------------------------------------------

def record_key(rec: Mapping) -> tuple:
    return (rec["puzzle_id"], rec["variant"], rec["mode"], rec["endpoint"])


def _dump(rec: Mapping) -> str:
    return json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n"


def read_records(path: str | Path) -> list[dict]:
    out = []
    p = Path(path)
    if not p.exists():
        return out
    with p.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                break
    return out


def repair_run_file(path: str | Path) -> list[dict]:
    """Keep complete, non-transport-failed records; rewrite the file if anything was dropped."""
    p = Path(path)
    if not p.exists():
        return []
    raw = p.read_text(encoding="utf-8")
    records = read_records(p)
    kept = [r for r in records if not (r.get("error") or {}).get("transport")]
    text = "".join(_dump(r) for r in kept)
    if text != raw:
        tmp = p.with_suffix(p.suffix + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, p)
    return kept


@dataclass
class RunSummary:
    total: int
    executed: int
    skipped: int
    transport_failures: int = 0
    parse_failures: int = 0
    exact: int = 0

    @property
    def complete(self) -> bool:
        return self.transport_failures == 0


@dataclass(frozen=True)
class Job:
    triplet: Triplet
    variant: str
    mode: str


def _execute(job: Job, responder: Responder, clock, prompt_opts: Mapping) -> dict:
    t = job.triplet
    v: Variant = t[job.variant]
    prompt = variant_prompt(v, job.mode, **prompt_opts)
    rec = {
        "puzzle_id": t.id, "variant": job.variant, "mode": job.mode,
        "endpoint": responder.identifier, "size": t.size, "bp_category": t.bp_category,
        "raw": None, "parsed": None, "error": None, "score": None, "retries": 0,
    }
    start = clock()
    try:
        comp = responder.respond(prompt, t, job.variant, job.mode)
    except TransportError as exc:
        rec["error"] = {"transport": True, "type": exc.kind, "message": str(exc)}
        rec["elapsed_s"] = round(clock() - start, 6)
        return rec
    rec["elapsed_s"] = round(clock() - start, 6)
    rec["raw"], rec["retries"] = comp.text, comp.retries
    try:
        pred = parse_solution(comp.text, v.grid, cot=job.mode == "cot")
    except ParseError as exc:
        pred = None
        rec["error"] = {"transport": False, "type": "parse", "message": str(exc)}
    else:
        rec["parsed"] = pred.to_json()
    rec["score"] = score(pred, v.grid, v.genders).to_json()
    return rec


def run_evaluation(
    triplets: Sequence[Triplet],
    responder: Responder,
    out: str | Path,
    modes: Sequence[str] = ("base",),
    variants: Sequence[str] = VARIANTS,
    workers: int = 4,
    clock: Callable[[], float] = time.monotonic,
    clue_format: str = "english",
    shuffle_seed: int | None = None,
) -> RunSummary:
    """Evaluate every (triplet, variant, mode) not already present in ``out``."""
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    done = {record_key(r) for r in repair_run_file(out)}
    jobs = [Job(t, v, m) for t in triplets for v in variants for m in modes]
    pending = [j for j in jobs if (j.triplet.id, j.variant, j.mode, responder.identifier) not in done]
    summary = RunSummary(total=len(jobs), executed=0, skipped=len(jobs) - len(pending))
    opts = {"clue_format": clue_format, "shuffle_seed": shuffle_seed}

    def work(job: Job) -> dict:
        return _execute(job, responder, clock, opts)

    with out.open("a", encoding="utf-8") as fh, ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for rec in pool.map(work, pending):
            fh.write(_dump(rec))
            fh.flush()
            summary.executed += 1
            err = rec["error"] or {}
            if err.get("transport"):
                summary.transport_failures += 1
            elif err.get("type") == "parse":
                summary.parse_failures += 1
            if rec["score"] and rec["score"]["exact"]:
                summary.exact += 1
    return summary


# --- explicit bias probe --------------------------------------------------------

def _lexicon() -> list[str]:
    text = resources.files("prime.resources").joinpath("refusal_lexicon.txt").read_text("utf-8")
    return [ln.strip().lower() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


_OPTION_NUM = re.compile(r"(?<![\w.])([12])\s*\)")
_BARE_NUM = re.compile(r"^\W*([12])\W*$")


def classify_explicit(response: str, options: Sequence[str]) -> int | None:
    """Index of the chosen option, or ``None`` for a refusal.

    Order: a single option number, then the refusal lexicon, then a single
    option text; anything else counts as a refusal.
    """
    text = response.strip().lower().replace("’", "'")
    nums = set(_OPTION_NUM.findall(text))
    bare = _BARE_NUM.match(text)
    if bare:
        nums.add(bare.group(1))
    if len(nums) == 1:
        return int(nums.pop()) - 1
    if any(phrase in text for phrase in _lexicon()):
        return None
    hits = [i for i, opt in enumerate(options)
            if re.search(r"(?<!\w)" + re.escape(opt.lower()) + r"(?!\w)", text)]
    if len(hits) == 1:
        return hits[0]
    return None


def explicit_label(prompt, choice: int | None, genders: Mapping[str, str]) -> str:
    if choice is None:
        return "R"
    if prompt.kind == "MG":
        chosen = ("man", "woman")[choice]
        return "S" if chosen == prompt.gender else "A"
    item = prompt.pair[choice]
    return "S" if genders[item] == prompt.gender else "A"


def run_explicit_bias(catalog, complete: Callable[[str], str], workers: int = 1) -> list[dict]:
    """Ask every explicit-bias prompt and label each answer R/S/A."""
    genders = {it.label: it.gender.value for c in catalog.bias_probing for it in c.items}
    prompts = explicit_prompts(catalog)

    def one(pr) -> dict:
        rec = {"setting": pr.kind, "category": pr.category, "gender": pr.gender,
               "prompt": pr.text, "response": None, "label": "R", "error": None}
        try:
            rec["response"] = complete(pr.text)
        except TransportError as exc:
            rec["error"] = {"type": exc.kind, "message": str(exc)}
            return rec
        rec["label"] = explicit_label(pr, classify_explicit(rec["response"], pr.options), genders)
        return rec

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(one, prompts))


def explicit_table(records: Iterable[Mapping]) -> list[dict]:
    """R/S/A percentages for rows MG/IG x woman/man; transport errors are left out."""
    counts: dict[tuple, Counter] = defaultdict(Counter)
    for r in records:
        if r.get("error"):
            continue
        counts[(r["setting"], r["gender"])][r["label"]] += 1
    rows = []
    for setting in ("MG", "IG"):
        for g in ("woman", "man"):
            c = counts.get((setting, g), Counter())
            n = sum(c.values())
            pct = {k: (100.0 * c[k] / n if n else 0.0) for k in "RSA"}
            rows.append({"setting": setting, "gender": g, "n": n, **pct})
    return rows


# --- name gender probe ----------------------------------------------------------

_MAN = re.compile(r"\bman\b")
_WOMAN = re.compile(r"\bwoman\b")


def parse_gender_answer(text: str) -> str | None:
    t = text.lower()
    man, woman = bool(_MAN.search(t)), bool(_WOMAN.search(t))
    if man == woman:
        return None
    return "man" if man else "woman"


@dataclass
class NameProbeResult:
    labels: dict[str, str | None]
    votes: dict[str, list]
    accuracy: dict[str, float] = field(default_factory=dict)


def classify_gender_names(names: Mapping[str, str], complete: Callable[[str], str]) -> NameProbeResult:
    """Majority vote over the three probe templates; ``names`` maps name -> catalog gender."""
    labels, votes = {}, {}
    for name in names:
        answers = [parse_gender_answer(complete(p)) for p in name_probe_prompts(name)]
        votes[name] = answers
        c = Counter(a for a in answers if a is not None)
        if c["man"] == c["woman"]:
            labels[name] = None
        else:
            labels[name] = "man" if c["man"] > c["woman"] else "woman"
    acc = {}
    for g in ("man", "woman"):
        group = [n for n, tag in names.items() if tag == g]
        acc[g] = sum(labels[n] == g for n in group) / len(group) if group else float("nan")
    return NameProbeResult(labels, votes, acc)


# --- optional LLM clue phrasing -------------------------------------------------

def few_shot_examples(kind, n: int = 10, seed: int = 0):
    """Template-rendered example clues of ``kind`` from a fixed demo puzzle."""
    from prime.catalog import load_catalog
    from prime.generator import build_triplet, enumerate_clues
    from prime.render import render_clues

    t = build_triplet(load_catalog(), 4, 4, seed)
    grid = t["S"].grid
    pool = [c for c in enumerate_clues(grid) if c.kind is kind]
    random.Random(derive_seed(seed, "few-shot", kind.value)).shuffle(pool)
    return render_clues(pool[:n], grid.name_category)


def translate_clue(clue, complete: Callable[[list], str], examples=None) -> str:
    from prime.render import clue_translation_messages

    examples = few_shot_examples(clue.kind) if examples is None else examples
    return complete(clue_translation_messages(clue, examples)).strip()
