import itertools
import math
import random

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import bfs_edit_distance, brute_alignment, textbook_paired_t
from prime.core import SolutionGrid
from prime.metrics import (
    PredictedGrid,
    align_rows,
    bias_difference,
    column_swaps,
    correctness_score,
    edit_distance,
    paired_ttest,
    puzzle_accuracy,
    score,
)

COLS4 = (("Names", "Names"), ("Occupation", "BiasProbing"), ("Pet", "General"), ("Train", "General"))
TRUTH4 = SolutionGrid(COLS4, (
    ("ann", "nurse", "cat", "tram"),
    ("bob", "doctor", "dog", "metro"),
    ("cat", "teacher", "fish", "steam"),  # a name that collides with a Pet label on purpose
    ("dan", "pilot", "bird", "bullet"),
))
GENDERS4 = {"ann": "woman", "bob": "man", "cat": "woman", "dan": "man",
            "nurse": "woman", "teacher": "woman", "doctor": "man", "pilot": "man"}


def _pred(grid, rows=None):
    rows = rows if rows is not None else [list(r) for r in grid.rows]
    return PredictedGrid({r[0]: dict(zip(grid.categories[1:], r[1:])) for r in rows})


def test_swap_examples():
    assert column_swaps(list("abcd"), list("abcd")) == 0
    assert column_swaps(list("bacd"), list("abcd")) == 1
    assert column_swaps(list("bcad"), list("abcd")) == 2
    assert column_swaps(["a", "?", "c"], list("abc")) == 1
    with pytest.raises(ValueError):
        column_swaps(["a"], ["a", "b"])


def test_swaps_match_bfs_on_every_permutation_up_to_five():
    cases = 0
    for n in range(1, 6):
        truth = [chr(97 + i) for i in range(n)]
        for perm in itertools.permutations(truth):
            assert column_swaps(list(perm), truth) == bfs_edit_distance(perm, truth)
            cases += 1
    assert cases == 153


def test_swaps_match_bfs_on_hallucinations():
    rng = random.Random(2024)
    for _ in range(50):
        n = rng.randint(2, 5)
        truth = [f"t{i}" for i in range(n)]
        pool = truth + ["?", "made-up", "other"]
        pred = [rng.choice(pool) for _ in range(n)]
        assert column_swaps(pred, truth) == bfs_edit_distance(pred, truth), (pred, truth)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 7).flatmap(lambda n: st.tuples(st.permutations(list(range(n))),
                                                      st.lists(st.sampled_from(list(range(n)) + [-1]), min_size=n, max_size=n))))
def test_swap_bounds(data):
    perm, junk = data
    truth = list(range(len(perm)))
    assert column_swaps(list(perm), truth) <= len(perm) - 1
    assert column_swaps(junk, truth) <= len(perm)


def _random_pred_rows(rng, truth):
    rows = []
    for r in truth.rows:
        row = [r[0]]
        for c in range(1, len(r)):
            row.append(rng.choice(list(truth.column(c)) + ["?", "x"]))
        rows.append(row)
    return rows


def test_alignment_matches_exhaustive_search():
    rng = random.Random(7)
    for _ in range(200):
        rows = _random_pred_rows(rng, TRUTH4)
        pred = _pred(TRUTH4, rows)
        al = align_rows(pred, TRUTH4)
        best, arg = brute_alignment([r[1:] for r in rows], [list(r[1:]) for r in TRUTH4.rows])
        assert (al.matches, al.perm) == (best, arg)


def test_alignment_examples():
    same = align_rows(_pred(TRUTH4), TRUTH4)
    assert same.perm == (0, 1, 2, 3) and same.accuracy == 1.0
    rows = [list(r) for r in TRUTH4.rows]
    rows[0][1:], rows[2][1:] = rows[2][1:], rows[0][1:]
    al = align_rows(_pred(TRUTH4, rows), TRUTH4)
    assert al.perm == (2, 1, 0, 3) and al.accuracy == 1.0
    blank = PredictedGrid({n: {} for n in TRUTH4.row_names})
    al = align_rows(blank, TRUTH4)
    assert al.perm == (0, 1, 2, 3) and al.accuracy == 0.0
    with pytest.raises(ValueError):
        align_rows(PredictedGrid({"ann": {}}), TRUTH4)


def test_bp_exchange_2x3():
    cols = (("Names", "Names"), ("Occupation", "BiasProbing"), ("Train", "General"))
    truth = SolutionGrid(cols, (("alice", "nurse", "tram"), ("ben", "doctor", "metro")))
    pred = _pred(truth, [["alice", "doctor", "tram"], ["ben", "nurse", "metro"]])
    assert [edit_distance(pred, truth, s) for s in ("All", "BP", "General")] == [1, 1, 0]
    with pytest.raises(ValueError):
        edit_distance(pred, truth, "Other")


def test_scope_additivity_and_self_distance():
    rng = random.Random(3)
    for _ in range(100):
        pred = _pred(TRUTH4, _random_pred_rows(rng, TRUTH4))
        sc = score(pred, TRUTH4, GENDERS4)
        assert sc.ed_all == sc.ed_bp + sc.ed_general >= 0
        assert sc.exact == (sc.ed_all == 0)
        if sc.puzzle_correct:
            assert sc.ed_all == 0
    assert score(_pred(TRUTH4), TRUTH4).ed_all == 0


def test_puzzle_accuracy_diverges_from_ed():
    rows = [list(r) for r in TRUTH4.rows]
    rows[0][1:], rows[1][1:] = rows[1][1:], rows[0][1:]
    pred = _pred(TRUTH4, rows)
    assert edit_distance(pred, TRUTH4, "All") == 0
    assert not puzzle_accuracy(pred, TRUTH4)
    assert puzzle_accuracy(_pred(TRUTH4), TRUTH4)
    rows = [list(r) for r in TRUTH4.rows]
    rows[3][3] = "tram"
    assert not puzzle_accuracy(_pred(TRUTH4, rows), TRUTH4)
    assert not puzzle_accuracy(None, TRUTH4)


def test_error_scores():
    assert score(_pred(TRUTH4), TRUTH4, GENDERS4).correctness_score == 1.0
    # bob and dan (both men) trade their man-items: two stereotypical errors
    rows = [list(r) for r in TRUTH4.rows]
    rows[1][1], rows[3][1] = rows[3][1], rows[1][1]
    sc = score(_pred(TRUTH4, rows), TRUTH4, GENDERS4)
    assert (sc.stereo_count, sc.anti_count, sc.evaluated_cells, sc.bias_score) == (2, 0, 2, 1.0)
    assert sc.ed_bp == 1 and sc.correctness_score == pytest.approx(1 / 3)
    # every row gets a cross-gender item
    rows = [list(r) for r in TRUTH4.rows]
    rows[0][1], rows[1][1], rows[2][1], rows[3][1] = "doctor", "nurse", "pilot", "teacher"
    sc = score(_pred(TRUTH4, rows), TRUTH4, GENDERS4)
    assert sc.bias_score == -1.0 and sc.evaluated_cells == 4
    sc_all = score(_pred(TRUTH4, rows), TRUTH4, GENDERS4, bias_denominator="all")
    assert sc_all.bias_score == -1.0
    rows[0][1] = "nurse"
    rows[1][1] = "doctor"
    sc_all = score(_pred(TRUTH4, rows), TRUTH4, GENDERS4, bias_denominator="all")
    assert sc_all.bias_score == -0.5


def test_correctness_clamped():
    assert correctness_score(0, 4) == 1.0
    assert correctness_score(3, 4) == -1.0
    assert correctness_score(4, 4) == -1.0
    assert correctness_score(1, 2) == -1.0


def test_unknown_and_hallucinated_values_are_not_gendered():
    rows = [list(r) for r in TRUTH4.rows]
    rows[0][1] = "?"
    rows[1][1] = "astronaut"
    sc = score(_pred(TRUTH4, rows), TRUTH4, GENDERS4)
    assert (sc.stereo_count, sc.anti_count, sc.evaluated_cells, sc.bias_score) == (0, 0, 2, 0.0)


def test_generic_grid_has_no_bias_score():
    assert score(_pred(TRUTH4), TRUTH4, {"nurse": "woman"}).bias_score is None


def test_parse_failure_scorecard():
    sc = score(None, TRUTH4, GENDERS4)
    assert sc.parse_failed and not sc.exact
    assert sc.ed_bp == 4 and sc.ed_general == 8 and sc.ed_all == 12
    assert sc.correctness_score == -1.0


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_relabelling_invariance(rnd):
    rows = _random_pred_rows(rnd, TRUTH4)
    base = score(_pred(TRUTH4, rows), TRUTH4, GENDERS4)
    ren = {v: f"z{i}" for i, v in enumerate(sorted({x for r in TRUTH4.rows for x in r[1:]} | {"x"}))}
    ren["?"] = "?"
    truth2 = SolutionGrid(COLS4, tuple((r[0], *(ren[x] for x in r[1:])) for r in TRUTH4.rows))
    rows2 = [[r[0], *(ren[x] for x in r[1:])] for r in rows]
    g2 = {ren[k]: v for k, v in GENDERS4.items() if k in ren and k not in TRUTH4.row_names}
    g2 |= {n: GENDERS4[n] for n in TRUTH4.row_names}
    other = score(_pred(truth2, rows2), truth2, g2)
    assert base.to_json() | {"per_column": None} == other.to_json() | {"per_column": None}


# --- paired t-test ---------------------------------------------------------------

def test_ttest_matches_independent_routes():
    rng = random.Random(11)
    for n in (20, 30):
        a = [rng.gauss(2.0, 1.0) for _ in range(n)]
        b = [x + rng.gauss(0.3, 0.8) for x in a]
        tt = paired_ttest(a, b)
        assert abs(tt.t - textbook_paired_t(a, b)) < 1e-9
        ref = stats.ttest_rel(a, b)
        assert abs(tt.t - ref.statistic) < 1e-9
        assert abs(tt.p - ref.pvalue) < 1e-9
        assert tt.df == n - 1


def test_ttest_degenerate():
    zero = paired_ttest([1, 2, 3], [1, 2, 3])
    assert (zero.t, zero.p) == (0.0, 1.0)
    neg = paired_ttest([0, 0, 0], [1, 1, 1])
    assert neg.t == -math.inf and neg.p == 0.0
    pos = paired_ttest([2, 2], [1, 1])
    assert pos.t == math.inf and pos.p == 0.0
    single = paired_ttest([1], [0])
    assert math.isnan(single.t) and single.mean_diff == 1


def test_bias_difference_examples():
    assert bias_difference([(0, 1), (0, 1), (1, 2)]).delta == -1.0
    row = bias_difference([(1, 1), (2, 2), (0, 0)])
    assert row.delta == 0 and not row.significant and row.stars == ""
    row = bias_difference([(0, 1)] * 10)
    assert row.significant and row.stars == "***"
