import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from essayscore.corpus import Essay, EssaySetMeta
from essayscore.evalkit import RatingPair, build_report, qwk, to_bins
from essayscore.scoreparse import FailureReason, ParsedScore, ParseFailure

META16 = EssaySetMeta(essay_set_id="1", prompt_text="p", score_min=1, score_max=6)
META_HALF = EssaySetMeta(essay_set_id="e", prompt_text="p",
                         score_min=1, score_max=5, score_step=0.5)


def brute_force_qwk(pairs, num_bins):
    """Independent oracle, written directly from the weighted-kappa formula.

    Uses exact integer arithmetic: the (N-1)^2 factor cancels between
    numerator and denominator, leaving
    kappa = 1 - total * sum (a-b)^2  /  sum (i-j)^2 hp[i] hg[j].
    """
    hp = [0] * num_bins
    hg = [0] * num_bins
    raw_disagreement = 0
    total = 0
    for a, b in pairs:
        hp[a] += 1
        hg[b] += 1
        raw_disagreement += (a - b) ** 2
        total += 1
    expected_disagreement = 0
    for i in range(num_bins):
        for j in range(num_bins):
            expected_disagreement += (i - j) ** 2 * hp[i] * hg[j]
    if expected_disagreement == 0:
        return 1.0 if raw_disagreement == 0 else None
    return float(1 - Fraction(raw_disagreement * total, expected_disagreement))


class TestToBins:
    def test_lower_bound(self):
        assert to_bins(1, META16) == 0

    def test_half_step_doubles_scale(self):
        assert to_bins(3.5, META_HALF) == 5
        assert to_bins(1.0, META_HALF) == 0
        assert to_bins(5.0, META_HALF) == 8

    def test_off_grid_is_error(self):
        with pytest.raises(ValueError, match="not on the 0.5 grid"):
            to_bins(2.25, META_HALF)


class TestQwk:
    def test_identity_is_exactly_one(self):
        pairs = [(0, 0), (1, 1), (2, 2), (1, 1), (3, 3)]
        assert qwk(pairs, 4) == 1.0

    def test_two_pair_anticorrelation(self):
        # oracle on {(0,2),(2,0)}, N=3: 1 - 2*8/8 = -1
        assert brute_force_qwk([(0, 2), (2, 0)], 3) == -1.0
        assert qwk([(0, 2), (2, 0)], 3) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_oracle_on_500_random_pairs(self):
        rng = random.Random(123)
        pairs = [(rng.randrange(4), rng.randrange(4)) for _ in range(500)]
        assert qwk(pairs, 4) == pytest.approx(brute_force_qwk(pairs, 4), abs=1e-9)

    def test_swap_symmetry_is_exact(self):
        rng = random.Random(5)
        pairs = [(rng.randrange(6), rng.randrange(6)) for _ in range(99)]
        swapped = [(b, a) for a, b in pairs]
        assert qwk(pairs, 6) == qwk(swapped, 6)

    def test_permutation_invariance(self):
        rng = random.Random(6)
        pairs = [(rng.randrange(5), rng.randrange(5)) for _ in range(60)]
        shuffled = pairs[:]
        rng.shuffle(shuffled)
        assert qwk(pairs, 5) == qwk(shuffled, 5)

    def test_translation_invariance(self):
        # shifting all scores and the declared range together maps to the
        # same bins, hence the same kappa
        shifted_meta = EssaySetMeta(essay_set_id="s", prompt_text="p",
                                    score_min=4, score_max=9)
        scores = [(1, 2), (2, 1), (3, 3), (1, 1), (6, 5)]
        pairs = [(to_bins(a, META16), to_bins(b, META16)) for a, b in scores]
        shifted = [(to_bins(a + 3, shifted_meta), to_bins(b + 3, shifted_meta))
                   for a, b in scores]
        assert pairs == shifted
        assert qwk(pairs, META16.num_bins) == qwk(shifted, shifted_meta.num_bins)
        # translating bins inside a wider scale also leaves kappa unchanged
        wide = [(a + 3, b + 3) for a, b in pairs]
        assert qwk(wide, 9) == qwk(pairs, 9)

    def test_random_predictions_near_zero(self):
        rng = random.Random(42)
        pairs = [(rng.randrange(4), rng.randrange(4)) for _ in range(10_000)]
        assert abs(qwk(pairs, 4)) < 0.1

    def test_degenerate_identical_single_bin(self):
        assert qwk([(2, 2), (2, 2)], 4) == 1.0

    def test_constant_but_different_is_zero(self):
        # marginals concentrated on different bins: E carries all mass at the
        # same weighted cell as O, so kappa is 0, not an error
        assert qwk([(0, 3), (0, 3)], 4) == pytest.approx(0.0)

    def test_accepts_rating_pair_objects(self):
        pairs = [RatingPair("a", 0, 0), RatingPair("b", 1, 2)]
        assert qwk(pairs, 3) == pytest.approx(brute_force_qwk([(0, 0), (1, 2)], 3))

    def test_bin_out_of_range(self):
        with pytest.raises(ValueError):
            qwk([(0, 5)], 4)

    def test_empty_pairs(self):
        with pytest.raises(ValueError):
            qwk([], 4)

    @settings(max_examples=150, deadline=None)
    @given(st.integers(2, 9).flatmap(
        lambda n: st.tuples(st.just(n),
                            st.lists(st.tuples(st.integers(0, n - 1),
                                               st.integers(0, n - 1)),
                                     min_size=1, max_size=120))))
    def test_oracle_equivalence_property(self, case):
        num_bins, pairs = case
        expected = brute_force_qwk(pairs, num_bins)
        if expected is None:
            with pytest.raises(ValueError):
                qwk(pairs, num_bins)
        else:
            assert qwk(pairs, num_bins) == pytest.approx(expected, abs=1e-9)


def _essay(essay_id, set_id, gold):
    return Essay(id=essay_id, essay_set_id=set_id, text="t", gold_overall=gold)


def _score(value, raw="r", clamped=()):
    return ParsedScore(scores={"Overall": value}, raw=raw, source="deterministic",
                       clamped_traits=tuple(clamped))


class TestBuildReport:
    def test_echo_identity_gives_ones(self):
        essays = [_essay(f"a{i}", "1", 1 + i % 6) for i in range(12)]
        parsed = {e.id: _score(e.gold_overall) for e in essays}
        report = build_report(parsed, essays, {"1": META16}, config_digest="d")
        assert report.per_set["1"].qwk == 1.0
        assert report.per_set["1"].n == 12
        assert report.average_qwk == 1.0
        assert report.config_digest == "d"

    def test_failures_excluded_and_counted(self):
        essays = [_essay(f"a{i}", "1", 1 + i % 6) for i in range(10)]
        parsed = {}
        for i, e in enumerate(essays):
            if i < 3:
                parsed[e.id] = ParseFailure(FailureReason.NO_SCORE_FOUND, "x", "raw")
            else:
                parsed[e.id] = _score(e.gold_overall)
        report = build_report(parsed, essays, {"1": META16})
        assert report.per_set["1"].n == 7
        assert report.per_set["1"].parse_failures == 3
        assert report.per_set["1"].qwk == 1.0

    def test_fully_failing_set_excluded_from_average(self):
        essays = [_essay("a1", "1", 2), _essay("a2", "1", 3),
                  _essay("b1", "2", 1), _essay("b2", "2", 4)]
        meta2 = EssaySetMeta(essay_set_id="2", prompt_text="p", score_min=1, score_max=6)
        parsed = {
            "a1": ParseFailure(FailureReason.NO_SCORE_FOUND, "x", "r"),
            "a2": ParseFailure(FailureReason.INVALID_JSON, "x", "r"),
            "b1": _score(1), "b2": _score(4),
        }
        report = build_report(parsed, essays, {"1": META16, "2": meta2})
        assert report.per_set["1"].qwk is None
        assert report.average_qwk == report.per_set["2"].qwk
        assert any("set 1" in w for w in report.warnings)

    def test_average_is_unweighted(self):
        meta2 = EssaySetMeta(essay_set_id="2", prompt_text="p", score_min=1, score_max=6)
        essays = ([_essay(f"a{i}", "1", 1 + i % 6) for i in range(12)]
                  + [_essay("b0", "2", 1), _essay("b1", "2", 2), _essay("b2", "2", 3)])
        parsed = {e.id: _score(e.gold_overall) for e in essays if e.essay_set_id == "1"}
        parsed["b0"] = _score(2)  # off by one
        parsed["b1"] = _score(1)
        parsed["b2"] = _score(3)
        report = build_report(parsed, essays, {"1": META16, "2": meta2})
        expected = (report.per_set["1"].qwk + report.per_set["2"].qwk) / 2
        assert report.average_qwk == pytest.approx(expected)
        assert sum(r.n for r in report.per_set.values()) == 15

    def test_clamped_tally(self):
        essays = [_essay("a1", "1", 2), _essay("a2", "1", 5)]
        parsed = {"a1": _score(2, clamped=("Overall",)), "a2": _score(5)}
        report = build_report(parsed, essays, {"1": META16})
        assert report.per_set["1"].clamped == 1

    def test_unknown_essay_rejected(self):
        with pytest.raises(ValueError, match="unknown essay"):
            build_report({"ghost": _score(1)}, [], {"1": META16})

    def test_known_confusion_matrix(self):
        # two bins mixed up twice out of six: hand-checkable small case
        essays = [_essay(f"c{i}", "1", g) for i, g in enumerate([1, 2, 3, 4, 5, 6])]
        values = [1, 3, 2, 4, 5, 6]
        parsed = {e.id: _score(v) for e, v in zip(essays, values)}
        report = build_report(parsed, essays, {"1": META16})
        pairs = [(v - 1, g - 1) for v, g in zip(values, [1, 2, 3, 4, 5, 6])]
        assert report.per_set["1"].qwk == pytest.approx(brute_force_qwk(pairs, 6))

    def test_json_and_text_rendering(self):
        essays = [_essay("a1", "1", 2), _essay("a2", "1", 3)]
        parsed = {e.id: _score(e.gold_overall) for e in essays}
        report = build_report(parsed, essays, {"1": META16}, config_digest="abc123")
        doc = report.to_json_dict()
        assert doc["per_set"]["1"]["qwk"] == 1.0
        assert "abc123" in report.to_json()
        text = report.render_text()
        assert "Avg." in text and "1.000" in text
