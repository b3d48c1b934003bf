from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guardgate.lexicon import Lexicon, LexiconEntry, score_text


@pytest.fixture()
def toy() -> Lexicon:
    return Lexicon.from_pairs(
        [
            ("grumble", "toxic", 0.3),
            ("mumble", "toxic", 0.3),
            ("kerfuffle", "violent", 0.8),
            ("loud ruckus", "public_safety", 0.5),
        ]
    )


class TestScoring:
    def test_no_matches_all_zero(self, toy):
        scored = score_text("the advantages of recycling", toy)
        assert scored.raw_score == 0.0
        assert scored.verdict.flag == "appropriate"
        assert scored.scores.max_score() == 0.0

    def test_two_distinct_patterns_sum(self, toy):
        scored = score_text("a grumble then a mumble", toy)
        assert scored.raw_score == pytest.approx(0.6)
        assert scored.scores.get("toxic") == 0.6
        assert scored.verdict.flag == "inappropriate"  # 0.6 >= 0.5

    def test_empty_text(self, toy):
        scored = score_text("", toy)
        assert scored.raw_score == 0.0
        assert scored.verdict.flag == "appropriate"

    def test_repeated_pattern_counts_once(self, toy):
        once = score_text("grumble", toy)
        thrice = score_text("grumble grumble grumble", toy)
        assert once.raw_score == thrice.raw_score == pytest.approx(0.3)

    def test_case_and_punctuation_insensitive(self, toy):
        assert score_text("GRUMBLE!", toy).raw_score == pytest.approx(0.3)
        assert score_text("Grumble, mumble?", toy).raw_score == pytest.approx(0.6)

    def test_word_boundaries(self, toy):
        # "grumbles" is a different word
        assert score_text("grumbles", toy).raw_score == 0.0

    def test_phrase_matching(self, toy):
        assert score_text("what a loud ruckus outside", toy).scores.get("public_safety") == 0.5
        assert score_text("loud and clear ruckus", toy).scores.get("public_safety") == 0.0

    def test_saturating_sum(self):
        lex = Lexicon.from_pairs([(f"pat{i}", "toxic", 0.4) for i in range(4)])
        scored = score_text("pat0 pat1 pat2 pat3", lex)
        assert scored.raw_score == 1.0
        assert scored.scores.get("toxic") == 1.0

    def test_threshold_boundary_inclusive(self):
        lex = Lexicon.from_pairs([("edge", "toxic", 0.5)])
        assert score_text("edge", lex, threshold=0.5).verdict.flag == "inappropriate"
        assert score_text("edge", lex, threshold=0.6).verdict.flag == "appropriate"

    def test_raw_score_is_pre_rounding_max(self):
        lex = Lexicon.from_pairs([("a1", "toxic", 0.33), ("b2", "health", 0.17)])
        scored = score_text("a1 b2", lex)
        assert scored.raw_score == pytest.approx(0.33)
        assert scored.scores.get("toxic") == 0.3  # grid-rounded
        assert scored.scores.get("health") == 0.2  # half-up

    def test_determinism(self, toy):
        a = score_text("grumble mumble kerfuffle", toy)
        b = score_text("grumble mumble kerfuffle", toy)
        assert a == b

    @settings(max_examples=150)
    @given(
        st.lists(st.sampled_from(["grumble", "mumble", "kerfuffle", "calm", "quiet"]), max_size=20),
        st.lists(st.sampled_from(["grumble", "mumble", "loud", "ruckus"]), max_size=10),
    )
    def test_appending_text_never_decreases_scores(self, words, extra):
        lex = Lexicon.from_pairs(
            [("grumble", "toxic", 0.3), ("mumble", "toxic", 0.3), ("kerfuffle", "violent", 0.8)]
        )
        base = " ".join(words)
        longer = base + " " + " ".join(extra)
        s1 = score_text(base, lex)
        s2 = score_text(longer, lex)
        assert all(b >= a for a, b in zip(s1.scores.tenths, s2.scores.tenths))
        assert s2.raw_score >= s1.raw_score


class TestLexiconValidation:
    def test_unknown_attribute_rejected(self):
        with pytest.raises(ValueError):
            LexiconEntry("x", "sarcasm", 0.5)

    def test_weight_bounds(self):
        with pytest.raises(ValueError):
            LexiconEntry("x", "toxic", 0.0)
        with pytest.raises(ValueError):
            LexiconEntry("x", "toxic", 1.5)

    def test_empty_pattern_rejected(self):
        with pytest.raises(ValueError):
            LexiconEntry("  ", "toxic", 0.5)

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "lex.csv"
        path.write_text(
            "pattern,attribute,weight\ngrumble,toxic,0.3\nloud ruckus,public_safety,0.5\n",
            encoding="utf-8",
        )
        lex = Lexicon.load_csv(path)
        assert len(lex.entries) == 2
        assert score_text("grumble", lex).scores.get("toxic") == 0.3

    def test_csv_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("pattern,weight\nx,0.3\n", encoding="utf-8")
        with pytest.raises(ValueError):
            Lexicon.load_csv(path)

    def test_bundled_lexicon_loads(self, lexicon):
        assert len(lexicon.entries) > 10
        assert score_text("the advantages of recycling", lexicon).verdict.flag == "appropriate"
