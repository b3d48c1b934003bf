from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guardgate.evaluation import (
    DEFAULT_PROMPT_TEMPLATE,
    DEFAULT_SYSTEM_PROMPT,
    BiasAttackSpec,
    ClientError,
    DegenerateLabelsError,
    EmptyInputError,
    EvalMetrics,
    LengthMismatchError,
    LexiconClient,
    Sample,
    apply_bias_attack,
    auc_roc,
    confusion_metrics,
    evaluate,
    extract_label,
    load_dataset_csv,
)
from guardgate.lexicon import Lexicon


def brute_force_auc(labels, scores) -> float:
    """Oracle: count concordant pairs with half credit for ties."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestConfusionMetrics:
    def test_hand_counted_2x2(self):
        m = confusion_metrics([1, 0, 1, 0], [1, 1, 0, 0])
        assert m.accuracy == 0.5
        assert m.precision == 0.5
        assert m.recall == 0.5
        assert m.fpr == 0.5
        assert m.f1 == 0.5

    def test_all_correct(self):
        m = confusion_metrics([1, 0, 1], [1, 0, 1])
        assert m.accuracy == m.precision == m.recall == m.f1 == 1.0
        assert m.fpr == 0.0

    def test_printed_f1_from_pr_re_pair_civil(self):
        # counts realizing precision 59.7% and recall 49.8% exactly
        tp, fp, fn, tn = 49551, 33449, 49949, 50000
        labels = [1] * (tp + fn) + [0] * (fp + tn)
        preds = [1] * tp + [0] * fn + [1] * fp + [0] * tn
        m = confusion_metrics(labels, preds)
        assert round(100 * m.precision, 1) == 59.7
        assert round(100 * m.recall, 1) == 49.8
        assert round(100 * m.f1, 1) == 54.3

    def test_printed_f1_from_pr_re_pair_jigsaw(self):
        tp, fp, fn, tn = 4633, 6667, 492, 5000
        labels = [1] * (tp + fn) + [0] * (fp + tn)
        preds = [1] * tp + [0] * fn + [1] * fp + [0] * tn
        m = confusion_metrics(labels, preds)
        assert round(100 * m.precision, 1) == 41.0
        assert round(100 * m.recall, 1) == 90.4
        assert round(100 * m.f1, 1) == 56.4

    def test_undefined_cells_are_none_not_zero(self):
        m = confusion_metrics([0, 0], [0, 0])  # no positives anywhere
        assert m.precision is None
        assert m.recall is None
        assert m.f1 is None
        assert m.fpr == 0.0
        m2 = confusion_metrics([1, 1], [1, 1])  # no negatives
        assert m2.fpr is None

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            confusion_metrics([1, 0], [1])

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            confusion_metrics([], [])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            confusion_metrics([1, 2], [1, 0])

    @settings(max_examples=200)
    @given(
        st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60)
    )
    def test_f1_identity(self, pairs):
        labels = [a for a, _ in pairs]
        preds = [b for _, b in pairs]
        m = confusion_metrics(labels, preds)
        if m.f1 is not None:
            assert m.f1 == pytest.approx(
                2 * m.precision * m.recall / (m.precision + m.recall)
            )


class TestAucRoc:
    def test_perfect_separation(self):
        assert auc_roc([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0

    def test_all_ties_is_half(self):
        assert auc_roc([1, 0, 1, 0], [0.5, 0.5, 0.5, 0.5]) == 0.5

    def test_hand_counted_example(self):
        assert auc_roc([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]) == 0.75

    def test_degenerate_labels(self):
        with pytest.raises(DegenerateLabelsError):
            auc_roc([1, 1], [0.5, 0.6])

    @settings(max_examples=150)
    @given(
        st.lists(
            st.tuples(st.integers(0, 1), st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.5, 0.9, 1.0])),
            min_size=2,
            max_size=50,
        ).filter(lambda ps: 0 < sum(y for y, _ in ps) < len(ps))
    )
    def test_matches_brute_force_oracle(self, pairs):
        labels = [y for y, _ in pairs]
        scores = [s for _, s in pairs]
        assert auc_roc(labels, scores) == pytest.approx(
            brute_force_auc(labels, scores), abs=1e-12
        )


class TestBiasAttack:
    def test_gender_rule_application(self):
        spec = BiasAttackSpec(kind="gender")
        assert apply_bias_attack("He said his idea", spec) == "She said her idea"

    def test_reference_sentences(self):
        # hand-written expected outputs for the default pronoun map
        spec = BiasAttackSpec(kind="gender")
        cases = [
            ("he runs", "she runs"),
            ("I saw him", "I saw her"),
            ("his book", "her book"),
            ("he did it himself", "she did it herself"),
            ("HE SHOUTED", "SHE SHOUTED"),
            ("He and he", "She and she"),
            ("the hero", "the hero"),  # no whole-word match inside "hero"
            ("nothing gendered here", "nothing gendered here"),
            ("himself himself", "herself herself"),
            ("Tell him his plan; he agrees", "Tell her her plan; she agrees"),
        ]
        for before, after in cases:
            assert apply_bias_attack(before, spec) == after

    def test_race_attack_uses_name_map(self):
        spec = BiasAttackSpec(kind="race", name_map={"Todd": "Darnell"})
        assert apply_bias_attack("Todd spoke to Toddler Todd", spec) == (
            "Darnell spoke to Toddler Darnell"
        )

    def test_none_kind_is_identity(self):
        spec = BiasAttackSpec(kind="none")
        assert apply_bias_attack("He said his idea", spec) == "He said his idea"

    def test_idempotent(self):
        spec = BiasAttackSpec(kind="gender")
        text = "He told him his story himself"
        once = apply_bias_attack(text, spec)
        assert apply_bias_attack(once, spec) == once

    def test_targets_as_sources_rejected(self):
        with pytest.raises(ValueError):
            BiasAttackSpec(kind="gender", pronoun_map={"he": "she", "she": "he"})

    def test_case_preservation(self):
        spec = BiasAttackSpec(kind="race", name_map={"greg": "deshawn"})
        assert apply_bias_attack("GREG, Greg, greg", spec) == "DESHAWN, Deshawn, deshawn"

    def test_bundled_config_loads(self):
        from importlib import resources
        from guardgate.evaluation import load_attack_config

        with resources.as_file(
            resources.files("guardgate").joinpath("data/bias_attack.json")
        ) as path:
            spec = load_attack_config(path, kind="race")
        assert spec.name_map
        assert apply_bias_attack("Todd asked", spec) != "Todd asked"


class TestExtractLabel:
    def test_inappropriate(self):
        assert extract_label("Label: INAPPROPRIATE") == "inappropriate"

    def test_appropriate(self):
        assert extract_label("this is appropriate.") == "appropriate"

    def test_absent(self):
        assert extract_label("I cannot help with that.") is None

    def test_substring_hazard(self):
        # "inappropriate" contains "appropriate"; must never misread it
        assert extract_label("clearly INAPPROPRIATE content") == "inappropriate"
        assert extract_label("it is not inappropriate") == "inappropriate"

    @settings(max_examples=100)
    @given(st.text(max_size=80))
    def test_never_appropriate_when_inappropriate_present(self, prefix):
        out = prefix + " inappropriate"
        assert extract_label(out) == "inappropriate"


TOY_LEXICON = Lexicon.from_pairs(
    [("wugs", "toxic", 0.7), ("blick", "violent", 0.6), ("florp", "insult", 0.3)]
)


def synthetic_dataset(n: int = 200) -> list[Sample]:
    """Half the samples carry a flagged pattern (positive), half are clean."""
    samples = []
    for i in range(n):
        if i % 2 == 0:
            text = f"sample {i} has wugs inside" if i % 4 == 0 else f"sample {i} with blick"
            samples.append(Sample(id=f"s{i}", text=text, label=1))
        else:
            samples.append(Sample(id=f"s{i}", text=f"sample {i} is plain prose", label=0))
    return samples


class TestEvaluate:
    def test_matches_offline_oracle(self):
        dataset = synthetic_dataset(200)
        client = LexiconClient(TOY_LEXICON)
        result = evaluate(dataset, client)

        # offline oracle: score each text directly and count the table
        from guardgate.lexicon import score_text

        preds = [
            1 if score_text(s.text, TOY_LEXICON).raw_score >= 0.5 else 0 for s in dataset
        ]
        tp = sum(1 for s, p in zip(dataset, preds) if s.label == 1 and p == 1)
        fp = sum(1 for s, p in zip(dataset, preds) if s.label == 0 and p == 1)
        tn = sum(1 for s, p in zip(dataset, preds) if s.label == 0 and p == 0)
        fn = sum(1 for s, p in zip(dataset, preds) if s.label == 1 and p == 0)
        assert result.metrics.accuracy == (tp + tn) / 200
        assert result.metrics.precision == tp / (tp + fp)
        assert result.metrics.recall == tp / (tp + fn)
        scores = [score_text(s.text, TOY_LEXICON).raw_score for s in dataset]
        assert result.metrics.auc_roc == pytest.approx(
            brute_force_auc([s.label for s in dataset], scores), abs=1e-12
        )

    def test_always_inappropriate_client(self):
        class Always:
            def complete(self, system_prompt, user_prompt):
                return "INAPPROPRIATE"

        result = evaluate(synthetic_dataset(40), Always())
        assert result.metrics.recall == 1.0
        assert result.metrics.fpr == 1.0

    def test_gibberish_client_defaults_after_five_attempts(self):
        calls = []

        class Gibberish:
            def complete(self, system_prompt, user_prompt):
                calls.append(1)
                return "beep boop"

        dataset = synthetic_dataset(10)
        result = evaluate(dataset, Gibberish())
        assert all(s.attempts == 5 for s in result.samples)
        assert all(s.defaulted for s in result.samples)
        assert all(s.predicted == 1 for s in result.samples)
        assert result.metrics.recall == 1.0
        assert len(calls) == 5 * len(dataset)

    def test_client_errors_raise_after_budget(self):
        class Broken:
            def complete(self, system_prompt, user_prompt):
                raise ConnectionError("down")

        with pytest.raises(ClientError):
            evaluate(synthetic_dataset(4), Broken())

    def test_prompt_template_rendering(self):
        seen = {}

        class Capture:
            def complete(self, system_prompt, user_prompt):
                seen["system"] = system_prompt
                seen["user"] = user_prompt
                return "APPROPRIATE"

        evaluate([Sample(id="a", text="the {braces} text", label=0)], Capture())
        assert seen["system"] == DEFAULT_SYSTEM_PROMPT
        assert seen["user"].startswith("Label the following document as appropriateness")
        assert seen["user"].endswith("Document: the {braces} text")

    def test_attack_invariance_with_pronoun_free_lexicon(self):
        dataset = [
            Sample(id=f"g{i}", text=f"He said his wugsup idea {i}" if i % 2 else f"he florp {i}", label=i % 2)
            for i in range(60)
        ]
        client = LexiconClient(TOY_LEXICON)
        base = evaluate(dataset, client)
        attacked = evaluate(dataset, client, attack=BiasAttackSpec(kind="gender"))
        assert base.metrics == attacked.metrics


class TestDatasetCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text(
            'id,text,label\na,"hello, there",1\nb,plain,0\n', encoding="utf-8"
        )
        samples = load_dataset_csv(path)
        assert samples == [
            Sample(id="a", text="hello, there", label=1),
            Sample(id="b", text="plain", label=0),
        ]

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,text\na,hello\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_dataset_csv(path)

    def test_bad_label(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,text,label\na,hello,2\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_dataset_csv(path)
