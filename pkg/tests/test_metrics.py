"""Accuracy, confusion counts, and macro-F1.

Hand oracle for the main case, preds=[1,0,0,0] vs labels=[1,1,0,0]:
tp=1 fp=0 tn=2 fn=1; F1+ = 2/(2+0+1) = 2/3, F1- = 4/(4+1+0) = 4/5,
macro = 11/15. Zero-denominator conventions: 0/0 -> 1 (vacuously
perfect class), otherwise 0.
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import accuracy_score, f1_score

from convkernel import (
    EmptyInputError,
    LengthMismatchError,
    accuracy,
    confusion,
    macro_f1,
)

from oracles import oracle_metrics

binary_pairs = st.lists(
    st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=200
)


class TestConfusion:
    def test_counts(self):
        cm = confusion([1, 0, 0, 0], [1, 1, 0, 0])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (1, 0, 2, 1)
        assert cm.total == 4
        assert cm.as_dict() == {"tp": 1, "fp": 0, "tn": 2, "fn": 1}

    def test_rejects_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            confusion([1], [1, 0])

    def test_rejects_empty(self):
        with pytest.raises(EmptyInputError):
            confusion([], [])

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            confusion([2], [1])
        with pytest.raises(ValueError):
            confusion([1], [-1])


class TestAccuracy:
    def test_hand_case(self):
        assert accuracy([1, 0, 0, 0], [1, 1, 0, 0]) == 0.75

    def test_perfect_and_worst(self):
        assert accuracy([1, 0], [1, 0]) == 1.0
        assert accuracy([1, 0], [0, 1]) == 0.0


class TestMacroF1:
    def test_hand_case(self):
        assert macro_f1([1, 0, 0, 0], [1, 1, 0, 0]) == pytest.approx(11 / 15, abs=1e-15)

    def test_degenerate_all_positive_predictions(self):
        # balanced labels: F1+ = 2/3, F1- = 0 -> macro = 1/3
        assert macro_f1([1, 1, 1, 1], [1, 1, 0, 0]) == pytest.approx(1 / 3, abs=1e-15)

    def test_perfect(self):
        assert macro_f1([0, 1, 1], [0, 1, 1]) == 1.0

    def test_absent_class_is_vacuously_perfect(self):
        # no positives anywhere: F1+ is 0/0 -> 1 by convention
        assert macro_f1([0, 0], [0, 0]) == 1.0
        assert macro_f1([1, 1], [1, 1]) == 1.0

    def test_wrong_singleton(self):
        # tp=0 fp=1 fn=0: F1+ = 0/1 = 0; tn=0: F1- = 0/1 = 0
        assert macro_f1([1], [0]) == 0.0

    @given(binary_pairs)
    @settings(max_examples=200, deadline=None)
    def test_matches_counting_oracle(self, pairs):
        preds = [p for p, _ in pairs]
        labels = [y for _, y in pairs]
        acc, f1 = oracle_metrics(preds, labels)
        assert accuracy(preds, labels) == pytest.approx(acc, abs=1e-12)
        assert macro_f1(preds, labels) == pytest.approx(f1, abs=1e-12)

    @given(binary_pairs)
    @settings(max_examples=100, deadline=None)
    def test_matches_sklearn(self, pairs):
        preds = [p for p, _ in pairs]
        labels = [y for _, y in pairs]
        assert accuracy(preds, labels) == pytest.approx(
            accuracy_score(labels, preds), abs=1e-12
        )
        expected = f1_score(
            labels, preds, labels=[1, 0], average="macro", zero_division=1.0
        )
        assert macro_f1(preds, labels) == pytest.approx(expected, abs=1e-12)
