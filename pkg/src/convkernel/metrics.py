"""Binary classification metrics: accuracy, macro-F1, confusion counts.

Zero-division conventions for macro-F1: a class absent from both the
predictions and the labels contributes F1 = 1; any other zero denominator
in precision or recall contributes 0. Equivalently, per-class
F1 = 2*tp / (2*tp + fp + fn) with the 0/0 case mapped to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInputError, LengthMismatchError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def confusion(preds, labels) -> ConfusionMatrix:
    preds, labels = _check(preds, labels)
    tp = fp = tn = fn = 0
    for p, y in zip(preds, labels):
        if p == 1 and y == 1:
            tp += 1
        elif p == 1 and y == 0:
            fp += 1
        elif p == 0 and y == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def _check(preds, labels):
    preds, labels = list(preds), list(labels)
    if len(preds) != len(labels):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(labels)} labels")
    if not preds:
        raise EmptyInputError("no examples to score")
    bad = [v for v in preds + labels if v not in (0, 1)]
    if bad:
        raise ValueError(f"predictions and labels must be 0/1, got {bad[:5]}")
    return preds, labels


def accuracy(preds, labels) -> float:
    preds, labels = _check(preds, labels)
    return sum(p == y for p, y in zip(preds, labels)) / len(preds)


def _class_f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 1.0  # class absent on both sides
    return 2 * tp / denom


def macro_f1(preds, labels) -> float:
    """Unweighted mean of the F1 of class 1 and the F1 of class 0."""
    cm = confusion(preds, labels)
    f1_pos = _class_f1(cm.tp, cm.fp, cm.fn)
    f1_neg = _class_f1(cm.tn, cm.fn, cm.fp)
    return (f1_pos + f1_neg) / 2.0
