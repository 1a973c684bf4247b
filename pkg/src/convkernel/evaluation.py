"""Model evaluation reports: accuracy, macro-F1, confusion, retrieval stats.

The retrieval block reports the mean probability the retriever assigned to
each window kind, averaged over every evaluated example with masked
windows contributing 0. It diagnoses which context the model leans on.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyDatasetError
from .metrics import ConfusionMatrix, accuracy, confusion, macro_f1
from .model import ConversationClassifier

DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    macro_f1: float
    confusion: ConfusionMatrix
    retrieval: dict[str, float]
    fallback_rate: float
    n: int
    per_example: list[dict]

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.as_dict(),
            "retrieval": self.retrieval,
            "fallback_rate": self.fallback_rate,
            "n": self.n,
            "examples": self.per_example,
        }

    def format_table(self) -> str:
        lines = [
            f"examples    {self.n}",
            f"accuracy    {self.accuracy:.4f}",
            f"macro-F1    {self.macro_f1:.4f}",
            "confusion   tp={tp} fp={fp} tn={tn} fn={fn}".format(**self.confusion.as_dict()),
            f"fallbacks   {self.fallback_rate:.4f}",
        ]
        if self.retrieval:
            lines.append("mean retrieval probability per window:")
            for kind, prob in self.retrieval.items():
                lines.append(f"  {kind:<10} {prob:.4f}")
        return "\n".join(lines)


def evaluate(model: ConversationClassifier, trees, examples,
             threshold: float = DECISION_THRESHOLD) -> EvalReport:
    """Deterministic report over a labeled dataset.

    threshold is diagnostic only; the shipped decision rule stays 0.5.
    """
    examples = list(examples)
    if not examples:
        raise EmptyDatasetError("nothing to evaluate")

    kinds = [k.value for k in model.shape.kinds] if model.shape else []
    kind_sums = {k: 0.0 for k in kinds}
    preds, labels, per_example = [], [], []
    fallbacks = 0
    for ex in examples:
        prediction = model.predict(trees[ex.conversation_id], ex.target_id)
        pred = 1 if prediction.p_positive >= threshold else 0
        preds.append(pred)
        labels.append(ex.label)
        if prediction.fallback_used:
            fallbacks += 1
        for kind, p_w, _ in prediction.per_window:
            kind_sums[kind.value] += p_w
        per_example.append(
            {
                "conversation_id": ex.conversation_id,
                "target_id": ex.target_id,
                "label": ex.label,
                "p_positive": prediction.p_positive,
            }
        )

    n = len(examples)
    return EvalReport(
        accuracy=accuracy(preds, labels),
        macro_f1=macro_f1(preds, labels),
        confusion=confusion(preds, labels),
        retrieval={k: kind_sums[k] / n for k in kinds},
        fallback_rate=fallbacks / n,
        n=n,
        per_example=per_example,
    )
