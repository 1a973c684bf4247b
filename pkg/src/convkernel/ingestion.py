"""Archived-dump parsing, balanced binary datasets, conversation splits.

Dump format (one JSON object per line, UTF-8, field names fixed):
  {"id": str, "parent_id": str|null, "conversation_id": str,
   "timestamp": int, "author": str, "text": str,
   "categories": [str], "score": int|null}

Label sidecar format, one object per line:
  {"conversation_id": str, "target_id": str, "label": 0|1}

Splits are at conversation granularity so no tree straddles train,
validation and test. Balanced datasets draw negatives only from comments
carrying some *other* known category tag; untagged comments are presumed
unrated, not negative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyDumpError,
    IoFailureError,
    MalformedRecordError,
    NoNegativesError,
    NoPositivesError,
    TooFewConversationsError,
)
from .tree import KNOWN_CATEGORIES, Comment, ConversationTree, build_tree

DUMP_FIELDS = ("id", "parent_id", "conversation_id", "timestamp", "author",
               "text", "categories", "score")


@dataclass(frozen=True, slots=True)
class LabeledExample:
    conversation_id: str
    target_id: str
    label: int
    category: str = ""

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ValueError(f"need three non-negative ratios, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {sum(self.ratios)}")


def _comment_from_record(record: dict) -> Comment:
    missing = [f for f in DUMP_FIELDS if f not in record]
    if missing:
        raise ValueError(f"missing fields: {missing}")
    if not isinstance(record["timestamp"], int) or isinstance(record["timestamp"], bool):
        raise ValueError(f"timestamp must be an integer, got {record['timestamp']!r}")
    if not isinstance(record["categories"], list):
        raise ValueError("categories must be a list of strings")
    return Comment(
        id=record["id"],
        parent_id=record["parent_id"],
        conversation_id=record["conversation_id"],
        timestamp=record["timestamp"],
        author=record["author"],
        text=record["text"],
        categories=frozenset(record["categories"]),
        score=record["score"],
    )


def parse_dump(path, *, strict: bool = True):
    """Parse a JSONL dump into comments grouped by conversation.

    Returns (groups, errors) where groups maps conversation_id to its
    comments sorted by id, and errors lists MalformedRecordError instances
    for skipped lines. strict=True raises on the first malformed line
    instead of collecting. Raises IoFailureError / EmptyDumpError.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc

    groups: dict[str, list[Comment]] = {}
    errors: list[MalformedRecordError] = []
    n_records = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record is not a JSON object")
            comment = _comment_from_record(record)
        except (ValueError, TypeError) as exc:
            err = MalformedRecordError(lineno, str(exc))
            if strict:
                raise err from None
            errors.append(err)
            continue
        groups.setdefault(comment.conversation_id, []).append(comment)
        n_records += 1

    if n_records == 0 and not errors:
        raise EmptyDumpError(f"{path} contains no records")

    groups = {cid: sorted(cs, key=lambda c: c.id) for cid, cs in sorted(groups.items())}
    return groups, errors


def comment_to_record(comment: Comment) -> dict:
    return {
        "id": comment.id,
        "parent_id": comment.parent_id,
        "conversation_id": comment.conversation_id,
        "timestamp": comment.timestamp,
        "author": comment.author,
        "text": comment.text,
        "categories": sorted(comment.categories),
        "score": comment.score,
    }


def write_dump(path, trees) -> None:
    """Emit trees as a JSONL dump, ordered by (conversation_id, id)."""
    with open(path, "w", encoding="utf-8") as fh:
        for cid in sorted(trees):
            for comment_id in sorted(trees[cid].comments):
                record = comment_to_record(trees[cid].comments[comment_id])
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_labels(path, examples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "conversation_id": ex.conversation_id,
                        "target_id": ex.target_id,
                        "label": ex.label,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_labels(path, category: str = "") -> list[LabeledExample]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoFailureError(f"cannot read {path}: {exc}") from exc
    examples = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            examples.append(
                LabeledExample(
                    conversation_id=rec["conversation_id"],
                    target_id=rec["target_id"],
                    label=int(rec["label"]),
                    category=category,
                )
            )
        except (ValueError, TypeError, KeyError) as exc:
            raise MalformedRecordError(lineno, str(exc)) from None
    if not examples:
        raise EmptyDumpError(f"{path} contains no labels")
    return examples


def build_trees(groups) -> dict[str, ConversationTree]:
    return {cid: build_tree(comments) for cid, comments in groups.items()}


def build_binary_dataset(trees, category: str, seed: int) -> list[LabeledExample]:
    """Balanced positives/negatives for one category.

    Positives: every comment tagged with `category`. Negatives: a seeded
    uniform sample, of equal count, from comments tagged with a different
    known category and not with `category`; untagged comments never appear.
    When negative candidates run short, positives are seeded-downsampled to
    keep |positives| == |negatives|. Output order is a seeded shuffle.
    """
    if category not in KNOWN_CATEGORIES:
        raise ValueError(f"unknown category {category!r}; known: {sorted(KNOWN_CATEGORIES)}")
    positives, negatives = [], []
    for cid in sorted(trees):
        for comment_id in sorted(trees[cid].comments):
            tags = trees[cid].comments[comment_id].categories & KNOWN_CATEGORIES
            if not tags:
                continue
            if category in tags:
                positives.append((cid, comment_id))
            else:
                negatives.append((cid, comment_id))
    if not positives:
        raise NoPositivesError(f"no comments tagged {category!r}")
    if not negatives:
        raise NoNegativesError(f"no comments tagged with a category other than {category!r}")

    rng = np.random.default_rng(seed)
    k = min(len(positives), len(negatives))
    if len(positives) > k:
        keep = rng.choice(len(positives), size=k, replace=False)
        positives = [positives[i] for i in sorted(keep)]
    pick = rng.choice(len(negatives), size=k, replace=False)
    sampled_negatives = [negatives[i] for i in sorted(pick)]

    examples = [
        LabeledExample(conversation_id=cid, target_id=tid, label=1, category=category)
        for cid, tid in positives
    ] + [
        LabeledExample(conversation_id=cid, target_id=tid, label=0, category=category)
        for cid, tid in sampled_negatives
    ]
    order = rng.permutation(len(examples))
    return [examples[i] for i in order]


def split_conversations(trees, spec: SplitSpec):
    """Partition conversation ids into (train, validation, test) sets.

    Seeded shuffle, then cumulative-rounding cuts: each part's size is
    within one conversation of its exact ratio share.
    """
    ids = sorted(trees)
    if len(ids) < 3:
        raise TooFewConversationsError(f"need at least 3 conversations, got {len(ids)}")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    r1, r2, _ = spec.ratios
    n = len(ids)
    cut1 = int(round(n * r1))
    cut2 = int(round(n * (r1 + r2)))
    return (
        set(shuffled[:cut1]),
        set(shuffled[cut1:cut2]),
        set(shuffled[cut2:]),
    )
