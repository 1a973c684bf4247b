"""Seeded synthetic conversations with a planted structural signal.

Each generated tree gets one target comment. For label-1 targets a signal
token is appended to the text of one comment inside the target's
signal-zone window (the window the configured kernel would extract, with
the configured L); label-0 trees never contain the token anywhere. The
target's own text never contains it either, so a target-text-only model
sits at chance while a model reading the right window separates perfectly
(at label_noise 0).

Clean labels are balanced 50/50 within one example; noise flips the
observed label afterwards, so observed balance drifts only by the flips.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfigError
from .ingestion import LabeledExample
from .tree import Comment, ConversationTree, build_tree
from .windows import FAMILY_KINDS, KernelShape, WindowKind, extract_windows

# Filler vocabulary; must never contain the signal token.
WORDS = (
    "the a of to and in that for on with as is was are this from at after "
    "before about over under between again still never always maybe quite "
    "rather enough point reply thread topic news update question answer "
    "agree wrong right think said wrote reads seems likely doubt source"
).split()

_ZONE_FAMILY = {
    kind: family for family, kinds in FAMILY_KINDS.items() for kind in kinds
}

_REGROW_ATTEMPTS = 200


@dataclass(frozen=True)
class SyntheticConfig:
    n_trees: int = 100
    nodes_per_tree: tuple[int, int] = (8, 16)
    branching_bias: float = 0.5
    signal_zone: WindowKind = WindowKind.ANCESTOR
    signal_token: str = "zarqglyph"
    label_noise: float = 0.0
    seed: int = 0
    window_size: int = 3

    def __post_init__(self):
        lo, hi = self.nodes_per_tree
        if lo < 2 or hi < lo:
            raise InvalidConfigError(f"nodes_per_tree range invalid: {self.nodes_per_tree}")
        if not 0 <= self.label_noise < 0.5:
            raise InvalidConfigError(f"label_noise must lie in [0, 0.5), got {self.label_noise}")
        if self.n_trees < 1:
            raise InvalidConfigError("n_trees must be positive")
        if self.branching_bias < 0:
            raise InvalidConfigError("branching_bias must be non-negative")
        if self.window_size < 1:
            raise InvalidConfigError("window_size must be >= 1")
        if not self.signal_token or self.signal_token in WORDS:
            raise InvalidConfigError(f"signal_token {self.signal_token!r} collides with filler vocabulary")

    @property
    def shape(self) -> KernelShape:
        return KernelShape(_ZONE_FAMILY[self.signal_zone], self.window_size)


def _random_text(rng: np.random.Generator) -> str:
    length = int(rng.integers(6, 13))
    return " ".join(WORDS[i] for i in rng.integers(0, len(WORDS), length))


def _grow_tree(rng: np.random.Generator, conv_id: str, n: int,
               bias: float) -> ConversationTree:
    """Attach node i to a seeded-random earlier node; weights favor nodes
    that already have children when bias > 0."""
    comments = []
    child_count = np.zeros(n)
    for i in range(n):
        if i == 0:
            parent = None
        else:
            weights = 1.0 + bias * child_count[:i]
            probs = weights / weights.sum()
            j = int(rng.choice(i, p=probs))
            child_count[j] += 1
            parent = f"{conv_id}-n{j:03d}"
        comments.append(
            Comment(
                id=f"{conv_id}-n{i:03d}",
                parent_id=parent,
                conversation_id=conv_id,
                timestamp=i,
                author=f"user{int(rng.integers(0, 10))}",
                text=_random_text(rng),
            )
        )
    return build_tree(comments)


def _zone_members(tree: ConversationTree, target_id: str, config: SyntheticConfig):
    ws = extract_windows(tree, target_id, config.shape)
    for window in ws.windows:
        if window.kind == config.signal_zone:
            return list(window.member_ids)
    raise InvalidConfigError(f"zone {config.signal_zone} not in family {config.shape.family}")


def gen_synthetic(config: SyntheticConfig):
    """Generate (trees, labeled examples) per the planted-signal scheme.

    Byte-identical output for identical config and seed. Raises
    InvalidConfigError when the zone is unattainable at the configured
    tree sizes (e.g. sibling windows on two-node trees).
    """
    rng = np.random.default_rng(config.seed)
    lo, hi = config.nodes_per_tree

    clean_labels = np.zeros(config.n_trees, dtype=int)
    clean_labels[: config.n_trees // 2] = 1
    rng.shuffle(clean_labels)

    trees: dict[str, ConversationTree] = {}
    examples: list[LabeledExample] = []
    for t in range(config.n_trees):
        conv_id = f"syn-{t:04d}"
        tree = target_id = members = None
        for _ in range(_REGROW_ATTEMPTS):
            candidate = _grow_tree(rng, conv_id, int(rng.integers(lo, hi + 1)), config.branching_bias)
            options = [
                cid
                for cid in sorted(candidate.comments)
                if _zone_members(candidate, cid, config)
            ]
            if options:
                tree = candidate
                target_id = options[int(rng.integers(0, len(options)))]
                members = _zone_members(tree, target_id, config)
                break
        if tree is None:
            raise InvalidConfigError(
                f"no tree of {config.nodes_per_tree} nodes yields a non-empty "
                f"{config.signal_zone.value} window after {_REGROW_ATTEMPTS} attempts"
            )

        clean = int(clean_labels[t])
        if clean == 1:
            chosen = members[int(rng.integers(0, len(members)))]
            comments = [
                replace(c, text=f"{c.text} {config.signal_token}") if c.id == chosen else c
                for c in tree.comments.values()
            ]
            tree = build_tree(comments)

        observed = clean
        if config.label_noise > 0 and rng.random() < config.label_noise:
            observed = 1 - clean

        trees[conv_id] = tree
        examples.append(
            LabeledExample(
                conversation_id=conv_id,
                target_id=target_id,
                label=observed,
                category=f"synthetic:{config.signal_zone.value}",
            )
        )
    return trees, examples
