"""Kernel-shaped context windows around a target comment.

Two families ship:

  ANC_SIB_CHILD -> [ancestor, sibling, children] windows
  ONE_TWO_HOP   -> [one_hop, two_hop] windows

Every window holds at most L member ids. The ancestor window is ordered
structurally (parent first, nearest ancestors win when depth > L); the
other four kinds take the first L candidates in (timestamp, id) order.
Empty windows stay in the WindowSet with mask False so the window count is
constant per family, which the retrieval softmax relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .tree import ConversationTree


class KernelFamily(enum.Enum):
    ANC_SIB_CHILD = "anc_sib_child"
    ONE_TWO_HOP = "one_two_hop"


class WindowKind(enum.Enum):
    ANCESTOR = "ancestor"
    SIBLING = "sibling"
    CHILDREN = "children"
    ONE_HOP = "one_hop"
    TWO_HOP = "two_hop"


FAMILY_KINDS = {
    KernelFamily.ANC_SIB_CHILD: (
        WindowKind.ANCESTOR,
        WindowKind.SIBLING,
        WindowKind.CHILDREN,
    ),
    KernelFamily.ONE_TWO_HOP: (WindowKind.ONE_HOP, WindowKind.TWO_HOP),
}


@dataclass(frozen=True, slots=True)
class KernelShape:
    family: KernelFamily
    L: int = 3

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"window cap L must be >= 1, got {self.L}")

    @property
    def kinds(self) -> tuple[WindowKind, ...]:
        return FAMILY_KINDS[self.family]


@dataclass(frozen=True, slots=True)
class Window:
    kind: WindowKind
    member_ids: tuple[str, ...]

    def __len__(self):
        return len(self.member_ids)

    @property
    def empty(self) -> bool:
        return not self.member_ids


@dataclass(frozen=True, slots=True)
class WindowSet:
    target_id: str
    windows: tuple[Window, ...]

    @property
    def mask(self) -> tuple[bool, ...]:
        return tuple(not w.empty for w in self.windows)

    @property
    def all_empty(self) -> bool:
        return not any(self.mask)


def extract_windows(tree: ConversationTree, target_id: str, shape: KernelShape) -> WindowSet:
    """Extract the target's context windows for one kernel shape.

    Raises UnknownIdError when the target is not in the tree.
    """
    L = shape.L
    candidates = {
        WindowKind.ANCESTOR: lambda: tree.ancestors(target_id),
        WindowKind.SIBLING: lambda: tree.siblings(target_id),
        WindowKind.CHILDREN: lambda: tree.children(target_id),
        WindowKind.ONE_HOP: lambda: tree.k_hop(target_id, 1),
        WindowKind.TWO_HOP: lambda: tree.k_hop(target_id, 2),
    }
    windows = tuple(
        Window(kind=kind, member_ids=tuple(candidates[kind]()[:L]))
        for kind in shape.kinds
    )
    return WindowSet(target_id=target_id, windows=windows)


def window_texts(tree: ConversationTree, window: Window) -> list[str]:
    return [tree.comments[cid].text for cid in window.member_ids]
