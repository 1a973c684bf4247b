"""Comment and conversation-tree data model.

A conversation is a rooted tree: every comment except the root carries the
id of the comment it replies to. Construction validates the tree invariants
once; the resulting ConversationTree is immutable and all traversals are
pure, so concurrent readers are safe.

All sibling/children/neighbor orderings are (timestamp ascending, id
ascending). Ancestor order is structural: parent first, root last.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import (
    CycleDetectedError,
    DanglingParentError,
    DuplicateIdError,
    MultipleRootsError,
    NoRootError,
    UnknownIdError,
)

# Community tags a comment can carry. Anything else is treated as unknown
# and never contributes to labeled datasets.
KNOWN_CATEGORIES = frozenset(
    {
        "insightful",
        "informative",
        "interesting",
        "funny",
        "off-topic",
        "flamebait",
        "troll",
        "redundant",
    }
)


@dataclass(frozen=True, slots=True)
class Comment:
    """One forum post.

    score, when present, must lie in [1, 5]; categories is a free set of
    tags (only KNOWN_CATEGORIES members count for dataset building).
    """

    id: str
    parent_id: str | None
    conversation_id: str
    timestamp: int
    author: str
    text: str
    categories: frozenset[str] = field(default_factory=frozenset)
    score: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("comment id must be non-empty")
        if self.parent_id == self.id:
            raise ValueError(f"comment {self.id!r} lists itself as parent")
        if self.score is not None and not 1 <= self.score <= 5:
            raise ValueError(f"comment {self.id!r}: score {self.score} not in [1, 5]")
        if not isinstance(self.categories, frozenset):
            object.__setattr__(self, "categories", frozenset(self.categories))

    @property
    def sort_key(self) -> tuple[int, str]:
        return (self.timestamp, self.id)


class ConversationTree:
    """Validated rooted tree over comments.

    Use build_tree() to construct; the constructor trusts its inputs.
    """

    __slots__ = ("comments", "root_id", "children_index", "conversation_id")

    def __init__(self, comments, root_id, children_index):
        self.comments: dict[str, Comment] = comments
        self.root_id: str = root_id
        self.children_index: dict[str, list[str]] = children_index
        self.conversation_id: str = comments[root_id].conversation_id

    def __len__(self):
        return len(self.comments)

    def __contains__(self, comment_id):
        return comment_id in self.comments

    def _require(self, comment_id: str) -> Comment:
        try:
            return self.comments[comment_id]
        except KeyError:
            raise UnknownIdError(comment_id) from None

    def ancestors(self, comment_id: str) -> list[str]:
        """Ids on the path to the root, parent first. Empty for the root."""
        node = self._require(comment_id)
        chain = []
        while node.parent_id is not None:
            chain.append(node.parent_id)
            node = self.comments[node.parent_id]
        return chain

    def siblings(self, comment_id: str) -> list[str]:
        """Same-parent comments excluding comment_id, in (timestamp, id) order."""
        node = self._require(comment_id)
        if node.parent_id is None:
            return []
        return [c for c in self.children_index[node.parent_id] if c != comment_id]

    def children(self, comment_id: str) -> list[str]:
        """Direct children in (timestamp, id) order."""
        self._require(comment_id)
        return list(self.children_index.get(comment_id, []))

    def k_hop(self, comment_id: str, k: int) -> list[str]:
        """Nodes at undirected tree distance exactly k, in (timestamp, id) order.

        k=1 equals parent + children as a set.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self._require(comment_id)
        seen = {comment_id}
        frontier = [comment_id]
        for _ in range(k):
            nxt = []
            for cur in frontier:
                node = self.comments[cur]
                if node.parent_id is not None and node.parent_id not in seen:
                    seen.add(node.parent_id)
                    nxt.append(node.parent_id)
                for child in self.children_index.get(cur, []):
                    if child not in seen:
                        seen.add(child)
                        nxt.append(child)
            frontier = nxt
            if not frontier:
                break
        return sorted(frontier, key=lambda c: self.comments[c].sort_key)

    def depth(self, comment_id: str) -> int:
        return len(self.ancestors(comment_id))


def build_tree(comments) -> ConversationTree:
    """Build and validate a ConversationTree from a list of Comments.

    Deterministic: any ordering of the same comment multiset yields an
    identical tree. Raises DuplicateIdError, DanglingParentError,
    CycleDetectedError, NoRootError or MultipleRootsError (see errors
    module); mixing conversation ids raises ValueError.
    """
    comments = list(comments)
    if not comments:
        raise NoRootError("no comments given")

    conv_ids = {c.conversation_id for c in comments}
    if len(conv_ids) > 1:
        raise ValueError(f"comments span multiple conversations: {sorted(conv_ids)}")

    by_id: dict[str, Comment] = {}
    duplicates = []
    for c in comments:
        if c.id in by_id:
            duplicates.append(c.id)
        by_id[c.id] = c
    if duplicates:
        raise DuplicateIdError(sorted(set(duplicates)))

    dangling = [
        (c.id, c.parent_id)
        for c in by_id.values()
        if c.parent_id is not None and c.parent_id not in by_id
    ]
    if dangling:
        raise DanglingParentError(sorted(dangling))

    roots = sorted(cid for cid, c in by_id.items() if c.parent_id is None)
    if not roots:
        # Every node has a resolvable parent, so following parent links from
        # any node must eventually revisit a node: a cycle.
        raise CycleDetectedError(_find_cycle(by_id))
    if len(roots) > 1:
        raise MultipleRootsError(roots)
    root_id = roots[0]

    children_index: dict[str, list[str]] = {}
    for c in by_id.values():
        if c.parent_id is not None:
            children_index.setdefault(c.parent_id, []).append(c.id)
    for kids in children_index.values():
        kids.sort(key=lambda cid: by_id[cid].sort_key)

    # Reachability from the root: unreached nodes sit on parent-link cycles.
    reached = {root_id}
    queue = deque([root_id])
    while queue:
        cur = queue.popleft()
        for child in children_index.get(cur, []):
            if child not in reached:
                reached.add(child)
                queue.append(child)
    if len(reached) != len(by_id):
        unreached = {cid: by_id[cid] for cid in by_id if cid not in reached}
        raise CycleDetectedError(_find_cycle(unreached))

    return ConversationTree(by_id, root_id, children_index)


def _find_cycle(by_id: dict[str, Comment]) -> list[str]:
    """Return the ids on one parent-link cycle within by_id."""
    visited: set[str] = set()
    for start in sorted(by_id):
        if start in visited:
            continue
        path: list[str] = []
        pos: dict[str, int] = {}
        cur: str | None = start
        while cur is not None and cur in by_id and cur not in visited:
            if cur in pos:
                return sorted(path[pos[cur]:])
            pos[cur] = len(path)
            path.append(cur)
            cur = by_id[cur].parent_id
        visited.update(path)
    # Callers only invoke this when a cycle must exist.
    return sorted(by_id)
