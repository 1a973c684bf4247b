import numpy as np
import pytest

from convkernel import Comment, ConversationTree, build_tree


def mk(comment_id, parent_id, timestamp, *, conv="t0", text="", author="u",
       categories=(), score=None) -> Comment:
    return Comment(
        id=comment_id,
        parent_id=parent_id,
        conversation_id=conv,
        timestamp=timestamp,
        author=author,
        text=text or f"text of {comment_id}",
        categories=frozenset(categories),
        score=score,
    )


# Reference tree used throughout:
#   r(t=0) -> a(t=1), b(t=2); a -> c(t=3), d(t=4), e(t=5); c -> f(t=6)
T0_SPEC = [
    ("r", None, 0),
    ("a", "r", 1),
    ("b", "r", 2),
    ("c", "a", 3),
    ("d", "a", 4),
    ("e", "a", 5),
    ("f", "c", 6),
]


@pytest.fixture
def t0_comments() -> list[Comment]:
    return [mk(cid, pid, ts) for cid, pid, ts in T0_SPEC]


@pytest.fixture
def t0() -> ConversationTree:
    return build_tree([mk(cid, pid, ts) for cid, pid, ts in T0_SPEC])


def random_tree(rng: np.random.Generator, n_nodes: int, conv="rand") -> ConversationTree:
    """Random tree: node i>0 attaches to a uniform earlier node. Timestamps
    are drawn from a small range so sort-order tie-breaks get exercised."""
    timestamps = rng.integers(0, max(2, n_nodes // 2), size=n_nodes)
    comments = [mk("n000", None, int(timestamps[0]), conv=conv)]
    for i in range(1, n_nodes):
        parent = f"n{int(rng.integers(0, i)):03d}"
        comments.append(mk(f"n{i:03d}", parent, int(timestamps[i]), conv=conv))
    return build_tree(comments)
