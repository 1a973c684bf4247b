"""Retrieval distribution, classification head, and the marginal prediction.

The window is treated as a latent variable: relevance scores between the
projected target embedding and each non-empty window's mean-pooled
embedding feed a masked softmax, a ReLU-MLP head scores the target joined
with each window, and the positive probability is the retrieval-weighted
sum of the per-window head outputs. When every window is empty the head
runs once on the context-free join of the target alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import (
    CachingProvider,
    EmbeddingProvider,
    JoinConfig,
    JoinStats,
    ProjectionParams,
    embed_text,
    join_texts,
)
from .errors import AllMaskedError, DimensionMismatchError, UnknownIdError
from .tree import ConversationTree
from .windows import KernelShape, WindowKind, extract_windows, window_texts


def relevance(x_emb: np.ndarray, w_emb: np.ndarray) -> float:
    """Inner-product relevance score; symmetric in its arguments."""
    if x_emb.shape != w_emb.shape:
        raise DimensionMismatchError(
            f"relevance expects equal dims, got {x_emb.shape} and {w_emb.shape}"
        )
    return float(x_emb @ w_emb)


@dataclass(frozen=True)
class RetrievalDistribution:
    probs: np.ndarray
    mask: tuple[bool, ...]


def retrieval_distribution(scores, mask) -> RetrievalDistribution:
    """Masked softmax over window relevance scores.

    Masked-out entries get probability exactly 0; the rest are softmaxed
    with the max subtracted for stability, so adding a constant to every
    unmasked score leaves the result unchanged.
    """
    scores = np.asarray(scores, dtype=float)
    mask = tuple(bool(m) for m in mask)
    if scores.shape != (len(mask),):
        raise DimensionMismatchError(
            f"scores shape {scores.shape} does not match mask length {len(mask)}"
        )
    if not any(mask):
        raise AllMaskedError("retrieval distribution needs at least one unmasked window")
    keep = np.array(mask)
    probs = np.zeros_like(scores)
    live = scores[keep]
    live = np.exp(live - live.max())
    probs[keep] = live / live.sum()
    return RetrievalDistribution(probs=probs, mask=mask)


@dataclass
class HeadParams:
    """One-hidden-layer ReLU MLP with a two-class softmax output.

    w1: (hidden, d_in), b1: (hidden,), w2: (2, hidden), b2: (2,).
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def d_in(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def init(cls, d_in: int, hidden: int = 128, *, seed: int = 0) -> "HeadParams":
        rng = np.random.default_rng(seed)
        lim1 = np.sqrt(6.0 / (d_in + hidden))
        lim2 = np.sqrt(6.0 / (hidden + 2))
        return cls(
            w1=rng.uniform(-lim1, lim1, (hidden, d_in)),
            b1=np.zeros(hidden),
            w2=rng.uniform(-lim2, lim2, (2, hidden)),
            b2=np.zeros(2),
        )


def _softmax2(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


def classify_given_window(head: HeadParams, enc_emb: np.ndarray) -> np.ndarray:
    """Two-class probabilities [p(y=0), p(y=1)] for one encoder embedding."""
    if enc_emb.shape != (head.d_in,):
        raise DimensionMismatchError(
            f"head expects input of dim {head.d_in}, got {enc_emb.shape}"
        )
    hidden = np.maximum(head.w1 @ enc_emb + head.b1, 0.0)
    return _softmax2(head.w2 @ hidden + head.b2)


@dataclass
class ModelParams:
    """Everything that trains: retrieval projections plus the head."""

    projections: ProjectionParams
    head: HeadParams

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "w_comment": self.projections.w_comment,
            "w_window": self.projections.w_window,
            "head_w1": self.head.w1,
            "head_b1": self.head.b1,
            "head_w2": self.head.w2,
            "head_b2": self.head.b2,
        }

    def copy(self) -> "ModelParams":
        return ModelParams(
            projections=ProjectionParams(
                w_comment=self.projections.w_comment.copy(),
                w_window=self.projections.w_window.copy(),
            ),
            head=HeadParams(
                w1=self.head.w1.copy(),
                b1=self.head.b1.copy(),
                w2=self.head.w2.copy(),
                b2=self.head.b2.copy(),
            ),
        )

    def load_from(self, arrays: dict[str, np.ndarray]) -> None:
        mine = self.as_dict()
        for name, value in arrays.items():
            if mine[name].shape != value.shape:
                raise DimensionMismatchError(
                    f"parameter {name}: shape {value.shape} != expected {mine[name].shape}"
                )
            mine[name][...] = value

    @classmethod
    def init(cls, d_backbone: int, *, d_model: int | None = None,
             hidden: int = 128, seed: int = 0) -> "ModelParams":
        return cls(
            projections=ProjectionParams.init(d_backbone, d_model, seed=seed),
            head=HeadParams.init(d_backbone, hidden, seed=seed + 1),
        )


@dataclass(frozen=True)
class Prediction:
    """Marginal output plus its per-window decomposition.

    per_window lists (WindowKind, p(w|x), p(y=1|w,x)) for the non-empty
    windows only; empty windows carry retrieval probability exactly 0 and
    never reach the head. With fallback_used=False, p_positive equals the
    sum of the per-window products.
    """

    p_positive: float
    per_window: list
    fallback_used: bool


@dataclass
class ConversationClassifier:
    """Frozen backbone + trainable params + one kernel shape.

    shape=None is the context-free baseline: every prediction takes the
    fallback path (head on the target-only join), and the retrieval
    projections never matter.
    """

    provider: EmbeddingProvider
    params: ModelParams
    shape: KernelShape | None
    join_config: JoinConfig = field(default_factory=JoinConfig)
    join_stats: JoinStats = field(default_factory=JoinStats)

    @classmethod
    def create(cls, provider: EmbeddingProvider, shape: KernelShape | None, *,
               d_model: int | None = None, hidden: int = 128, seed: int = 0,
               cache: bool = True) -> "ConversationClassifier":
        if cache and not isinstance(provider, CachingProvider):
            provider = CachingProvider(provider)
        params = ModelParams.init(
            provider.dimension, d_model=d_model, hidden=hidden, seed=seed
        )
        return cls(provider=provider, params=params, shape=shape)

    def _join(self, target_text: str, member_texts) -> str:
        return join_texts(
            target_text,
            member_texts,
            self.join_config,
            provider_max=self.provider.max_tokens,
            stats=self.join_stats,
        )

    def forward(self, tree: ConversationTree, target_id: str) -> "ForwardCache":
        """Full forward pass, keeping every intermediate the backward pass needs."""
        target = tree.comments.get(target_id)
        if target is None:
            raise UnknownIdError(target_id)
        target_text = target.text

        window_set = extract_windows(tree, target_id, self.shape) if self.shape else None
        live: list[tuple[WindowKind, list[str]]] = []
        if window_set is not None:
            for window in window_set.windows:
                if not window.empty:
                    live.append((window.kind, window_texts(tree, window)))

        proj = self.params.projections
        head = self.params.head
        if not live:
            joined = self._join(target_text, [])
            e_vec = self._embed_joined_checked(joined)
            hidden_pre = head.w1 @ e_vec + head.b1
            hidden = np.maximum(hidden_pre, 0.0)
            q = _softmax2(head.w2 @ hidden + head.b2)
            return ForwardCache(
                fallback_used=True,
                p_positive=float(q[1]),
                kinds=[],
                probs=np.zeros(0),
                t_vec=None,
                x_vec=None,
                m_vecs=[],
                u_vecs=[],
                e_vecs=[e_vec],
                hidden_pres=[hidden_pre],
                hiddens=[hidden],
                qs=[q],
            )

        t_vec = embed_text(self.provider, target_text)
        x_vec = proj.w_comment @ t_vec
        kinds = [kind for kind, _ in live]
        m_vecs = [self.provider.embed(texts).mean(axis=0) for _, texts in live]
        u_vecs = [proj.w_window @ m for m in m_vecs]
        scores = np.array([x_vec @ u for u in u_vecs])
        dist = retrieval_distribution(scores, [True] * len(scores))

        e_vecs, hidden_pres, hiddens, qs = [], [], [], []
        for _, texts in live:
            e_vec = self._embed_joined_checked(self._join(target_text, texts))
            hidden_pre = head.w1 @ e_vec + head.b1
            hidden = np.maximum(hidden_pre, 0.0)
            q = _softmax2(head.w2 @ hidden + head.b2)
            e_vecs.append(e_vec)
            hidden_pres.append(hidden_pre)
            hiddens.append(hidden)
            qs.append(q)

        p_positive = float(sum(p * q[1] for p, q in zip(dist.probs, qs)))
        return ForwardCache(
            fallback_used=False,
            p_positive=p_positive,
            kinds=kinds,
            probs=dist.probs,
            t_vec=t_vec,
            x_vec=x_vec,
            m_vecs=m_vecs,
            u_vecs=u_vecs,
            e_vecs=e_vecs,
            hidden_pres=hidden_pres,
            hiddens=hiddens,
            qs=qs,
        )

    def _embed_joined_checked(self, joined: str) -> np.ndarray:
        vec = self.provider.embed_joined([joined])[0]
        if vec.shape != (self.provider.dimension,):
            raise DimensionMismatchError(
                f"provider {self.provider.name} returned shape {vec.shape}"
            )
        return vec

    def predict(self, tree: ConversationTree, target_id: str) -> Prediction:
        cache = self.forward(tree, target_id)
        per_window = [
            (kind, float(p), float(q[1]))
            for kind, p, q in zip(cache.kinds, cache.probs, cache.qs)
        ]
        return Prediction(
            p_positive=cache.p_positive,
            per_window=per_window,
            fallback_used=cache.fallback_used,
        )


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by training.gradients."""

    fallback_used: bool
    p_positive: float
    kinds: list
    probs: np.ndarray          # retrieval probabilities over live windows
    t_vec: np.ndarray | None   # backbone target embedding
    x_vec: np.ndarray | None   # projected target embedding
    m_vecs: list               # mean-pooled backbone window embeddings
    u_vecs: list               # projected window embeddings
    e_vecs: list               # encoder embeddings of the joins
    hidden_pres: list          # head pre-activations
    hiddens: list              # head post-ReLU activations
    qs: list                   # per-window class probabilities


def marginal_predict(model: ConversationClassifier, tree: ConversationTree,
                     target_id: str) -> Prediction:
    """Marginal probability that the target is a positive for the category."""
    return model.predict(tree, target_id)
