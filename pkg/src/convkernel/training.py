"""End-to-end training of projections and head on the marginal likelihood.

The loss is binary cross-entropy of the marginal positive probability, so
gradients flow through both the per-window head outputs and the retrieval
softmax weights. Backpropagation is hand-derived over this small graph
(the backbone is frozen and receives nothing); the finite-difference suite
in the tests is the safety net for every partial.

Backward pass, per example with live windows i:
    p  = sum_i pi_i * q_i[1]
    dL/dq_i[1] = dL/dp * pi_i             (head path)
    dL/dpi_i   = dL/dp * q_i[1]           (retrieval path)
    softmax:   ds_i = pi_i * (dpi_i - sum_k pi_k dpi_k)
    bilinear:  dx += ds_i * u_i ; du_i = ds_i * x
    dW_comment = dx  outer t ; dW_window += du_i outer m_i
with the usual dense/ReLU/softmax rules inside the head. Fallback examples
touch only the head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import HashEmbedder, JoinConfig, ProjectionParams
from .errors import (
    DataError,
    DimensionMismatchError,
    EmptyDatasetError,
    UnknownIdError,
)
from .metrics import accuracy, macro_f1
from .model import (
    ConversationClassifier,
    ForwardCache,
    HeadParams,
    ModelParams,
)
from .windows import KernelFamily, KernelShape

BCE_EPS = 1e-7
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 1e-2  # hash backbone default; sidecar backbones use 1e-5
    epochs: int = 3
    warmup_fraction: float = 0.10
    L: int = 3
    seed: int = 0
    family: KernelFamily | None = KernelFamily.ANC_SIB_CHILD

    # The 1e-5 rate targets fine-tuned transformer backbones; with the
    # frozen hash backbone only the small projections/head train, which
    # wants the larger rate.
    SIDECAR_LEARNING_RATE = 1e-5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must lie in [0, 1)")

    def shape(self) -> KernelShape | None:
        return None if self.family is None else KernelShape(self.family, self.L)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    val_macro_f1: float

    def as_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
            "val_macro_f1": self.val_macro_f1,
        }


@dataclass
class TrainState:
    params: ModelParams
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_macro_f1: float = -1.0


def bce_loss(p_positive: float, label: int) -> float:
    """Binary cross-entropy with the probability clamped to [eps, 1-eps]."""
    p = min(max(p_positive, BCE_EPS), 1.0 - BCE_EPS)
    return -(np.log(p) if label == 1 else np.log(1.0 - p))


def _bce_grad(p_positive: float, label: int) -> float:
    """dL/dp; zero outside the clamp interval (the loss is flat there)."""
    if p_positive < BCE_EPS or p_positive > 1.0 - BCE_EPS:
        return 0.0
    return -1.0 / p_positive if label == 1 else 1.0 / (1.0 - p_positive)


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.as_dict().items()}


def _backward_example(model: ConversationClassifier, cache: ForwardCache,
                      dldp: float, grads: dict[str, np.ndarray]) -> None:
    head = model.params.head

    if cache.fallback_used:
        dq1 = dldp
        live = [0]
        dq1s = [dq1]
    else:
        # retrieval path: through the softmax weights
        dpi = dldp * np.array([q[1] for q in cache.qs])
        pi = cache.probs
        ds = pi * (dpi - float(pi @ dpi))
        x = cache.x_vec
        dx = np.zeros_like(x)
        for ds_i, u_i, m_i in zip(ds, cache.u_vecs, cache.m_vecs):
            dx += ds_i * u_i
            grads["w_window"] += np.outer(ds_i * x, m_i)
        grads["w_comment"] += np.outer(dx, cache.t_vec)
        live = range(len(cache.qs))
        dq1s = [dldp * p for p in cache.probs]

    # head path, per live window (or the single fallback join)
    for i, dq1 in zip(live, dq1s):
        q = cache.qs[i]
        # softmax jacobian row for the positive class
        dz = dq1 * q[1] * (np.array([0.0, 1.0]) - q)
        grads["head_w2"] += np.outer(dz, cache.hiddens[i])
        grads["head_b2"] += dz
        dh = head.w2.T @ dz
        dpre = dh * (cache.hidden_pres[i] > 0)
        grads["head_w1"] += np.outer(dpre, cache.e_vecs[i])
        grads["head_b1"] += dpre


def gradients(model: ConversationClassifier, trees, batch) -> tuple[dict[str, np.ndarray], float]:
    """Mean-loss gradients over a batch; also returns the mean loss.

    trees: conversation_id -> ConversationTree. The frozen backbone gets no
    gradient by construction.
    """
    if not batch:
        raise EmptyDatasetError("gradient batch is empty")
    grads = zero_grads(model.params)
    total_loss = 0.0
    for example in batch:
        tree = trees.get(example.conversation_id)
        if tree is None:
            raise UnknownIdError(example.conversation_id)
        cache = model.forward(tree, example.target_id)
        total_loss += bce_loss(cache.p_positive, example.label)
        dldp = _bce_grad(cache.p_positive, example.label) / len(batch)
        _backward_example(model, cache, dldp, grads)
    return grads, total_loss / len(batch)


def lr_at(config: TrainConfig, step: int, total_steps: int) -> float:
    """Linear warm-up to the configured rate, constant afterwards (no decay)."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup_steps = int(round(config.warmup_fraction * total_steps))
    if warmup_steps <= 0 or step >= warmup_steps:
        return config.learning_rate
    return config.learning_rate * step / warmup_steps


def adam_step(state: TrainState, grads: dict[str, np.ndarray], lr: float) -> None:
    state.step += 1
    t = state.step
    params = state.params.as_dict()
    for name, g in grads.items():
        state.m[name] = ADAM_BETA1 * state.m[name] + (1 - ADAM_BETA1) * g
        state.v[name] = ADAM_BETA2 * state.v[name] + (1 - ADAM_BETA2) * g * g
        m_hat = state.m[name] / (1 - ADAM_BETA1**t)
        v_hat = state.v[name] / (1 - ADAM_BETA2**t)
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _validate(model: ConversationClassifier, trees, examples) -> tuple[float, float, float]:
    losses, preds, labels = [], [], []
    for ex in examples:
        p = model.forward(trees[ex.conversation_id], ex.target_id).p_positive
        losses.append(bce_loss(p, ex.label))
        preds.append(1 if p >= 0.5 else 0)
        labels.append(ex.label)
    return float(np.mean(losses)), accuracy(preds, labels), macro_f1(preds, labels)


def train(model: ConversationClassifier, trees, train_examples, val_examples,
          config: TrainConfig, on_epoch=None) -> TrainState:
    """Adam over seeded-shuffled epochs; retains the best-validation-macro-F1
    checkpoint and restores it into the model before returning.

    on_epoch, when given, is called with each EpochStats as it completes.
    Fully deterministic given the seed and a deterministic provider.
    """
    if not train_examples:
        raise EmptyDatasetError("training set is empty")
    if not val_examples:
        raise EmptyDatasetError("validation set is empty")

    state = TrainState(
        params=model.params,
        m={k: np.zeros_like(a) for k, a in model.params.as_dict().items()},
        v={k: np.zeros_like(a) for k, a in model.params.as_dict().items()},
    )
    rng = np.random.default_rng(config.seed)
    n = len(train_examples)
    n_batches = (n + config.batch_size - 1) // config.batch_size
    total_steps = config.epochs * n_batches
    best_params = model.params.copy()

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_losses = []
        for b in range(n_batches):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            batch = [train_examples[i] for i in idx]
            grads, batch_loss = gradients(model, trees, batch)
            lr = lr_at(config, state.step, total_steps)
            adam_step(state, grads, lr)
            epoch_losses.append(batch_loss)

        val_loss, val_acc, val_f1 = _validate(model, trees, val_examples)
        state.history.append(
            EpochStats(
                epoch=epoch,
                train_loss=float(np.mean(epoch_losses)),
                val_loss=val_loss,
                val_accuracy=val_acc,
                val_macro_f1=val_f1,
            )
        )
        if on_epoch is not None:
            on_epoch(state.history[-1])
        if val_f1 > state.best_val_macro_f1:
            state.best_val_macro_f1 = val_f1
            state.best_epoch = epoch
            best_params = model.params.copy()

    model.params.load_from(best_params.as_dict())
    return state


# checkpoint container: versioned JSON, row-major float lists. json floats
# round-trip exactly (repr-based), so save -> load is bit-exact.

def save_checkpoint(path, model: ConversationClassifier, config: TrainConfig,
                    history=None, best_epoch: int | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "kind": "convkernel-checkpoint",
        "family": config.family.value if config.family else None,
        "L": config.L,
        "config": {
            "batch_size": config.batch_size,
            "learning_rate": config.learning_rate,
            "epochs": config.epochs,
            "warmup_fraction": config.warmup_fraction,
            "seed": config.seed,
        },
        "provider": model.provider.describe(),
        "join": {
            "per_comment_tokens": model.join_config.per_comment_tokens,
            "max_tokens": model.join_config.max_tokens,
        },
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in model.params.as_dict().items()
        },
        "history": [h.as_dict() for h in history] if history else [],
        "best_epoch": best_epoch,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path, provider=None) -> tuple[ConversationClassifier, dict]:
    """Rebuild a classifier from a checkpoint file.

    provider=None re-creates the hash backbone recorded in the file; remote
    backbones must be passed in (their URL is deployment config, not model
    state). The provider's dimension must match the recorded one.
    """
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version: {payload.get('format_version')}")

    recorded = payload["provider"]
    if provider is None:
        name = recorded["name"]
        if not name.startswith("hash-"):
            raise DataError(
                f"checkpoint was trained with provider {name!r}; pass a matching provider"
            )
        provider = HashEmbedder(int(recorded["dimension"]))
    if provider.dimension != recorded["dimension"]:
        raise DimensionMismatchError(
            f"provider dimension {provider.dimension} != checkpoint's {recorded['dimension']}"
        )

    arrays = {
        name: np.array(spec["data"], dtype=float).reshape(spec["shape"])
        for name, spec in payload["params"].items()
    }
    params = ModelParams(
        projections=ProjectionParams(
            w_comment=arrays["w_comment"], w_window=arrays["w_window"]
        ),
        head=HeadParams(
            w1=arrays["head_w1"], b1=arrays["head_b1"],
            w2=arrays["head_w2"], b2=arrays["head_b2"],
        ),
    )
    family = KernelFamily(payload["family"]) if payload["family"] else None
    shape = KernelShape(family, payload["L"]) if family else None
    join = JoinConfig(
        per_comment_tokens=payload["join"]["per_comment_tokens"],
        max_tokens=payload["join"]["max_tokens"],
    )
    model = ConversationClassifier(
        provider=_maybe_cache(provider),
        params=params,
        shape=shape,
        join_config=join,
    )
    return model, payload


def _maybe_cache(provider):
    from .embedding import CachingProvider

    return provider if isinstance(provider, CachingProvider) else CachingProvider(provider)
