"""Command-line entry point.

Subcommands: ingest, gen-synthetic, train, eval, predict, explain.
Exit codes: 0 success, 2 usage, 3 bad data, 4 provider failure,
5 internal error. Failures print one line to stderr in the form
"error: <ErrorClass>: <message>".
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .embedding import HashEmbedder, RemoteProvider
from .errors import ConvKernelError, DataError, InternalError, ProviderError
from .evaluation import evaluate
from .ingestion import (
    SplitSpec,
    build_binary_dataset,
    build_trees,
    load_labels,
    parse_dump,
    split_conversations,
    write_dump,
    write_labels,
)
from .model import ConversationClassifier
from .synthetic import SyntheticConfig, gen_synthetic
from .training import TrainConfig, load_checkpoint, save_checkpoint, train
from .windows import KernelFamily, WindowKind, extract_windows

REMOTE_URL_ENV = "CK_REMOTE_URL"

KERNEL_CHOICES = {
    "anc-sib-child": KernelFamily.ANC_SIB_CHILD,
    "one-two-hop": KernelFamily.ONE_TWO_HOP,
}
ZONE_CHOICES = {
    "ancestor": WindowKind.ANCESTOR,
    "sibling": WindowKind.SIBLING,
    "children": WindowKind.CHILDREN,
    "one-hop": WindowKind.ONE_HOP,
    "two-hop": WindowKind.TWO_HOP,
}


class UsageError(ConvKernelError):
    """Semantic argument error that argparse cannot catch itself."""


def _plural(n: int, word: str) -> str:
    return f"{n:,} {word}" if n == 1 else f"{n:,} {word}s"


def _resolve_remote_url(args) -> str:
    url = args.remote_url or os.environ.get(REMOTE_URL_ENV)
    if not url:
        raise UsageError(
            f"--provider remote needs --remote-url or ${REMOTE_URL_ENV}"
        )
    return url


def _make_provider(args):
    """Backbone for training. 'hash' is the offline default."""
    if args.provider == "remote":
        return RemoteProvider(_resolve_remote_url(args))
    return HashEmbedder(dimension=args.hash_dim)


def _make_load_provider(args):
    """Backbone override for checkpoint-loading commands.

    None lets load_checkpoint rebuild the hash backbone recorded in the
    file; remote backbones always need a URL from the caller.
    """
    if args.provider == "remote":
        return RemoteProvider(_resolve_remote_url(args))
    if args.provider == "hash":
        return HashEmbedder(dimension=args.hash_dim)
    return None


def _load_examples(args, trees):
    if args.labels:
        examples = load_labels(args.labels, category=args.category or "")
    elif args.category:
        examples = build_binary_dataset(trees, args.category, args.seed)
    else:
        raise UsageError("need --labels or --category to build a dataset")
    for ex in examples:
        tree = trees.get(ex.conversation_id)
        if tree is None:
            raise DataError(
                f"label references unknown conversation {ex.conversation_id!r}"
            )
        if ex.target_id not in tree.comments:
            raise DataError(
                f"label references unknown comment {ex.target_id!r} "
                f"in conversation {ex.conversation_id!r}"
            )
    return examples


def _load_trees(path):
    groups, _ = parse_dump(path, strict=True)
    return build_trees(groups)


def cmd_ingest(args) -> int:
    groups, errors = parse_dump(args.dump, strict=args.strict)
    trees = build_trees(groups)
    n_comments = sum(len(t.comments) for t in trees.values())
    for err in errors[:10]:
        print(f"warning: {err}", file=sys.stderr)
    if len(errors) > 10:
        print(f"warning: {len(errors) - 10} more malformed lines", file=sys.stderr)

    stats = {
        "conversations": len(trees),
        "comments": n_comments,
        "malformed_lines": len(errors),
    }
    if args.labels:
        examples = _load_examples(args, trees)
        stats["examples"] = len(examples)
        stats["positives"] = sum(ex.label for ex in examples)
    if args.out:
        write_dump(args.out, trees)

    if args.json:
        print(json.dumps(stats))
    else:
        line = (
            f"{_plural(stats['conversations'], 'conversation')}, "
            f"{_plural(stats['comments'], 'comment')}, "
            f"{_plural(stats['malformed_lines'], 'error')}"
        )
        if "examples" in stats:
            line += (
                f"; {_plural(stats['examples'], 'labeled example')} "
                f"({stats['positives']:,} positive)"
            )
        print(line)
    return 0


def cmd_gen_synthetic(args) -> int:
    config = SyntheticConfig(
        n_trees=args.trees,
        nodes_per_tree=(args.min_nodes, args.max_nodes),
        branching_bias=args.branching_bias,
        signal_zone=ZONE_CHOICES[args.zone],
        signal_token=args.signal_token,
        label_noise=args.noise,
        seed=args.seed,
        window_size=args.window_size,
    )
    trees, examples = gen_synthetic(config)
    write_dump(args.out, trees)
    write_labels(args.labels, examples)
    print(
        f"{_plural(len(trees), 'conversation')}, "
        f"{_plural(len(examples), 'labeled example')} "
        f"(zone={args.zone}, noise={args.noise})"
    )
    return 0


def cmd_train(args) -> int:
    provider = _make_provider(args)
    trees = _load_trees(args.dump)
    examples = _load_examples(args, trees)

    config = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.lr,
        epochs=args.epochs,
        warmup_fraction=args.warmup,
        L=args.window_size,
        seed=args.seed,
        family=KERNEL_CHOICES[args.kernel],
    )
    train_ids, val_ids, test_ids = split_conversations(trees, SplitSpec(seed=args.seed))
    train_set = [ex for ex in examples if ex.conversation_id in train_ids]
    val_set = [ex for ex in examples if ex.conversation_id in val_ids]
    test_set = [ex for ex in examples if ex.conversation_id in test_ids]
    print(
        f"split: {len(train_set)} train / {len(val_set)} val / {len(test_set)} test"
    )

    model = ConversationClassifier.create(
        provider, config.shape(), hidden=args.hidden_width, seed=args.seed
    )

    def show(stats):
        print(
            f"epoch {stats.epoch:>3}  train_loss {stats.train_loss:.4f}  "
            f"val_loss {stats.val_loss:.4f}  val_acc {stats.val_accuracy:.4f}  "
            f"val_f1 {stats.val_macro_f1:.4f}"
        )

    state = train(model, trees, train_set, val_set, config, on_epoch=show)
    print(f"best epoch {state.best_epoch} (val macro-F1 {state.best_val_macro_f1:.4f})")

    if test_set:
        report = evaluate(model, trees, test_set)
        print("test split:")
        print(report.format_table())

    save_checkpoint(args.checkpoint, model, config,
                    history=state.history, best_epoch=state.best_epoch)
    print(f"checkpoint written to {args.checkpoint}")
    return 0


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint, provider=_make_load_provider(args))
    trees = _load_trees(args.dump)
    examples = _load_examples(args, trees)
    report = evaluate(model, trees, examples)
    if args.json:
        print(json.dumps(report.as_dict()))
    else:
        print(report.format_table())
    return 0


def _predict_one(args):
    model, _ = load_checkpoint(args.checkpoint, provider=_make_load_provider(args))
    trees = _load_trees(args.dump)
    tree = trees.get(args.conversation)
    if tree is None:
        raise DataError(f"unknown conversation {args.conversation!r}")
    return model, tree, model.predict(tree, args.target)


def cmd_predict(args) -> int:
    _, _, prediction = _predict_one(args)
    label = 1 if prediction.p_positive >= 0.5 else 0
    if args.json:
        print(
            json.dumps(
                {
                    "conversation_id": args.conversation,
                    "target_id": args.target,
                    "p_positive": prediction.p_positive,
                    "label": label,
                    "fallback_used": prediction.fallback_used,
                }
            )
        )
    else:
        note = " (no-context fallback)" if prediction.fallback_used else ""
        print(f"p(positive) = {prediction.p_positive:.4f} -> label {label}{note}")
    return 0


def cmd_explain(args) -> int:
    model, tree, prediction = _predict_one(args)
    label = 1 if prediction.p_positive >= 0.5 else 0

    windows = []
    if model.shape is not None:
        window_set = extract_windows(tree, args.target, model.shape)
        by_kind = {kind: (p_w, q1) for kind, p_w, q1 in prediction.per_window}
        for window in window_set.windows:
            p_w, q1 = by_kind.get(window.kind, (0.0, None))
            windows.append(
                {
                    "kind": window.kind.value,
                    "members": list(window.member_ids),
                    "retrieval_prob": p_w,
                    "p_positive_given_window": q1,
                }
            )

    if args.json:
        print(
            json.dumps(
                {
                    "conversation_id": args.conversation,
                    "target_id": args.target,
                    "p_positive": prediction.p_positive,
                    "label": label,
                    "fallback_used": prediction.fallback_used,
                    "windows": windows,
                }
            )
        )
        return 0

    print(f"p(positive) = {prediction.p_positive:.4f} -> label {label}")
    if prediction.fallback_used:
        print("no usable context windows; classified from the target alone")
    for w in windows:
        members = f"[{', '.join(w['members'])}]" if w["members"] else "(empty)"
        if w["p_positive_given_window"] is None:
            print(f"  {w['kind']:<10} p(w|x)={w['retrieval_prob']:.4f}  {members}")
        else:
            print(
                f"  {w['kind']:<10} p(w|x)={w['retrieval_prob']:.4f}  "
                f"p(y=1|w,x)={w['p_positive_given_window']:.4f}  {members}"
            )
    return 0


def _add_provider_args(sub, *, loading: bool) -> None:
    choices = ["auto", "hash", "remote"] if loading else ["hash", "remote"]
    sub.add_argument("--provider", choices=choices,
                     default="auto" if loading else "hash",
                     help="embedding backbone" + (
                         " (auto: use the one recorded in the checkpoint)"
                         if loading else ""))
    sub.add_argument("--remote-url", default=None,
                     help=f"remote provider base URL (or ${REMOTE_URL_ENV})")
    sub.add_argument("--hash-dim", type=int, default=256,
                     help="dimension of the hash backbone")


def _add_dataset_args(sub) -> None:
    sub.add_argument("--dump", required=True, help="JSONL comment dump")
    sub.add_argument("--labels", default=None, help="JSONL label sidecar")
    sub.add_argument("--category", default=None,
                     help="build a balanced dataset from this category tag")
    sub.add_argument("--seed", type=int, default=0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convkernel",
        description="Classify comments in conversation trees using "
                    "kernel-shaped context windows.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ingest", help="parse and validate a comment dump")
    p.add_argument("--dump", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--category", default=None)
    p.add_argument("--out", default=None, help="write the normalized dump here")
    p.add_argument("--strict", action="store_true",
                   help="fail on the first malformed line")
    p.add_argument("--json", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)

    p = commands.add_parser("gen-synthetic",
                            help="generate a planted-signal corpus")
    p.add_argument("--out", required=True, help="dump output path")
    p.add_argument("--labels", required=True, help="label sidecar output path")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--zone", choices=sorted(ZONE_CHOICES), default="ancestor")
    p.add_argument("--signal-token", default="zarqglyph")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--min-nodes", type=int, default=8)
    p.add_argument("--max-nodes", type=int, default=16)
    p.add_argument("--branching-bias", type=float, default=0.5)
    p.add_argument("--window-size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_synthetic)

    p = commands.add_parser("train", help="train on a labeled dump")
    _add_dataset_args(p)
    p.add_argument("--kernel", choices=sorted(KERNEL_CHOICES),
                   default="anc-sib-child")
    p.add_argument("--window-size", type=int, default=3)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--warmup", type=float, default=TrainConfig.warmup_fraction)
    p.add_argument("--hidden-width", type=int, default=128)
    p.add_argument("--checkpoint", required=True, help="where to save the model")
    _add_provider_args(p, loading=False)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("eval", help="evaluate a checkpoint on a labeled dump")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--json", action="store_true")
    _add_provider_args(p, loading=True)
    p.set_defaults(func=cmd_eval)

    for name, func, help_text in (
        ("predict", cmd_predict, "classify one comment"),
        ("explain", cmd_explain, "classify one comment and show its windows"),
    ):
        p = commands.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--dump", required=True)
        p.add_argument("--conversation", required=True)
        p.add_argument("--target", required=True)
        p.add_argument("--json", action="store_true")
        _add_provider_args(p, loading=True)
        p.set_defaults(func=func)

    return parser


def _fail(code: int, exc: BaseException) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(2, exc)
    except ProviderError as exc:
        return _fail(4, exc)
    except DataError as exc:
        return _fail(3, exc)
    except InternalError as exc:
        return _fail(5, exc)
    except ConvKernelError as exc:
        return _fail(5, exc)


if __name__ == "__main__":
    sys.exit(main())
