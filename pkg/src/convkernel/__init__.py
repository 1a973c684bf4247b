"""Context-window classification for tree-structured conversations.

Builds conversation trees from comment dumps, extracts kernel-shaped
context windows around a target comment, and classifies the target by
marginalizing a small trainable head over a learned retrieval
distribution on those windows. The embedding backbone is pluggable and
frozen; only the two projections and the classification head train.
"""

from .embedding import (
    BEGIN_MARKER,
    SEP_MARKER,
    CachingProvider,
    EmbeddingProvider,
    HashEmbedder,
    JoinConfig,
    JoinStats,
    ProjectionParams,
    RemoteProvider,
    embed_comment,
    embed_joined,
    embed_text,
    embed_window,
    join_texts,
)
from .errors import (
    AllMaskedError,
    ConvKernelError,
    CycleDetectedError,
    DanglingParentError,
    DataError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyDatasetError,
    EmptyDumpError,
    EmptyInputError,
    EmptyWindowError,
    InternalError,
    InvalidConfigError,
    IoFailureError,
    LengthMismatchError,
    MalformedRecordError,
    MultipleRootsError,
    NoNegativesError,
    NoPositivesError,
    NoRootError,
    ProviderError,
    ProviderUnavailableError,
    TooFewConversationsError,
    UnknownIdError,
)
from .evaluation import EvalReport, evaluate
from .ingestion import (
    LabeledExample,
    SplitSpec,
    build_binary_dataset,
    build_trees,
    load_labels,
    parse_dump,
    split_conversations,
    write_dump,
    write_labels,
)
from .metrics import ConfusionMatrix, accuracy, confusion, macro_f1
from .model import (
    ConversationClassifier,
    HeadParams,
    ModelParams,
    Prediction,
    RetrievalDistribution,
    classify_given_window,
    marginal_predict,
    relevance,
    retrieval_distribution,
)
from .synthetic import SyntheticConfig, gen_synthetic
from .training import (
    TrainConfig,
    TrainState,
    bce_loss,
    gradients,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .tree import KNOWN_CATEGORIES, Comment, ConversationTree, build_tree
from .windows import (
    FAMILY_KINDS,
    KernelFamily,
    KernelShape,
    Window,
    WindowKind,
    WindowSet,
    extract_windows,
    window_texts,
)

__version__ = "0.1.0"

__all__ = [
    "AllMaskedError",
    "BEGIN_MARKER",
    "CachingProvider",
    "Comment",
    "ConfusionMatrix",
    "ConversationClassifier",
    "ConversationTree",
    "ConvKernelError",
    "CycleDetectedError",
    "DanglingParentError",
    "DataError",
    "DimensionMismatchError",
    "DuplicateIdError",
    "EmptyDatasetError",
    "EmptyDumpError",
    "EmptyInputError",
    "EmptyWindowError",
    "EvalReport",
    "FAMILY_KINDS",
    "HashEmbedder",
    "HeadParams",
    "InternalError",
    "InvalidConfigError",
    "IoFailureError",
    "JoinConfig",
    "JoinStats",
    "KNOWN_CATEGORIES",
    "KernelFamily",
    "KernelShape",
    "LengthMismatchError",
    "LabeledExample",
    "MalformedRecordError",
    "ModelParams",
    "MultipleRootsError",
    "NoNegativesError",
    "NoPositivesError",
    "NoRootError",
    "Prediction",
    "ProjectionParams",
    "ProviderError",
    "ProviderUnavailableError",
    "RemoteProvider",
    "RetrievalDistribution",
    "SEP_MARKER",
    "SplitSpec",
    "SyntheticConfig",
    "TooFewConversationsError",
    "TrainConfig",
    "TrainState",
    "UnknownIdError",
    "Window",
    "WindowKind",
    "WindowSet",
    "accuracy",
    "bce_loss",
    "build_binary_dataset",
    "build_tree",
    "build_trees",
    "classify_given_window",
    "confusion",
    "embed_comment",
    "embed_joined",
    "embed_text",
    "embed_window",
    "evaluate",
    "extract_windows",
    "gen_synthetic",
    "gradients",
    "join_texts",
    "load_checkpoint",
    "load_labels",
    "macro_f1",
    "marginal_predict",
    "parse_dump",
    "relevance",
    "retrieval_distribution",
    "save_checkpoint",
    "split_conversations",
    "train",
    "window_texts",
    "write_dump",
    "write_labels",
]
