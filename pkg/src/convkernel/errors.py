"""Exception hierarchy.

Grouped by the exit-code category the CLI maps them to: DataError -> 3,
ProviderError -> 4, InternalError -> 5. Usage errors are argparse's own
(exit 2).
"""


class ConvKernelError(Exception):
    """Base class for all library errors."""


class DataError(ConvKernelError):
    """Invalid or inconsistent input data."""


class InternalError(ConvKernelError):
    """A library invariant was violated; indicates a bug or misuse."""


class ProviderError(ConvKernelError):
    """Embedding provider failure."""


# tree construction / traversal

class NoRootError(DataError):
    pass


class MultipleRootsError(DataError):
    def __init__(self, root_ids):
        self.root_ids = list(root_ids)
        super().__init__(f"multiple parentless comments: {self.root_ids}")


class DanglingParentError(DataError):
    def __init__(self, pairs):
        # pairs: [(comment_id, missing_parent_id), ...]
        self.pairs = list(pairs)
        super().__init__(
            "unresolved parent ids: "
            + ", ".join(f"{cid} -> {pid}" for cid, pid in self.pairs)
        )


class CycleDetectedError(DataError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(f"parent links form a cycle involving: {self.ids}")


class DuplicateIdError(DataError):
    def __init__(self, ids):
        self.ids = list(ids)
        super().__init__(f"duplicate comment ids: {self.ids}")


class UnknownIdError(DataError):
    def __init__(self, comment_id):
        self.comment_id = comment_id
        super().__init__(f"unknown comment id: {comment_id!r}")


# ingestion

class IoFailureError(DataError):
    pass


class MalformedRecordError(DataError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyDumpError(DataError):
    pass


class NoPositivesError(DataError):
    pass


class NoNegativesError(DataError):
    pass


class TooFewConversationsError(DataError):
    pass


class InvalidConfigError(DataError):
    pass


# embedding / model

class ProviderUnavailableError(ProviderError):
    pass


class DimensionMismatchError(DataError):
    pass


class EmptyWindowError(InternalError):
    pass


class AllMaskedError(InternalError):
    pass


# training / metrics

class EmptyDatasetError(DataError):
    pass


class LengthMismatchError(DataError):
    pass


class EmptyInputError(DataError):
    pass
