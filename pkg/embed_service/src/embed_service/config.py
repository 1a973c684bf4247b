"""Service configuration."""

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class ServiceConfig:
    """Settings for one service process.

    `model` is anything transformers' from_pretrained accepts: a hub
    identifier or a local checkpoint directory. Pooling is first-position
    (the [CLS] slot) unless mean_pool is set.
    """

    model: str
    port: int = 8191
    max_batch: int = 64
    max_sequence_length: int = 512
    device: str = "cpu"
    mean_pool: bool = False

    def __post_init__(self):
        if not self.model:
            raise ValueError("model identifier is empty")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.max_sequence_length < 2:
            # room for at least the two special tokens
            raise ValueError(
                f"max_sequence_length must be >= 2, got {self.max_sequence_length}"
            )
        if not 0 < self.port < 65536:
            raise ValueError(f"port out of range: {self.port}")
