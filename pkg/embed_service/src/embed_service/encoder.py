"""Frozen transformer encoder.

Weights load once and never train here: eval mode, no dropout, no grad.
A lock serializes forward passes so concurrent HTTP requests see the
model as a pure function. Vectors leave as float64 so the JSON wire
round-trips them exactly.
"""

import re
import threading

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .config import ServiceConfig

# literal marker strings in pre-joined sequences; mapped to the model's
# native special tokens, whatever those are spelled like
_MARKER = re.compile(r"\[CLS\]|\[SEP\]")


class TransformerEncoder:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModel.from_pretrained(config.model)
        self.model.eval()
        self.model.to(config.device)
        if self.tokenizer.cls_token_id is None or self.tokenizer.sep_token_id is None:
            raise ValueError(
                f"{config.model}: tokenizer has no CLS/SEP special tokens; "
                "cannot map joined-sequence markers"
            )
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return int(self.model.config.hidden_size)

    def encode(self, texts: list[str]) -> np.ndarray:
        """One pooled vector per text, in order. Shape (n, dim), float64."""
        enc = self.tokenizer(
            list(texts),
            padding=True,
            truncation=True,
            max_length=self.config.max_sequence_length,
            return_tensors="pt",
        )
        return self._forward(enc["input_ids"], enc["attention_mask"])

    def encode_joined(self, texts: list[str]) -> tuple[np.ndarray, int]:
        """Encode pre-joined sequences; returns (vectors, n_truncated).

        Sequences whose mapped token ids exceed max_sequence_length are
        tail-truncated (head kept) and counted.
        """
        limit = self.config.max_sequence_length
        sequences, truncated = [], 0
        for text in texts:
            ids = self.tokenize_joined(text)
            if not ids:
                ids = [self.tokenizer.cls_token_id]
            if len(ids) > limit:
                truncated += 1
                ids = ids[:limit]
            sequences.append(ids)

        width = max(len(s) for s in sequences)
        pad = self.tokenizer.pad_token_id or 0
        input_ids = torch.full((len(sequences), width), pad, dtype=torch.long)
        attention_mask = torch.zeros((len(sequences), width), dtype=torch.long)
        for i, seq in enumerate(sequences):
            input_ids[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
            attention_mask[i, : len(seq)] = 1
        return self._forward(input_ids, attention_mask), truncated

    def tokenize_joined(self, text: str) -> list[int]:
        """Token ids for a joined sequence, markers mapped, no truncation.

        Segments between markers are tokenized whole so tokenizers that
        care about word boundaries (byte-BPE) see natural context.
        """
        marker_ids = {
            "[CLS]": self.tokenizer.cls_token_id,
            "[SEP]": self.tokenizer.sep_token_id,
        }
        ids: list[int] = []
        pos = 0
        for match in _MARKER.finditer(text):
            ids += self._segment_ids(text[pos : match.start()])
            ids.append(marker_ids[match.group()])
            pos = match.end()
        ids += self._segment_ids(text[pos:])
        return ids

    def _segment_ids(self, segment: str) -> list[int]:
        segment = segment.strip()
        if not segment:
            return []
        return self.tokenizer(segment, add_special_tokens=False)["input_ids"]

    def _forward(self, input_ids, attention_mask) -> np.ndarray:
        device = self.config.device
        with self._lock, torch.no_grad():
            hidden = self.model(
                input_ids=input_ids.to(device),
                attention_mask=attention_mask.to(device),
            ).last_hidden_state
            if self.config.mean_pool:
                mask = attention_mask.to(hidden.device).to(hidden.dtype).unsqueeze(-1)
                pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1)
            else:
                pooled = hidden[:, 0, :]
        return pooled.double().cpu().numpy()
