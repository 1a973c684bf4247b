import pytest
import torch
from fastapi.testclient import TestClient
from transformers import BertConfig, BertModel, BertTokenizer

from embed_service import ServiceConfig, TransformerEncoder, create_app

# small wordpiece vocabulary; enough structure for real tokenization
# (continuations, [UNK] fallbacks) without any downloaded weights
WORDS = [
    "the", "a", "cat", "dog", "sat", "ran", "on", "mat", "fast", "slow",
    "hello", "world", "tree", "reply", "comment", "thread", "root", "branch",
    "leaf", "word", "text", "one", "two", "three", "deep", "zig",
    "##s", "##ing", "##ed", "##zag",
]


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    """A tiny randomly-initialized BERT checkpoint on disk, so the
    from_pretrained path is exercised without network access."""
    d = tmp_path_factory.mktemp("tiny-bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", *WORDS]
    (d / "vocab.txt").write_text("\n".join(vocab))
    tokenizer = BertTokenizer(str(d / "vocab.txt"))

    torch.manual_seed(0)
    bert = BertModel(
        BertConfig(
            vocab_size=len(vocab),
            hidden_size=32,
            num_hidden_layers=2,
            num_attention_heads=2,
            intermediate_size=64,
            max_position_embeddings=96,
        )
    )
    tokenizer.save_pretrained(d)
    bert.save_pretrained(d)
    return str(d)


@pytest.fixture(scope="session")
def config(model_dir) -> ServiceConfig:
    return ServiceConfig(model=model_dir, max_batch=16, max_sequence_length=48)


@pytest.fixture(scope="session")
def encoder(config) -> TransformerEncoder:
    return TransformerEncoder(config)


@pytest.fixture()
def client(config, encoder):
    with TestClient(create_app(config, encoder=encoder)) as c:
        yield c
