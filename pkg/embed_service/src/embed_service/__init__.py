"""Embedding sidecar: frozen transformer vectors over HTTP."""

from .config import ServiceConfig
from .encoder import TransformerEncoder
from .server import create_app, main

__version__ = "0.1.0"
__all__ = ["ServiceConfig", "TransformerEncoder", "create_app", "main"]
