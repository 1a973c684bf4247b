"""HTTP face of the encoder: /embed, /embed_joined, /health.

Responses follow the provider wire protocol: {"dim": int, "vectors":
[[float]]} with vectors in request order. /embed_joined adds a
"truncated" count. Bad requests get 400; everything answers 503 until
the model has finished loading.
"""

import argparse
import threading

import uvicorn
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .config import ServiceConfig
from .encoder import TransformerEncoder


def create_app(config: ServiceConfig, encoder=None, loader=None) -> FastAPI:
    """Build the app. With `encoder` given it is ready immediately;
    otherwise `loader` (default TransformerEncoder) runs in a background
    thread at startup and routes answer 503 until it returns."""
    state = {"encoder": encoder}

    async def lifespan(app):
        if state["encoder"] is None:
            make = loader or TransformerEncoder

            def load():
                state["encoder"] = make(config)

            threading.Thread(target=load, daemon=True).start()
        yield

    app = FastAPI(title="embed-service", lifespan=lifespan)

    def ready() -> TransformerEncoder:
        enc = state["encoder"]
        if enc is None:
            raise HTTPException(status_code=503, detail="model is loading")
        return enc

    async def texts_from(request: Request) -> list[str]:
        try:
            payload = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body is not valid JSON")
        if not isinstance(payload, dict) or "texts" not in payload:
            raise HTTPException(status_code=400, detail='missing "texts" field')
        texts = payload["texts"]
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise HTTPException(status_code=400, detail='"texts" must be a list of strings')
        if not texts:
            raise HTTPException(status_code=400, detail='"texts" is empty')
        if len(texts) > config.max_batch:
            raise HTTPException(
                status_code=400,
                detail=f"batch of {len(texts)} exceeds max_batch={config.max_batch}",
            )
        return texts

    @app.get("/health")
    async def health():
        enc = state["encoder"]
        if enc is None:
            return JSONResponse({"status": "loading"}, status_code=503)
        return {"status": "ok", "dim": enc.dim, "model": config.model}

    @app.post("/embed")
    async def embed(request: Request):
        enc = ready()
        texts = await texts_from(request)
        vectors = enc.encode(texts)
        return {"dim": enc.dim, "vectors": vectors.tolist()}

    @app.post("/embed_joined")
    async def embed_joined(request: Request):
        enc = ready()
        texts = await texts_from(request)
        vectors, truncated = enc.encode_joined(texts)
        return {"dim": enc.dim, "vectors": vectors.tolist(), "truncated": truncated}

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-service",
        description="serve frozen transformer sentence embeddings over HTTP",
    )
    parser.add_argument("--model", required=True,
                        help="model identifier or local checkpoint directory")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8191)
    parser.add_argument("--max-batch", type=int, default=64)
    parser.add_argument("--max-seq-len", type=int, default=512)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--mean-pool", action="store_true",
                        help="mean-pool over tokens instead of the first position")
    args = parser.parse_args(argv)

    config = ServiceConfig(
        model=args.model,
        port=args.port,
        max_batch=args.max_batch,
        max_sequence_length=args.max_seq_len,
        device=args.device,
        mean_pool=args.mean_pool,
    )
    uvicorn.run(create_app(config), host=args.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
