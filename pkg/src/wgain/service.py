"""HTTP inference service around one loaded checkpoint.

The model is loaded once at startup and never mutated afterwards; request
handlers share it read-only, so concurrent identical requests give identical
answers. Masks arrive as grayscale PNG (0 = missing) or, for programmatic
clients, as the run-length text convention.
"""
from __future__ import annotations

import io
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from PIL import Image, UnidentifiedImageError

from .checkpoints import load_checkpoint, state_hash
from .corpus import preprocess_image
from .errors import ValidationError, WgainError
from .evaluation import damaged_view
from .masks import (
    Mask,
    mask_from_png_bytes,
    mask_from_rle,
    standard_eval_scenarios,
)
from .model import WgainModel, inpaint_image
from .seeding import named_stream

DEFAULT_MAX_PAYLOAD = 8 * 1024 * 1024


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _decode_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ApiError(400, "bad_image", f"could not decode image: {exc}") from exc
    return arr


def _decode_mask(data: bytes, content_type: str | None, filename: str | None) -> Mask:
    is_rle = (content_type or "").startswith("text/") or (filename or "").endswith(".rle")
    try:
        if is_rle:
            return mask_from_rle(data.decode("ascii"))
        return mask_from_png_bytes(data)
    except (WgainError, UnicodeDecodeError, ValueError) as exc:
        raise ApiError(400, "bad_mask", f"could not decode mask: {exc}") from exc


def _encode_png(image: np.ndarray) -> bytes:
    arr = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def create_app(
    model: WgainModel,
    max_payload_bytes: int = DEFAULT_MAX_PAYLOAD,
    allow_resize: bool = False,
) -> FastAPI:
    app = FastAPI(title="wgain inference service")
    # browser clients are served from their own origin during development
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Inference-Time-Ms"],
    )
    checkpoint_hash = state_hash(model)
    input_side = model.generator_config.input_side
    presets = {
        name: spec.describe() for name, spec in standard_eval_scenarios(input_side).items()
    }

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "checkpoint": checkpoint_hash, "input_side": input_side}

    @app.get("/meta")
    async def meta():
        return {
            "input_side": input_side,
            "sigma": model.sigma,
            "checkpoint": checkpoint_hash,
            "scenario_presets": presets,
            "mask_convention": {
                "format": "png-gray8",
                "missing_value": 0,
                "valid_value": 255,
                "alternative": "text/plain run-length encoding",
            },
        }

    @app.post("/inpaint")
    async def inpaint(
        request: Request,
        image: UploadFile = File(...),
        mask: UploadFile = File(...),
        seed: int | None = Form(default=None),
    ):
        image_bytes = await image.read()
        mask_bytes = await mask.read()
        if len(image_bytes) + len(mask_bytes) > max_payload_bytes:
            raise ApiError(413, "payload_too_large", f"payload exceeds {max_payload_bytes} bytes")

        arr = _decode_image(image_bytes)
        if arr.shape[0] != input_side or arr.shape[1] != input_side:
            if allow_resize:
                arr = preprocess_image(arr, input_side)
            else:
                raise ApiError(
                    422, "size_mismatch",
                    f"image is {arr.shape[1]}x{arr.shape[0]}, model wants "
                    f"{input_side}x{input_side} (resizing disabled)",
                )
        mk = _decode_mask(mask_bytes, mask.content_type, mask.filename)
        if (mk.height, mk.width) != (input_side, input_side):
            raise ApiError(
                422, "size_mismatch",
                f"mask is {mk.width}x{mk.height}, expected {input_side}x{input_side}",
            )

        if seed is None:
            rng = np.random.default_rng()
        else:
            rng = named_stream(seed, "service-noise")

        t0 = time.perf_counter()
        try:
            out = inpaint_image(model.generator, arr, mk, rng, sigma=model.sigma)
        except ValidationError as exc:
            raise ApiError(422, "invalid_input", str(exc)) from exc
        elapsed_ms = (time.perf_counter() - t0) * 1000.0

        if request.query_params.get("grid") == "1":
            panel = np.concatenate([arr, damaged_view(arr, mk), out], axis=1)
            body = _encode_png(panel)
        else:
            body = _encode_png(out)
        return Response(
            content=body,
            media_type="image/png",
            headers={"X-Inference-Time-Ms": f"{elapsed_ms:.2f}"},
        )

    return app


def serve(
    checkpoint: str | Path,
    host: str = "127.0.0.1",
    port: int = 8000,
    max_payload_bytes: int = DEFAULT_MAX_PAYLOAD,
    allow_resize: bool = False,
) -> None:
    """Load the checkpoint and block serving HTTP until interrupted."""
    import uvicorn

    model = load_checkpoint(checkpoint)
    app = create_app(model, max_payload_bytes=max_payload_bytes, allow_resize=allow_resize)
    uvicorn.run(app, host=host, port=port)
