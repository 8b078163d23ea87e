"""HTTP inference service around a trained checkpoint pair.

Stateless per request: decode panorama + mask PNGs, run segmentation ->
generation -> hard composite, and return base64 PNGs.  Pixels outside the
mask are copied byte-for-byte from the request.  A bounded admission
counter applies backpressure with 429 when the service is saturated.

Environment: PANODR_CKPT_G, PANODR_CKPT_S, PANODR_PORT (default 8080),
PANODR_QUEUE_DEPTH (default 4), PANODR_CORS_ORIGIN (default *).
"""

from __future__ import annotations

import base64
import binascii
import contextlib
import io
import math
import os
import threading
import time

import numpy as np
import torch
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Field

from .generator import composite_uint8
from .geometry import SphericalCoord, ViewSpec, gnomonic_project
from .losses import freeze_structure_net
from .training import load_generator_checkpoint, load_structure_checkpoint

MIN_HEIGHT = 64
MAX_HEIGHT = 1024


class ViewRequest(BaseModel):
    lon: float
    lat: float
    fov_deg: float = 90.0
    width: int = Field(default=256, ge=2, le=2048)
    height: int = Field(default=192, ge=2, le=2048)


class DiminishOptions(BaseModel):
    return_layout: bool = False
    perspective_views: list[ViewRequest] = Field(default_factory=list)


class DiminishRequest(BaseModel):
    panorama: str  # base64 PNG, 8-bit RGB, W = 2H
    mask: str  # base64 PNG, grayscale, same size, thresholded at 128
    options: DiminishOptions = Field(default_factory=DiminishOptions)


class ModelBundle:
    def __init__(self, g_ckpt: str, s_ckpt: str):
        self.generator, g_meta = load_generator_checkpoint(g_ckpt)
        self.structure, s_meta = load_structure_checkpoint(s_ckpt)
        self.generator.eval()
        freeze_structure_net(self.structure)
        self.g_meta = g_meta
        self.s_meta = s_meta
        self.model_id = f"{g_meta['fingerprint']}-{s_meta['fingerprint']}"
        depth = max(
            g_meta["config"]["gen_depth"],
            g_meta["config"]["structure_depth"],
            s_meta["config"]["structure_depth"],
        )
        self.height_multiple = 2**depth


def _decode_png(b64: str, field: str) -> Image.Image:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(status_code=400, detail={"field": field, "error": f"bad base64: {exc}"})
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise HTTPException(status_code=400, detail={"field": field, "error": f"bad PNG: {exc}"})
    return img


def _encode_png(arr: np.ndarray, mode: str = "RGB") -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _validate_pair(pano: Image.Image, mask: Image.Image, height_multiple: int):
    w, h = pano.size
    if w != 2 * h:
        raise HTTPException(
            status_code=422,
            detail={"field": "panorama", "error": f"width {w} must be exactly 2x height {h}"},
        )
    if not (MIN_HEIGHT <= h <= MAX_HEIGHT):
        raise HTTPException(
            status_code=422,
            detail={"field": "panorama", "error": f"height {h} outside [{MIN_HEIGHT}, {MAX_HEIGHT}]"},
        )
    if h % height_multiple != 0:
        raise HTTPException(
            status_code=422,
            detail={
                "field": "panorama",
                "error": f"height {h} must be a multiple of {height_multiple} for this model",
            },
        )
    if mask.size != pano.size:
        raise HTTPException(
            status_code=422,
            detail={
                "field": "mask",
                "error": f"mask size {mask.size} does not match panorama size {pano.size}",
            },
        )


def create_app(
    ckpt_g: str | None = None,
    ckpt_s: str | None = None,
    queue_depth: int | None = None,
    cors_origin: str | None = None,
) -> FastAPI:
    g_path = ckpt_g or os.environ.get("PANODR_CKPT_G", "")
    s_path = ckpt_s or os.environ.get("PANODR_CKPT_S", "")

    @contextlib.asynccontextmanager
    async def _lifespan(app: FastAPI):
        if g_path and s_path:
            app.state.bundle = ModelBundle(g_path, s_path)
        yield

    app = FastAPI(title="panodr", version="0.1.0", lifespan=_lifespan)
    origin = cors_origin or os.environ.get("PANODR_CORS_ORIGIN", "*")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    app.state.started = time.time()
    app.state.bundle = None
    if queue_depth is None:
        queue_depth = int(os.environ.get("PANODR_QUEUE_DEPTH", "4"))
    app.state.depth = queue_depth
    app.state.active = 0
    app.state.lock = threading.Lock()

    def _require_bundle() -> ModelBundle:
        if app.state.bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return app.state.bundle

    @app.get("/v1/health")
    def health():
        if app.state.bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "status": "ok",
            "model_id": app.state.bundle.model_id,
            "uptime_s": time.time() - app.state.started,
        }

    @app.get("/v1/model")
    def model_info():
        bundle = _require_bundle()
        return {
            "model_id": bundle.model_id,
            "generator": bundle.g_meta,
            "structure": bundle.s_meta,
            "projection": {
                "convention": "pixel-center",
                "lon_formula": "lon = 2*pi*(u+0.5)/W - pi",
                "lat_formula": "lat = pi/2 - pi*(v+0.5)/H",
                "sampling": "bilinear, horizontal wrap, vertical clamp",
                "lon_range": [-math.pi, math.pi],
                "lat_range": [-math.pi / 2, math.pi / 2],
            },
        }

    @app.post("/v1/diminish")
    def diminish(req: DiminishRequest):
        bundle = _require_bundle()
        with app.state.lock:
            if app.state.active >= app.state.depth:
                raise HTTPException(status_code=429, detail="work queue full")
            app.state.active += 1
        try:
            return _run_diminish(bundle, req)
        finally:
            with app.state.lock:
                app.state.active -= 1

    return app


def _run_diminish(bundle: ModelBundle, req: DiminishRequest) -> dict:
    t0 = time.perf_counter()
    pano_img = _decode_png(req.panorama, "panorama")
    mask_img = _decode_png(req.mask, "mask")
    _validate_pair(pano_img, mask_img, bundle.height_multiple)

    pano = np.asarray(pano_img.convert("RGB"), dtype=np.uint8)
    mask = (np.asarray(mask_img.convert("L")) >= 128).astype(np.uint8)

    rgb = pano.astype(np.float32) / 255.0
    maskf = mask.astype(np.float32)
    x = np.concatenate([rgb.transpose(2, 0, 1) * (1.0 - maskf[None]), maskf[None]], axis=0)
    xt = torch.from_numpy(x).unsqueeze(0)
    with torch.no_grad():
        layout_probs = bundle.structure(xt)
        raw = bundle.generator(xt, layout_probs)
    raw_u8 = np.round(raw[0].numpy().transpose(1, 2, 0) * 255.0).astype(np.uint8)
    result = composite_uint8(pano, raw_u8, mask)

    response = {
        "result": _encode_png(result),
        "timing_ms": None,  # filled below
        "model_id": bundle.model_id,
    }
    if req.options.return_layout:
        labels = layout_probs[0].argmax(dim=0).numpy().astype(np.uint8)
        response["layout"] = _encode_png(labels, mode="L")
    if req.options.perspective_views:
        result_f = result.astype(np.float64) / 255.0
        views = []
        for v in req.options.perspective_views:
            try:
                spec = ViewSpec(SphericalCoord(v.lon, v.lat), v.fov_deg, v.width, v.height)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail={"field": "perspective_views", "error": str(exc)})
            img = gnomonic_project(result_f, spec)
            views.append(_encode_png(np.round(img * 255.0).astype(np.uint8)))
        response["views"] = views
    response["timing_ms"] = (time.perf_counter() - t0) * 1000.0
    return response


def run_service(host: str = "0.0.0.0", port: int | None = None, **kwargs) -> None:
    """Blocking uvicorn runner used by the CLI."""
    import uvicorn

    app = create_app(**kwargs)
    uvicorn.run(app, host=host, port=int(port or os.environ.get("PANODR_PORT", "8080")))
