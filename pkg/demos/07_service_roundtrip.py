#!/usr/bin/env python3
"""Exercise the HTTP service in-process: health, diminish, perspective views.

Reuses the checkpoints from demo 04 (run that first, or this script trains
a quick pair itself).
"""

import base64
import io
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from panodr.dataset import load_dataset
from panodr.service import create_app

out_dir = Path(__file__).parent / "out"
ckpt_dir = out_dir / "dr_ckpt"
if not (ckpt_dir / "generator.pt").exists():
    raise SystemExit("run demos/04_guided_inpainting.py first to produce checkpoints")

app = create_app(ckpt_g=str(ckpt_dir / "generator.pt"), ckpt_s=str(ckpt_dir / "structure.pt"))


def b64png(arr, mode="RGB"):
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


sample = load_dataset(out_dir / "toy_data_dr")[-1]
payload = {
    "panorama": b64png((sample.furnished * 255).astype(np.uint8)),
    "mask": b64png(sample.mask * 255, mode="L"),
    "options": {
        "return_layout": True,
        "perspective_views": [{"lon": 0.5, "lat": -0.3, "fov_deg": 80, "width": 160, "height": 120}],
    },
}

with TestClient(app) as client:
    health = client.get("/v1/health").json()
    print(f"health: {health['status']}, model {health['model_id']}")

    meta = client.get("/v1/model").json()
    print(f"projection convention: {meta['projection']['lon_formula']}")

    r = client.post("/v1/diminish", json=payload)
    r.raise_for_status()
    body = r.json()
    print(f"diminish took {body['timing_ms']:.0f} ms")

    result = np.asarray(Image.open(io.BytesIO(base64.b64decode(body["result"]))))
    outside = sample.mask == 0
    untouched = np.array_equal(result[outside], (sample.furnished * 255).astype(np.uint8)[outside])
    print(f"outside-mask pixels byte-identical to the request: {untouched}")

    Image.open(io.BytesIO(base64.b64decode(body["result"]))).save(out_dir / "service_result.png")
    Image.open(io.BytesIO(base64.b64decode(body["views"][0]))).save(out_dir / "service_view.png")
    print(f"wrote {out_dir}/service_result.png and service_view.png")
