"""Local HTTP inference service.

Endpoints:
    GET  /health                 liveness + checkpoint state
    GET  /images                 available image ids and dimensions
    GET  /images/{id}            PNG bytes
    POST /infer                  point-prompted detection on one image

The checkpoint is immutable while serving, so concurrent read-only
inference requests are safe; every request runs its own forward pass.
"""

from __future__ import annotations

import base64
import io
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

from ..data import Scene, image_to_png_bytes, ingest_annotations
from ..model import PointPromptedDetector


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class ServiceState:
    """Model plus the registered image library."""

    def __init__(self, model: Optional[PointPromptedDetector],
                 scenes: Optional[List[Scene]] = None,
                 max_upload_bytes: int = 8 * 1024 * 1024):
        self.model = model
        self.scenes: Dict[str, Scene] = {s.id: s for s in (scenes or [])}
        self.max_upload_bytes = max_upload_bytes

    @classmethod
    def from_paths(cls, model, image_dir=None, max_upload_bytes=8 * 1024 * 1024):
        scenes = ingest_annotations(Path(image_dir)) if image_dir else []
        return cls(model, scenes, max_upload_bytes)


def _decode_inline_image(b64: str, limit: int) -> np.ndarray:
    if len(b64) * 3 // 4 > limit:
        raise ApiError(413, f"inline image exceeds {limit} bytes")
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception:
        raise ApiError(400, "image_b64 is not valid base64")
    if len(raw) > limit:
        raise ApiError(413, f"inline image exceeds {limit} bytes")
    try:
        img = Image.open(io.BytesIO(raw)).convert("RGB")
    except Exception:
        raise ApiError(400, "inline image bytes are not a decodable raster")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def handle_infer(request: dict, state: ServiceState) -> dict:
    """Validate an inference request and run one prompted forward pass."""
    if state.model is None:
        raise ApiError(503, "no checkpoint loaded")
    prompts = request.get("prompts")
    if not prompts:
        raise ApiError(400, "at least one point prompt is required")

    if "image_id" in request:
        scene = state.scenes.get(str(request["image_id"]))
        if scene is None:
            raise ApiError(404, f"unknown image id {request['image_id']!r}")
        image = scene.image
    elif "image_b64" in request:
        image = _decode_inline_image(request["image_b64"], state.max_upload_bytes)
    else:
        raise ApiError(400, "request needs image_id or image_b64")

    h, w = image.shape[1], image.shape[2]
    points, categories = [], []
    for i, p in enumerate(prompts):
        try:
            x, y = float(p["x"]), float(p["y"])
            cat = int(p.get("category", 0))
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, f"prompt {i} must be an object with numeric x, y, category")
        if not (0 <= x < w and 0 <= y < h):
            raise ApiError(400, f"prompt {i} at ({x}, {y}) is outside the {w}x{h} image")
        points.append((x, y))
        categories.append(cat)

    threshold = request.get("score_threshold")
    if threshold is not None:
        threshold = float(threshold)

    t0 = time.perf_counter()
    detections, out = state.model.detect(image, np.array(points), np.array(categories),
                                         score_threshold=threshold)
    timing_ms = (time.perf_counter() - t0) * 1000.0

    grid = out.density.grid.data[0]
    return {
        "detections": [
            {"box": [float(v) for v in d.box], "score": float(d.score),
             "prompt_group": int(d.prompt_group)}
            for d in detections
        ],
        "n_query": int(out.n_query),
        "density_map": {"width": int(grid.shape[1]), "height": int(grid.shape[0]),
                        "values": [float(v) for v in grid.reshape(-1)]},
        "timing_ms": timing_ms,
    }


class _Handler(BaseHTTPRequestHandler):
    state: ServiceState = None
    static_dir: Optional[Path] = None

    # quiet the default per-request stderr lines
    def log_message(self, fmt, *args):
        pass

    def _send(self, status: int, payload: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, obj: dict):
        self._send(status, json.dumps(obj).encode(), "application/json")

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")

    def do_GET(self):
        try:
            if self.path == "/health":
                self._send_json(200, {"status": "ok",
                                      "checkpoint_loaded": self.state.model is not None,
                                      "n_images": len(self.state.scenes)})
            elif self.path == "/images":
                self._send_json(200, {"images": [
                    {"id": s.id, "width": s.width, "height": s.height}
                    for s in self.state.scenes.values()]})
            elif self.path.startswith("/images/"):
                image_id = self.path[len("/images/"):]
                scene = self.state.scenes.get(image_id)
                if scene is None:
                    raise ApiError(404, f"unknown image id {image_id!r}")
                self._send(200, image_to_png_bytes(scene.image), "image/png")
            elif self.path == "/" or self.path.startswith("/console"):
                self._serve_static()
            else:
                raise ApiError(404, f"no such endpoint {self.path}")
        except ApiError as e:
            self._send_json(e.status, {"error": e.message})

    def _serve_static(self):
        if self.static_dir is None:
            raise ApiError(404, "console assets not configured")
        rel = self.path[len("/console"):] if self.path.startswith("/console") else self.path
        rel = rel.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            raise ApiError(404, f"no console asset {rel!r}")
        ctype = {"html": "text/html", "js": "text/javascript", "css": "text/css",
                 "map": "application/json"}.get(target.suffix.lstrip("."), "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)

    def do_POST(self):
        try:
            if self.path != "/infer":
                raise ApiError(404, f"no such endpoint {self.path}")
            length = int(self.headers.get("Content-Length", 0))
            if length > self.state.max_upload_bytes + 1024:
                raise ApiError(413, "request body too large")
            try:
                request = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError as e:
                raise ApiError(400, f"malformed JSON body: {e.msg}")
            self._send_json(200, handle_infer(request, self.state))
        except ApiError as e:
            self._send_json(e.status, {"error": e.message})
        except Exception as e:  # defensive: surface rather than drop the connection
            self._send_json(500, {"error": f"internal error: {e}"})


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8787,
                static_dir=None) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {
        "state": state,
        "static_dir": Path(static_dir) if static_dir else None,
    })
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(state: ServiceState, host="127.0.0.1", port=8787, static_dir=None):
    server = make_server(state, host, port, static_dir)
    print(f"serving on http://{host}:{port} "
          f"({len(state.scenes)} images, checkpoint {'loaded' if state.model else 'missing'})",
          flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()


def start_background(state: ServiceState, host="127.0.0.1", port=0, static_dir=None):
    """Start on an ephemeral port for tests; returns (server, thread, port)."""
    server = make_server(state, host, port, static_dir)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread, server.server_address[1]
