#!/usr/bin/env python3
"""Start the inference service in-process and talk to it over HTTP."""

import json
import urllib.request

from pointdet.data import GeneratorConfig, generate_dataset
from pointdet.model import ModelConfig, PointPromptedDetector
from pointdet.service import ServiceState, start_background

scenes = generate_dataset(GeneratorConfig(count_range=(6, 10)), 3, seed=9)
model = PointPromptedDetector(ModelConfig(channels=16, hidden=48, heads=4,
                                          decoder_layers=2, seed=0))
state = ServiceState(model, scenes)
server, thread, port = start_background(state)
base = f"http://127.0.0.1:{port}"
print("service on", base)

with urllib.request.urlopen(base + "/health") as r:
    print("health:", json.loads(r.read()))

with urllib.request.urlopen(base + "/images") as r:
    images = json.loads(r.read())["images"]
    print("images:", images)

request = {
    "image_id": images[0]["id"],
    "prompts": [{"x": 40.0, "y": 40.0, "category": 0}],
    "score_threshold": 0.2,
}
req = urllib.request.Request(base + "/infer", data=json.dumps(request).encode(),
                             headers={"Content-Type": "application/json"})
with urllib.request.urlopen(req) as r:
    response = json.loads(r.read())
print(f"n_query={response['n_query']}  detections={len(response['detections'])}  "
      f"density {response['density_map']['width']}x{response['density_map']['height']}  "
      f"{response['timing_ms']:.0f} ms")

server.shutdown()
print("server stopped")
