"""Online operation: predict, then learn, one sample at a time.

Feeds a Mackey-Glass series through the streaming system, saves a
checkpoint half way, restores it and checks that the restored system
continues exactly where the first one stopped.
"""

import json

import numpy as np

from edgedfr.config import build_dataset, resolve
from edgedfr.online import OnlineSystem

cfg = resolve({"task": {"name": "mackey-glass", "length": 2000, "horizon": 1},
               "reservoir": {"n_virtual": 50}})
data = build_dataset(cfg)

live = OnlineSystem.from_config(cfg)
preds = []
for t in range(1000):
    preds.append(live.feed(data.inputs[t], data.targets[t]))

saved = json.dumps(live.checkpoint())
restored = OnlineSystem.from_checkpoint(json.loads(saved), cfg)

a = [live.feed(u, d) for u, d in zip(data.inputs[1000:], data.targets[1000:])]
b = [restored.feed(u, d) for u, d in zip(data.inputs[1000:], data.targets[1000:])]
print(f"checkpoint is {len(saved)} bytes; restored run identical: {a == b}")

err = np.asarray(a) - data.targets[1000:]
print(f"one-step rms error over the second half: {np.sqrt(np.mean(err ** 2)):.2e}")
