"""Layer stack container: forward/backward wiring and checkpoint I/O.

Parameter names are "L{index}.{local}", e.g. "L0.W", "L5.b".  Checkpoints
are a single JSON document holding the layer specs plus every parameter
tensor as base64-encoded little-endian float64 bytes, so save/load is
lossless and byte-deterministic (no archive timestamps, no text rounding).
"""

from __future__ import annotations

import base64
import json
from collections import OrderedDict

import numpy as np

from ..errors import ShapeError, UsageError
from ..rng import derive_seed
from .layers import layer_from_spec

_CHECKPOINT_TAG = "pumpwatch-model-v1"


def mse_loss(output, target):
    """Mean over all elements of squared difference; returns (value, grad)."""
    if output.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {output.shape} vs {target.shape}")
    diff = output - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


class Network:
    def __init__(self, layers):
        self.layers = list(layers)

    def initialize(self, seed):
        """Draw fresh weights; every layer gets its own derived stream."""
        for idx, layer in enumerate(self.layers):
            layer.init_params(derive_seed(seed, "layer", idx))
        return self

    def forward(self, x, perturb=None, keep_caches=True):
        """Run all layers; returns (output, caches).

        ``perturb`` maps layer index -> list of per-row parameter tweaks
        (see layers module).  With keep_caches=False the per-layer caches
        are dropped as soon as the next layer has run, which keeps large
        inference or gradient-check batches memory-flat.
        """
        caches = [] if keep_caches else None
        for idx, layer in enumerate(self.layers):
            entries = perturb.get(idx) if perturb else None
            try:
                x, cache = layer.forward(np.asarray(x, dtype=np.float64), entries)
            except ShapeError as e:
                raise ShapeError(f"layer {idx}: {e}")
            if keep_caches:
                caches.append(cache)
        return x, caches

    def backward(self, loss_grad, caches):
        """Propagate the loss gradient; returns {param_name: gradient}."""
        if caches is None or len(caches) != len(self.layers):
            raise UsageError("backward needs the caches from a matching forward call")
        grads = {}
        grad = loss_grad
        for idx in range(len(self.layers) - 1, -1, -1):
            grad, pgrads = self.layers[idx].backward(grad, caches[idx])
            for local, g in pgrads.items():
                grads[f"L{idx}.{local}"] = g
        return grads

    def predict(self, x, batch_size=512):
        """Forward pass in chunks without retaining caches."""
        outs = []
        for start in range(0, len(x), batch_size):
            out, _ = self.forward(x[start:start + batch_size], keep_caches=False)
            outs.append(out)
        return np.concatenate(outs, axis=0)

    def parameters(self) -> OrderedDict:
        """Live references, ordered by layer then local name."""
        out = OrderedDict()
        for idx, layer in enumerate(self.layers):
            for local, arr in layer.params().items():
                out[f"L{idx}.{local}"] = arr
        return out

    def set_parameters(self, values: dict):
        params = self.parameters()
        if set(values) != set(params):
            raise UsageError(f"parameter names do not match: "
                             f"{sorted(set(values) ^ set(params))}")
        for name, arr in params.items():
            src = np.asarray(values[name], dtype=np.float64)
            if src.shape != arr.shape:
                raise ShapeError(f"{name}: shape {src.shape} != {arr.shape}")
            arr[...] = src

    def param_count(self) -> int:
        return sum(arr.size for arr in self.parameters().values())

    def save(self, path):
        doc = {"format": _CHECKPOINT_TAG,
               "layers": [layer.spec() for layer in self.layers],
               "params": {}}
        for name, arr in self.parameters().items():
            doc["params"][name] = {
                "shape": list(arr.shape),
                "data": base64.b64encode(
                    np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii"),
            }
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            doc = json.load(f)
        if doc.get("format") != _CHECKPOINT_TAG:
            raise UsageError(f"not a model checkpoint: format tag {doc.get('format')!r}")
        net = cls([layer_from_spec(s) for s in doc["layers"]])
        values = {}
        for name, entry in doc["params"].items():
            raw = base64.b64decode(entry["data"])
            values[name] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
        net.set_parameters(values)
        return net
