"""Finite-difference gradient verification.

For each selected parameter entry the checker compares the analytic
gradient of the autoencoding MSE loss against a central difference
(loss(theta + eps) - loss(theta - eps)) / (2 eps).  The error is reported
per tensor as ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2,
1e-12) over the checked entries, and the result is the maximum across
tensors.

Evaluating two losses per entry one at a time would need millions of
forward passes on the larger recipes, so all perturbed variants are packed
into one batched forward: every batch row carries one single-entry
perturbation, which each layer applies as an exact low-rank correction to
its own pre-activations (see the layers module).  ``sample_per_tensor``
optionally checks a seeded random subset of each tensor's entries instead
of every entry, which is how the large recipes stay inside a test-time
budget; omit it for a full sweep.
"""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from ..rng import SplitMix64, derive_seed
from .network import Network, mse_loss


def _select_indices(size, sample_per_tensor, seed, name):
    if sample_per_tensor is None or size <= sample_per_tensor:
        return np.arange(size)
    rng = SplitMix64(derive_seed(seed, "gradcheck", name))
    draws = np.minimum((rng.uniforms(4 * sample_per_tensor) * size).astype(np.int64),
                       size - 1)
    unique = np.unique(draws)
    return unique[:sample_per_tensor]


def grad_check(model, x, epsilon=1e-5, sample_per_tensor=None, seed=0,
               chunk_size=256) -> float:
    """Max relative gradient error of ``model`` at input window ``x``.

    ``model`` is a Network or anything exposing one as ``.network``; ``x``
    is a single input without the batch axis, and the loss is the
    reconstruction MSE against ``x`` itself.
    """
    net = getattr(model, "network", model)
    if not isinstance(net, Network):
        raise UsageError("grad_check expects a Network or an object with .network")
    if epsilon <= 0:
        raise UsageError("epsilon must be positive")
    params = net.parameters()
    if sum(a.size for a in params.values()) < 1:
        raise UsageError("model has no parameters to check")

    x = np.asarray(x, dtype=np.float64)
    x1 = x[None]
    out, caches = net.forward(x1)
    _, lgrad = mse_loss(out, x1)
    analytic = net.backward(lgrad, caches)

    # One entry per variant: (layer_idx, local_name, flat_index, sign).
    variants = []
    selected = {}
    for name, arr in params.items():
        idx = _select_indices(arr.size, sample_per_tensor, seed, name)
        selected[name] = idx
        layer_idx = int(name.split(".")[0][1:])
        local = name.split(".")[1]
        for flat in idx:
            variants.append((layer_idx, local, int(flat), +1.0))
            variants.append((layer_idx, local, int(flat), -1.0))

    losses = np.empty(len(variants))
    for start in range(0, len(variants), chunk_size):
        chunk = variants[start:start + chunk_size]
        xb = np.broadcast_to(x, (len(chunk),) + x.shape)
        perturb = {}
        for row, (layer_idx, local, flat, sign) in enumerate(chunk):
            perturb.setdefault(layer_idx, []).append(
                (row, local, flat, sign * epsilon))
        out, _ = net.forward(xb, perturb=perturb, keep_caches=False)
        diff = out - xb
        losses[start:start + len(chunk)] = (diff * diff).reshape(len(chunk), -1).mean(axis=1)

    numeric = (losses[0::2] - losses[1::2]) / (2.0 * epsilon)

    worst = 0.0
    offset = 0
    for name, arr in params.items():
        idx = selected[name]
        a = analytic[name].ravel()[idx]
        n = numeric[offset:offset + len(idx)]
        offset += len(idx)
        err = np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
        worst = max(worst, float(err))
    return worst
