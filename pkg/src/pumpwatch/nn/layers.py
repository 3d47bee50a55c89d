"""Differentiable layers, hand-implemented on numpy in float64.

Conventions shared by every layer:

- Arrays are batch-first: (batch, features) for flat data, (batch, time,
  features) for sequences.
- ``forward(x, perturb=None)`` returns ``(y, cache)``; ``backward(grad,
  cache)`` returns ``(grad_input, param_grads)`` where param_grads maps the
  layer's local tensor names to gradient arrays of matching shape.
- Parameters live in ``self.params()`` as named float64 arrays; optimizers
  update them in place.

The ``perturb`` argument exists for the finite-difference gradient checker:
it is a list of ``(row, tensor_name, flat_index, delta)`` tuples, and the
layer must behave as if, for batch row ``row`` only, the named parameter
entry were shifted by ``delta``.  Layers apply this as an exact low-rank
correction to their pre-activations instead of copying weights, which lets
the checker evaluate thousands of one-entry perturbations in one batched
forward pass.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..rng import SplitMix64, derive_seed


def _glorot(rng: SplitMix64, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    n = int(np.prod(shape))
    return (2.0 * rng.uniforms(n) - 1.0).reshape(shape) * limit


class Layer:
    """Base class; stateless layers inherit the no-op parameter hooks."""

    def params(self):
        return {}

    def init_params(self, seed):
        pass

    def spec(self):
        return {"kind": type(self).__name__}

    def describe(self):
        return type(self).__name__

    def forward(self, x, perturb=None):
        raise NotImplementedError

    def backward(self, grad, cache):
        raise NotImplementedError


class Dense(Layer):
    """Affine map on the last axis: y = x @ W + b.

    Works on (batch, in_dim) and on (batch, time, in_dim); in the latter
    case the same weights apply at every time step.
    """

    def __init__(self, in_dim, units):
        self.in_dim = int(in_dim)
        self.units = int(units)
        self.W = np.zeros((self.in_dim, self.units))
        self.b = np.zeros(self.units)

    def params(self):
        return {"W": self.W, "b": self.b}

    def init_params(self, seed):
        self.W = _glorot(SplitMix64(derive_seed(seed, "W")),
                         (self.in_dim, self.units), self.in_dim, self.units)
        self.b = np.zeros(self.units)

    def spec(self):
        return {"kind": "Dense", "in_dim": self.in_dim, "units": self.units}

    def describe(self):
        return f"Dense({self.in_dim}->{self.units})"

    def forward(self, x, perturb=None):
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"{self.describe()}: expected last axis {self.in_dim}, "
                             f"got {x.shape}")
        y = x @ self.W + self.b
        if perturb:
            for row, pname, flat, delta in perturb:
                if pname == "W":
                    r, c = divmod(flat, self.units)
                    y[row, ..., c] += delta * x[row, ..., r]
                else:
                    y[row, ..., flat] += delta
        return y, x

    def backward(self, grad, cache):
        x = cache
        if grad.shape != x.shape[:-1] + (self.units,):
            raise ShapeError(f"{self.describe()}: gradient shape {grad.shape} does not "
                             f"match cached input {x.shape}")
        x2 = x.reshape(-1, self.in_dim)
        g2 = grad.reshape(-1, self.units)
        return grad @ self.W.T, {"W": x2.T @ g2, "b": g2.sum(axis=0)}


class Tanh(Layer):
    def forward(self, x, perturb=None):
        y = np.tanh(x)
        return y, y

    def backward(self, grad, cache):
        return grad * (1.0 - cache * cache), {}


class Conv1D(Layer):
    """1-D convolution over time, kernel size 2, stride 1, same length.

    Input (batch, time, in_channels), output (batch, time, filters).  The
    input is zero-padded on the right so output length equals input length.
    """

    def __init__(self, in_channels, filters, kernel_size=2):
        self.in_channels = int(in_channels)
        self.filters = int(filters)
        self.kernel_size = int(kernel_size)
        self.W = np.zeros((self.kernel_size, self.in_channels, self.filters))
        self.b = np.zeros(self.filters)

    def params(self):
        return {"W": self.W, "b": self.b}

    def init_params(self, seed):
        fan_in = self.kernel_size * self.in_channels
        self.W = _glorot(SplitMix64(derive_seed(seed, "W")),
                         (self.kernel_size, self.in_channels, self.filters),
                         fan_in, self.filters)
        self.b = np.zeros(self.filters)

    def spec(self):
        return {"kind": "Conv1D", "in_channels": self.in_channels,
                "filters": self.filters, "kernel_size": self.kernel_size}

    def describe(self):
        return f"Conv1D({self.in_channels}->{self.filters},k={self.kernel_size})"

    def _columns(self, x):
        # (batch, time, kernel*channels): each time step sees offsets 0..k-1.
        batch, time, _ = x.shape
        k = self.kernel_size
        xp = np.concatenate([x, np.zeros((batch, k - 1, self.in_channels))], axis=1)
        return np.concatenate([xp[:, o:o + time, :] for o in range(k)], axis=2)

    def forward(self, x, perturb=None):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(f"{self.describe()}: expected (batch, time, "
                             f"{self.in_channels}), got {x.shape}")
        xcol = self._columns(x)
        wmat = self.W.reshape(-1, self.filters)
        y = xcol @ wmat + self.b
        if perturb:
            for row, pname, flat, delta in perturb:
                if pname == "W":
                    col, f = divmod(flat, self.filters)
                    y[row, :, f] += delta * xcol[row, :, col]
                else:
                    y[row, :, flat] += delta
        return y, xcol

    def backward(self, grad, cache):
        xcol = cache
        batch, time, _ = xcol.shape
        k = self.kernel_size
        g2 = grad.reshape(-1, self.filters)
        gw = (xcol.reshape(-1, k * self.in_channels).T @ g2).reshape(self.W.shape)
        dxcol = grad @ self.W.reshape(-1, self.filters).T
        dxp = np.zeros((batch, time + k - 1, self.in_channels))
        for o in range(k):
            dxp[:, o:o + time, :] += dxcol[:, :, o * self.in_channels:(o + 1) * self.in_channels]
        return dxp[:, :time, :], {"W": gw, "b": g2.sum(axis=0)}


class MaxPool1D(Layer):
    """Max over non-overlapping time pairs: (B, T, C) -> (B, T/2, C)."""

    def __init__(self, pool_size=2):
        self.pool_size = int(pool_size)

    def spec(self):
        return {"kind": "MaxPool1D", "pool_size": self.pool_size}

    def forward(self, x, perturb=None):
        p = self.pool_size
        if x.ndim != 3 or x.shape[1] % p != 0:
            raise ShapeError(f"MaxPool1D: time axis of {x.shape} not divisible by {p}")
        batch, time, ch = x.shape
        xr = x.reshape(batch, time // p, p, ch)
        # Ties route the gradient to the earliest position, deterministically.
        arg = xr.argmax(axis=2)
        y = xr.max(axis=2)
        return y, (arg, x.shape)

    def backward(self, grad, cache):
        arg, shape = cache
        batch, time, ch = shape
        p = self.pool_size
        dxr = np.zeros((batch, time // p, p, ch))
        np.put_along_axis(dxr, arg[:, :, None, :], grad[:, :, None, :], axis=2)
        return dxr.reshape(shape), {}


class Upsample1D(Layer):
    """Nearest-neighbor repeat along time: (B, T, C) -> (B, T*factor, C)."""

    def __init__(self, factor=2):
        self.factor = int(factor)

    def spec(self):
        return {"kind": "Upsample1D", "factor": self.factor}

    def forward(self, x, perturb=None):
        if x.ndim != 3:
            raise ShapeError(f"Upsample1D: expected 3-d input, got {x.shape}")
        return np.repeat(x, self.factor, axis=1), x.shape

    def backward(self, grad, cache):
        batch, time, ch = cache
        return grad.reshape(batch, time, self.factor, ch).sum(axis=2), {}


class RepeatLast(Layer):
    """Repeat a flat vector across time: (B, U) -> (B, repeat_count, U)."""

    def __init__(self, repeat_count):
        self.repeat_count = int(repeat_count)

    def spec(self):
        return {"kind": "RepeatLast", "repeat_count": self.repeat_count}

    def forward(self, x, perturb=None):
        if x.ndim != 2:
            raise ShapeError(f"RepeatLast: expected 2-d input, got {x.shape}")
        return np.repeat(x[:, None, :], self.repeat_count, axis=1), None

    def backward(self, grad, cache):
        return grad.sum(axis=1), {}


class Flatten(Layer):
    """(B, T, C) -> (B, T*C)."""

    def forward(self, x, perturb=None):
        if x.ndim != 3:
            raise ShapeError(f"Flatten: expected 3-d input, got {x.shape}")
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), {}


class Reshape(Layer):
    """(B, N) -> (B, *target_shape)."""

    def __init__(self, target_shape):
        self.target_shape = tuple(int(v) for v in target_shape)

    def spec(self):
        return {"kind": "Reshape", "target_shape": list(self.target_shape)}

    def forward(self, x, perturb=None):
        want = int(np.prod(self.target_shape))
        if x.ndim != 2 or x.shape[1] != want:
            raise ShapeError(f"Reshape{self.target_shape}: expected (batch, {want}), "
                             f"got {x.shape}")
        return x.reshape((x.shape[0],) + self.target_shape), x.shape

    def backward(self, grad, cache):
        return grad.reshape(cache), {}


class LSTM(Layer):
    """Single LSTM layer, gate order (input, forget, cell, output).

    z_t = x_t @ W + h_{t-1} @ U + b, split into four gates i, f, g, o with
    sigmoid on i/f/o and tanh on g; c_t = f*c_{t-1} + i*g; h_t = o*tanh(c_t).
    With return_sequences the output is (B, T, units), otherwise the last
    h_T as (B, units).
    """

    def __init__(self, in_dim, units, return_sequences=True):
        self.in_dim = int(in_dim)
        self.units = int(units)
        self.return_sequences = bool(return_sequences)
        u = self.units
        self.W = np.zeros((self.in_dim, 4 * u))
        self.U = np.zeros((u, 4 * u))
        self.b = np.zeros(4 * u)

    def params(self):
        return {"W": self.W, "U": self.U, "b": self.b}

    def init_params(self, seed):
        u = self.units
        self.W = _glorot(SplitMix64(derive_seed(seed, "W")),
                         (self.in_dim, 4 * u), self.in_dim, 4 * u)
        self.U = _glorot(SplitMix64(derive_seed(seed, "U")), (u, 4 * u), u, 4 * u)
        self.b = np.zeros(4 * u)
        self.b[u:2 * u] = 1.0  # forget-gate bias starts open

    def spec(self):
        return {"kind": "LSTM", "in_dim": self.in_dim, "units": self.units,
                "return_sequences": self.return_sequences}

    def describe(self):
        return f"LSTM({self.in_dim}->{self.units})"

    def forward(self, x, perturb=None):
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"{self.describe()}: expected (batch, time, "
                             f"{self.in_dim}), got {x.shape}")
        batch, time, _ = x.shape
        u = self.units
        pre = x @ self.W + self.b
        u_perturbs = []
        if perturb:
            for row, pname, flat, delta in perturb:
                if pname == "W":
                    r, c = divmod(flat, 4 * u)
                    pre[row, :, c] += delta * x[row, :, r]
                elif pname == "b":
                    pre[row, :, flat] += delta
                else:
                    u_perturbs.append((row, flat, delta))

        h = np.zeros((batch, u))
        c = np.zeros((batch, u))
        hs = np.empty((batch, time, u))
        cs = np.empty((batch, time, u))
        gates_i = np.empty((batch, time, u))
        gates_f = np.empty((batch, time, u))
        gates_g = np.empty((batch, time, u))
        gates_o = np.empty((batch, time, u))
        tanh_cs = np.empty((batch, time, u))
        for t in range(time):
            z = pre[:, t, :] + h @ self.U
            for row, flat, delta in u_perturbs:
                r, col = divmod(flat, 4 * u)
                z[row, col] += delta * h[row, r]
            zi, zf, zg, zo = z[:, :u], z[:, u:2 * u], z[:, 2 * u:3 * u], z[:, 3 * u:]
            gi = _sigmoid(zi)
            gf = _sigmoid(zf)
            gg = np.tanh(zg)
            go = _sigmoid(zo)
            c = gf * c + gi * gg
            tc = np.tanh(c)
            h = go * tc
            gates_i[:, t] = gi
            gates_f[:, t] = gf
            gates_g[:, t] = gg
            gates_o[:, t] = go
            cs[:, t] = c
            tanh_cs[:, t] = tc
            hs[:, t] = h
        out = hs if self.return_sequences else hs[:, -1, :]
        cache = (x, hs, cs, gates_i, gates_f, gates_g, gates_o, tanh_cs)
        return out, cache

    def backward(self, grad, cache):
        x, hs, cs, gi, gf, gg, go, tcs = cache
        batch, time, _ = x.shape
        u = self.units
        if self.return_sequences:
            if grad.shape != hs.shape:
                raise ShapeError(f"{self.describe()}: gradient shape {grad.shape} "
                                 f"does not match output {hs.shape}")
            grad_h = grad
        else:
            if grad.shape != (batch, u):
                raise ShapeError(f"{self.describe()}: gradient shape {grad.shape} "
                                 f"does not match output {(batch, u)}")
            grad_h = np.zeros((batch, time, u))
            grad_h[:, -1, :] = grad

        dz_all = np.empty((batch, time, 4 * u))
        dh_next = np.zeros((batch, u))
        dc = np.zeros((batch, u))
        for t in range(time - 1, -1, -1):
            dh = grad_h[:, t, :] + dh_next
            c_prev = cs[:, t - 1, :] if t > 0 else np.zeros((batch, u))
            do = dh * tcs[:, t]
            dtc = dh * go[:, t] * (1.0 - tcs[:, t] ** 2) + dc
            di = dtc * gg[:, t]
            df = dtc * c_prev
            dg = dtc * gi[:, t]
            dc = dtc * gf[:, t]
            dz = np.concatenate([
                di * gi[:, t] * (1.0 - gi[:, t]),
                df * gf[:, t] * (1.0 - gf[:, t]),
                dg * (1.0 - gg[:, t] ** 2),
                do * go[:, t] * (1.0 - go[:, t]),
            ], axis=1)
            dz_all[:, t, :] = dz
            dh_next = dz @ self.U.T

        h_prev = np.concatenate([np.zeros((batch, 1, u)), hs[:, :-1, :]], axis=1)
        dz2 = dz_all.reshape(-1, 4 * u)
        grads = {
            "W": x.reshape(-1, self.in_dim).T @ dz2,
            "U": h_prev.reshape(-1, u).T @ dz2,
            "b": dz2.sum(axis=0),
        }
        return dz_all @ self.W.T, grads


def _sigmoid(x):
    # Split by sign to stay overflow-free in float64.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


LAYER_KINDS = {cls.__name__: cls for cls in
               (Dense, Tanh, Conv1D, MaxPool1D, Upsample1D, LSTM,
                RepeatLast, Flatten, Reshape)}


def layer_from_spec(spec: dict) -> Layer:
    kind = spec.get("kind")
    if kind not in LAYER_KINDS:
        raise ShapeError(f"unknown layer kind {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    return LAYER_KINDS[kind](**kwargs)
