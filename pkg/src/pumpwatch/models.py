"""The three autoencoder recipes and their window marshalling.

- DNN: dense stack with widths x, n, n/3, n/4, n/3, n, x (round half up),
  tanh everywhere except the final linear reconstruction layer.  A
  multichannel window is flattened by concatenating its channels, so
  x = 64 * channels.
- LSTM: eight stacked recurrent layers with unit counts n, n/2, n/4, n/16,
  n/16, n/4, n/2, n rounded with a floor of 16.  The first three return
  sequences, the fourth returns only its last output, which is repeated
  across all 64 time steps; the remaining four return sequences and a
  per-time-step linear map projects back to the channel count.
- CNN: four conv(kernel 2) + max-pool(2) stages with 16/32/64/128 filters,
  a dense bottleneck, and a mirrored decoder of upsample(2) + conv stages
  at 128/64/32/16 filters plus a final linear conv to the channel count.

Sequence models take windows as (time=64, channels); the flat model takes
the concatenated vector.  ``Autoencoder`` hides that difference.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import nn
from .errors import ConfigError
from .nn.network import Network
from .signal import WINDOW_SIZE
from .util import round_half_up


class ArchitectureId(Enum):
    DNN = "dnn"
    LSTM = "lstm"
    CNN = "cnn"


LSTM_FLOOR = 16
CNN_FILTERS = (16, 32, 64, 128)
DNN_N_RANGE = (64, 200)


@dataclass
class ModelSpec:
    """Declarative recipe selection, resolvable to an Autoencoder."""

    arch: ArchitectureId
    channels: int = 1
    n: int = 150
    cnn_bottleneck: int = 32

    def build(self, seed=0) -> "Autoencoder":
        if self.arch is ArchitectureId.DNN:
            return build_dnn(WINDOW_SIZE * self.channels, self.n, seed=seed,
                             channels=self.channels)
        if self.arch is ArchitectureId.LSTM:
            return build_lstm(self.n, channels=self.channels, seed=seed)
        return build_cnn(channels=self.channels, bottleneck=self.cnn_bottleneck,
                         seed=seed)


def _width(v):
    return max(1, round_half_up(v))


def dnn_widths(x, n):
    """Layer width walk for the dense recipe, input to output."""
    return (x, n, _width(n / 3), _width(n / 4), _width(n / 3), n, x)


def lstm_units(n):
    """Unit counts for the eight recurrent layers."""
    divisors = (1, 2, 4, 16, 16, 4, 2, 1)
    return tuple(max(LSTM_FLOOR, round_half_up(n / d)) for d in divisors)


class Autoencoder:
    """A built recipe plus the window <-> network-input marshalling."""

    def __init__(self, arch: ArchitectureId, network: Network, channels: int):
        self.arch = arch
        self.network = network
        self.channels = int(channels)

    def to_inputs(self, windows: np.ndarray) -> np.ndarray:
        """(count, channels, 64) -> network input layout."""
        windows = np.asarray(windows, dtype=np.float64)
        if self.arch is ArchitectureId.DNN:
            return windows.reshape(len(windows), self.channels * WINDOW_SIZE)
        return windows.transpose(0, 2, 1)

    def from_outputs(self, outputs: np.ndarray) -> np.ndarray:
        if self.arch is ArchitectureId.DNN:
            return outputs.reshape(len(outputs), self.channels, WINDOW_SIZE)
        return outputs.transpose(0, 2, 1)

    def reconstruct(self, window: np.ndarray) -> np.ndarray:
        """Forward one (channels, 64) window; output has the same shape."""
        batch = self.to_inputs(np.asarray(window)[None])
        out, _ = self.network.forward(batch, keep_caches=False)
        return self.from_outputs(out)[0]

    def fit(self, windows: np.ndarray, cfg: nn.TrainConfig) -> nn.TrainResult:
        """Train on (count, channels, 64) windows, target = input."""
        return nn.train(self.network, self.to_inputs(windows), cfg)

    def window_errors(self, windows: np.ndarray, batch_size=512) -> np.ndarray:
        """Per-window reconstruction MSE, batched."""
        x = self.to_inputs(windows)
        if len(x) == 0:
            return np.zeros(0)
        out = self.network.predict(x, batch_size=batch_size)
        diff = out - x
        return (diff * diff).reshape(len(x), -1).mean(axis=1)

    def param_count(self) -> int:
        return self.network.param_count()


def _dnn_network(x, n) -> Network:
    widths = dnn_widths(x, n)
    layers = []
    for i in range(len(widths) - 1):
        layers.append(nn.Dense(widths[i], widths[i + 1]))
        if i < len(widths) - 2:
            layers.append(nn.Tanh())
    return Network(layers)


def build_dnn(x, n=150, seed=0, channels=None) -> Autoencoder:
    """Dense recipe; x is the flattened window length (64 * channels)."""
    if x < 1:
        raise ConfigError("x must be >= 1")
    lo, hi = DNN_N_RANGE
    if not lo <= n <= hi:
        raise ConfigError(f"DNN n must be in [{lo}, {hi}], got {n}")
    if channels is None:
        if x % WINDOW_SIZE != 0:
            raise ConfigError(f"x = {x} is not a multiple of the window size "
                              f"{WINDOW_SIZE}; pass channels explicitly")
        channels = x // WINDOW_SIZE
    net = _dnn_network(x, n).initialize(seed)
    return Autoencoder(ArchitectureId.DNN, net, channels)


def build_lstm(n=150, timesteps=WINDOW_SIZE, channels=1, seed=0) -> Autoencoder:
    """Recurrent recipe; input (timesteps, channels) per window."""
    if n < LSTM_FLOOR:
        raise ConfigError(f"LSTM n must be >= {LSTM_FLOOR}, got {n}")
    units = lstm_units(n)
    layers = [
        nn.LSTM(channels, units[0], return_sequences=True),
        nn.LSTM(units[0], units[1], return_sequences=True),
        nn.LSTM(units[1], units[2], return_sequences=True),
        nn.LSTM(units[2], units[3], return_sequences=False),
        nn.RepeatLast(timesteps),
        nn.LSTM(units[3], units[4], return_sequences=True),
        nn.LSTM(units[4], units[5], return_sequences=True),
        nn.LSTM(units[5], units[6], return_sequences=True),
        nn.LSTM(units[6], units[7], return_sequences=True),
        nn.Dense(units[7], channels),
    ]
    net = Network(layers).initialize(seed)
    return Autoencoder(ArchitectureId.LSTM, net, channels)


def build_cnn(timesteps=WINDOW_SIZE, channels=1, bottleneck=32, seed=0) -> Autoencoder:
    """Convolutional recipe; input (timesteps, channels) per window."""
    if timesteps % 16 != 0:
        raise ConfigError(f"timesteps must be divisible by 16, got {timesteps}")
    if bottleneck < 1:
        raise ConfigError("bottleneck must be >= 1")
    f1, f2, f3, f4 = CNN_FILTERS
    t4 = timesteps // 16
    layers = [
        nn.Conv1D(channels, f1), nn.Tanh(), nn.MaxPool1D(2),
        nn.Conv1D(f1, f2), nn.Tanh(), nn.MaxPool1D(2),
        nn.Conv1D(f2, f3), nn.Tanh(), nn.MaxPool1D(2),
        nn.Conv1D(f3, f4), nn.Tanh(), nn.MaxPool1D(2),
        nn.Flatten(),
        nn.Dense(t4 * f4, bottleneck), nn.Tanh(),
        nn.Dense(bottleneck, t4 * f4), nn.Tanh(),
        nn.Reshape((t4, f4)),
        nn.Upsample1D(2), nn.Conv1D(f4, f4), nn.Tanh(),
        nn.Upsample1D(2), nn.Conv1D(f4, f3), nn.Tanh(),
        nn.Upsample1D(2), nn.Conv1D(f3, f2), nn.Tanh(),
        nn.Upsample1D(2), nn.Conv1D(f2, f1), nn.Tanh(),
        nn.Conv1D(f1, channels),
    ]
    net = Network(layers).initialize(seed)
    return Autoencoder(ArchitectureId.CNN, net, channels)
