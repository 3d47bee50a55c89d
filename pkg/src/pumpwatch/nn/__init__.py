"""Minimal differentiable-layer engine used by the autoencoder recipes."""

from .gradcheck import grad_check
from .layers import (LSTM, Conv1D, Dense, Flatten, Layer, MaxPool1D, RepeatLast,
                     Reshape, Tanh, Upsample1D)
from .network import Network, mse_loss
from .optim import Adam
from .train import TrainConfig, TrainResult, train

__all__ = [
    "Adam", "Conv1D", "Dense", "Flatten", "LSTM", "Layer", "MaxPool1D",
    "Network", "RepeatLast", "Reshape", "Tanh", "TrainConfig", "TrainResult",
    "Upsample1D", "grad_check", "mse_loss", "train",
]
