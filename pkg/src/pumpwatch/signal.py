"""Feature assembly: vibration norm, FFT magnitude, normalization, windows.

Eight feature sets are supported: the raw audio channel, the raw 3-axis
vibration channels, the per-time-index euclidean norm of those three axes
(called vib-1D; invariant under sensor rotation), the vib-1D + audio pair,
and the FFT magnitude variant of each.  Raw sets have length 1024, FFT sets
512.  Min-max normalization is fitted on train data only, one (min, max)
pair per channel pooled over all train samples and positions.  Windowing
cuts each channel into contiguous 64-point slices.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple

import numpy as np

from .dataset import SensorSample
from .errors import ShapeError

WINDOW_SIZE = 64


class FeatureSetId(Enum):
    VIB1D = "vib1d"
    AUDIO = "audio"
    VIB3D = "vib3d"
    VIB1D_AUDIO = "vib1d_audio"
    FFT_VIB1D = "fft_vib1d"
    FFT_AUDIO = "fft_audio"
    FFT_VIB3D = "fft_vib3d"
    FFT_VIB1D_AUDIO = "fft_vib1d_audio"

    @property
    def is_fft(self):
        return self.name.startswith("FFT_")

    @property
    def label(self):
        """Human-readable name used in report tables."""
        base = {
            "VIB1D": "Vibrations 1D",
            "AUDIO": "Audio",
            "VIB3D": "Vibrations 3D",
            "VIB1D_AUDIO": "Vibrations 1D & Audio",
        }
        key = self.name[4:] if self.is_fft else self.name
        return ("FFT " if self.is_fft else "") + base[key]


# Report row order: raw sets first, then their FFT variants.
FEATURE_SET_ORDER = (
    FeatureSetId.VIB1D,
    FeatureSetId.AUDIO,
    FeatureSetId.VIB3D,
    FeatureSetId.VIB1D_AUDIO,
    FeatureSetId.FFT_VIB1D,
    FeatureSetId.FFT_AUDIO,
    FeatureSetId.FFT_VIB3D,
    FeatureSetId.FFT_VIB1D_AUDIO,
)


def channel_count(fs: FeatureSetId) -> int:
    return {"VIB1D": 1, "AUDIO": 1, "VIB3D": 3, "VIB1D_AUDIO": 2}[
        fs.name[4:] if fs.is_fft else fs.name]


def feature_length(fs: FeatureSetId) -> int:
    return 512 if fs.is_fft else 1024


@dataclass
class FeatureMatrix:
    """channels x length feature values for one sample."""

    values: np.ndarray
    channel_names: List[str]
    feature_set: FeatureSetId
    sample_id: int = -1


@dataclass
class Normalizer:
    """Per-channel (min, max) fitted on the train set."""

    mins: np.ndarray
    maxs: np.ndarray
    feature_set: FeatureSetId = None


class Window(NamedTuple):
    sample_id: int
    window_index: int
    values: np.ndarray  # channels x window_size


@dataclass
class WindowBatch:
    windows: List[Window]
    window_size: int = WINDOW_SIZE
    stride: int = WINDOW_SIZE

    def __len__(self):
        return len(self.windows)

    def to_array(self) -> np.ndarray:
        """Stack window values into (count, channels, window_size)."""
        return np.stack([w.values for w in self.windows])


def vib_norm(vib_x, vib_y, vib_z) -> np.ndarray:
    """Elementwise euclidean norm of the three vibration axes.

    The norm is unchanged when the sensor is remounted in a rotated
    orientation (any orthogonal mixing of the axes), which is the point of
    the vib-1D feature.
    """
    x = np.asarray(vib_x, dtype=np.float64)
    y = np.asarray(vib_y, dtype=np.float64)
    z = np.asarray(vib_z, dtype=np.float64)
    if not (x.shape == y.shape == z.shape):
        raise ShapeError(f"vibration channels differ in shape: "
                         f"{x.shape}, {y.shape}, {z.shape}")
    return np.sqrt(x * x + y * y + z * z)


def fft_magnitude(series) -> np.ndarray:
    """First-half magnitude spectrum with 1/N scaling.

    out[k] = |sum_j series[j] * exp(-2i*pi*j*k/N)| / N for k = 0 .. N/2 - 1.
    Under this scaling a pure cosine of amplitude a lands at a/2 in its bin
    and a constant c lands at c in bin 0.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[-1]
    if n < 2 or (n & (n - 1)) != 0:
        raise ShapeError(f"fft_magnitude needs a power-of-two length, got {n}")
    return np.abs(np.fft.rfft(x)[..., : n // 2]) / n


def assemble_features(sample: SensorSample, fs: FeatureSetId) -> FeatureMatrix:
    """Build the feature matrix for one sample and feature set."""
    base = fs.name[4:] if fs.is_fft else fs.name
    if base == "VIB1D":
        chans = [("vib1d", vib_norm(sample.vib_x, sample.vib_y, sample.vib_z))]
    elif base == "AUDIO":
        chans = [("audio", np.asarray(sample.audio, dtype=np.float64))]
    elif base == "VIB3D":
        chans = [("vib_x", np.asarray(sample.vib_x, dtype=np.float64)),
                 ("vib_y", np.asarray(sample.vib_y, dtype=np.float64)),
                 ("vib_z", np.asarray(sample.vib_z, dtype=np.float64))]
    else:
        chans = [("vib1d", vib_norm(sample.vib_x, sample.vib_y, sample.vib_z)),
                 ("audio", np.asarray(sample.audio, dtype=np.float64))]
    if fs.is_fft:
        chans = [("fft_" + name, fft_magnitude(values)) for name, values in chans]
    names = [name for name, _ in chans]
    values = np.stack([v for _, v in chans])
    return FeatureMatrix(values=values, channel_names=names, feature_set=fs,
                         sample_id=sample.sample_id)


def fit_normalizer(train: List[FeatureMatrix]) -> Normalizer:
    """Per-channel min/max pooled over all train samples and positions."""
    if not train:
        raise ShapeError("fit_normalizer needs at least one feature matrix")
    shape = train[0].values.shape
    for fm in train:
        if fm.values.shape != shape:
            raise ShapeError(f"inconsistent feature shapes: {fm.values.shape} vs {shape}")
    stacked = np.stack([fm.values for fm in train])  # samples x channels x length
    return Normalizer(mins=stacked.min(axis=(0, 2)), maxs=stacked.max(axis=(0, 2)),
                      feature_set=train[0].feature_set)


def apply_normalizer(nz: Normalizer, fm: FeatureMatrix) -> FeatureMatrix:
    """Map each channel through (v - min) / (max - min).

    Values outside the train range extrapolate linearly (no clipping); a
    degenerate channel (max == min) maps to all zeros.
    """
    if fm.values.shape[0] != nz.mins.shape[0]:
        raise ShapeError(f"normalizer has {nz.mins.shape[0]} channels, "
                         f"features have {fm.values.shape[0]}")
    span = nz.maxs - nz.mins
    safe = np.where(span > 0, span, 1.0)
    out = (fm.values - nz.mins[:, None]) / safe[:, None]
    out[span == 0, :] = 0.0
    return FeatureMatrix(values=out, channel_names=fm.channel_names,
                         feature_set=fm.feature_set, sample_id=fm.sample_id)


def window(fm: FeatureMatrix, size=WINDOW_SIZE, stride=WINDOW_SIZE) -> WindowBatch:
    """Cut contiguous [i*stride, i*stride + size) slices; drop the remainder."""
    length = fm.values.shape[1]
    if length < size:
        raise ShapeError(f"feature length {length} shorter than window size {size}")
    wins = []
    index = 0
    start = 0
    while start + size <= length:
        wins.append(Window(sample_id=fm.sample_id, window_index=index,
                           values=fm.values[:, start:start + size].copy()))
        index += 1
        start += stride
    return WindowBatch(windows=wins, window_size=size, stride=stride)
