"""Minimal-configuration anomaly detection for multivariate pump recordings.

Train an autoencoder on healthy sensor windows only, score new windows by
reconstruction error, and flag a recording as anomalous when the majority of
its windows exceed a threshold calibrated on healthy data.  Ships three
autoencoder recipes (dense, LSTM, convolutional), two classical baselines
(PCA reconstruction, IQR fences) and a CLI harness that runs the whole
detector-by-feature-set grid and renders comparison tables.
"""

__version__ = "0.1.0"
