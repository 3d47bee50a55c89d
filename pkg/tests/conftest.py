"""Shared fixtures: small synthetic datasets reused across test modules."""

import pytest

from pumpwatch.dataset import GeneratorConfig, generate_synthetic


@pytest.fixture(scope="session")
def tiny_dataset():
    """20 samples (4 per condition), half anomalous."""
    return generate_synthetic(GeneratorConfig(n_samples_per_condition=4, seed=123))


@pytest.fixture(scope="session")
def small_dataset():
    """40 samples (8 per condition), half anomalous."""
    return generate_synthetic(GeneratorConfig(n_samples_per_condition=8, seed=7))
