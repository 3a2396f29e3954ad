"""Shared fixtures: one small synthetic corpus and a completion model
trained on it, built once per session."""

import numpy as np
import pytest

from locoforecast.completion import train_completion
from locoforecast.pose import confidence_filter
from locoforecast.synth import NoiseConfig, make_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """(noisy, clean) pairs: 12 scenes, 15 observed + 15 future frames."""
    return make_dataset(12, 15, 15, NoiseConfig(), seed=123)


@pytest.fixture(scope="session")
def trained_completion(small_dataset):
    noisy, _ = small_dataset
    poses = confidence_filter([p for r in noisy for p in r.poses()], 0.25)
    return train_completion(poses, steps=1500, seed=3)
