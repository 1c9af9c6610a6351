import numpy as np
import pytest

from dphist import Histogram, TreeLayout, TreeVector

FIG1_COUNTS = [2, 0, 10, 2]
FIG1_TRUE_TREE = [14, 2, 12, 2, 0, 10, 2]
FIG1_NOISY_TREE = [13, 3, 11, 4, 1, 12, 1]
FIG1_INFERRED_TREE = [14, 3, 11, 3, 0, 11, 0]


@pytest.fixture
def fig1_hist():
    return Histogram(FIG1_COUNTS)


@pytest.fixture
def fig1_noisy():
    return TreeVector(TreeLayout(2, 3), np.array(FIG1_NOISY_TREE, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
