import numpy as np
import pytest

from chemnmf import NonNegMatrix


def random_system(rng, max_rows=20, max_cols=20, max_rank=5, lo=0.05, hi=1.0):
    """A strictly positive (data, basis, activation) triple of random shape."""
    rows = int(rng.integers(2, max_rows + 1))
    cols = int(rng.integers(2, max_cols + 1))
    rank = int(rng.integers(1, min(max_rank, rows, cols) + 1))
    y = NonNegMatrix(rng.uniform(lo, hi, (rows, cols)))
    basis = NonNegMatrix(rng.uniform(lo, hi, (rows, rank)))
    activation = NonNegMatrix(rng.uniform(lo, hi, (rank, cols)))
    return y, basis, activation


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
