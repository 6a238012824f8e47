import numpy as np
import pytest

from granvar.model import ClassTable


@pytest.fixture
def binary_table() -> ClassTable:
    """Two unit-mass classes; class 0 carries the analyte."""
    return ClassTable.from_arrays([1.0, 1.0], [1.0, 0.0], [0.01, 0.01])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(987654321)
