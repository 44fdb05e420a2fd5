import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from recombkin import AlphabetSpec


@pytest.fixture
def binary3():
    return AlphabetSpec(2, 3)


@pytest.fixture
def binary2():
    return AlphabetSpec(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
