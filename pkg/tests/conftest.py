import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seedforge import ImageGrid


def grid_from(values) -> ImageGrid:
    """Wrap already-normalized values as an ImageGrid."""
    arr = np.asarray(values, dtype=np.float64)
    return ImageGrid(arr, (1.0,) * arr.ndim, 0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20170904)
