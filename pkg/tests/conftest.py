import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def blob_image():
    from seslab import synth_image

    return synth_image("gaussian-blobs", 64, 80, seed=3)
