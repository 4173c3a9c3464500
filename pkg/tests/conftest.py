import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from warfarin_bandits.dataset import WarfarinDataset, generate_synthetic_records

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def synthetic_dataset():
    return WarfarinDataset.from_records(generate_synthetic_records(600, seed=11, noise_sd=4.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def real_data_path():
    path = os.environ.get("WARFARIN_DATA")
    if not path or not Path(path).is_file():
        pytest.skip("WARFARIN_DATA does not point at the IWPC/PharmGKB table")
    return Path(path)
