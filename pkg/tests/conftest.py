import numpy as np
import pytest
import torch

torch.use_deterministic_algorithms(True)


@pytest.fixture(autouse=True)
def _seed_everything():
    torch.manual_seed(0)
    np.random.seed(0)
    yield
