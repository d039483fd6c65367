# tests/conftest.py
import pytest

from aoi_priority.log import configure_logging
from aoi_priority.model import ModelParams


@pytest.fixture(autouse=True)
def _logging_to_current_stderr():
    # CliRunner swaps sys.stderr; rebind so later tests never write to a closed stream
    configure_logging()
    yield


@pytest.fixture
def reference_params() -> ModelParams:
    """lambda = (2, 5), mu = (10, 5)."""
    return ModelParams.of(lambda1=2.0, lambda2=5.0, mu1=10.0, mu2=5.0)


@pytest.fixture
def single_stream_params() -> ModelParams:
    return ModelParams.of(lambda1=2.0, lambda2=0.0, mu1=10.0, mu2=5.0)


@pytest.fixture
def sweep_fixed() -> dict:
    """Rates held fixed while lambda2 moves over (0, 20)."""
    return {"lambda1": 2.0, "mu1": 10.0, "mu2": 5.0}
