import pytest

from bhs import HyperParameters
from bhs.store import store_hyperparams


@pytest.fixture
def store_path(tmp_path):
    path = tmp_path / "store.json"
    store_hyperparams(path, "unit", HyperParameters(m0=0.0, tau=1.0), source="fixture",
                      fitted_at="2026-01-01T00:00:00+00:00")
    return path
