import numpy as np
import pytest
from fastapi.testclient import TestClient

from main import app


@pytest.fixture(scope="module")
def client():
    yield TestClient(app)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240415)


@pytest.fixture()
def out_dir(tmp_path):
    return tmp_path / "results"
