"""
Pytest configuration and shared fixtures
"""
from pathlib import Path
from typing import AsyncGenerator, Callable

import numpy as np
import pandas as pd
import pytest
from httpx import AsyncClient
from sklearn.datasets import load_iris, load_wine

from s2pmlp.netsim import Session, frozen_clock
from s2pmlp.schemas import SplitConfig


@pytest.fixture
def cfg() -> SplitConfig:
    """Default protocol parameters with a fixed seed"""
    return SplitConfig(rho=2, verify_rounds=10, mask_scale=1e-2, seed=7)


@pytest.fixture
def session():
    """Fresh session with a frozen clock, closed after the test"""
    with Session(seed=7, clock=frozen_clock) as s:
        yield s


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def _write_sklearn_csv(loader, path: Path) -> Path:
    bunch = loader()
    frame = pd.DataFrame(bunch.data, columns=[f"f{i}" for i in range(bunch.data.shape[1])])
    frame["label"] = [str(bunch.target_names[t]) for t in bunch.target]
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def iris_csv(tmp_path) -> Path:
    """Iris (150 rows, 4 features, 3 classes) as a headered CSV"""
    return _write_sklearn_csv(load_iris, tmp_path / "iris.csv")


@pytest.fixture
def wine_csv(tmp_path) -> Path:
    """Wine (178 rows, 13 features, 3 classes) as a headered CSV"""
    return _write_sklearn_csv(load_wine, tmp_path / "wine.csv")


@pytest.fixture
def write_csv(tmp_path) -> Callable[[str, str], Path]:
    """Write raw CSV text to a temp file"""
    def _write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture
async def client() -> AsyncGenerator[AsyncClient, None]:
    """Create test client"""
    from s2pmlp.main import app

    async with AsyncClient(app=app, base_url="http://test") as ac:
        yield ac


@pytest.fixture
def api_headers():
    from s2pmlp import config

    return {"X-API-Key": config.API_KEY}
