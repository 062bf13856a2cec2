import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure project root is on sys.path for local test runs without installation.
ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from surprise.data import Dataset  # noqa: E402
from surprise.losses import LossModel  # noqa: E402
from surprise.models import Family  # noqa: E402


@pytest.fixture
def tmp_cache_dir(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    cache.mkdir()
    monkeypatch.setenv("SURPRISE_SAMPLER_CACHE_DIR", str(cache))
    monkeypatch.delenv("XDG_CACHE_HOME", raising=False)
    return cache


def make_logistic(n: int = 2000, theta=(-1.0, 1.0, -0.5), seed: int = 7) -> Dataset:
    rng = np.random.default_rng(seed)
    theta = np.asarray(theta, dtype=float)
    x = rng.standard_normal((n, theta.size - 1))
    t = theta[0] + x @ theta[1:]
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-t))).astype(float)
    return Dataset.from_arrays(x, y)


def make_poisson(n: int = 2000, theta=(0.2, 0.5, -0.3), seed: int = 11) -> Dataset:
    rng = np.random.default_rng(seed)
    theta = np.asarray(theta, dtype=float)
    x = rng.standard_normal((n, theta.size - 1))
    y = rng.poisson(np.exp(theta[0] + x @ theta[1:])).astype(float)
    return Dataset.from_arrays(x, y)


@pytest.fixture
def logistic_data() -> Dataset:
    return make_logistic()


@pytest.fixture
def logistic_model() -> LossModel:
    return LossModel(Family.LOGISTIC, 3)


@pytest.fixture
def poisson_data() -> Dataset:
    return make_poisson()


@pytest.fixture
def write_csv_file(tmp_path):
    def writer(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return writer


@pytest.fixture
def logistic_factory():
    return make_logistic


@pytest.fixture
def poisson_factory():
    return make_poisson
