from dotenv import load_dotenv
load_dotenv()

import sys
import os
import pytest

# Add the repo root to sys.path for imports
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../')))

from app.tools.distributions import RngStream, TargetDistribution


@pytest.fixture(autouse=True)
def isolated_outputs(tmp_path, monkeypatch):
    # flow logs and the limit-constant cache go to the test's tmp dir
    monkeypatch.setenv("ACDF_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("ACDF_CACHE_PATH", str(tmp_path / "limit_constants.json"))


@pytest.fixture
def exp1():
    return TargetDistribution.exponential(1.0)


@pytest.fixture
def stream():
    return RngStream(20201215, (7,))
