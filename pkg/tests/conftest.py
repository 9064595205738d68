"""
Shared fixtures for the qubitdyne test suite.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
src_path = Path(__file__).parent.parent
sys.path.insert(0, str(src_path))

from src.fockspace.states import prepare_state


@pytest.fixture
def vacuum():
    return prepare_state("vacuum", 12)


@pytest.fixture
def fock_one():
    return prepare_state("fock", 12, n=1)


@pytest.fixture
def coherent_two():
    return prepare_state("coherent", 30, alpha=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_settings(monkeypatch, tmp_path):
    """Keep logs and progress bars out of the working tree during tests."""
    from src.config.settings import settings

    monkeypatch.setattr(settings, "log_directory", str(tmp_path / "logs"))
    monkeypatch.setattr(settings, "output_directory", str(tmp_path / "runs"))
    monkeypatch.setattr(settings, "show_progress", False)
