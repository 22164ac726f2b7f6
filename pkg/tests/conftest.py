from pathlib import Path

import pytest

from hybridkd.config import DEFAULT_KLJN, DEFAULT_OPTICAL

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def optical():
    return DEFAULT_OPTICAL


@pytest.fixture
def line():
    return DEFAULT_KLJN


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR
