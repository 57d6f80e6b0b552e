import json
from pathlib import Path

import pytest

from svagree.corpus import read_conll
from svagree.extract import ExtractConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_path() -> Path:
    return DATA_DIR / "fixture.conll"


@pytest.fixture(scope="session")
def fixture_sentences(fixture_path):
    return list(read_conll(fixture_path, max_len=None))


@pytest.fixture(scope="session")
def fixture_annotations():
    return json.loads((DATA_DIR / "fixture_annotations.json").read_text())


@pytest.fixture(scope="session")
def keep_all_config() -> ExtractConfig:
    """Extraction config that keeps every dependency of a sentence."""
    return ExtractConfig(select_one=False)
