from __future__ import annotations

import pytest

from guardgate.lexicon import Lexicon
from guardgate.service import default_lexicon
from guardgate.simulator import load_profile


@pytest.fixture(scope="session")
def profile0():
    """The calibrated A100 profile with jitter disabled."""
    return load_profile("mistral7b-a100", jitter_cv=0.0)


@pytest.fixture(scope="session")
def lexicon() -> Lexicon:
    return default_lexicon()
