import pytest

from diskpop import SplitConfig, generate_synthetic_corpus

REFERENCE_SEED = 42
REFERENCE_SIZE = 7375


@pytest.fixture(scope="session")
def split():
    return SplitConfig()


@pytest.fixture(scope="session")
def reference_corpus():
    """The large seeded corpus shared by the heavier end-to-end tests."""
    return generate_synthetic_corpus(REFERENCE_SIZE, REFERENCE_SEED)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(300, 11)
