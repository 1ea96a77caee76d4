import pytest

from chronoline.datasets import toy_collection, toy_reference
from chronoline.embedding import hashed_embedding_provider


@pytest.fixture(scope="session")
def provider():
    return hashed_embedding_provider(64, 0)


@pytest.fixture(scope="session")
def toy():
    return toy_collection()


@pytest.fixture(scope="session")
def toy_ref():
    return toy_reference()
