import pytest

from bilevelpen import registry_get


@pytest.fixture(scope="session")
def fs():
    return registry_get("FS")


@pytest.fixture(scope="session")
def qb():
    return registry_get("QB")
