import os

import pytest

from fraglab.models.schemas import ChainSpec, RydbergParams
from fraglab.services.basis import enumerate_blockaded, enumerate_full

acceptance = pytest.mark.skipif(
    os.environ.get("FRAGLAB_ACCEPTANCE") != "1",
    reason="long-running acceptance check, set FRAGLAB_ACCEPTANCE=1",
)

Z5 = "rggggrggggrggggr"
Z3 = "rggrggrggrggrggr"


@pytest.fixture
def params():
    return RydbergParams()


@pytest.fixture(scope="session")
def basis8():
    return enumerate_blockaded(ChainSpec(n_atoms=8))


@pytest.fixture(scope="session")
def basis10():
    return enumerate_blockaded(ChainSpec(n_atoms=10))


@pytest.fixture(scope="session")
def basis16():
    return enumerate_blockaded(ChainSpec(n_atoms=16))


@pytest.fixture(scope="session")
def full6():
    return enumerate_full(ChainSpec(n_atoms=6))
