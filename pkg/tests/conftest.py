import pytest

from shopassist.demo import build_demo_router
from shopassist.router import SessionState


@pytest.fixture
def demo_router():
    return build_demo_router()


@pytest.fixture
def fresh_session():
    return SessionState("test-session")
