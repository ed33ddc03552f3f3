"""
Shared fixtures for the test suites.
"""
import pytest

from app.core.schemas import DomainKind, DomainSpec


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: figure-scale runs (minutes); deselect with -m 'not slow'")


@pytest.fixture
def full_box_2d():
    return DomainSpec(kind=DomainKind.FULL_BOX, dimension=2)


@pytest.fixture
def l_shape():
    return DomainSpec(kind=DomainKind.L_SHAPE, dimension=2)
