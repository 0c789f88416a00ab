import os
import sys

import pytest

# Tests import services.* and utils.* the same way the CLI does
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, 'app'))
sys.path.insert(0, ROOT)

RESOURCES = os.path.join(ROOT, 'Resources')


@pytest.fixture
def resource_path():
    def _path(name: str) -> str:
        return os.path.join(RESOURCES, name)
    return _path


@pytest.fixture(autouse=True)
def default_settings():
    """Every test starts from the built-in defaults, whatever the shell exports."""
    from services.settings import Settings, set_settings
    set_settings(Settings())
    yield
    set_settings(None)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: randomized suites with hundreds of decisions; deselect with -m 'not slow'")
