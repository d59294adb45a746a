import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from imsearch import Gateway, PipelineConfig
from imsearch.gateway import ROLES
from imsearch.gateway.mock import MockBackend

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def mock_backend() -> MockBackend:
    return MockBackend(dim=16, backend_id="mock-test")


@pytest.fixture
def mock_gateway(mock_backend):
    config = PipelineConfig(retry_backoff_s=0.001)
    return Gateway({role: mock_backend for role in ROLES}, config)


def make_mock_gateway(mock: MockBackend, **config_kwargs) -> Gateway:
    config_kwargs.setdefault("retry_backoff_s", 0.001)
    config = PipelineConfig(**config_kwargs)
    return Gateway({role: mock for role in ROLES}, config)
