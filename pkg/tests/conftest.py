from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


from qcaas.service import QCaaSService, load_config  # noqa: E402

CIRCUITS = Path(__file__).resolve().parent.parent / "circuits"

_CRITERIA: list[str] = []


def record_criterion(line: str) -> None:
    _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def make_service(tmp_path):
    services = []

    def factory(data_dir=None, start=True, **overrides):
        cfg = load_config(env={"QCAAS_DATA_DIR": str(data_dir or tmp_path / "data")})
        cfg.fsync = False
        cfg.workers = overrides.pop("workers", 1)
        for key, value in overrides.items():
            setattr(cfg, key, value)
        svc = QCaaSService(cfg, start=start)
        services.append(svc)
        return svc

    yield factory
    for svc in services:
        try:
            svc.stop()
        except Exception:
            pass


@pytest.fixture
def service(make_service):
    return make_service()


@pytest.fixture
def client(service):
    from fastapi.testclient import TestClient

    from qcaas.service.api import create_app

    with TestClient(create_app(service)) as c:
        yield c
