import json
import os
import re
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from conftest import CIRCUITS
from qcaas import cli as qcli
from qcaas.service.api import create_app

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def run(service):
    """Invoke the CLI against an in-process service."""
    http = TestClient(create_app(service))
    runner = CliRunner()

    def invoke(*args, env=None):
        obj = {"http": http, "sleep": lambda d: time.sleep(min(d, 0.02))}
        return runner.invoke(qcli.cli, list(args), obj=obj, env=env or {}, catch_exceptions=False)

    with http:
        yield invoke


def offline(*args):
    return CliRunner().invoke(qcli.cli, list(args), obj={}, catch_exceptions=False)


def golden(name, text):
    path = GOLDEN / name
    if os.environ.get("QCAAS_REGEN_GOLDEN"):
        path.write_text(text)
    assert text == path.read_text()


# --- factor ------------------------------------------------------------------


def test_factor_fifteen(run, service):
    res = run("--tenant", "acme", "factor", "15", "--seed", "42")
    assert res.exit_code == 0, res.output
    lines = res.output.splitlines()
    assert lines[0] == "15 = 3 × 5"
    cost = int(re.search(r"cost: (\d+) micro-credits", lines[1]).group(1))
    assert cost == service.billing("acme")["total"]


def test_factor_seed_from_group_flag(run):
    a = run("--seed", "42", "factor", "21")
    b = run("factor", "21", "--seed", "42")
    assert a.exit_code == b.exit_code == 0
    assert a.output == b.output


def test_factor_prime(run, service):
    res = run("factor", "13")
    assert res.exit_code == qcli.EXIT_PRIME
    assert "13 is prime" in res.output
    assert "cost: 0 micro-credits" in res.output
    assert service.jobs() == []


def test_factor_not_an_integer():
    # no service fixture: a network call would fail with a different code
    res = CliRunner().invoke(qcli.cli, ["--endpoint", "http://127.0.0.1:9", "factor", "abc"], obj={})
    assert res.exit_code == qcli.EXIT_USAGE
    assert "abc" in res.output


def test_factor_out_of_range(run):
    res = run("factor", str(1 << 21))
    assert res.exit_code == qcli.EXIT_INVALID_N


def test_factor_exhausted(run, monkeypatch):
    from qcaas.service.core import QCaaSService

    real = QCaaSService._execute

    def zero_phase(self, job):
        out = real(self, job)
        out.counts = {"0" * out.num_clbits: out.shots}
        return out

    monkeypatch.setattr(QCaaSService, "_execute", zero_phase)
    # seed 1 draws base 10 (coprime to 21) and then never gets lucky in one attempt
    res = run("factor", "21", "--attempts", "1", "--shots", "16", "--seed", "1")
    assert res.exit_code == qcli.EXIT_EXHAUSTED
    assert "no factors of 21" in res.output


def test_factor_structured(run):
    res = run("--output", "structured", "factor", "15", "--seed", "42")
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["status"] == "succeeded"
    assert sorted((doc["result"]["p"], doc["result"]["q"])) == [3, 5]


def test_factor_structured_is_stable_apart_from_ids_and_clock(make_service):
    def one_run():
        svc = make_service(data_dir=Path(os.environ.get("TMPDIR", "/tmp")) / f"qc-{time.monotonic_ns()}")
        with TestClient(create_app(svc)) as http:
            obj = {"http": http, "sleep": lambda d: time.sleep(0.01)}
            res = CliRunner().invoke(qcli.cli, ["--output", "structured", "factor", "21", "--seed", "7"], obj=obj)
        doc = json.loads(res.output)
        for key in ("workflow_id", "submitted_at", "completed_at"):
            doc.pop(key)
        doc.pop("job_ids")
        for rec in doc["trace"]:
            rec.pop("job_id")
        return json.dumps(doc, sort_keys=True)

    assert one_run() == one_run()


# --- backends, job, billing --------------------------------------------------


def test_backends_human(run):
    res = run("backends")
    assert res.exit_code == 0
    assert "local-sim-fast" in res.output and "local-sim-small" in res.output
    assert len(res.output.splitlines()) == 3


def test_backends_structured_golden(run):
    res = run("--output", "structured", "backends")
    golden("backends.json", res.output)


def test_job_unknown(run):
    res = run("job", "does-not-exist")
    assert res.exit_code == qcli.EXIT_NOT_FOUND
    assert "NotFound" in res.output


def test_job_and_billing(run, service):
    bell = json.loads((CIRCUITS / "bell.json").read_text())
    job_id = service.submit_job("acme", bell, 1024, "local-sim-fast", seed=5)
    service.wait_job(job_id, timeout=10)
    res = run("job", job_id)
    assert res.exit_code == 0 and "[Done]" in res.output and "cost: 3072" in res.output
    res = run("--tenant", "acme", "billing")
    assert res.exit_code == 0
    assert "total 3072 micro-credits" in res.output
    doc = json.loads(run("--tenant", "acme", "--output", "structured", "billing").output)
    assert doc["total"] == 3072


def test_billing_empty_golden(run):
    res = run("--tenant", "nobody", "--output", "structured", "billing")
    golden("billing_empty.json", res.output)


def test_tenant_from_environment(run, service):
    bell = json.loads((CIRCUITS / "bell.json").read_text())
    service.wait_job(service.submit_job("envco", bell, 10, "local-sim-small"), timeout=10)
    res = run("billing", env={"QCAAS_TENANT": "envco"})
    assert "tenant envco: total 10" in res.output


def test_connection_failure():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    res = offline("--endpoint", f"http://127.0.0.1:{port}", "backends")
    assert res.exit_code == qcli.EXIT_CONNECTION
    assert "cannot reach" in res.output


@pytest.mark.parametrize("args", [["--endpoint", "ftp://x", "backends"], ["--tenant", "", "backends"]])
def test_bad_client_config(args):
    res = CliRunner().invoke(qcli.cli, args, obj={})
    assert res.exit_code == qcli.EXIT_USAGE


def test_client_config_file(tmp_path):
    path = tmp_path / "client.json"
    path.write_text(json.dumps({"endpoint": "http://127.0.0.1:1", "output": "structured"}))
    res = offline("--config", str(path), "simulate", str(CIRCUITS / "coin.json"), "--seed", "1")
    assert json.loads(res.output)["shots"] == 1024


def test_backoff_schedule():
    gen = qcli.backoff_delays()
    delays = [next(gen) for _ in range(10)]
    assert delays[:4] == pytest.approx([0.1, 0.2, 0.4, 0.8])
    assert max(delays) == 5.0 and delays[-1] == 5.0


# --- simulate ----------------------------------------------------------------


def test_simulate_bell():
    res = offline("--output", "structured", "simulate", str(CIRCUITS / "bell.json"), "--shots", "1000", "--seed", "3")
    doc = json.loads(res.output)
    assert set(doc["counts"]) <= {"00", "11"}
    assert sum(doc["counts"].values()) == 1000


def test_simulate_coin_reproducible():
    args = ["simulate", str(CIRCUITS / "coin.json"), "--shots", "500", "--seed", "11"]
    assert offline(*args).output == offline(*args).output


def test_simulate_structured_golden():
    res = offline("--output", "structured", "simulate", str(CIRCUITS / "bell.json"), "--shots", "1000", "--seed", "3")
    golden("simulate_bell.json", res.output)


def test_simulate_human():
    res = offline("simulate", str(CIRCUITS / "bell.json"), "--shots", "100", "--seed", "3")
    assert res.output.startswith("shots: 100  seed: 3")
    assert re.search(r"^00 +\d+ +#+$", res.output, re.M)


def test_simulate_empty_circuit():
    res = offline("simulate", str(CIRCUITS / "empty.json"))
    assert res.exit_code == qcli.EXIT_MALFORMED
    assert "nothing to sample" in res.output


def test_simulate_malformed_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"num_qubits": 1,\n "ops": [}')
    res = offline("simulate", str(path))
    assert res.exit_code == qcli.EXIT_MALFORMED
    assert f"{path}:2:" in res.output


def test_simulate_bad_field(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"num_qubits": 1, "num_clbits": 1, "ops": [{"gate": "h"}]}))
    res = offline("simulate", str(path))
    assert res.exit_code == qcli.EXIT_MALFORMED
    assert "ops[0]" in res.output


def test_simulate_missing_file(tmp_path):
    res = offline("simulate", str(tmp_path / "nope.json"))
    assert res.exit_code == qcli.EXIT_USAGE


# --- against a real server ---------------------------------------------------


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture
def live_server(tmp_path):
    port = _free_port()
    env = {**os.environ, "QCAAS_PORT": str(port), "QCAAS_DATA_DIR": str(tmp_path / "data")}
    proc = subprocess.Popen(
        [sys.executable, "-m", "qcaas", "serve"],
        env=env,
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 20
    while True:
        try:
            httpx.get(f"{url}/v1/backends", timeout=1)
            break
        except httpx.TransportError:
            if time.monotonic() > deadline or proc.poll() is not None:
                proc.kill()
                pytest.fail("server did not come up")
            time.sleep(0.1)
    yield url
    proc.terminate()
    proc.wait(10)


@pytest.mark.slow
def test_factor_against_live_server(live_server):
    out = subprocess.run(
        [sys.executable, "-m", "qcaas", "--endpoint", live_server, "factor", "15", "--seed", "42"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.splitlines()[0] == "15 = 3 × 5"
    assert "micro-credits" in out.stdout
