"""``qcaas`` command-line client.

Exit codes:

    0  success
    2  usage error (bad arguments, bad client configuration)
    3  could not reach the service
    4  job or workflow not found
    5  n outside the accepted range
    6  n is prime, nothing to factor
    7  every factorization attempt failed
    8  malformed circuit
    9  request rejected by the service for another reason (capacity, QSR, ...)
   10  unexpected server-side failure
"""
from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, NoReturn
from urllib.parse import urlparse

import click
import httpx

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONNECTION = 3
EXIT_NOT_FOUND = 4
EXIT_INVALID_N = 5
EXIT_PRIME = 6
EXIT_EXHAUSTED = 7
EXIT_MALFORMED = 8
EXIT_REJECTED = 9
EXIT_SERVER = 10

DEFAULT_ENDPOINT = "http://127.0.0.1:8750"

_CODE_EXITS = {
    "NotFound": EXIT_NOT_FOUND,
    "InvalidN": EXIT_INVALID_N,
    "NoNontrivialFactors": EXIT_PRIME,
    "AttemptsExhausted": EXIT_EXHAUSTED,
    "MalformedCircuit": EXIT_MALFORMED,
}


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str
    tenant: str
    output: str = "human"

    def __post_init__(self) -> None:
        url = urlparse(self.endpoint)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise click.UsageError(f"endpoint {self.endpoint!r} is not an http(s) URL")
        if not self.tenant:
            raise click.UsageError("tenant must be non-empty")
        if self.output not in ("human", "structured"):
            raise click.UsageError(f"unknown output mode {self.output!r}")


class CommandFailed(Exception):
    def __init__(self, exit_code: int, message: str, document: Any = None) -> None:
        super().__init__(message)
        self.exit_code = exit_code
        self.document = document


def backoff_delays(base: float = 0.1, factor: float = 2.0, cap: float = 5.0):
    delay = base
    while True:
        yield delay
        delay = min(delay * factor, cap)


class ApiClient:
    def __init__(self, config: ClientConfig, http: httpx.Client | None = None) -> None:
        self.config = config
        self._http = http or httpx.Client(base_url=config.endpoint, timeout=30.0)

    def _call(self, method: str, path: str, body: Any = None) -> Any:
        try:
            resp = self._http.request(method, path, json=body)
        except httpx.TransportError as exc:
            raise CommandFailed(
                EXIT_CONNECTION, f"cannot reach {self.config.endpoint}: {exc}"
            ) from None
        try:
            doc = resp.json()
        except ValueError:
            raise CommandFailed(EXIT_SERVER, f"HTTP {resp.status_code}: non-JSON response") from None
        if resp.status_code >= 400:
            err = doc.get("error", {}) if isinstance(doc, dict) else {}
            code = err.get("code", "")
            message = err.get("message", f"HTTP {resp.status_code}")
            if err.get("diagnostics"):
                message += "\n" + "\n".join(f"  {d}" for d in err["diagnostics"])
            if code in _CODE_EXITS:
                exit_code = _CODE_EXITS[code]
            elif resp.status_code >= 500:
                exit_code = EXIT_SERVER
            else:
                exit_code = EXIT_REJECTED
            raise CommandFailed(exit_code, f"{code or 'error'}: {message}", doc)
        return doc

    def get(self, path: str) -> Any:
        return self._call("GET", path)

    def post(self, path: str, body: Any) -> Any:
        return self._call("POST", path, body)


def _emit_structured(doc: Any) -> None:
    click.echo(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False))


def _fail(ctx: click.Context, err: CommandFailed) -> NoReturn:
    if ctx.obj["config"].output == "structured" and err.document is not None:
        _emit_structured(err.document)
    click.echo(str(err), err=True)
    ctx.exit(err.exit_code)


def _load_client_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read client config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise click.UsageError(f"client config {path} must be a JSON object")
    return doc


def _first(*values):
    """First value that was actually given; an explicit empty string counts."""
    return next(v for v in values if v is not None)


@click.group()
@click.option("--endpoint", default=None, help="Service URL (env QCAAS_ENDPOINT).")
@click.option("--tenant", default=None, help="Tenant to bill (env QCAAS_TENANT).")
@click.option(
    "--output", type=click.Choice(["human", "structured"]), default=None, help="Output mode."
)
@click.option("--seed", type=int, default=None, help="Default RNG seed for commands that take one.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    envvar="QCAAS_CLIENT_CONFIG",
    help="JSON file with endpoint/tenant/output defaults.",
)
@click.pass_context
def cli(ctx, endpoint, tenant, output, seed, config_path):
    """Client for the quantum computing service."""
    ctx.ensure_object(dict)
    file_cfg = _load_client_file(config_path)
    # flag > environment > config file > built-in default
    config = ClientConfig(
        endpoint=_first(endpoint, os.environ.get("QCAAS_ENDPOINT"), file_cfg.get("endpoint"), DEFAULT_ENDPOINT),
        tenant=_first(tenant, os.environ.get("QCAAS_TENANT"), file_cfg.get("tenant"), "default"),
        output=_first(output, file_cfg.get("output"), "human"),
    )
    ctx.obj["config"] = config
    ctx.obj["seed"] = seed
    ctx.obj.setdefault("sleep", time.sleep)


def _client(ctx: click.Context) -> ApiClient:
    if "client" not in ctx.obj:
        ctx.obj["client"] = ApiClient(ctx.obj["config"], ctx.obj.get("http"))
    return ctx.obj["client"]


def _wait_for_workflow(client: ApiClient, workflow_id: str, sleep: Callable[[float], None]) -> dict:
    for delay in backoff_delays():
        doc = client.get(f"/v1/factorize/{workflow_id}")
        if doc["status"] != "running":
            return doc
        sleep(delay)
    raise AssertionError("unreachable")


@cli.command()
@click.argument("n", type=int)
@click.option("--attempts", type=int, default=None, help="Maximum attempts (server default 10).")
@click.option("--shots", type=int, default=None, help="Shots per attempt (server default 1024).")
@click.option("--backend", "backend_id", default=None, help="Backend id.")
@click.option("--seed", type=int, default=None, help="Workflow seed.")
@click.pass_context
def factor(ctx, n, attempts, shots, backend_id, seed):
    """Factor N on the service."""
    config: ClientConfig = ctx.obj["config"]
    client = _client(ctx)
    body: dict[str, Any] = {"tenant": config.tenant, "n": n}
    seed = seed if seed is not None else ctx.obj.get("seed")
    for key, value in (
        ("max_attempts", attempts),
        ("shots_per_attempt", shots),
        ("backend_id", backend_id),
        ("seed", seed),
    ):
        if value is not None:
            body[key] = value
    try:
        workflow_id = client.post("/v1/factorize", body)["workflow_id"]
        doc = _wait_for_workflow(client, workflow_id, ctx.obj["sleep"])
    except CommandFailed as err:
        _fail(ctx, err)

    if config.output == "structured":
        _emit_structured(doc)
    if doc["status"] == "succeeded":
        res = doc["result"]
        if config.output == "human":
            click.echo(f"{n} = {res['p']} × {res['q']}")
            click.echo(
                f"attempts: {res['attempts_used']}  shots: {res['total_shots']}  "
                f"cost: {doc['cost']} micro-credits"
            )
        return
    error = doc.get("error") or {}
    code = error.get("code", "")
    if code == "NoNontrivialFactors":
        message, exit_code = f"{n} is prime", EXIT_PRIME
    elif code == "AttemptsExhausted":
        message, exit_code = f"no factors of {n} found after {doc['attempt']} attempts", EXIT_EXHAUSTED
    else:
        message, exit_code = f"workflow failed: {code}: {error.get('message', '')}", EXIT_SERVER
    if config.output == "human":
        click.echo(message)
        click.echo(f"cost: {doc['cost']} micro-credits")
    else:
        click.echo(message, err=True)
    ctx.exit(exit_code)


@cli.command()
@click.pass_context
def backends(ctx):
    """List the available backends."""
    try:
        docs = _client(ctx).get("/v1/backends")
    except CommandFailed as err:
        _fail(ctx, err)
    if ctx.obj["config"].output == "structured":
        _emit_structured(docs)
        return
    click.echo(f"{'ID':<20} {'QUBITS':>6} {'PRICE/SHOT':>10}  NAME")
    for b in docs:
        click.echo(f"{b['id']:<20} {b['max_qubits']:>6} {b['price_per_shot']:>10}  {b['display_name']}")


@cli.command()
@click.argument("job_id")
@click.pass_context
def job(ctx, job_id):
    """Show a job's status and result."""
    try:
        doc = _client(ctx).get(f"/v1/jobs/{job_id}")
    except CommandFailed as err:
        _fail(ctx, err)
    if ctx.obj["config"].output == "structured":
        _emit_structured(doc)
        return
    click.echo(f"job {doc['job_id']}  [{doc['status']}]")
    click.echo(f"tenant: {doc['tenant']}  backend: {doc['backend_id']}  shots: {doc['shots']}")
    click.echo(f"cost: {doc['cost']} micro-credits")
    if doc.get("error"):
        click.echo(f"error: {doc['error']}")
    if doc.get("result"):
        _print_histogram(doc["result"]["counts"], doc["shots"])


@cli.command()
@click.pass_context
def billing(ctx):
    """Show the tenant's billing ledger."""
    tenant = ctx.obj["config"].tenant
    try:
        doc = _client(ctx).get(f"/v1/billing/{tenant}")
    except CommandFailed as err:
        _fail(ctx, err)
    if ctx.obj["config"].output == "structured":
        _emit_structured(doc)
        return
    click.echo(f"tenant {doc['tenant']}: total {doc['total']} micro-credits")
    for e in doc["entries"]:
        click.echo(f"  {e['job_id']}  {e['shots']} shots x {e['price_per_shot']} = {e['cost']}")


def _print_histogram(counts: dict[str, int], shots: int, width: int = 40) -> None:
    for key in sorted(counts):
        c = counts[key]
        bar = "#" * max(1, round(width * c / shots)) if c else ""
        click.echo(f"{key}  {c:>8}  {bar}")


@cli.command()
@click.argument("circuit_file", type=click.Path(dir_okay=False))
@click.option("--shots", type=click.IntRange(min=1), default=1024, show_default=True)
@click.option("--seed", type=int, default=None, help="RNG seed (random when omitted).")
@click.pass_context
def simulate(ctx, circuit_file, shots, seed):
    """Run a circuit file locally, without a server."""
    from .qsim import CircuitError, circuit_from_dict, run_circuit

    try:
        text = Path(circuit_file).read_text()
    except OSError as exc:
        raise click.UsageError(f"cannot read {circuit_file}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        click.echo(f"{circuit_file}:{exc.lineno}:{exc.colno}: {exc.msg}", err=True)
        ctx.exit(EXIT_MALFORMED)
    seed = seed if seed is not None else ctx.obj.get("seed")
    try:
        circuit = circuit_from_dict(doc)
        result = run_circuit(circuit, shots, seed)
    except CircuitError as exc:
        click.echo(f"{circuit_file}: malformed circuit", err=True)
        for d in exc.diagnostics:
            click.echo(f"  {d}", err=True)
        ctx.exit(EXIT_MALFORMED)
    if ctx.obj["config"].output == "structured":
        _emit_structured(result.to_dict())
        return
    click.echo(f"shots: {result.shots}  seed: {result.seed}")
    _print_histogram(result.counts, result.shots)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
def serve(config_path):
    """Run the service (HTTP API plus workers)."""
    from .service.api import serve as run_server

    run_server(config_path)


def main(argv: list[str] | None = None) -> None:
    cli.main(args=argv, prog_name="qcaas", obj={})


if __name__ == "__main__":  # pragma: no cover
    main(sys.argv[1:])
