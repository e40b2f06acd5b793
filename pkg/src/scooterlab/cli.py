"""labctl: operate the testbed from the command line.

Exit codes: 0 success, 1 operational error, 2 verification failure (a
simulation census that does not balance). `--json` prints raw API
responses for scripting.
"""

from __future__ import annotations

import json
import signal
import socket
import sys
import tempfile
import threading
import time
from pathlib import Path

import click
import httpx

CONTROLLER_URL_ENV = "SCOOTERLAB_URL"
RAMP_URL_ENV = "SCOOTERLAB_RAMP_URL"
TOKEN_ENV = "SCOOTERLAB_TOKEN"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFICATION = 2


def _fail(message: str, code: int = EXIT_ERROR):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _api_fail(resp: httpx.Response):
    try:
        body = resp.json()
        _fail(f"{body.get('code', resp.status_code)}: {body.get('message', '')}")
    except json.JSONDecodeError:
        _fail(f"http {resp.status_code}: {resp.text[:200]}")


def _request(method: str, url: str, token: str, **kw) -> httpx.Response:
    try:
        resp = httpx.request(method, url, headers={"Authorization": f"Bearer {token}"}, timeout=30.0, **kw)
    except httpx.HTTPError as e:
        _fail(f"cannot reach {url}: {e}")
    if resp.status_code >= 400:
        _api_fail(resp)
    return resp


def _emit(ctx, payload, table_fn=None):
    if ctx.obj["json"] or table_fn is None:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        table_fn(payload)


@click.group()
@click.option("--controller", envvar=CONTROLLER_URL_ENV, default="http://127.0.0.1:8700", show_default=True, help="Fleet controller base URL.")
@click.option("--ramp", envvar=RAMP_URL_ENV, default="http://127.0.0.1:8701", show_default=True, help="Research portal base URL.")
@click.option("--token", envvar=TOKEN_ENV, default="", help="Bearer token (admin secret or session token).")
@click.option("--json", "json_out", is_flag=True, help="Print raw API responses.")
@click.pass_context
def main(ctx, controller, ramp, token, json_out):
    """ScooterLab operator tool."""
    ctx.obj = {"controller": controller.rstrip("/"), "ramp": ramp.rstrip("/"), "token": token, "json": json_out}


def _require_token(ctx):
    if not ctx.obj["token"]:
        _fail(f"a token is required (set {TOKEN_ENV} or --token)")
    return ctx.obj["token"]


# ---------------------------------------------------------------- serve

@main.command()
@click.option("--controller-port", default=8700, show_default=True)
@click.option("--ramp-port", default=8701, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--storage", "storage_path", type=click.Path(), default=None, help="Persistent storage directory (defaults to in-memory).")
@click.option("--token-secret", default="scooterlab-dev", show_default=True)
@click.option("--provider-seed", default=0, show_default=True, help="Seed for the weather/traffic stubs.")
@click.option("--static-dir", type=click.Path(), default=None, help="Serve a web UI bundle from this directory.")
def serve(controller_port, ramp_port, host, storage_path, token_secret, provider_seed, static_dir):
    """Run the fleet controller and research portal in one process."""
    import uvicorn

    from .controller.api import build_controller_app
    from .controller.enrichment import default_providers
    from .controller.service import FleetController
    from .controller.storage import FileStorage, Storage
    from .ramp.api import build_ramp_app
    from .ramp.service import RampService

    for port in (controller_port, ramp_port):
        probe = socket.socket()
        try:
            probe.bind((host, port))
        except OSError:
            _fail(f"port {port} is already in use on {host}")
        finally:
            probe.close()

    storage = FileStorage(storage_path) if storage_path else Storage()
    fc = FleetController(storage, token_secret=token_secret, providers=default_providers(provider_seed))
    ramp_service = RampService(fc)
    servers = []
    for app, port in (
        (build_controller_app(fc), controller_port),
        (build_ramp_app(ramp_service, static_dir=static_dir), ramp_port),
    ):
        config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        servers.append(uvicorn.Server(config))

    threads = [threading.Thread(target=s.run, daemon=True) for s in servers]
    for t in threads:
        t.start()

    stop = threading.Event()

    def _shutdown(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, _shutdown)
    signal.signal(signal.SIGTERM, _shutdown)

    deadline = time.time() + 10.0
    while not all(getattr(s, "started", False) for s in servers):
        if time.time() > deadline or any(not t.is_alive() for t in threads):
            _fail("servers failed to start")
        time.sleep(0.05)
    click.echo(f"fleet-controller listening on http://{host}:{controller_port}")
    click.echo(f"ramp listening on http://{host}:{ramp_port}")
    click.echo(f"admin token: {token_secret}")

    while not stop.is_set() and all(t.is_alive() for t in threads):
        stop.wait(0.2)
    for s in servers:
        s.should_exit = True
    for t in threads:
        t.join(timeout=5.0)
    storage.close()
    click.echo("storage flushed, bye")


# ---------------------------------------------------------------- sim

@main.group()
def sim():
    """Simulation commands."""


@sim.command("scenario")
@click.option("--kind", type=click.Choice(sorted(["demo", "exactly-once", "config-propagation", "gating", "battery-depletion"])), default="demo", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("-o", "--output", type=click.Path(), required=True)
def sim_scenario(kind, seed, output):
    """Write a built-in scenario to a JSON file."""
    from .sim.scenarios import make_scenario
    from .sim.scenario import save_scenario

    save_scenario(make_scenario(kind, seed), output)
    click.echo(f"wrote {kind} scenario to {output}")


@sim.command("run")
@click.argument("scenario_file", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--log", "log_path", type=click.Path(), default=None, help="Write the event log (JSON lines).")
@click.option("--outbox", type=click.Path(), default=None, help="Outbox root (default: a temp dir).")
@click.pass_context
def sim_run(ctx, scenario_file, seed, log_path, outbox, ):
    """Run a scenario against a live controller and verify the census."""
    from .node.uplink import HttpUplink
    from .sim.engine import HttpAdmin, Simulation
    from .sim.scenario import load_scenario

    token = _require_token(ctx)
    base = ctx.obj["controller"]
    scenario = load_scenario(scenario_file)
    if seed is not None:
        scenario.seed = seed

    client = httpx.Client(timeout=30.0)
    try:
        health = client.get(f"{base}/healthz")
        health.raise_for_status()
    except httpx.HTTPError as e:
        _fail(f"controller unreachable at {base}: {e}")

    admin = HttpAdmin(base, token, client=client)
    before = admin.census()
    outbox_dir = Path(outbox) if outbox else Path(tempfile.mkdtemp(prefix="scooterlab-outbox-"))
    simulation = Simulation(
        scenario,
        admin,
        lambda sid, tok: HttpUplink(base, tok, client=client),
        outbox_dir,
    )
    result = simulation.run()
    if log_path:
        simulation.log.write(log_path)
    after = admin.census()

    census = result["census"]
    expected = census["recorded"]
    ingested_delta = after["sample_count"] - before["sample_count"]
    # Deterministic summary only: wall-time figures go to stderr so the
    # JSON output stays bit-stable for golden tests.
    summary = {
        "generated": census["generated"],
        "suppressed": census["suppressed"],
        "recorded": expected,
        "ingested": ingested_delta,
        "dropped": census["dropped"],
        "quarantined": census["quarantined"],
        "degraded": result["degraded"],
        "virtual_s": result["virtual_s"],
    }
    _emit(ctx, summary, lambda p: [click.echo(f"{k:>12}: {v}") for k, v in p.items()])
    click.echo(f"ran {result['virtual_s']:.0f} virtual seconds at {result['speedup']:.0f}x real time", err=True)

    balanced = ingested_delta == expected and not result["degraded"]
    if balanced and before["sample_count"] == 0 and simulation.census.full:
        balanced = _digest_census(simulation.census.recorded) == after["census_digest"]
    if not balanced:
        click.echo(
            f"census mismatch: recorded {expected} != ingested {ingested_delta}"
            + (" (degraded run)" if result["degraded"] else ""),
            err=True,
        )
        sys.exit(EXIT_VERIFICATION)


def _digest_census(counter) -> str:
    import hashlib

    digests = sorted(
        hashlib.sha256(line.encode()).hexdigest()
        for line, n in counter.items()
        for _ in range(n)
    )
    h = hashlib.sha256()
    for d in digests:
        h.update(d.encode())
    return h.hexdigest()


# ---------------------------------------------------------------- fleet

@main.group()
def fleet():
    """Fleet inventory."""


@fleet.command("list")
@click.pass_context
def fleet_list(ctx):
    token = _require_token(ctx)
    resp = _request("GET", f"{ctx.obj['controller']}/v1/scooters", token)
    payload = resp.json()

    def table(p):
        rows = p["scooters"]
        if not rows:
            click.echo("(empty fleet)")
            return
        click.echo(f"{'scooter':<14}{'model':<16}{'status':<13}{'battery':<9}config")
        for s in rows:
            click.echo(f"{s['scooter_id']:<14}{s['model']:<16}{s['status']:<13}{s['battery_pct']:<9.1f}v{s['current_config_version']}")

    _emit(ctx, payload, table)


@fleet.command("register")
@click.argument("scooter_id")
@click.option("--model", default="segway-g30max", show_default=True)
@click.pass_context
def fleet_register(ctx, scooter_id, model):
    token = _require_token(ctx)
    resp = _request("POST", f"{ctx.obj['controller']}/v1/scooters", token, json={"scooter_id": scooter_id, "model": model})
    _emit(ctx, resp.json())


# ---------------------------------------------------------------- project

@main.group()
def project():
    """Research projects."""


@project.command("create")
@click.option("--title", required=True)
@click.option("--policy", "policy_file", type=click.Path(exists=True), required=True, help="Policy JSON file.")
@click.option("--fleet", "fleet_ids", required=True, help="Comma-separated scooter ids.")
@click.pass_context
def project_create(ctx, title, policy_file, fleet_ids):
    token = _require_token(ctx)
    policy = json.loads(Path(policy_file).read_text())
    body = {"title": title, "policy": policy, "fleet": fleet_ids.split(",")}
    resp = _request("POST", f"{ctx.obj['ramp']}/v1/projects", token, json=body)
    _emit(ctx, resp.json(), lambda p: click.echo(f"created {p['project_id']} ({p['state']})"))


@project.command("activate")
@click.argument("project_id")
@click.pass_context
def project_activate(ctx, project_id):
    token = _require_token(ctx)
    resp = _request("POST", f"{ctx.obj['ramp']}/v1/projects/{project_id}/activate", token)
    _emit(ctx, resp.json(), lambda p: click.echo(f"{p['project_id']} active, configs {p.get('issued_config_versions', {})}"))


@project.command("list")
@click.pass_context
def project_list(ctx):
    token = _require_token(ctx)
    resp = _request("GET", f"{ctx.obj['ramp']}/v1/projects", token)

    def table(p):
        if not p["projects"]:
            click.echo("(no projects)")
            return
        for pr in p["projects"]:
            click.echo(f"{pr['project_id']}  {pr['state']:<10}{pr['owner']:<12}{pr['title']}  fleet={','.join(pr['fleet'])}")

    _emit(ctx, resp.json(), table)


# ---------------------------------------------------------------- loan

@main.group()
def loan():
    """Scooter loans."""


_ack_options = [
    click.option("--ack-consent/--no-ack-consent", default=False, help="Rider signed the consent form."),
    click.option("--ack-video/--no-ack-video", default=False, help="Rider watched the safety video."),
    click.option("--ack-survey/--no-ack-survey", default=False, help="Rider completed the travel survey."),
]


def acks(f):
    for opt in _ack_options:
        f = opt(f)
    return f


def _ack_body(ack_consent, ack_video, ack_survey):
    return {"consent_ack": ack_consent, "safety_video_ack": ack_video, "survey_done": ack_survey}


@loan.command("checkout")
@click.option("--rider", required=True)
@click.option("--scooter", required=True)
@acks
@click.pass_context
def loan_checkout(ctx, rider, scooter, ack_consent, ack_video, ack_survey):
    token = _require_token(ctx)
    body = {"rider_id": rider, "scooter_id": scooter, **_ack_body(ack_consent, ack_video, ack_survey)}
    resp = _request("POST", f"{ctx.obj['controller']}/v1/loans", token, json=body)
    _emit(ctx, resp.json(), lambda l: click.echo(f"{l['loan_id']}: {l['scooter_id']} due {l['due_at']}"))


@loan.command("renew")
@click.argument("loan_id")
@acks
@click.pass_context
def loan_renew(ctx, loan_id, ack_consent, ack_video, ack_survey):
    token = _require_token(ctx)
    resp = _request("POST", f"{ctx.obj['controller']}/v1/loans/{loan_id}/renew", token, json=_ack_body(ack_consent, ack_video, ack_survey))
    _emit(ctx, resp.json(), lambda l: click.echo(f"{l['loan_id']} renewed, due {l['due_at']}"))


@loan.command("return")
@click.argument("loan_id")
@click.option("--inspection-pass/--inspection-fail", default=True)
@click.pass_context
def loan_return(ctx, loan_id, inspection_pass):
    token = _require_token(ctx)
    resp = _request("POST", f"{ctx.obj['controller']}/v1/loans/{loan_id}/return", token, json={"inspection_pass": inspection_pass})
    _emit(ctx, resp.json(), lambda r: click.echo(f"returned; scooter now {r['scooter_status']}"))


# ---------------------------------------------------------------- export

@main.command()
@click.option("--format", "fmt", type=click.Choice(["csv", "geojson", "jsonl"]), default="csv", show_default=True)
@click.option("--project", "project_id", default=None)
@click.option("--scooters", default=None, help="Comma-separated scooter ids.")
@click.option("--from-ms", type=int, default=None)
@click.option("--to-ms", type=int, default=None)
@click.option("--region", default=None, help="Polygon 'lat,lon;lat,lon;...'.")
@click.option("--min-distance-m", type=float, default=None)
@click.option("-o", "--output", type=click.Path(), default=None, help="File (default: stdout).")
@click.pass_context
def export(ctx, fmt, project_id, scooters, from_ms, to_ms, region, min_distance_m, output):
    """Download trip data for a filter."""
    token = _require_token(ctx)
    params = {"format": fmt}
    for key, value in (
        ("project_id", project_id),
        ("scooter_ids", scooters),
        ("from_ms", from_ms),
        ("to_ms", to_ms),
        ("region", region),
        ("min_distance_m", min_distance_m),
    ):
        if value is not None:
            params[key] = value
    resp = _request("GET", f"{ctx.obj['ramp']}/v1/export", token, params=params)
    if output:
        Path(output).write_bytes(resp.content)
        click.echo(f"wrote {len(resp.content)} bytes to {output}")
    else:
        click.echo(resp.content.decode("utf-8"), nl=False)


# ---------------------------------------------------------------- battery

@main.command()
@click.pass_context
def battery(ctx):
    """Latest battery levels across the fleet."""
    token = _require_token(ctx)
    resp = _request("GET", f"{ctx.obj['ramp']}/v1/battery", token)

    def table(p):
        for e in p["scooters"]:
            if e["status"] == "unknown":
                click.echo(f"{e['scooter_id']:<14}(no heartbeat yet)")
            else:
                click.echo(f"{e['scooter_id']:<14}{e['battery_pct']:6.1f}%  ~{e['est_range_miles']:.1f} mi")

    _emit(ctx, resp.json(), table)


if __name__ == "__main__":
    main()
