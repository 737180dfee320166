"""Command-line front end: a thin client of the FastAPI service.

By default requests are served in-process; `--server URL` points the same
commands at a remote instance (`fbs-sim serve`).
"""

from __future__ import annotations

import json
import pathlib
import sys

import click
import httpx


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient
    from .service import app
    return TestClient(app)


def _load_scenario_doc(path, access=None):
    p = pathlib.Path(path)
    if not p.exists():
        click.echo(json.dumps({"error": "scenario_not_found", "path": str(p)}))
        sys.exit(2)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        click.echo(json.dumps({"error": "invalid_scenario", "detail": str(e)}))
        sys.exit(1)
    if access:
        doc["access_procedure"] = access
    return doc


def _options(max_iters, tol):
    opts = {}
    if max_iters is not None:
        opts["max_outer_iterations"] = max_iters
    if tol is not None:
        opts["convergence_tol"] = tol
    return opts


def _post(client, url, payload):
    resp = client.post(url, json=payload)
    if resp.status_code != 200:
        try:
            body = resp.json()
        except ValueError:
            body = {"error": "service_error", "detail": resp.text}
        click.echo(json.dumps(body))
        sys.exit(1)
    return resp.json()


def _write_outputs(out_dir, files):
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    return out


scenario_opt = click.option("--scenario", required=True, help="Scenario JSON path")
seed_opt = click.option("--seed", type=int, default=None, help="Manifest seed")
out_opt = click.option("--out", default="out", help="Output directory")
server_opt = click.option("--server", default=None,
                          help="Base URL of a running service (default: in-process)")
iters_opt = click.option("--max-iters", type=int, default=None)
tol_opt = click.option("--tol", type=float, default=None)


@click.group()
def main():
    """Flying base station latency simulator."""


@main.command()
@scenario_opt
@seed_opt
@out_opt
@server_opt
@iters_opt
@tol_opt
@click.option("--access", type=click.Choice(["rap", "edt"]), default=None,
              help="Override the configured access procedure")
def run(scenario, seed, out, server, max_iters, tol, access):
    """Run the full pipeline and write latency/route/convergence artifacts."""
    doc = _load_scenario_doc(scenario, access)
    payload = {"scenario": doc, "seed": seed}
    opts = _options(max_iters, tol)
    if opts:
        payload["options"] = opts
    with _client(server) as client:
        body = _post(client, "/run", payload)
    out_path = _write_outputs(out, body["artifacts"])
    click.echo(json.dumps({"total_latency_s": body["latency"]["total_s"],
                           "out": str(out_path)}))


@main.command("sweep-power")
@scenario_opt
@seed_opt
@out_opt
@server_opt
@iters_opt
@tol_opt
@click.option("--power-dbm", default="36,38,40,42,44",
              help="Comma-separated FBS power budgets in dBm")
def sweep_power_cmd(scenario, seed, out, server, max_iters, tol, power_dbm):
    """Sweep the FBS power budget and tabulate cumulative latency."""
    doc = _load_scenario_doc(scenario)
    powers = [float(x) for x in power_dbm.split(",") if x.strip()]
    payload = {"scenario": doc, "power_dbm": powers, "seed": seed}
    opts = _options(max_iters, tol)
    if opts:
        payload["options"] = opts
    with _client(server) as client:
        body = _post(client, "/sweep/power", payload)
    out_path = _write_outputs(out, {"power_sweep.csv": body["csv"]})
    click.echo(json.dumps({"rows": len(body["rows"]), "out": str(out_path)}))


@main.command("compare-baselines")
@scenario_opt
@seed_opt
@out_opt
@server_opt
@iters_opt
@tol_opt
@click.option("--baseline", type=click.Choice(["all", "equal", "random", "omni"]),
              default="all")
def compare_baselines_cmd(scenario, seed, out, server, max_iters, tol, baseline):
    """Compare the proposed design against the baseline strategies."""
    doc = _load_scenario_doc(scenario)
    payload = {"scenario": doc, "seed": seed, "baseline": baseline}
    opts = _options(max_iters, tol)
    if opts:
        payload["options"] = opts
    with _client(server) as client:
        body = _post(client, "/baselines/compare", payload)
    out_path = _write_outputs(out, {"baselines.csv": body["csv"]})
    click.echo(json.dumps({"rows": body["rows"], "out": str(out_path)}))


@main.command("access-compare")
@scenario_opt
@out_opt
@server_opt
def access_compare_cmd(scenario, out, server):
    """Tabulate per-waypoint connection time under 4-step RAP vs 2-step EDT."""
    doc = _load_scenario_doc(scenario)
    with _client(server) as client:
        body = _post(client, "/access/compare", {"scenario": doc})
    out_path = _write_outputs(out, {"access.csv": body["csv"]})
    click.echo(json.dumps({"rows": body["rows"], "out": str(out_path)}))


@main.command()
@click.option("--n-turbines", type=int, default=173)
@click.option("--n-waypoints", type=int, default=7)
@click.option("--width-m", type=float, default=53640.0)
@click.option("--height-m", type=float, default=18000.0)
@seed_opt
@server_opt
@click.option("--out-file", default="scenario.json")
def generate(n_turbines, n_waypoints, width_m, height_m, seed, server, out_file):
    """Generate a synthetic turbine/waypoint layout scenario."""
    payload = {"n_turbines": n_turbines, "n_waypoints": n_waypoints,
               "width_m": width_m, "height_m": height_m, "seed": seed or 0}
    with _client(server) as client:
        body = _post(client, "/scenario/generate", payload)
    path = pathlib.Path(out_file)
    path.write_text(json.dumps(body["scenario"], indent=2, sort_keys=True) + "\n")
    click.echo(json.dumps({"out": str(path)}))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn
    from .service import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
