"""Thin command-line client for the lovsim service.

All work happens behind the HTTP endpoints; the CLI builds requests,
ships them to a server (or to the in-process app when --server is not
given), and writes the returned files to disk.
"""

from __future__ import annotations

import base64
import sys
from pathlib import Path

import click
import httpx

EXIT_CODES = {
    "config": 2,
    "domain": 3,
    "normalization": 3,
    "shape": 3,
    "numerics": 4,
    "resolution": 5,
    "ill-conditioned": 5,
    "no-lattice": 5,
    "io": 6,
    "error": 1,
}


def _client(server):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client, path, payload):
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", {})
        except ValueError:
            detail = {}
        category = detail.get("category", "error") if isinstance(detail, dict) else "error"
        message = detail.get("message", response.text) if isinstance(detail, dict) else str(detail)
        click.echo(f"error ({category}): {message}", err=True)
        sys.exit(EXIT_CODES.get(category, 1))
    return response.json()


def _config_payload(config, scenario):
    if (config is None) == (scenario is None):
        click.echo("error (config): provide exactly one of --config or --scenario", err=True)
        sys.exit(EXIT_CODES["config"])
    if config is not None:
        return {"config_text": Path(config).read_text()}
    return {"scenario": scenario}


def _write_files(files, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for f in files:
            path = out / f["name"]
            path.write_bytes(base64.b64decode(f["content_b64"]))
            written.append(path)
    except OSError as exc:
        for path in written:
            path.unlink(missing_ok=True)
        click.echo(f"error (io): {exc}", err=True)
        sys.exit(EXIT_CODES["io"])
    return written


config_option = click.option("--config", type=click.Path(exists=True), help="Config file path.")
scenario_option = click.option("--scenario", help="Name of a packaged scenario.")
server_option = click.option("--server", help="Service URL; defaults to in-process execution.")
seed_option = click.option("--seed", type=int, default=None, help="Monte Carlo seed.")
rays_option = click.option("--rays", type=int, default=None, help="Override ray count.")
csv_option = click.option("--csv", is_flag=True, help="Also emit raw CSV dumps of images.")


@click.group()
def main():
    """Spin-orbit lattice beamline simulator."""


@main.command()
@config_option
@scenario_option
@server_option
@seed_option
@rays_option
@csv_option
@click.option("--out", default="out", show_default=True, help="Output directory.")
def run(config, scenario, server, seed, rays, csv, out):
    """Simulate one beamline configuration and write images + report."""
    payload = _config_payload(config, scenario)
    payload.update({"seed": seed, "n_rays": rays, "csv": csv})
    with _client(server) as client:
        data = _post(client, "/run", payload)
    _write_files(data["files"], out)
    click.echo(data["report"], nl=False)
    click.echo(f"wrote {len(data['files'])} files to {out}")


@main.command()
@config_option
@scenario_option
@server_option
@seed_option
@rays_option
@csv_option
@click.option("--param", default=None, help="Swept parameter path, e.g. elements[0].offset_mm.")
@click.option("--values", default=None, help="Comma-separated values for the sweep.")
@click.option("--out", default="out", show_default=True, help="Output directory.")
def sweep(config, scenario, server, seed, rays, csv, param, values, out):
    """Run a one-parameter sweep; one output subdirectory per value."""
    payload = _config_payload(config, scenario)
    payload.update({"seed": seed, "n_rays": rays, "csv": csv})
    if param:
        payload["param"] = param
    if values:
        payload["values"] = [float(v) for v in values.split(",")]
    with _client(server) as client:
        data = _post(client, "/sweep", payload)
    for value, run_data in zip(data["values"], data["runs"]):
        label = f"{value:g}".replace("-", "m")
        subdir = Path(out) / f"{data['param'].replace('[', '_').replace(']', '')}_{label}"
        _write_files(run_data["files"], subdir)
        click.echo(f"{data['param']} = {value:g}: wrote {len(run_data['files'])} files to {subdir}")


@main.command()
@config_option
@scenario_option
@server_option
@seed_option
@rays_option
@click.option("--objective", default="visibility", show_default=True,
              type=click.Choice(["visibility", "lattice_contrast", "fidelity"]))
@click.option("--free", default=None,
              help="Comma-separated prism indices to tune; default all.")
def optimize(config, scenario, server, seed, rays, objective, free):
    """Tune prism coil currents to maximize an image objective."""
    payload = _config_payload(config, scenario)
    payload.update({"seed": seed, "n_rays": rays, "objective": objective})
    if free:
        payload["free_currents"] = [int(i) for i in free.split(",")]
    with _client(server) as client:
        data = _post(client, "/optimize", payload)
    click.echo(f"objective {objective}: {data['initial_objective']:.6g} -> {data['objective']:.6g}")
    click.echo("currents (A): " + ", ".join(f"{c:.4g}" for c in data["currents"]))
    if data["flat"]:
        click.echo("objective was flat; initial currents returned")
    click.echo(f"evaluations: {data['evaluations']}")


@main.command()
@config_option
@scenario_option
@server_option
def validate(config, scenario, server):
    """Parse and validate a config; print the resolved document."""
    payload = _config_payload(config, scenario)
    with _client(server) as client:
        data = _post(client, "/validate", payload)
    click.echo(data["resolved_config"], nl=False)
    for d in data["applied_defaults"]:
        click.echo(f"default applied: {d}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("lovsim.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
