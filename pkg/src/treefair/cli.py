"""Command-line client for the verification service.

Subcommands compose through files: ``analyze`` writes the unstable
rectangles, ``synthesize`` writes the fairness-condition document,
``evaluate`` scores datasets against either artifact, ``rank`` orders the
conditions by training coverage. By default each command runs the service
in-process; ``--server URL`` targets a running instance instead (start one
with ``treefair serve``).

Exit codes: 0 ok, 2 usage or input error, 3 resource limit exceeded.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Any

import click

EXIT_INPUT = 2
EXIT_RESOURCE = 3


class ServiceClient:
    """Minimal POST client: in-process app by default, HTTP when remote."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        resp = self._client.post(path, json=payload)
        if resp.status_code == 200:
            return resp.json()
        try:
            detail = resp.json().get("detail", {})
        except ValueError:
            detail = {}
        kind = detail.get("kind", "input") if isinstance(detail, dict) else "input"
        message = (
            detail.get("message", resp.text) if isinstance(detail, dict) else str(detail)
        )
        click.echo(f"error: {message}", err=True)
        sys.exit(EXIT_RESOURCE if kind == "resource-limit" else EXIT_INPUT)


def _read_json(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        click.echo(f"error: {what} file not found: {path}", err=True)
        sys.exit(EXIT_INPUT)
    except json.JSONDecodeError as exc:
        click.echo(f"error: {what} file is not valid JSON: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        click.echo(f"error: {what} file not found: {path}", err=True)
        sys.exit(EXIT_INPUT)


def _write_json(path: str | None, doc: Any) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        click.echo(text, nl=False)


def _parse_sensitive(values: tuple[str, ...]) -> list[str]:
    names = [n.strip() for v in values for n in v.split(",") if n.strip()]
    if not names:
        raise click.UsageError("at least one sensitive feature is required")
    return names


def _parse_max_iters(value: str) -> int | str:
    if value == "inf":
        return "inf"
    try:
        n = int(value)
    except ValueError:
        raise click.UsageError("--max-iters must be a positive integer or 'inf'")
    if n < 1:
        raise click.UsageError("--max-iters must be a positive integer or 'inf'")
    return n


def _dataset_docs(
    datasets: tuple[str, ...], random_n: int | None, seed: int
) -> list[dict[str, Any]]:
    docs: list[dict[str, Any]] = []
    for path in datasets:
        docs.append({"name": Path(path).name, "csv_text": _read_text(path, "dataset")})
    if random_n:
        docs.append({"name": f"random-{random_n}", "random_n": random_n, "seed": seed})
    if not docs:
        raise click.UsageError("provide --dataset and/or --random")
    return docs


server_option = click.option("--server", default=None, help="remote service URL (default: run in-process)")
model_option = click.option("--model", "model_path", required=True, type=click.Path(), help="model JSON file")
threads_option = click.option("--threads", default=os.cpu_count() or 1, show_default="cpu count", help="worker threads (output is independent of this)")


@click.group()
@click.version_option()
def main() -> None:
    """Global fairness verification for decision-tree ensembles."""


@main.command()
@model_option
@click.option("--sensitive", multiple=True, required=True, help="sensitive feature name(s) or id(s), comma-separable")
@click.option("--max-classes", default=None, type=int, help="equivalence-class budget")
@click.option("--out", type=click.Path(), default=None, help="output file (default: stdout)")
@server_option
def analyze(model_path, sensitive, max_classes, out, server):
    """Compute the unstable hyper-rectangles for a model."""
    payload: dict[str, Any] = {
        "model": _read_json(model_path, "model"),
        "sensitive": _parse_sensitive(sensitive),
    }
    if max_classes:
        payload["max_classes"] = max_classes
    resp = ServiceClient(server).post("/analyze", payload)
    _write_json(out, resp["rectangles"])
    click.echo(
        f"analyze: {len(resp['rectangles'])} rectangles, {resp['elapsed_ms']} ms",
        err=True,
    )


@main.command()
@model_option
@click.option("--sensitive", multiple=True, required=True, help="sensitive feature name(s) or id(s), comma-separable")
@click.option("--max-iters", default="6", show_default=True, help="iteration bound or 'inf'")
@click.option("--max-classes", default=None, type=int)
@click.option("--max-candidates", default=None, type=int)
@threads_option
@click.option("--out", type=click.Path(), default=None, help="output file (default: stdout)")
@server_option
def synthesize(model_path, sensitive, max_iters, max_classes, max_candidates, threads, out, server):
    """Synthesize sufficient conditions for fairness."""
    payload: dict[str, Any] = {
        "model": _read_json(model_path, "model"),
        "sensitive": _parse_sensitive(sensitive),
        "max_iters": _parse_max_iters(max_iters),
        "threads": threads,
    }
    if max_classes:
        payload["max_classes"] = max_classes
    if max_candidates:
        payload["max_candidates"] = max_candidates
    resp = ServiceClient(server).post("/synthesize", payload)
    _write_json(out, resp)
    counts = ", ".join(
        f"iter {i}: +{c}" for i, c in enumerate(resp["per_iteration_counts"], start=1)
    )
    click.echo(
        f"synthesize: {len(resp['formulas'])} conditions "
        f"({counts or 'trivially fair'}), converged={resp['converged']}, "
        f"{resp['elapsed_ms']} ms",
        err=True,
    )
    if resp.get("warning"):
        click.echo(f"warning: {resp['warning']}", err=True)
        sys.exit(EXIT_RESOURCE)


@main.command()
@model_option
@click.option("--sensitive", multiple=True, help="sensitive feature name(s), needed for fresh analysis and coverage curves")
@click.option("--rectangles", "rectangles_path", type=click.Path(), default=None, help="analyze output file")
@click.option("--formulas", "formulas_path", type=click.Path(), default=None, help="synthesize output file")
@click.option("--dataset", "datasets", multiple=True, type=click.Path(), help="dataset CSV (repeatable)")
@click.option("--random", "random_n", type=int, default=None, help="add a uniform random dataset of N instances")
@click.option("--seed", default=0, show_default=True)
@click.option("--curve/--no-curve", default=True, show_default=True, help="include per-iteration coverage curves")
@click.option("--max-classes", default=None, type=int, help="equivalence-class budget for fresh analysis")
@click.option("--out", type=click.Path(), default=None, help="output file (default: stdout)")
@server_option
def evaluate(model_path, sensitive, rectangles_path, formulas_path, datasets, random_n, seed, curve, max_classes, out, server):
    """Score datasets: accuracy (labeled), d from rectangles, d-tilde from formulas."""
    payload: dict[str, Any] = {
        "model": _read_json(model_path, "model"),
        "datasets": _dataset_docs(datasets, random_n, seed),
        "curve": curve,
    }
    if sensitive:
        payload["sensitive"] = _parse_sensitive(sensitive)
    if rectangles_path:
        payload["rectangles"] = _read_json(rectangles_path, "rectangles")
    if formulas_path:
        payload["formulas"] = _read_json(formulas_path, "formulas")
    if max_classes:
        payload["max_classes"] = max_classes
    resp = ServiceClient(server).post("/evaluate", payload)
    doc = {
        "reports": [
            {k: v for k, v in report.items() if v is not None}
            for report in resp["reports"]
        ],
        "elapsed_ms": resp["elapsed_ms"],
    }
    _write_json(out, doc)
    click.echo(f"evaluate: {len(doc['reports'])} dataset(s), {resp['elapsed_ms']} ms", err=True)


@main.command()
@model_option
@click.option("--formulas", "formulas_path", type=click.Path(), required=True, help="synthesize output file")
@click.option("--dataset", "dataset_path", type=click.Path(), required=True, help="training CSV used to measure importance")
@click.option("--top-k", "top_k", type=int, required=True)
@click.option("--out", type=click.Path(), default=None, help="output file (optional)")
@server_option
def rank(model_path, formulas_path, dataset_path, top_k, out, server):
    """Rank formulas by greedy marginal coverage of a training set."""
    if top_k < 1:
        raise click.UsageError("k must be positive")
    payload = {
        "model": _read_json(model_path, "model"),
        "formulas": _read_json(formulas_path, "formulas"),
        "dataset": {"name": Path(dataset_path).name, "csv_text": _read_text(dataset_path, "dataset")},
        "k": top_k,
    }
    resp = ServiceClient(server).post("/rank", payload)
    if out:
        _write_json(out, resp)
    width = max((len(str(r["covered"])) for r in resp["ranked"]), default=1)
    for i, r in enumerate(resp["ranked"], start=1):
        click.echo(f"{i:>3}. [{r['covered']:>{width}} covered] {r['rendered']}")
    click.echo(f"rank: {resp['elapsed_ms']} ms", err=True)


@main.command()
@model_option
@click.option("--dataset", "dataset_path", type=click.Path(), required=True, help="instances CSV")
@click.option("--out", type=click.Path(), default=None, help="output file (default: stdout)")
@server_option
def predict(model_path, dataset_path, out, server):
    """Predict labels for a CSV of instances."""
    import csv as _csv
    import io

    text = _read_text(dataset_path, "dataset")
    rows = list(_csv.reader(io.StringIO(text)))
    if not rows or len(rows) < 2:
        click.echo("error: dataset has no instances", err=True)
        sys.exit(EXIT_INPUT)
    header, data = rows[0], rows[1:]
    has_label = header and header[-1] == "label"
    ncols = len(header) - (1 if has_label else 0)
    try:
        instances = [[float(v) for v in row[:ncols]] for row in data]
    except ValueError as exc:
        click.echo(f"error: non-numeric value in dataset: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    payload = {"model": _read_json(model_path, "model"), "instances": instances}
    resp = ServiceClient(server).post("/predict", payload)
    _write_json(out, resp)
    click.echo(f"predict: {len(resp['labels'])} instances", err=True)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the verification service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
