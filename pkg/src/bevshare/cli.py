"""Command-line entry points: experiment sweeps and wire-format
conformance checks."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

import click

from .config import ConfigError, load_config
from .grid import GridSpec
from .pipeline import sweep as run_sweep
from .protocol import decode_message, encode_message


@click.group()
def main() -> None:
    """Multi-agent BEV feature-sharing testbed."""


@main.command(name="sweep")
@click.argument(
    "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path)
)
@click.option("--out", default=None, help="Output stem; overrides the config's.")
@click.option(
    "--threads",
    default=1,
    show_default=True,
    type=int,
    help="Parallel seed workers (results identical at any count).",
)
@click.option(
    "--seed-override",
    default=None,
    type=int,
    help="Run only this seed instead of the config's seed list.",
)
def sweep_cmd(
    config_path: Path, out: str | None, threads: int, seed_override: int | None
) -> None:
    """Run the strategies x seeds x sigmas x budgets grid from a JSON
    config and write <stem>.csv and <stem>.json atomically."""
    try:
        cfg = load_config(config_path)
        rows = run_sweep(cfg, out=out, threads=threads, seed_override=seed_override)
    except (ConfigError, OSError, RuntimeError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    stem = out if out is not None else cfg.out
    click.echo("wrote %d rows to %s.csv and %s.json" % (len(rows), stem, stem))


def _golden_dir():
    return resources.files("bevshare").joinpath("data/golden")


@main.command(name="conformance")
def conformance_cmd() -> None:
    """Verify the shipped golden wire frames: checksum, decode, and
    bit-exact re-encode."""
    root = _golden_dir()
    manifest = json.loads(root.joinpath("manifest.json").read_text(encoding="utf-8"))
    failures = 0
    for fx in manifest["fixtures"]:
        name = fx["file"]
        raw = root.joinpath(name).read_bytes()
        problems = []
        digest = hashlib.sha256(raw).hexdigest()
        if digest != fx["sha256"]:
            problems.append("checksum mismatch")
        if len(raw) != fx["frame_bytes"]:
            problems.append(
                "length %d, manifest says %d" % (len(raw), fx["frame_bytes"])
            )
        spec = GridSpec(
            rows=fx["grid"]["rows"],
            cols=fx["grid"]["cols"],
            x_min=0.0,
            x_max=float(fx["grid"]["rows"]),
            y_min=0.0,
            y_max=float(fx["grid"]["cols"]),
        )
        try:
            msg = decode_message(raw, spec)
        except Exception as exc:  # noqa: BLE001 - report any decode failure
            problems.append("decode failed: %s" % exc)
        else:
            if msg.n_entries != fx["entries"]:
                problems.append("entry count %d != %d" % (msg.n_entries, fx["entries"]))
            if msg.channels != fx["channels"]:
                problems.append("channels %d != %d" % (msg.channels, fx["channels"]))
            if encode_message(msg) != raw:
                problems.append("re-encode differs from frame bytes")
        if problems:
            failures += 1
            click.echo("FAIL %s: %s" % (name, "; ".join(problems)))
        else:
            click.echo(
                "OK   %s (n=%d, C=%d, %d bytes)"
                % (name, fx["entries"], fx["channels"], fx["frame_bytes"])
            )
    if failures:
        raise click.ClickException("%d golden fixture(s) failed" % failures)
    click.echo("all %d fixtures conform" % len(manifest["fixtures"]))
