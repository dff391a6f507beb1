"""Command line: run suites, transfer heuristic libraries, rebuild reports."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from ..backends.remote import RemoteError, RemoteFamily, profile_from_env
from ..config import FIELD_NAMES, ConfigError, CortexConfig, load_config
from .episode import Mode
from .manifest import ManifestError, load_manifest
from .report import ReportError, write_report
from .runner import StoreError, Stores, default_family, load_records, run_rounds, save_records, transfer_heuristics

_TYPES = {int: click.INT, float: click.FLOAT}


def _config_options(func):
    """One flag per config field, spelled with dashes or underscores."""
    defaults = CortexConfig()
    for name in reversed(FIELD_NAMES):
        if name == "seed":
            continue
        kind = _TYPES[type(getattr(defaults, name))]
        dashed = "--" + name.replace("_", "-")
        func = click.option(dashed, "--" + name, name, type=kind, default=None, help=f"default {getattr(defaults, name)}")(func)
    return func


def _build_config(config_file: str | None, seed: int | None, overrides: dict) -> CortexConfig:
    base = load_config(Path(config_file)) if config_file else CortexConfig()
    changes = {k: v for k, v in overrides.items() if v is not None}
    if seed is not None:
        changes["seed"] = seed
    return base.replace(**changes) if changes else base


def _family(backend: str, config: CortexConfig, out: Path):
    if backend == "oracle":
        return default_family(config)
    return RemoteFamily(profile_from_env(), transcript_dir=out / "transcripts")


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Imagine-then-verify navigation agent with reflective and long-term memory."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--manifest", required=True, help="Manifest file or bundled suite name.")
@click.option("--mode", type=click.Choice([m.value for m in Mode]), default="basic", show_default=True)
@click.option("--rounds", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--bank", type=click.Path(file_okay=False), default=None, help="Episode bank directory.")
@click.option("--library", type=click.Path(file_okay=False), default=None, help="Heuristic library directory.")
@click.option("--backend", type=click.Choice(["oracle", "remote"]), default="oracle", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_config_options
def run(manifest, mode, rounds, bank, library, backend, seed, config_file, out, **overrides):
    """Run a suite for one or more rounds and write the report files."""
    out = Path(out)
    try:
        config = _build_config(config_file, seed, overrides)
        suite = load_manifest(manifest)
        mode = Mode(mode)
        stores = Stores(
            bank=Path(bank) if bank else (out / "bank" if mode.lpm else None),
            library=Path(library) if library else (out / "library" if mode.aki else None),
        )
        records = run_rounds(suite, config, mode, rounds, stores, _family(backend, config, out))
    except (ConfigError, ManifestError, StoreError, RemoteError) as exc:
        _fail(exc)
    save_records(records, out)
    write_report(records, out)
    for rec in records:
        m = rec.metrics
        click.echo(f"round {rec.round_index}: SR {m.sr:.4f}  SPL {m.spl:.4f}  Mean Traj. {m.mean_traj:.2f}")


@main.command()
@click.option("--from", "source", required=True, type=click.Path(file_okay=False), help="Source library directory.")
@click.option("--manifest", required=True, help="Target manifest file or bundled suite name.")
@click.option("--freeze/--no-freeze", default=True, show_default=True)
@click.option("--backend", type=click.Choice(["oracle", "remote"]), default="oracle", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_config_options
def transfer(source, manifest, freeze, backend, seed, config_file, out, **overrides):
    """Apply a heuristic library to another suite, frozen or still learning."""
    out = Path(out)
    try:
        config = _build_config(config_file, seed, overrides)
        suite = load_manifest(manifest)
        record = transfer_heuristics(source, suite, config, freeze, out, _family(backend, config, out))
    except (ConfigError, ManifestError, StoreError, RemoteError) as exc:
        _fail(exc)
    save_records([record], out)
    write_report([record], out)
    m = record.metrics
    click.echo(f"transfer: SR {m.sr:.4f}  SPL {m.spl:.4f}  Mean Traj. {m.mean_traj:.2f}")


@main.command()
@click.option("--runs", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Defaults to the runs directory.")
def report(runs, out):
    """Rebuild the report files from saved run records."""
    records = load_records(runs)
    try:
        paths = write_report(records, out or runs)
    except ReportError as exc:
        _fail(exc)
    for path in paths:
        click.echo(str(path))


if __name__ == "__main__":
    main()
