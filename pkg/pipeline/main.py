"""
UEMR Pipeline CLI - Command-line front end for the forensics toolkit

This module exposes the artifact plumbing around the uemr_core library:
- ingest: parse, classify, cut and range-correct raw inputs
- tag: add illumination state to a stored catalogue
- analyze: run one analysis or all of them and store the results
- report: render stored results as markdown
- synth: write a synthetic catalogue with its ground truth
"""

import logging
from pathlib import Path
from typing import Optional

import click

from uemr_core.catalogue import load_catalogue, read_canonical, write_canonical
from uemr_core.errors import AnalysisError, CatalogueError, GeometryError
from uemr_core.geometry import illuminated_fraction
from uemr_core.synth import generate, write_synthetic

from .config import ConfigError, load_config, load_synth_spec
from .logging_config import configure_logging
from .models import RunConfig
from .reports import get_report_renderer
from .tasks import (ANALYSES, ANALYSES_DIR, CATALOGUE_DIR, CATALOGUE_SUMMARY, catalogue_summary,
                    make_envelope, resolve_analyses, run_analyses, site_from_config, tag_with_config,
                    write_envelope)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_ANALYSIS = 3

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


class UemrGroup(click.Group):
    """Command group that maps toolkit failures onto stable exit codes."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as exc:
            exc.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = EXIT_USAGE
            raise
        except ConfigError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(EXIT_USAGE)
        except CatalogueError as exc:
            click.echo(f"Input error: {exc}", err=True)
            ctx.exit(EXIT_INPUT)
        except (AnalysisError, GeometryError) as exc:
            click.echo(f"Analysis error: {exc}", err=True)
            ctx.exit(EXIT_ANALYSIS)


def _config(ctx: click.Context) -> RunConfig:
    return ctx.obj["config"]


def _out_dir(ctx: click.Context) -> Path:
    return Path(_config(ctx).paths.out_dir)


def _require_file(path: Optional[str], option: str) -> Path:
    if not path:
        raise click.UsageError(f"No {option} given (set paths.{option.replace('-', '_')} or pass --{option})")
    resolved = Path(path)
    if not resolved.is_file():
        raise CatalogueError(f"Input file not found: {resolved}")
    return resolved


@click.group(cls=UemrGroup)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Flat dotted-key YAML run configuration")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override stats.master_seed")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Override paths.out_dir")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default="INFO")
@click.option("--plain-logs", is_flag=True, help="Text log lines instead of JSON")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], seed: Optional[int], out_dir: Optional[str],
        log_level: str, plain_logs: bool):
    """Satellite UEMR forensics pipeline."""
    configure_logging(log_level, plain_logs)
    config = load_config(config_path)
    if seed is not None:
        config = config.model_copy(update={"stats": config.stats.model_copy(update={"master_seed": seed})})
    if out_dir is not None:
        config = config.model_copy(update={"paths": config.paths.model_copy(update={"out_dir": out_dir})})
    ctx.ensure_object(dict)
    ctx.obj["config"] = config
    ctx.obj["seed_override"] = seed


@cli.command()
@click.option("--detections", type=click.Path(dir_okay=False), default=None, help="Override paths.detections")
@click.option("--bus-table", type=click.Path(dir_okay=False), default=None, help="Override paths.bus_table")
@click.pass_context
def ingest(ctx: click.Context, detections: Optional[str], bus_table: Optional[str]):
    """Parse, classify, cut and range-correct the raw inputs."""
    config = _config(ctx)
    detections_path = _require_file(detections or config.paths.detections, "detections")
    bus_table_path = _require_file(bus_table or config.paths.bus_table, "bus-table")

    catalogue = load_catalogue(detections_path, bus_table_path, config.columns or None,
                               config.geometry.reference_range_km)
    out_dir = _out_dir(ctx)
    write_canonical(catalogue, out_dir / CATALOGUE_DIR)
    summary = catalogue_summary(catalogue)
    write_envelope(make_envelope(CATALOGUE_SUMMARY, summary, config, catalogue), out_dir / ANALYSES_DIR)

    counts = ", ".join(f"{row['population']}={row['n_satellites']} sats/{row['n_detections']} det"
                       for row in summary["populations"])
    click.echo(f"Ingested {summary['n_events']} events: {counts}")


@cli.command()
@click.pass_context
def tag(ctx: click.Context):
    """Add illumination state to the stored catalogue."""
    config = _config(ctx)
    out_dir = _out_dir(ctx)
    catalogue = tag_with_config(read_canonical(out_dir / CATALOGUE_DIR), config)
    write_canonical(catalogue, out_dir / CATALOGUE_DIR)
    write_envelope(make_envelope(CATALOGUE_SUMMARY, catalogue_summary(catalogue), config, catalogue),
                   out_dir / ANALYSES_DIR)

    fractions = ", ".join(f"{name}={value:.3f}" for name, value in sorted(illuminated_fraction(catalogue).items()))
    click.echo(f"Tagged {len(catalogue)} events; illuminated fraction: {fractions}")


@cli.command()
@click.option("--which", type=click.Choice(sorted(ANALYSES) + ["all"]), default="all", show_default=True,
              help="Analysis to run")
@click.pass_context
def analyze(ctx: click.Context, which: str):
    """Run analyses on the stored catalogue and write JSON and CSV results."""
    written = run_analyses(resolve_analyses(which), _config(ctx), _out_dir(ctx))
    for name, path in written.items():
        click.echo(f"{name}: {path}")


@cli.command()
@click.option("--ground-truth", type=click.Path(dir_okay=False), default=None,
              help="GroundTruth JSON; defaults to paths.ground_truth, then <out>/ground_truth.json")
@click.pass_context
def report(ctx: click.Context, ground_truth: Optional[str]):
    """Render stored results as a markdown document."""
    truth = ground_truth or _config(ctx).paths.ground_truth
    path, warnings = get_report_renderer().write(_out_dir(ctx), Path(truth) if truth else None)
    for warning in warnings:
        click.echo(f"Warning: {warning}", err=True)
    click.echo(f"Report: {path}")


@cli.command()
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), required=True,
              help="Flat dotted-key YAML SynthSpec")
@click.pass_context
def synth(ctx: click.Context, spec_path: str):
    """Write a synthetic detections table, bus table and ground truth."""
    config = _config(ctx)
    spec = load_synth_spec(spec_path)
    if ctx.obj["seed_override"] is not None:
        spec = spec.model_copy(update={"seed": ctx.obj["seed_override"]})

    catalogue, truth = generate(spec, site_from_config(config), config.stats.n_jobs)
    paths = write_synthetic(catalogue, truth, _out_dir(ctx))
    click.echo(f"Synthetic catalogue: {sum(truth.n_satellites.values())} satellites, "
               f"{sum(truth.n_detections.values())} detections (seed {spec.seed})")
    for path in paths:
        click.echo(str(path))


def main():
    cli(obj={})


if __name__ == "__main__":
    main()
