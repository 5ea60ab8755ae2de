"""Command line: run experiments, print the config schema, serve the MCP tools"""

import json
import logging
import sys
from typing import Optional

import click

from rw_decay_lab import configure_logging
from rw_decay_lab.tools.config import ConfigError, config_schema, load_config
from rw_decay_lab.tools.experiment import run_experiment
from rw_decay_lab.tools.report import report_schema

__all__ = ['cli', 'main', 'EXIT_OK', 'EXIT_ERROR', 'EXIT_CHECK_FAILED']

logger = logging.getLogger("rw_decay_lab.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


@click.group()
def cli():
    """Regge-Wheeler decay lab."""


@cli.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: output.directory from the config)")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Parallel workers")
@click.option("--verbose", is_flag=True, help="Log at DEBUG level")
@click.pass_context
def run(ctx: click.Context, config: str, out_dir: Optional[str], threads: Optional[int], verbose: bool):
    """Run the experiment described by a TOML CONFIG file."""
    configure_logging(verbose)
    try:
        experiment = load_config(config)
    except ConfigError as e:
        logger.error(f"invalid config {config}:\n{e}")
        ctx.exit(EXIT_ERROR)
    try:
        result, files = run_experiment(experiment, out_dir, threads)
    except Exception as e:
        logger.error(f"Failed to run {config}: {e}", exc_info=True)
        ctx.exit(EXIT_ERROR)
    click.echo(str(files.summary))
    failed = [check.name for check in result.checks if not check.passed]
    if failed:
        logger.error(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        ctx.exit(EXIT_CHECK_FAILED)
    ctx.exit(EXIT_OK)


@cli.command()
@click.option("--report", is_flag=True, help="Schema of the JSON summary instead of the config")
def schema(report: bool):
    """Print the JSON schema of experiment configs (or of report summaries)."""
    click.echo(json.dumps(report_schema() if report else config_schema(), indent=2))


@cli.command()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level")
@click.pass_context
def serve(ctx: click.Context, verbose: bool):
    """Serve the lab as MCP tools over stdio."""
    import asyncio
    from rw_decay_lab.server.app import server

    configure_logging(verbose)
    try:
        asyncio.run(server.run_stdio_async())
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Failed to start server: {e}", exc_info=True)
        ctx.exit(EXIT_ERROR)


def main(argv: Optional[list[str]] = None) -> None:
    """Console entry point; click usage errors map to exit status 1."""
    try:
        code = cli.main(args=argv, prog_name="rw_decay_lab", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        code = EXIT_ERROR
    except click.Abort:
        code = EXIT_ERROR
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
