"""Regge-Wheeler decay lab"""

import logging
import sys

__version__ = "0.1.0"
__all__ = ["configure_logging", "main"]

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(verbose: bool = False) -> None:
    """Send package logs to stderr (stdout carries reports and the MCP protocol)."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
    )


def main():
    """Entry point for the command line"""
    from .cli.app import main as cli_main
    cli_main()


if __name__ == "__main__":
    main()
