"""RW Decay Lab MCP server implementation"""

from mcp.server.fastmcp import FastMCP
import logging
import sys
import asyncio
import click

from rw_decay_lab import configure_logging
from rw_decay_lab.tools.lab import (
    ExperimentSummary,
    ModeSummary,
    experiment_schema,
    mode_summary,
    radius_from_tortoise,
    run_experiment_document,
    tortoise_coordinate,
)

logger = logging.getLogger("rw_decay_lab.mcp")


def create_mcp_server() -> FastMCP:
    """Create and configure the MCP server instance"""
    server = FastMCP(
        "RW Decay Lab",
        dependencies=["numpy", "scipy"],
    )

    # Register all tools with the server
    register_tools(server)

    return server


def register_tools(mcp_server: FastMCP) -> None:
    """Register all MCP tools with the server"""

    @mcp_server.tool(
        name="tortoise",
        description="Tortoise coordinate x = r + 2M log(r/2M - 1) of a Schwarzschild radius r > 2M",
    )
    def tortoise_tool(r: float, mass: float = 1.0) -> float:
        return tortoise_coordinate(r, mass)

    @mcp_server.tool(
        name="radius_of_tortoise",
        description="Schwarzschild radius r for a tortoise coordinate x",
    )
    def radius_of_tortoise_tool(x: float, mass: float = 1.0) -> float:
        return radius_from_tortoise(x, mass)

    @mcp_server.tool(
        name="normalize_mode",
        description="Peak location, semiclassical parameter hbar and curvature of the Regge-Wheeler potential "
                    "for angular momentum ell and perturbation type sigma (1 scalar, 0 electromagnetic, -3 gravitational)",
    )
    def normalize_mode_tool(ell: int, sigma: int = 1, mass: float = 1.0) -> ModeSummary:
        """Wrapper around the mode_summary tool implementation"""
        return mode_summary(ell, sigma, mass)

    @mcp_server.tool(
        name="config_schema",
        description="JSON schema of the TOML experiment configuration",
    )
    def config_schema_tool() -> dict:
        return experiment_schema()

    @mcp_server.tool(
        name="run_experiment",
        description="Run a TOML experiment configuration, write CSV/JSON/series files to out_dir and return "
                    "the checks and fitted values",
    )
    def run_experiment_tool(config_toml: str, out_dir: str = "results") -> ExperimentSummary:
        """Wrapper around the run_experiment_document tool implementation"""
        return run_experiment_document(config_toml, out_dir)


# Create a server instance that can be imported by the MCP CLI
server = create_mcp_server()


@click.command()
@click.option("--verbose", is_flag=True, help="Log at DEBUG level")
def main(verbose: bool) -> None:
    """Run the server over stdio."""
    configure_logging(verbose)
    try:
        asyncio.run(server.run_stdio_async())
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Failed to start server: {e}", exc_info=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
