"""Tool implementations behind the MCP server"""

import logging
from pathlib import Path
from typing import Optional

from pydantic import BaseModel

from rw_decay_lab.physics.errors import NumericalError
from rw_decay_lab.physics.geometry import Geometry, normalize_mode, radius_of_tortoise, tortoise
from rw_decay_lab.tools.config import config_schema, parse_config
from rw_decay_lab.tools.experiment import run_experiment
from rw_decay_lab.tools.report import Check, Number

# Define public API
__all__ = [
    'ModeSummary',
    'ExperimentSummary',
    'tortoise_coordinate',
    'radius_from_tortoise',
    'mode_summary',
    'experiment_schema',
    'run_experiment_document',
]

logger = logging.getLogger("rw_decay_lab.lab")


class ModeSummary(BaseModel):
    """Normalization data of one Regge-Wheeler mode"""
    ell: int
    sigma: int
    mass: float
    hbar: float
    x_max: float
    r_max: float
    v_second: float


class ExperimentSummary(BaseModel):
    run_id: str
    kind: str
    passed: bool
    checks: list[Check]
    fits: dict[str, Number]
    files: list[str]


def tortoise_coordinate(r: float, mass: float = 1.0) -> float:
    """x = r + 2M log(r/2M - 1) for r > 2M.

    Raises:
        ValueError: if r is not outside the horizon or mass is not positive
    """
    return float(tortoise(r, Geometry(mass=mass)))


def radius_from_tortoise(x: float, mass: float = 1.0) -> float:
    """Inverse of the tortoise map."""
    return float(radius_of_tortoise(x, Geometry(mass=mass)))


def mode_summary(ell: int, sigma: int = 1, mass: float = 1.0) -> ModeSummary:
    """Locate the potential maximum of a mode and report its semiclassical parameter.

    Raises:
        ValueError: invalid ell, sigma or mass
        RuntimeError: if the maximum cannot be bracketed
    """
    geometry = Geometry(mass=mass, sigma=sigma)
    try:
        mode = normalize_mode(ell, geometry)
    except NumericalError as e:
        raise RuntimeError(f"Failed to normalize mode ell={ell}: {str(e)}") from e
    return ModeSummary(ell=ell, sigma=sigma, mass=mass, hbar=mode.hbar, x_max=mode.x_max,
                       r_max=float(radius_of_tortoise(mode.x_max, geometry)), v_second=mode.v_second)


def experiment_schema() -> dict:
    return config_schema()


def run_experiment_document(config_toml: str, out_dir: Optional[str] = None) -> ExperimentSummary:
    """Parse a TOML experiment, run it and return the summary with the written file paths.

    Raises:
        ValueError: invalid config or arguments the numerics reject
        RuntimeError: numerical failure
        OSError: the report cannot be written
    """
    config = parse_config(config_toml)
    result, files = run_experiment(config, out_dir)
    paths = [str(Path(p)) for p in (files.table, files.summary, *files.series)]
    logger.info(f"experiment {result.run_id} wrote {len(paths)} files")
    return ExperimentSummary(run_id=result.run_id, kind=result.kind, passed=result.passed, checks=result.checks,
                             fits=result.fits, files=paths)
