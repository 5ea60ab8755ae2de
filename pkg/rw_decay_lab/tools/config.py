"""Experiment configuration: pydantic models read from TOML"""

import sys
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    'ConfigError',
    'ExperimentConfig',
    'GeometryBlock',
    'ModeBlock',
    'GridBlock',
    'BandBlock',
    'FitBlock',
    'DataBlock',
    'EvolutionBlock',
    'MourreBlock',
    'AngularTerm',
    'FullwaveBlock',
    'JostBlock',
    'WkbBlock',
    'Tolerances',
    'OutputBlock',
    'REQUIRED_BLOCKS',
    'parse_config',
    'load_config',
    'config_schema',
]

Kind = Literal["jost", "wkb-compare", "spectrum", "evolve", "mourre", "fullwave", "verify"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message lists every failing field path"""


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryBlock(_Block):
    mass: float = Field(1.0, gt=0)
    sigma: Literal[-3, 0, 1] = 1


class ModeBlock(_Block):
    ell: Optional[int] = Field(None, ge=0, le=200)
    ells: Optional[list[int]] = None

    @model_validator(mode="after")
    def _one_of(self) -> "ModeBlock":
        if self.ell is None and not self.ells:
            raise ValueError("set ell or ells")
        if self.ells and any(ell < 0 for ell in self.ells):
            raise ValueError("angular momenta must be nonnegative")
        return self

    @property
    def values(self) -> list[int]:
        return list(self.ells) if self.ells else [self.ell]


class GridBlock(_Block):
    x_min: float = -400.0
    x_max: float = 400.0
    points: int = Field(8000, ge=16, le=2_000_000)

    @model_validator(mode="after")
    def _ordered(self) -> "GridBlock":
        if self.x_min >= self.x_max:
            raise ValueError("x_min must be below x_max")
        return self


class BandBlock(_Block):
    epsilon: float = Field(0.15, gt=0, lt=0.5)
    e_cut: float = Field(1e3, gt=0)


class FitBlock(_Block):
    t_lo: float = Field(100.0, gt=0)
    t_hi: float = 300.0
    x_obs: float = 10.0

    @model_validator(mode="after")
    def _ordered(self) -> "FitBlock":
        if self.t_lo >= self.t_hi:
            raise ValueError("t_lo must be below t_hi")
        return self


class DataBlock(_Block):
    """Radial bump used as psi (or psi_t when velocity is set)"""
    center: float = 10.0
    width: float = Field(3.0, gt=0)
    profile: Literal["gaussian", "compact"] = "gaussian"
    velocity: bool = False


class EvolutionBlock(_Block):
    t_final: float = Field(300.0, gt=0)
    cfl: float = Field(0.5, gt=0, lt=1)
    method: Literal["timedomain", "spectral", "compare"] = "timedomain"
    times: Optional[list[float]] = None
    weight_l2: float = -4.6
    weight_sup: float = -4.0
    data: DataBlock = DataBlock()


class MourreBlock(_Block):
    hbars: list[float] = [0.1, 0.05]
    points: list[int] = [1500, 2500]
    half_width: float = Field(50.0, gt=0)
    interval: tuple[float, float] = (0.075, 100.0)
    cutoff: tuple[float, float] = (0.5, 1.5)
    cutoff_width: float = Field(0.1, gt=0)
    alpha: float = Field(2.0, ge=0)
    theta: float = Field(0.5, gt=0)
    k_max: int = Field(3, ge=0, le=3)
    times: int = Field(25, ge=2)
    refine: bool = True

    @model_validator(mode="after")
    def _paired(self) -> "MourreBlock":
        if len(self.points) != len(self.hbars):
            raise ValueError("points must list one matrix size per hbar")
        if any(h <= 0 for h in self.hbars):
            raise ValueError("hbar values must be positive")
        if not 0 < self.interval[0] < self.interval[1]:
            raise ValueError("interval must satisfy 0 < a < b")
        return self


class AngularTerm(_Block):
    ell: int = Field(ge=0)
    j: int = 0
    weight: float = 1.0

    @model_validator(mode="after")
    def _index(self) -> "AngularTerm":
        if abs(self.j) > self.ell:
            raise ValueError(f"|j| must not exceed ell={self.ell}")
        return self


class FullwaveBlock(_Block):
    """Data psi(x, omega) = bump(x) * sum of weight * Re Y_{l,j}(omega)"""
    l_max: int = Field(2, ge=0, le=25)
    terms: list[AngularTerm] = [AngularTerm(ell=0), AngularTerm(ell=1, weight=0.5)]
    derivatives: int = Field(2, ge=0)


class JostBlock(_Block):
    energies: list[float] = [0.05, 0.5, 1.0, 5.0]
    free_hbar: float = Field(0.5, gt=0)


class WkbBlock(_Block):
    energy: float = Field(0.075, gt=0)
    offset: float = 5.0
    slope_energies: tuple[float, float] = (1e-3, 1e-2)
    large_energies: list[float] = [100.0, 200.0, 400.0]
    large_ell: int = Field(2, ge=1)


class Tolerances(_Block):
    tail_exponent: float = 0.3
    price_dipole: float = 0.5
    cross_oracle: float = 1e-2
    free_kernel: float = 1e-3
    free_wronskian: float = 1e-10
    free_green: float = 1e-8
    wronskian_slope: float = 0.1
    wronskian_band: float = 2.0
    wkb_halving: float = 2.0
    large_energy_slope: float = 0.5
    mourre_refine: float = 0.1
    commutator_slope: float = 0.3
    propagation_slope: float = 0.4
    minimal_velocity_slope: float = -3.0
    low_band_ratio: float = 10.0
    jost_variation: float = 1e-6


class OutputBlock(_Block):
    directory: str = "results"
    run_id: Optional[str] = None


REQUIRED_BLOCKS: dict[str, tuple[str, ...]] = {
    "jost": ("geometry", "mode", "grid"),
    "wkb-compare": ("geometry", "mode"),
    "spectrum": ("geometry", "mode", "band"),
    "evolve": ("geometry", "mode", "grid", "evolution", "fit"),
    "mourre": ("geometry", "mode", "mourre"),
    "fullwave": ("geometry", "grid", "evolution", "fit", "fullwave"),
    "verify": ("geometry", "mode", "grid", "evolution", "fit"),
}


class ExperimentConfig(_Block):
    """One experiment: its kind plus the blocks that kind reads"""
    kind: Kind
    threads: int = Field(1, ge=1, le=256)
    geometry: Optional[GeometryBlock] = None
    mode: Optional[ModeBlock] = None
    grid: Optional[GridBlock] = None
    band: Optional[BandBlock] = None
    fit: Optional[FitBlock] = None
    evolution: Optional[EvolutionBlock] = None
    mourre: Optional[MourreBlock] = None
    fullwave: Optional[FullwaveBlock] = None
    jost: JostBlock = JostBlock()
    wkb: WkbBlock = WkbBlock()
    tolerances: Tolerances = Tolerances()
    output: OutputBlock = OutputBlock()

    @model_validator(mode="after")
    def _blocks_present(self) -> "ExperimentConfig":
        missing = [name for name in REQUIRED_BLOCKS[self.kind] if getattr(self, name) is None]
        if missing:
            raise ValueError(f"kind {self.kind!r} needs the blocks: {', '.join(missing)}")
        return self

    @property
    def run_id(self) -> str:
        return self.output.run_id or self.kind


def _describe(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def parse_config(document: Union[str, dict]) -> ExperimentConfig:
    """Validate a TOML string (or an already parsed mapping).

    Raises:
        ConfigError: malformed TOML or schema violations, one `path: message` line each
    """
    if isinstance(document, str):
        try:
            document = tomllib.loads(document)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Failed to parse config: {str(e)}") from e
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate a TOML experiment file.

    Raises:
        ConfigError: unreadable file or invalid content
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Failed to read config {path}: {str(e)}") from e
    return parse_config(text)


def config_schema() -> dict:
    return ExperimentConfig.model_json_schema()
