"""Schwarzschild coordinate maps, Regge-Wheeler potential and mode normalization.

Geometric units throughout. The tortoise coordinate x = r + 2M log(r/2M - 1) maps the
exterior (2M, inf) onto the real line; every potential below is a function of x.
"""

import logging
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import optimize, special

from rw_decay_lab.physics.errors import BracketError, DomainError

__all__ = [
    'Geometry',
    'Grid',
    'ModeContext',
    'Potential',
    'ReggeWheelerPotential',
    'FreePotential',
    'SquareBarrier',
    'lambert_w0',
    'tortoise',
    'tortoise_derivative',
    'radius_of_tortoise',
    'tortoise_of_offset',
    'horizon_offset',
    'photon_sphere_radius',
    'potential',
    'normalize_mode',
    'plain_mode',
]

logger = logging.getLogger("rw_decay_lab.geometry")

ArrayLike = Union[float, np.ndarray]

# smallest representable offset (r - 2M)/2M before the horizon clamp kicks in
HORIZON_CLAMP = 1e-300
MAXIMUM_XTOL = 1e-12


class Geometry(BaseModel):
    """Black hole mass and perturbation type (1 scalar, 0 electromagnetic, -3 gravitational)"""
    model_config = ConfigDict(frozen=True)

    mass: float = Field(1.0, gt=0)
    sigma: Literal[-3, 0, 1] = 1


class Grid(BaseModel):
    """Strictly increasing set of tortoise nodes"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: np.ndarray
    kind: Literal["uniform", "graded"] = "uniform"

    @field_validator("nodes", mode="before")
    @classmethod
    def _check_nodes(cls, value: np.ndarray) -> np.ndarray:
        nodes = np.asarray(value, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("grid needs a one dimensional array of at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("grid nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        return nodes

    @classmethod
    def uniform(cls, start: float, stop: float, points: int) -> "Grid":
        return cls(nodes=np.linspace(start, stop, int(points)), kind="uniform")

    @classmethod
    def graded(cls, start: float, stop: float, points: int, center: float = 0.0,
               stretch: float = 1.0) -> "Grid":
        """Nodes clustered around center with a sinh map of width stretch."""
        lo = np.arcsinh((start - center) / stretch)
        hi = np.arcsinh((stop - center) / stretch)
        xi = np.linspace(lo, hi, int(points))
        nodes = center + stretch * np.sinh(xi)
        nodes[0], nodes[-1] = start, stop
        return cls(nodes=nodes, kind="graded")

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def spacing(self) -> Optional[float]:
        if self.kind != "uniform":
            return None
        return float(self.nodes[1] - self.nodes[0])

    @property
    def midpoint(self) -> float:
        return float(self.nodes[self.size // 2])

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])


def lambert_w0(z: float) -> float:
    """Principal branch of the Lambert function, W(z) e^W(z) = z.

    Raises:
        DomainError: for z < -1/e
    """
    if z < -np.exp(-1.0):
        raise DomainError(f"Lambert W0 undefined for z={z} < -1/e")
    return float(special.lambertw(z, 0).real)


def tortoise(r: ArrayLike, geometry: Geometry) -> ArrayLike:
    """Tortoise coordinate x = r + 2M log(r/2M - 1).

    Raises:
        DomainError: if any r <= 2M
    """
    two_m = 2.0 * geometry.mass
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= two_m):
        raise DomainError(f"tortoise coordinate needs r > 2M = {two_m}")
    x = r_arr + two_m * np.log(r_arr / two_m - 1.0)
    return float(x) if np.ndim(r) == 0 else x


def tortoise_derivative(r: ArrayLike, geometry: Geometry) -> ArrayLike:
    """dx/dr = 1/(1 - 2M/r)"""
    return 1.0 / (1.0 - 2.0 * geometry.mass / np.asarray(r, dtype=float))


def horizon_offset(x: ArrayLike, geometry: Geometry) -> ArrayLike:
    """W = (r - 2M)/2M as a function of x, computed without cancellation.

    W = W0(exp(x/2M - 1)), evaluated through the Wright omega function so that large x
    does not overflow. Values below HORIZON_CLAMP are clamped and logged.
    """
    u = np.asarray(x, dtype=float) / (2.0 * geometry.mass) - 1.0
    w = np.real(special.wrightomega(u))
    clamped = w < HORIZON_CLAMP
    if np.any(clamped):
        logger.warning(f"horizon clamp applied at {int(np.count_nonzero(clamped))} node(s)")
        w = np.where(clamped, HORIZON_CLAMP, w)
    return float(w) if np.ndim(x) == 0 else w


def radius_of_tortoise(x: ArrayLike, geometry: Geometry) -> ArrayLike:
    """Inverse of tortoise: r = 2M (1 + W0(exp(x/2M - 1)))."""
    return 2.0 * geometry.mass * (1.0 + horizon_offset(x, geometry))


def tortoise_of_offset(w: ArrayLike, geometry: Geometry) -> ArrayLike:
    """Tortoise coordinate from W = (r - 2M)/2M; exact near the horizon where r itself
    cannot resolve r - 2M."""
    two_m = 2.0 * geometry.mass
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr <= 0):
        raise DomainError("horizon offset must be positive")
    x = two_m * (1.0 + w_arr) + two_m * np.log(w_arr)
    return float(x) if np.ndim(w) == 0 else x


def photon_sphere_radius(geometry: Geometry) -> float:
    return 3.0 * geometry.mass


class Potential:
    """Interface shared by the Regge-Wheeler potential and the test-hook potentials.

    Attributes:
        scale: multiplicative factor (hbar^2 for normalized modes)
        far_field_index: integer l_c with V/scale ~ l_c(l_c+1)/x^2 as x -> +inf
    """

    scale: float = 1.0
    far_field_index: int = 0

    def value(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def derivative(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def second_derivative(self, x: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def right_tail(self, x: float) -> float:
        """Exact integral of V over (x, inf)."""
        raise NotImplementedError

    def left_tail(self, x: float) -> float:
        """Exact integral of V over (-inf, x)."""
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Interval outside which V is negligible or purely centrifugal."""
        return -np.inf, np.inf

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return self.value(x)


class ReggeWheelerPotential(Potential):
    """V(x) = scale (1 - 2M/r)(l(l+1)/r^2 + 2M sigma/r^3) with r = r(x)."""

    def __init__(self, ell: int, geometry: Geometry, scale: float = 1.0):
        if ell < 0:
            raise DomainError(f"ell must be nonnegative, got {ell}")
        self.ell = int(ell)
        self.geometry = geometry
        self.scale = float(scale)
        self.far_field_index = self.ell
        self._angular = float(ell * (ell + 1))

    def _radial(self, x: ArrayLike):
        m = self.geometry.mass
        w = horizon_offset(x, self.geometry)
        r = 2.0 * m * (1.0 + w)
        f = w / (1.0 + w)
        return r, f

    def _radial_parts(self, r):
        m, s, ang = self.geometry.mass, self.geometry.sigma, self._angular
        g = ang / r**2 + 2.0 * m * s / r**3
        g1 = -2.0 * ang / r**3 - 6.0 * m * s / r**4
        g2 = 6.0 * ang / r**4 + 24.0 * m * s / r**5
        f1 = 2.0 * m / r**2
        f2 = -4.0 * m / r**3
        return g, g1, g2, f1, f2

    def value(self, x: ArrayLike) -> ArrayLike:
        r, f = self._radial(x)
        g = self._radial_parts(r)[0]
        return self.scale * f * g

    def derivative(self, x: ArrayLike) -> ArrayLike:
        r, f = self._radial(x)
        g, g1, _, f1, _ = self._radial_parts(r)
        v_r = f1 * g + f * g1
        return self.scale * f * v_r

    def second_derivative(self, x: ArrayLike) -> ArrayLike:
        r, f = self._radial(x)
        g, g1, g2, f1, f2 = self._radial_parts(r)
        v_r = f1 * g + f * g1
        v_rr = f2 * g + 2.0 * f1 * g1 + f * g2
        return self.scale * f * (f1 * v_r + f * v_rr)

    def value_of_radius(self, r: ArrayLike) -> ArrayLike:
        r = np.asarray(r, dtype=float)
        f = 1.0 - 2.0 * self.geometry.mass / r
        return self.scale * f * self._radial_parts(r)[0]

    def radial_derivative(self, r: ArrayLike) -> ArrayLike:
        """dV/dr, used to bracket the maximum."""
        r = np.asarray(r, dtype=float)
        f = 1.0 - 2.0 * self.geometry.mass / r
        g, g1, _, f1, _ = self._radial_parts(r)
        return self.scale * (f1 * g + f * g1)

    def right_tail(self, x: float) -> float:
        r = radius_of_tortoise(x, self.geometry)
        return self.scale * (self._angular / r + self.geometry.mass * self.geometry.sigma / r**2)

    def left_tail(self, x: float) -> float:
        m = self.geometry.mass
        w = horizon_offset(x, self.geometry)
        r = 2.0 * m * (1.0 + w)
        return self.scale * (self._angular * w / r
                             + self.geometry.sigma * w * (r + 2.0 * m) / (2.0 * r**2))


class FreePotential(Potential):
    """V = 0."""

    def value(self, x: ArrayLike) -> ArrayLike:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0

    derivative = value
    second_derivative = value

    def right_tail(self, x: float) -> float:
        return 0.0

    def left_tail(self, x: float) -> float:
        return 0.0

    def support(self) -> tuple[float, float]:
        return 0.0, 0.0


class SquareBarrier(Potential):
    """V = height on [a, b], zero elsewhere. Derivatives are taken as zero."""

    def __init__(self, height: float, a: float, b: float):
        if not b > a:
            raise DomainError("square barrier needs b > a")
        self.height, self.a, self.b = float(height), float(a), float(b)

    def value(self, x: ArrayLike) -> ArrayLike:
        x_arr = np.asarray(x, dtype=float)
        v = np.where((x_arr >= self.a) & (x_arr <= self.b), self.height, 0.0)
        return float(v) if np.ndim(x) == 0 else v

    def derivative(self, x: ArrayLike) -> ArrayLike:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0

    second_derivative = derivative

    def right_tail(self, x: float) -> float:
        return self.height * max(0.0, self.b - max(x, self.a))

    def left_tail(self, x: float) -> float:
        return self.height * max(0.0, min(x, self.b) - self.a)

    def support(self) -> tuple[float, float]:
        return self.a, self.b


def potential(x: ArrayLike, ell: int, geometry: Geometry) -> ArrayLike:
    """Regge-Wheeler potential V_{l,sigma}(x) (unnormalized)."""
    return ReggeWheelerPotential(ell, geometry).value(x)


class ModeContext(BaseModel):
    """Semiclassical data of one angular mode.

    The potential stored here is the normalized one, V(x; hbar) = hbar^2 V_{l,sigma}(x),
    so that V(x_max; hbar) = 1 for modes built by normalize_mode.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ell: int = Field(ge=0)
    hbar: float = Field(gt=0)
    x_max: float
    v_second: float
    geometry: Optional[Geometry] = None
    potential: Potential

    @classmethod
    def for_potential(cls, potential: Potential, hbar: float = 1.0, x_max: float = 0.0,
                      ell: int = 0) -> "ModeContext":
        """Context around an arbitrary potential (free and barrier test hooks)."""
        return cls(ell=ell, hbar=hbar, x_max=x_max,
                   v_second=float(potential.second_derivative(x_max)), potential=potential)

    def V(self, x: ArrayLike) -> ArrayLike:
        return self.potential.value(x)

    def dV(self, x: ArrayLike) -> ArrayLike:
        return self.potential.derivative(x)

    def d2V(self, x: ArrayLike) -> ArrayLike:
        return self.potential.second_derivative(x)

    @property
    def is_regge_wheeler(self) -> bool:
        return isinstance(self.potential, ReggeWheelerPotential)


def _radius_of_maximum(pot: ReggeWheelerPotential) -> float:
    m = pot.geometry.mass
    radii = 2.0 * m * (1.0 + np.geomspace(1e-6, 50.0, 4000))
    slope = pot.radial_derivative(radii)
    crossings = np.nonzero((slope[:-1] > 0) & (slope[1:] <= 0))[0]
    if crossings.size == 0:
        raise BracketError(
            f"Failed to bracket the potential maximum for ell={pot.ell}, sigma={pot.geometry.sigma}")
    i = int(crossings[0])
    return optimize.brentq(pot.radial_derivative, radii[i], radii[i + 1],
                           xtol=MAXIMUM_XTOL * m, rtol=4 * np.finfo(float).eps)


def normalize_mode(ell: int, geometry: Geometry) -> ModeContext:
    """Locate the maximum of V_{l,sigma} and rescale so that it equals one.

    Args:
        ell: angular momentum, at least 1
        geometry: mass and perturbation type

    Returns:
        ModeContext with hbar = V_{l,sigma}(x_max)^{-1/2}

    Raises:
        DomainError: for ell < 1
        BracketError: if V_{l,sigma} has no interior maximum
    """
    if ell < 1:
        raise DomainError(f"normalize_mode needs ell >= 1, got {ell}")
    raw = ReggeWheelerPotential(ell, geometry)
    r_max = _radius_of_maximum(raw)
    peak = float(raw.value_of_radius(r_max))
    if peak <= 0:
        raise BracketError(f"Failed to normalize mode ell={ell}: nonpositive maximum {peak}")
    hbar = peak ** -0.5
    x_max = tortoise(r_max, geometry)
    scaled = ReggeWheelerPotential(ell, geometry, scale=hbar**2)
    v_second = float(scaled.second_derivative(x_max))
    logger.debug(f"normalized ell={ell} sigma={geometry.sigma}: hbar={hbar:.6g} x_max={x_max:.12g}")
    return ModeContext(ell=ell, hbar=hbar, x_max=x_max, v_second=v_second,
                       geometry=geometry, potential=scaled)


def plain_mode(ell: int, geometry: Geometry) -> ModeContext:
    """Unnormalized context (hbar = 1, V = V_{l,sigma}), valid for every ell including 0."""
    raw = ReggeWheelerPotential(ell, geometry)
    try:
        x_max = tortoise(_radius_of_maximum(raw), geometry)
    except BracketError:
        x_max = 0.0
    return ModeContext(ell=ell, hbar=1.0, x_max=x_max,
                       v_second=float(raw.second_derivative(x_max)),
                       geometry=geometry, potential=raw)
