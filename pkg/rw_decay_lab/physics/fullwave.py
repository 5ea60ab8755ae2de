"""Angular decomposition of the full wave, gauge projections and the mode-summed decay reports.

A field on R x S^2 is stored through its coefficient functions in the orthonormal basis
Y_{l,j}; every coefficient evolves with its own Regge-Wheeler mode and the samples of the
summed field are rebuilt on demand.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.polynomial import legendre
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, stats

from rw_decay_lab.physics.errors import DomainError, FitError, ModeIndexError, NumericalError
from rw_decay_lab.physics.evolution import (
    E_CUT,
    BandCutoffs,
    DecayFit,
    evolve_mode_spectral,
    evolve_mode_timedomain,
    fit_decay,
)
from rw_decay_lab.physics.geometry import Geometry, Grid, normalize_mode, plain_mode
from rw_decay_lab.physics.specfun import spherical_harmonic

__all__ = [
    'SphereQuadrature',
    'AngularField',
    'FullEvolution',
    'TheoremTargets',
    'TheoremReport',
    'ModeFit',
    'mode_index',
    'sphere_quadrature',
    'decompose',
    'resum',
    'project_gauge',
    'truncate',
    'angular_weighted_norm',
    'theorem_targets',
    'evolve_full',
    'verify_theorem',
]

logger = logging.getLogger("rw_decay_lab.fullwave")

L_MAX = 25
ALIASING_TOL = 1e-6
SUP_EXPONENT = -4.0
L2_EXPONENT = -4.6
MAX_SAMPLE_NODES = 400
# observer samples inside the fit window when the signal comes from the spectral propagator
SPECTRAL_FIT_SAMPLES = 64


def mode_index(ell: int, j: int, l_max: Optional[int] = None) -> int:
    """Position of (l, j) in the flat coefficient layout l^2 + l + j."""
    if ell < 0 or abs(j) > ell or (l_max is not None and ell > l_max):
        raise ModeIndexError(f"no mode (ell={ell}, j={j}) with l_max={l_max}")
    return ell * ell + ell + j


def _modes(l_max: int) -> list[tuple[int, int]]:
    return [(ell, j) for ell in range(l_max + 1) for j in range(-ell, ell + 1)]


class SphereQuadrature(BaseModel):
    """Gauss-Legendre in cos(theta) times the trapezoid rule in phi.

    Exact for polynomials of degree <= 2 l_max on the sphere.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    l_max: int
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    @property
    def directions(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (theta, phi) of all nodes."""
        theta, phi = np.meshgrid(self.theta, self.phi, indexing="ij")
        return theta.ravel(), phi.ravel()


def sphere_quadrature(l_max: int) -> SphereQuadrature:
    if not 0 <= l_max <= L_MAX:
        raise DomainError(f"l_max must lie in [0, {L_MAX}], got {l_max}")
    cos_nodes, cos_weights = legendre.leggauss(l_max + 1)
    n_phi = 2 * l_max + 2
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    weights = np.outer(cos_weights, np.full(n_phi, 2.0 * np.pi / n_phi))
    return SphereQuadrature(l_max=l_max, theta=np.arccos(cos_nodes), phi=phi, weights=weights)


def _harmonics(l_max: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Y_{l,j} at the given directions, shape (modes, directions)."""
    return np.array([spherical_harmonic(ell, j, theta, phi) for ell, j in _modes(l_max)])


class AngularField(BaseModel):
    """Coefficient functions f_{l,j}(x), g_{l,j}(x) of psi and psi_t.

    Attributes:
        f, g: complex arrays of shape ((l_max + 1)^2, grid.size), row mode_index(l, j)
        real: the field on R x S^2 is real, so c_{l,-j} = (-1)^j conj(c_{l,j})
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    l_max: int = Field(ge=0, le=L_MAX)
    sigma: Literal[-3, 0, 1] = 1
    f: np.ndarray
    g: np.ndarray
    real: bool = False

    @model_validator(mode="after")
    def _check_layout(self) -> "AngularField":
        shape = ((self.l_max + 1) ** 2, self.grid.size)
        if self.f.shape != shape or self.g.shape != shape:
            raise ValueError(f"coefficient arrays must have shape {shape}")
        return self

    @classmethod
    def from_modes(cls, grid: Grid, l_max: int, modes: dict, sigma: int = 1, real: bool = False) -> "AngularField":
        """Build a field from {(l, j): (f, g)} radial profiles."""
        f = np.zeros(((l_max + 1) ** 2, grid.size), dtype=complex)
        g = np.zeros_like(f)
        for (ell, j), (fp, gp) in modes.items():
            k = mode_index(ell, j, l_max)
            f[k], g[k] = fp, gp
        return cls(grid=grid, l_max=l_max, sigma=sigma, f=f, g=g, real=real)

    def coefficient(self, ell: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        k = mode_index(ell, j, self.l_max)
        return self.f[k], self.g[k]

    def replace(self, f: np.ndarray, g: np.ndarray) -> "AngularField":
        return self.model_copy(update={"f": f, "g": g})

    def __add__(self, other: "AngularField") -> "AngularField":
        if other.l_max != self.l_max or other.grid.size != self.grid.size:
            raise DomainError("fields must share grid and l_max")
        return self.model_copy(update={"f": self.f + other.f, "g": self.g + other.g,
                                       "real": self.real and other.real})


def _simpson_rows(values: np.ndarray, grid: Grid) -> np.ndarray:
    return integrate.simpson(values, x=grid.nodes, axis=-1)


def decompose(samples, grid: Grid, quadrature: SphereQuadrature, velocity=None, sigma: int = 1) -> AngularField:
    """Project samples psi(x, theta_a, phi_b) on the Y_{l,j} with l <= quadrature.l_max.

    Args:
        samples: array of shape (grid.size, len(theta), len(phi))
        grid: radial grid
        quadrature: sphere quadrature whose nodes the samples live on
        velocity: psi_t samples of the same shape (default zero)
        sigma: perturbation type carried by the field
    """
    samples = np.asarray(samples)
    velocity = np.zeros_like(samples) if velocity is None else np.asarray(velocity)
    shape = (grid.size, quadrature.theta.size, quadrature.phi.size)
    if samples.shape != shape or velocity.shape != shape:
        raise DomainError(f"samples must have shape {shape}")
    theta, phi = quadrature.directions
    harmonics = _harmonics(quadrature.l_max, theta, phi)
    projector = np.conj(harmonics) * quadrature.weights.ravel()
    flat = (grid.size, -1)
    f = projector @ samples.reshape(flat).T
    g = projector @ velocity.reshape(flat).T
    field = AngularField(grid=grid, l_max=quadrature.l_max, sigma=sigma, f=f, g=g,
                         real=bool(np.isrealobj(samples) and np.isrealobj(velocity)))
    residual = np.max(np.abs(resum(field, theta, phi) - samples.reshape(flat)))
    scale = max(float(np.max(np.abs(samples))), 1e-300)
    if residual > ALIASING_TOL * scale:
        logger.warning(f"angular aliasing: resummed field differs by {residual / scale:.2e} (relative) "
                       f"from the samples at l_max={quadrature.l_max}")
    return field


def resum(field: AngularField, theta, phi, component: Literal["f", "g"] = "f") -> np.ndarray:
    """sum_{l,j} c_{l,j}(x) Y_{l,j}(theta, phi), shape (grid.size, directions)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    coefficients = field.f if component == "f" else field.g
    values = coefficients.T @ _harmonics(field.l_max, theta, phi)
    return values.real if field.real else values


def project_gauge(field: AngularField, sigma: Optional[int] = None) -> AngularField:
    """Remove l = 0 for sigma = 0 and l <= 1 for sigma = -3; identity for sigma = 1."""
    sigma = field.sigma if sigma is None else sigma
    removed = {1: 0, 0: 1, -3: 2}.get(sigma)
    if removed is None:
        raise DomainError(f"sigma must be one of -3, 0, 1, got {sigma}")
    f, g = field.f.copy(), field.g.copy()
    f[: removed**2] = 0.0
    g[: removed**2] = 0.0
    return field.model_copy(update={"f": f, "g": g, "sigma": sigma})


def truncate(field: AngularField, l_max: int) -> AngularField:
    """Zero every coefficient with l > l_max, keeping the layout."""
    f, g = field.f.copy(), field.g.copy()
    f[(l_max + 1) ** 2:] = 0.0
    g[(l_max + 1) ** 2:] = 0.0
    return field.replace(f, g)


def angular_weighted_norm(field: AngularField, s: float = 0.0, weight_exponent: float = 0.0,
                          component: Literal["f", "g"] = "f") -> float:
    """(sum_{l,j} (l(l+1))^s int <x>^weight_exponent |c_{l,j}|^2 dx)^{1/2}"""
    coefficients = field.f if component == "f" else field.g
    ells = np.array([ell for ell, _ in _modes(field.l_max)], dtype=float)
    angular = (ells * (ells + 1.0)) ** s if s else np.ones_like(ells)
    radial = (1.0 + field.grid.nodes**2) ** (0.5 * weight_exponent)
    energy = _simpson_rows(radial * np.abs(coefficients) ** 2, field.grid)
    return float(np.sqrt(np.sum(angular * energy)))


class TheoremTargets(BaseModel):
    """Reference decay exponents: the proved rate and Price's rate"""
    ell_min: int
    proved: float
    price: float


def theorem_targets(sigma: int, ell_min: Optional[int] = None) -> TheoremTargets:
    """-(2l+2) proved and -(2l+3) Price for data orthogonal to l < ell_min; -3 for radial data."""
    lowest = {1: 0, 0: 1, -3: 2}.get(sigma)
    if lowest is None:
        raise DomainError(f"sigma must be one of -3, 0, 1, got {sigma}")
    ell = max(lowest, 0 if ell_min is None else ell_min)
    proved = -3.0 if ell == 0 else -(2.0 * ell + 2.0)
    return TheoremTargets(ell_min=ell, proved=proved, price=-(2.0 * ell + 3.0))


class FullEvolution(BaseModel):
    """Mode-summed evolution.

    samples has shape (times, sample nodes, directions); observer_sup holds
    max over directions |psi(t, x_obs, omega)| at every observer time, one row per observer;
    mode_observer holds the coefficient series c_{l,j}(t, x_obs), shape (modes, observers, steps).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    weighted_sup: np.ndarray
    weighted_l2: np.ndarray
    samples: np.ndarray
    sample_nodes: np.ndarray
    directions: np.ndarray
    observer_positions: np.ndarray
    observer_times: np.ndarray
    observer_sup: np.ndarray
    modes: list[tuple[int, int]]
    mode_observer: np.ndarray
    method: Literal["timedomain", "spectral"]


class _PartRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    sampled: np.ndarray
    l2: np.ndarray
    observer: np.ndarray
    observer_times: np.ndarray


def _evolve_part(ell: int, f: np.ndarray, g: np.ndarray, grid: Grid, geometry: Geometry, times: np.ndarray,
                 method: str, observers: Sequence[float], stride: int, cfl: float,
                 cutoffs: Optional[BandCutoffs], e_cut: float) -> _PartRun:
    weight = (1.0 + grid.nodes**2) ** (0.5 * L2_EXPONENT)
    if method == "timedomain":
        run = evolve_mode_timedomain(f, g, grid, ell, geometry, float(times.max()), cfl=cfl, times=times,
                                     observers=observers)
        states, observer, observer_times = run.states, run.observer_values, run.observer_times
    else:
        mode = normalize_mode(ell, geometry) if ell > 0 else plain_mode(ell, geometry)
        states = evolve_mode_spectral(f, g, mode, grid, times, cutoffs=cutoffs, e_cut=e_cut).states
        observer_cells = [int(np.argmin(np.abs(grid.nodes - x))) for x in observers]
        observer = np.array([[s.psi[i] for s in states] for i in observer_cells])
        observer_times = times
    stamps = np.array([s.time for s in states])
    psi = np.array([states[int(np.argmin(np.abs(stamps - t)))].psi for t in times])
    return _PartRun(sampled=psi[:, ::stride], l2=_simpson_rows(weight * psi**2, grid), observer=observer,
                    observer_times=observer_times)


def evolve_full(field: AngularField, geometry: Geometry, times, method: Literal["timedomain", "spectral"] = "timedomain",
                observers: Sequence[float] = (10.0,), directions: Optional[tuple[np.ndarray, np.ndarray]] = None,
                cfl: float = 0.5, cutoffs: Optional[BandCutoffs] = None, e_cut: float = E_CUT,
                threads: int = 1) -> FullEvolution:
    """Evolve every nonzero coefficient with its own mode and resum.

    For real fields only j >= 0 is evolved; j < 0 follows from c_{l,-j} = (-1)^j conj(c_{l,j}).
    Real and imaginary parts of a coefficient are evolved separately (the mode evolutions are real).

    Args:
        field: initial data
        geometry: mass and sigma (sigma must match the field)
        times: times at which norms and samples are reported
        method: per-mode solver
        observers: radii whose full time series are kept
        directions: (theta, phi) for samples, default the quadrature nodes for l_max
        threads: parallel mode evolutions

    Raises:
        DomainError: mismatched sigma, bad times or method
        NumericalError: a mode failed, with (l, j) in the message
    """
    if geometry.sigma != field.sigma:
        raise DomainError(f"field carries sigma={field.sigma} but geometry has sigma={geometry.sigma}")
    if method not in ("timedomain", "spectral"):
        raise DomainError(f"unknown evolution method {method!r}")
    times = np.unique(np.asarray(times, dtype=float))
    if times.size == 0 or np.any(times < 0):
        raise DomainError("times must be a nonempty set of nonnegative values")
    grid = field.grid
    stride = max(1, int(np.ceil(grid.size / MAX_SAMPLE_NODES)))
    if directions is None:
        directions = sphere_quadrature(field.l_max).directions
    theta, phi = (np.atleast_1d(np.asarray(d, dtype=float)) for d in directions)

    tasks = []
    for ell, j in _modes(field.l_max):
        if field.real and j < 0:
            continue
        k = mode_index(ell, j)
        for part, pick in (("re", np.real), ("im", np.imag)):
            f, g = pick(field.f[k]), pick(field.g[k])
            if np.any(f) or np.any(g):
                tasks.append((ell, j, part, f, g))
    logger.info(f"evolving {len(tasks)} radial problems up to l={field.l_max} with {method}")

    def run(task):
        ell, j, part, f, g = task
        try:
            return _evolve_part(ell, f, g, grid, geometry, times, method, observers, stride, cfl, cutoffs, e_cut)
        except NumericalError as e:
            raise NumericalError(f"Failed to evolve mode (ell={ell}, j={j}): {str(e)}") from e
        except DomainError as e:
            raise DomainError(f"mode (ell={ell}, j={j}): {str(e)}") from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(task) for task in tasks]

    modes = _modes(field.l_max)
    sample_nodes = grid.nodes[::stride]
    n_obs = len(observers)
    observer_times = results[0].observer_times if results else times
    coefficients = np.zeros((len(modes), times.size, sample_nodes.size), dtype=complex)
    observed = np.zeros((len(modes), n_obs, observer_times.size), dtype=complex)
    l2 = np.zeros(times.size)
    for (ell, j, part, _, _), result in zip(tasks, results):
        unit = 1.0 if part == "re" else 1j
        k = mode_index(ell, j)
        coefficients[k] += unit * result.sampled
        observed[k] += unit * result.observer
        l2 += result.l2
    if field.real:
        for ell, j in modes:
            if j > 0:
                sign = (-1) ** j
                coefficients[mode_index(ell, -j)] = sign * np.conj(coefficients[mode_index(ell, j)])
                observed[mode_index(ell, -j)] = sign * np.conj(observed[mode_index(ell, j)])
        # |c_{l,-j}| = |c_{l,j}|
        l2 = l2 + sum(r.l2 for (ell, j, _, _, _), r in zip(tasks, results) if j > 0)

    harmonics = _harmonics(field.l_max, theta, phi)
    samples = np.einsum("ktx,kd->txd", coefficients, harmonics)
    series = np.einsum("kot,kd->otd", observed, harmonics)
    if field.real:
        samples, series = samples.real, series.real
    radial = (1.0 + sample_nodes**2) ** (0.5 * SUP_EXPONENT)
    weighted_sup = np.max(np.abs(samples) * radial[None, :, None], axis=(1, 2))
    return FullEvolution(times=times, weighted_sup=weighted_sup, weighted_l2=np.sqrt(l2), samples=samples,
                         sample_nodes=sample_nodes, directions=np.column_stack([theta, phi]),
                         observer_positions=np.asarray(observers, dtype=float), observer_times=observer_times,
                         observer_sup=np.max(np.abs(series), axis=-1), modes=modes, mode_observer=observed,
                         method=method)


class ModeFit(BaseModel):
    ell: int
    exponent: float
    constant: float
    r_squared: float


class TheoremReport(BaseModel):
    """Fitted decay of the summed field against the reference exponents"""
    targets: TheoremTargets
    overall: DecayFit
    norm_fit: Optional[DecayFit] = None
    modes: list[ModeFit]
    data_norms: dict[str, float]
    growth_flag: bool
    tolerance: float
    passed: bool


def _growth_flag(fits: list[ModeFit]) -> bool:
    """True when log C(l) grows linearly in l and that model beats a power of (1 + l)."""
    if len(fits) < 3:
        return False
    ells = np.array([m.ell for m in fits], dtype=float)
    logs = np.log([m.constant for m in fits])
    exponential = stats.linregress(ells, logs)
    polynomial = stats.linregress(np.log1p(ells), logs)
    return bool(exponential.slope > 0 and exponential.rvalue**2 > polynomial.rvalue**2 + 0.05)


def _sample_times(norm_times, window: tuple[float, float], t_final: float, method: str) -> np.ndarray:
    """Requested output times, dense inside the fit window on the spectral path."""
    times = np.union1d(norm_times, [t_final])
    if method == "spectral":
        times = np.union1d(times, np.linspace(window[0], min(window[1], t_final), SPECTRAL_FIT_SAMPLES))
    return times


def verify_theorem(field: AngularField, geometry: Geometry, t_final: float, window: tuple[float, float],
                   tolerance: float = 0.3, method: Literal["timedomain", "spectral"] = "timedomain",
                   x_obs: float = 10.0, norm_times: Optional[np.ndarray] = None, derivatives: int = 2,
                   weight_exponent: float = 0.0, threads: int = 1) -> TheoremReport:
    """Evolve gauge-projected data, fit the tail at x_obs and compare with the reference rates.

    For radial content (l_min = 0) the fitted exponent must lie within tolerance of -3;
    otherwise it must not exceed the proved exponent -(2 l_min + 2).

    Raises:
        FitError: the tail window holds too few samples
    """
    projected = project_gauge(field, geometry.sigma)
    nonzero = [ell for ell, j in _modes(field.l_max)
               if np.any(projected.f[mode_index(ell, j)]) or np.any(projected.g[mode_index(ell, j)])]
    if not nonzero:
        raise DomainError("data vanish after the gauge projection")
    targets = theorem_targets(geometry.sigma, min(nonzero))
    norm_times = np.linspace(window[0], t_final, 12) if norm_times is None else np.asarray(norm_times)
    run = evolve_full(projected, geometry, _sample_times(norm_times, window, t_final, method), method=method,
                      observers=(x_obs,), threads=threads)
    t = run.observer_times
    overall = fit_decay(t, run.observer_sup[0], window)

    fits = []
    for ell in sorted(set(nonzero)):
        block = [mode_index(ell, j) for j in range(-ell, ell + 1)]
        series = np.max(np.abs(run.mode_observer[block, 0, :]), axis=0)
        try:
            fit = fit_decay(t, series, window)
        except FitError as e:
            logger.warning(f"no tail fit for l={ell}: {str(e)}")
            continue
        fits.append(ModeFit(ell=ell, exponent=fit.exponent, constant=fit.amplitude, r_squared=fit.r_squared))

    norm_fit = None
    inside = (run.times >= window[0]) & (run.times <= window[1])
    if np.count_nonzero(inside) >= 10:
        norm_fit = fit_decay(run.times, run.weighted_sup, window)

    data_norms = {f"angular_{s}": angular_weighted_norm(projected, s, weight_exponent) for s in range(derivatives + 1)}
    data_norms.update({f"angular_{s}_velocity": angular_weighted_norm(projected, s, weight_exponent, "g")
                       for s in range(derivatives + 1)})
    if targets.ell_min == 0:
        passed = abs(overall.exponent - targets.proved) <= tolerance
    else:
        passed = overall.exponent <= targets.proved
    flag = _growth_flag(fits)
    if flag:
        logger.warning("fitted tail constants grow faster than any power of l")
    logger.info(f"tail exponent {overall.exponent:.3f} vs proved {targets.proved} / Price {targets.price}: "
                f"{'pass' if passed else 'fail'}")
    return TheoremReport(targets=targets, overall=overall, norm_fit=norm_fit, modes=fits, data_norms=data_norms,
                         growth_flag=flag, tolerance=tolerance, passed=passed)
