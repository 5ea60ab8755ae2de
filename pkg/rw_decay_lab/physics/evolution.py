"""Per-mode wave evolution, spectral and time-domain, and tail fitting.

Spectral side: psi(t) = cos(t sqrt(H)) f + sin(t sqrt(H)) / sqrt(H) g is assembled from the
spectral measure e(E, x, x') as

    psi(t, x) = (2 / pi hbar) int_0^inf [sin(tE/hbar) G_E(x) + (E/hbar) cos(tE/hbar) F_E(x)] dE

with F_E = int e(E, ., x') f(x') dx' and G_E likewise. The energy axis is split by a smooth
partition of unity into low, intermediate and high bands; the phase tE/hbar is integrated
exactly by panelwise Filon weights. Everything is integrated in the form m(E) = E e(E),
which stays finite at E = 0 even for potentials with a zero-energy resonance.

Time side: method of lines for psi_tt - psi_xx + V psi = 0 with fourth-order centered
differences, classical RK4 and outgoing boundaries.
"""

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Literal, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, signal, special, stats

from rw_decay_lab.physics.errors import CFLError, DomainError, FitError, NonFiniteError, QuadratureError
from rw_decay_lab.physics.geometry import Geometry, Grid, ModeContext, Potential
from rw_decay_lab.physics.geometry import potential as rw_potential
from rw_decay_lab.physics.jost import jost_pair, spectral_measure, wronskian

__all__ = [
    'BandCutoffs',
    'ModeState',
    'DecayFit',
    'SpectralEvolution',
    'TimeDomainRun',
    'EvenDerivativeLimits',
    'E_CUT',
    'band_cutoffs',
    'filon_moments',
    'filon_weights',
    'evolution_kernel',
    'band_sup',
    'low_band_sup',
    'even_derivative_limits',
    'evolve_mode_spectral',
    'evolve_mode_timedomain',
    'discrete_energy',
    'weighted_l2',
    'weighted_sup',
    'bump',
    'fit_decay',
    'smooth_step',
]

logger = logging.getLogger("rw_decay_lab.evolution")

E_CUT = 1e3
HIGH_START = 100.0
MID_END = 200.0
MIN_PANELS = 16
MAX_DOUBLINGS = 5
SERIES_THETA = 0.1

Band = Literal["low", "mid", "high", "all"]
Kind = Literal["sine", "cosine"]


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


class BandCutoffs(BaseModel):
    """Smooth partition of the energy axis.

    low is one on (0, epsilon/2] and vanishes from epsilon on; high vanishes below 100 and is
    one from 200 on; mid is the remainder, supported in (epsilon/2, 200).
    """
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(gt=0, lt=0.5)

    def low(self, energy):
        half = 0.5 * self.epsilon
        return 1.0 - smooth_step((np.asarray(energy, dtype=float) - half) / half)

    def high(self, energy):
        return smooth_step((np.asarray(energy, dtype=float) - HIGH_START) / (MID_END - HIGH_START))

    def mid(self, energy):
        return 1.0 - self.low(energy) - self.high(energy)

    def weight(self, band: Band, energy):
        if band == "all":
            return np.ones_like(np.asarray(energy, dtype=float))
        if band not in ("low", "mid", "high"):
            raise DomainError(f"unknown band {band!r}")
        return getattr(self, band)(energy)

    def support(self, band: Band) -> tuple[float, float]:
        return {
            "low": (0.0, self.epsilon),
            "mid": (0.5 * self.epsilon, MID_END),
            "high": (HIGH_START, np.inf),
            "all": (0.0, np.inf),
        }[band]


def band_cutoffs(epsilon: float = 0.15) -> BandCutoffs:
    """Partition of unity for the low / intermediate / high energy split.

    Raises:
        DomainError: unless 0 < epsilon < 1/2
    """
    if not 0 < epsilon < 0.5:
        raise DomainError(f"band split needs 0 < epsilon < 1/2, got {epsilon}")
    return BandCutoffs(epsilon=epsilon)


class ModeState(BaseModel):
    """psi and psi_t of one angular mode at time t"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    time: float
    psi: np.ndarray
    psi_t: np.ndarray
    grid: Grid
    ell: int = 0
    sigma: Optional[int] = None

    @model_validator(mode="after")
    def _check(self) -> "ModeState":
        if self.psi.shape != self.grid.nodes.shape or self.psi_t.shape != self.grid.nodes.shape:
            raise ValueError("state arrays must match the grid")
        if not (np.all(np.isfinite(self.psi)) and np.all(np.isfinite(self.psi_t))):
            raise ValueError("state contains non-finite values")
        return self


class DecayFit(BaseModel):
    """Power law |psi| ~ amplitude * t^exponent over a window"""
    exponent: float
    amplitude: float
    t_lo: float
    t_hi: float
    r_squared: float = Field(ge=0.0, le=1.0)
    samples: int
    envelope: Literal["peaks", "samples"]

    @model_validator(mode="after")
    def _check_window(self) -> "DecayFit":
        if self.t_hi <= self.t_lo:
            raise ValueError("fit window must have t_hi > t_lo")
        return self


class SpectralEvolution(BaseModel):
    """States from the spectral representation with their per-band split"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    states: list[ModeState]
    bands: dict[str, np.ndarray]
    panels: int
    delta: float
    e_top: float
    truncation: float


class TimeDomainRun(BaseModel):
    """Output of the method-of-lines solver"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    states: list[ModeState]
    energies: np.ndarray
    observer_positions: np.ndarray
    observer_times: np.ndarray
    observer_values: np.ndarray
    dt: float
    steps: int


class EvenDerivativeLimits(NamedTuple):
    value: float
    second: float
    scale: float


def filon_moments(theta):
    """Moments int_{-1}^{1} s^j e^{i theta s} ds for j = 0, 1, 2.

    Small |theta| uses the Taylor series to avoid cancellation.
    """
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < SERIES_THETA
    th = np.where(small, 1.0, theta)
    s, c = np.sin(th), np.cos(th)
    mu0 = 2.0 * s / th
    mu1 = 2j * (s - th * c) / th**2
    mu2 = 2.0 * ((th * th - 2.0) * s + 2.0 * th * c) / th**3
    t2 = theta * theta
    mu0 = np.where(small, 2.0 * (1.0 - t2 / 6.0 + t2 * t2 / 120.0 - t2**3 / 5040.0), mu0)
    mu1 = np.where(small, 2j * theta * (1.0 / 3.0 - t2 / 30.0 + t2 * t2 / 840.0), mu1)
    mu2 = np.where(small, 2.0 * (1.0 / 3.0 - t2 / 10.0 + t2 * t2 / 168.0 - t2**3 / 6480.0), mu2)
    return mu0.astype(complex), mu1.astype(complex), mu2.astype(complex)


def filon_weights(nodes, omega) -> np.ndarray:
    """Weights W with int h(E) e^{i omega E} dE ~ sum_j W[., j] h(E_j).

    Panels are consecutive node triples (E_{2i}, E_{2i+1}, E_{2i+2}) with the middle node
    at the panel midpoint; h is interpolated quadratically on each panel.

    Args:
        nodes: odd number (>= 3) of increasing nodes
        omega: frequencies (scalar or 1-D)

    Returns:
        complex array of shape (len(omega), len(nodes))
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 3 or nodes.size % 2 == 0:
        raise DomainError("Filon weights need an odd number (>= 3) of nodes")
    left, centre, right = nodes[0:-1:2], nodes[1::2], nodes[2::2]
    scale = max(1.0, float(np.max(np.abs(nodes))))
    if np.any(right <= left) or not np.allclose(centre, 0.5 * (left + right), rtol=0.0, atol=1e-12 * scale):
        raise DomainError("Filon panels need increasing nodes with midpoints in the middle")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    half = 0.5 * (right - left)
    mu0, mu1, mu2 = filon_moments(omega[:, None] * half[None, :])
    factor = half[None, :] * np.exp(1j * omega[:, None] * centre[None, :])
    weights = np.zeros((omega.size, nodes.size), dtype=complex)
    weights[:, 0:-1:2] += factor * 0.5 * (mu2 - mu1)
    weights[:, 1::2] += factor * (mu0 - mu2)
    weights[:, 2::2] += factor * 0.5 * (mu2 + mu1)
    return weights


def _origin_sine_weights(delta: float, omega: np.ndarray) -> np.ndarray:
    """int_0^{2 delta} L_j(E) sin(omega E) / E dE for the quadratic basis on (0, delta, 2 delta)."""
    span = 2.0 * delta
    theta = omega * span
    small = np.abs(theta) < SERIES_THETA
    th = np.where(small, 1.0, theta)
    om = np.where(small, 1.0, omega)
    si, _ = special.sici(theta)
    i0 = (1.0 - np.cos(th)) / om
    i1 = (np.sin(th) - th * np.cos(th)) / om**2
    t2 = theta * theta
    i0 = np.where(small, omega * span**2 * (0.5 - t2 / 24.0 + t2 * t2 / 720.0), i0)
    i1 = np.where(small, omega * span**3 * (1.0 / 3.0 - t2 / 30.0 + t2 * t2 / 840.0), i1)
    d2 = delta * delta
    return np.stack([
        i1 / (2.0 * d2) - 1.5 * i0 / delta + si,
        2.0 * i0 / delta - i1 / d2,
        i1 / (2.0 * d2) - 0.5 * i0 / delta,
    ], axis=-1)


def _fourier(nodes: np.ndarray, values: np.ndarray, omega: np.ndarray, part: Literal["cos", "sin"]) -> np.ndarray:
    total = np.tensordot(filon_weights(nodes, omega), values, axes=(1, 0))
    return total.real if part == "cos" else total.imag


def _sine_over_energy(nodes: np.ndarray, m: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """int sin(omega E) m(E) / E dE."""
    if nodes[0] > 0:
        return _fourier(nodes, m / _column(nodes, m), omega, "sin")
    origin = np.tensordot(_origin_sine_weights(float(nodes[1]), omega), m[:3], axes=(1, 0))
    if nodes.size == 3:
        return origin
    rest = nodes[2:]
    return origin + _fourier(rest, m[2:] / _column(rest, m), omega, "sin")


def _column(nodes: np.ndarray, like: np.ndarray) -> np.ndarray:
    return nodes.reshape((-1,) + (1,) * (like.ndim - 1))


def _free_sine_tail(omega: np.ndarray, separation: float, start: float) -> np.ndarray:
    """(1/pi) int_start^inf sin(omega E) cos(b E) / E dE with b = separation (free measure)."""
    def part(c):
        si, _ = special.sici(np.abs(c) * start)
        return np.sign(c) * (0.5 * np.pi - si)
    return (part(omega + separation) + part(omega - separation)) / (2.0 * np.pi)


class _EnergyCache:
    """Thread-safe map from energy node to sampled values"""

    def __init__(self, compute: Callable[[float], np.ndarray], threads: int = 1):
        self._compute = compute
        self._threads = max(1, int(threads))
        self._values: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()

    def fetch(self, energies: np.ndarray) -> np.ndarray:
        with self._lock:
            missing = [float(e) for e in energies if float(e) not in self._values]
        if missing:
            logger.debug(f"energy cache: {len(missing)} new nodes up to E={max(missing):.4g}")
            if self._threads > 1:
                with ThreadPoolExecutor(max_workers=self._threads) as pool:
                    computed = list(pool.map(self._compute, missing))
            else:
                computed = [self._compute(e) for e in missing]
            with self._lock:
                self._values.update(zip(missing, computed))
        with self._lock:
            return np.stack([self._values[float(e)] for e in energies])

    def __len__(self) -> int:
        return len(self._values)


def _band_range(band: Band, cutoffs: BandCutoffs, e_top: float) -> tuple[float, float]:
    lo, hi = cutoffs.support(band)
    hi = min(hi, e_top)
    if hi <= lo:
        raise DomainError(f"band {band} is empty below E={e_top}")
    return lo, hi


def _nodes(lower: float, upper: float, delta: float) -> np.ndarray:
    panels = max(1, math.ceil((upper - lower) / (2.0 * delta) - 1e-9))
    return lower + delta * np.arange(2 * panels + 1)


def _with_origin(nodes: np.ndarray, sampled: np.ndarray) -> np.ndarray:
    """m(E) = E * sampled on all nodes, m(0) by quadratic extrapolation."""
    if nodes[0] > 0:
        return _column(nodes, sampled) * sampled
    m = _column(nodes[1:], sampled) * sampled
    origin = 3.0 * m[0] - 3.0 * m[1] + m[2]
    return np.concatenate([origin[None, ...], m])


def _refine(evaluate: Callable[[float], np.ndarray], delta0: float, tol: float, atol: float,
            max_doublings: int, what: str):
    """Nested doubling of the energy panels until successive results agree."""
    delta = delta0
    previous, panels = evaluate(delta)
    change = np.inf
    for _ in range(max_doublings):
        delta *= 0.5
        current, panels = evaluate(delta)
        change = float(np.max(np.abs(current - previous)))
        scale = float(np.max(np.abs(current)))
        logger.debug(f"{what}: panels={panels} change={change:.3e} scale={scale:.3e}")
        if change <= tol * scale + atol:
            return current, panels, change
        previous = current
    raise QuadratureError(f"Failed to converge {what}", panels=panels, delta=change)


def evolution_kernel(kind: Kind, t, x: float, x_prime: float, mode: ModeContext, band: Band = "all",
                     cutoffs: Optional[BandCutoffs] = None, e_cut: float = E_CUT, tol: float = 1e-6,
                     atol: float = 1e-12, max_doublings: int = MAX_DOUBLINGS, threads: int = 1):
    """Raw band-weighted kernel of sin(t sqrt(H))/sqrt(H) (sine) or cos(t sqrt(H)) (cosine).

    sine:   (2/(pi hbar))   int sin(tE/hbar) e(E, x, x') chi(E) dE
    cosine: (2/(pi hbar^2)) int cos(tE/hbar) e(E, x, x') E chi(E) dE

    The sine kernel is continued past e_cut with the free measure (hbar/2E) cos(E(x-x')/hbar),
    integrated in closed form. The cosine kernel is a distribution at the light cone and is
    returned truncated; it is only meaningful applied to data (evolve_mode_spectral).

    Raises:
        DomainError: negative time, unknown kind or band, or a high band ending below 200
        QuadratureError: if nested doubling does not settle
    """
    if kind not in ("sine", "cosine"):
        raise DomainError(f"kind must be 'sine' or 'cosine', got {kind!r}")
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise DomainError("evolution kernel needs t >= 0")
    cutoffs = cutoffs or band_cutoffs()
    lower, upper = _band_range(band, cutoffs, e_cut)
    tail = kind == "sine" and band in ("all", "high")
    if tail and band == "high" and upper < MID_END:
        raise DomainError(f"high band with tail correction needs e_cut >= {MID_END}")
    hb = mode.hbar
    omega = times / hb
    separation = abs(x - x_prime)
    cache = _EnergyCache(lambda e: np.asarray(spectral_measure(e, x, x_prime, mode)), threads)

    def evaluate(delta):
        nodes = _nodes(lower, upper, delta)
        positive = nodes[nodes > 0]
        m = _with_origin(nodes, cache.fetch(positive)) * cutoffs.weight(band, nodes)
        if kind == "sine":
            value = 2.0 / (np.pi * hb) * _sine_over_energy(nodes, m, omega)
            if tail:
                value = value + _free_sine_tail(omega, separation / hb, float(nodes[-1]))
        else:
            value = 2.0 / (np.pi * hb**2) * _fourier(nodes, m, omega, "cos")
        return value, (nodes.size - 1) // 2

    delta0 = min((upper - lower) / (2.0 * MIN_PANELS), 0.125 * np.pi * hb / max(separation, 1.0))
    value, _, _ = _refine(evaluate, delta0, tol, atol, max_doublings, f"{kind} kernel ({band} band)")
    return float(value[0]) if np.ndim(t) == 0 else value


def band_sup(kind: Kind, band: Band, x: float, x_prime: float, mode: ModeContext, k: int,
             times: Optional[np.ndarray] = None, cutoffs: Optional[BandCutoffs] = None,
             e_cut: float = E_CUT, tol: float = 1e-5) -> float:
    """sup_t <t>^k |band kernel(t, x, x')| over a time lattice."""
    if not 0 <= k <= 3:
        raise DomainError(f"weight power k must be in [0, 3], got {k}")
    times = np.linspace(0.0, 200.0, 801) if times is None else np.asarray(times, dtype=float)
    values = evolution_kernel(kind, times, x, x_prime, mode, band=band, cutoffs=cutoffs, e_cut=e_cut, tol=tol)
    return float(np.max((1.0 + times**2) ** (0.5 * k) * np.abs(values)))


def low_band_sup(kind: Kind, x: float, x_prime: float, mode: ModeContext, k: int,
                 times: Optional[np.ndarray] = None, cutoffs: Optional[BandCutoffs] = None,
                 tol: float = 1e-5) -> float:
    return band_sup(kind, "low", x, x_prime, mode, k, times, cutoffs, tol=tol)


def even_derivative_limits(x: float, x_prime: float, mode: ModeContext, step: float = 1e-2,
                           points: int = 8) -> EvenDerivativeLimits:
    """e(0+) and d^2 e / dE^2 (0+) by polynomial extrapolation from E = step .. points*step."""
    energies = step * np.arange(1, points + 1)
    samples = np.array([spectral_measure(e, x, x_prime, mode) for e in energies])
    coefficients = np.polynomial.polynomial.polyfit(energies / step, samples, min(5, points - 1))
    return EvenDerivativeLimits(value=float(coefficients[0]), second=float(2.0 * coefficients[2] / step**2),
                                scale=float(np.max(np.abs(samples))))


def _cumulative(values: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    return (integrate.cumulative_simpson(values.real, x=nodes, initial=0.0)
            + 1j * integrate.cumulative_simpson(values.imag, x=nodes, initial=0.0))


def _apply_measure(energy: float, mode: ModeContext, grid: Grid, data: np.ndarray) -> np.ndarray:
    """int e(E, x, x') d(x') dx' for each row of data, O(N) via the product structure of e."""
    plus, minus = jost_pair(energy, mode, grid)
    w = wronskian(plus, minus).value
    nodes = grid.nodes
    v, u = plus.values, minus.values / w
    out = np.empty(data.shape)
    for i, row in enumerate(data):
        below = _cumulative(u * row, nodes)
        running = _cumulative(v * row, nodes)
        out[i] = np.imag(v * below + u * (running[-1] - running))
    return out


def _data_energy(data: np.ndarray, spacing: float, hbar: float, e_cut: float, floor: float,
                 data_tol: float) -> float:
    spectrum = np.abs(np.fft.rfft(data, axis=-1)).sum(axis=0)
    wavenumbers = 2.0 * np.pi * np.fft.rfftfreq(data.shape[-1], d=spacing)
    significant = wavenumbers[spectrum > data_tol * spectrum.max()]
    if significant.size and significant.max() >= wavenumbers[-1]:
        logger.warning("data is not resolved by the grid: spectrum reaches the Nyquist wavenumber")
    top = 1.25 * hbar * float(significant.max()) if significant.size else floor
    return min(e_cut, max(top, floor))


def evolve_mode_spectral(f, g, mode: ModeContext, grid: Grid, times, cutoffs: Optional[BandCutoffs] = None,
                         e_cut: float = E_CUT, tol: float = 1e-4, max_doublings: int = MAX_DOUBLINGS,
                         threads: int = 1, data_tol: float = 1e-10) -> SpectralEvolution:
    """psi(t) = cos(t sqrt(H)) f + sin(t sqrt(H)) / sqrt(H) g from the spectral measure.

    The energy integral runs up to the smaller of e_cut and the energy where the data
    spectrum drops below data_tol; the panel width starts at (pi/4) hbar / extent, where
    extent is the largest distance from the data support to the grid ends.

    Args:
        f, g: initial data on the grid (uniform grid required)
        mode: mode context (normalized or plain)
        grid: evaluation grid, which also carries the x' integration
        times: sample times (any sign)
        cutoffs: band partition (default epsilon = 0.15)
        e_cut: hard energy truncation
        tol: relative change allowed between two panel doublings
        threads: workers for the per-energy Jost solves

    Raises:
        DomainError: nonuniform grid, mismatched data or data not decayed at the grid edges
        QuadratureError: if the energy quadrature does not settle
    """
    if grid.spacing is None:
        raise DomainError("spectral evolution needs a uniform grid")
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    if f.shape != grid.nodes.shape or g.shape != grid.nodes.shape:
        raise DomainError("initial data must match the grid")
    data = np.stack([f, g])
    peak = float(np.max(np.abs(data)))
    if peak == 0:
        raise DomainError("initial data vanish identically")
    if np.max(np.abs(data[:, [0, -1]])) > 1e-8 * peak:
        raise DomainError("initial data must decay below 1e-8 of their maximum at the grid edges")
    cutoffs = cutoffs or band_cutoffs()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    hb = mode.hbar
    omega = times / hb

    e_top = _data_energy(data, grid.spacing, hb, e_cut, 4.0 * cutoffs.epsilon, data_tol)
    support = grid.nodes[np.abs(data).max(axis=0) > 1e-8 * peak]
    lo, hi = grid.bounds
    extent = max(hi - support[0], support[-1] - lo, 1.0)
    delta0 = min(e_top / (2.0 * MIN_PANELS), 0.25 * np.pi * hb / extent)
    logger.debug(f"spectral evolution ell={mode.ell}: e_top={e_top:.4g} extent={extent:.4g} delta0={delta0:.3e}")

    cache = _EnergyCache(lambda e: _apply_measure(e, mode, grid, data), threads)
    parts: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    latest: list[np.ndarray] = []

    def assemble(nodes, mask=None):
        sampled = cache.fetch(nodes[1:])
        m = _with_origin(nodes, sampled)
        m_f, m_g = m[:, 0, :], m[:, 1, :]
        out = {}
        for band in ("low", "mid", "high"):
            w = cutoffs.weight(band, nodes)
            if mask is not None:
                w = w * mask
            w = w[:, None]
            psi = _sine_over_energy(nodes, w * m_g, omega) + _fourier(nodes, w * m_f, omega, "cos") / hb
            psi_t = (_fourier(nodes, w * m_g, omega, "cos") / hb
                     - _fourier(nodes, w * nodes[:, None] * m_f, omega, "sin") / hb**2)
            out[band] = (2.0 / (np.pi * hb) * psi, 2.0 / (np.pi * hb) * psi_t)
        return out

    def evaluate(delta):
        nodes = _nodes(0.0, e_top, delta)
        latest[:] = [nodes]
        parts.clear()
        parts.update(assemble(nodes))
        return sum(p[0] for p in parts.values()), (nodes.size - 1) // 2

    total, panels, change = _refine(evaluate, delta0, tol, 0.0, max_doublings, "spectral evolution")
    nodes = latest[0]
    trimmed = assemble(nodes, mask=(nodes <= 0.8 * e_top).astype(float))
    truncation = float(np.max(np.abs(sum(p[0] for p in trimmed.values()) - total)) / max(np.max(np.abs(total)), 1e-300))
    logger.debug(f"spectral evolution: {len(cache)} energies, panels={panels}, truncation check {truncation:.2e}")

    psi_t = sum(p[1] for p in parts.values())
    sigma = mode.geometry.sigma if mode.geometry is not None else None
    states = [ModeState(time=float(t), psi=total[i], psi_t=psi_t[i], grid=grid, ell=mode.ell, sigma=sigma)
              for i, t in enumerate(times)]
    return SpectralEvolution(states=states, bands={b: p[0] for b, p in parts.items()}, panels=panels,
                             delta=change, e_top=e_top, truncation=truncation)


def _laplacian(u: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(u)
    out[2:-2] = (-u[:-4] + 16.0 * u[1:-3] - 30.0 * u[2:-2] + 16.0 * u[3:-1] - u[4:]) / (12.0 * h * h)
    out[1] = (u[0] - 2.0 * u[1] + u[2]) / (h * h)
    out[-2] = (u[-3] - 2.0 * u[-2] + u[-1]) / (h * h)
    return out


def _gradient(u: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(u)
    out[2:-2] = (u[:-4] - 8.0 * u[1:-3] + 8.0 * u[3:-1] - u[4:]) / (12.0 * h)
    out[1] = (u[2] - u[0]) / (2.0 * h)
    out[-2] = (u[-1] - u[-3]) / (2.0 * h)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return out


def discrete_energy(state: ModeState, potential_values: np.ndarray) -> float:
    """int (psi_t^2 + psi_x^2 + V psi^2) dx with fourth-order psi_x and Simpson's rule."""
    nodes = state.grid.nodes
    h = state.grid.spacing or float(np.min(np.diff(nodes)))
    density = state.psi_t**2 + _gradient(state.psi, h) ** 2 + potential_values * state.psi**2
    return float(integrate.simpson(density, x=nodes))


def _bracket(x: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + x * x)


def weighted_l2(psi: np.ndarray, grid: Grid, exponent: float) -> float:
    """(int <x>^exponent |psi|^2 dx)^{1/2}"""
    return float(np.sqrt(integrate.simpson(_bracket(grid.nodes) ** exponent * np.abs(psi) ** 2, x=grid.nodes)))


def weighted_sup(psi: np.ndarray, grid: Grid, exponent: float) -> float:
    """sup <x>^exponent |psi|"""
    return float(np.max(_bracket(grid.nodes) ** exponent * np.abs(psi)))


def bump(x, center: float = 0.0, width: float = 1.0, profile: Literal["gaussian", "compact"] = "gaussian"):
    """Initial data profile: Gaussian, or the C-infinity bump exp(-1/(1-s^2)) on |s| < 1."""
    s = (np.asarray(x, dtype=float) - center) / width
    if profile == "gaussian":
        return np.exp(-0.5 * s * s)
    if profile == "compact":
        inside = np.abs(s) < 1.0
        safe = np.where(inside, s, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)
    raise DomainError(f"unknown bump profile {profile!r}")


def evolve_mode_timedomain(f, g, grid: Grid, ell: int, geometry: Optional[Geometry], t_final: float,
                           cfl: float = 0.5, times: Optional[Sequence[float]] = None,
                           observers: Sequence[float] = (), potential: Optional[Potential] = None,
                           check_every: int = 100) -> TimeDomainRun:
    """Integrate psi_tt - psi_xx + V_{l,sigma} psi = 0 on a uniform grid.

    Fourth-order centered differences in space (second order on the nodes next to the
    edges), classical RK4 in time, and the outgoing conditions psi_t = psi_x at the left
    edge and psi_t = -psi_x at the right edge. The boundary closure is stable for cfl up to
    about 0.7.

    Args:
        f, g: psi and psi_t at t = 0
        grid: uniform grid
        ell: angular momentum
        geometry: mass and sigma (ignored when potential is given)
        t_final: final time
        cfl: dt / dx, in (0, 1)
        times: times at which full states are recorded (nearest step)
        observers: positions whose values are recorded at every step (nearest node)
        potential: unnormalized potential overriding V_{l,sigma} (test hooks)
        check_every: steps between NaN checks

    Raises:
        CFLError: cfl outside (0, 1)
        DomainError: nonuniform grid or mismatched data
        NonFiniteError: if the solution blows up
    """
    if not 0 < cfl < 1:
        raise CFLError(f"Courant number must lie in (0, 1), got {cfl}")
    h = grid.spacing
    if h is None:
        raise DomainError("time-domain solver needs a uniform grid")
    psi = np.array(f, dtype=float)
    pi = np.array(g, dtype=float)
    if psi.shape != grid.nodes.shape or pi.shape != grid.nodes.shape:
        raise DomainError("initial data must match the grid")
    if potential is not None:
        v = np.asarray(potential.value(grid.nodes), dtype=float)
        sigma = None
    else:
        if geometry is None:
            raise DomainError("time-domain solver needs a geometry or an explicit potential")
        v = np.asarray(rw_potential(grid.nodes, ell, geometry), dtype=float)
        sigma = geometry.sigma

    steps = max(1, math.ceil(t_final / (cfl * h) - 1e-9))
    dt = t_final / steps
    record = {} if times is None else {int(round(t / dt)): float(t) for t in times if 0 <= t <= t_final}
    record.setdefault(steps, t_final)
    observer_cells = np.array([int(np.argmin(np.abs(grid.nodes - x))) for x in observers], dtype=int)

    def rhs(p, q):
        dp = q.copy()
        dq = _laplacian(p, h) - v * p
        dp[0] = (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h)
        dq[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h)
        dp[-1] = -(3.0 * p[-1] - 4.0 * p[-2] + p[-3]) / (2.0 * h)
        dq[-1] = -(3.0 * q[-1] - 4.0 * q[-2] + q[-3]) / (2.0 * h)
        return dp, dq

    states: list[ModeState] = []
    energies: list[float] = []
    trace = np.empty((observer_cells.size, steps + 1))

    def keep(n):
        state = ModeState(time=n * dt, psi=psi.copy(), psi_t=pi.copy(), grid=grid, ell=ell, sigma=sigma)
        states.append(state)
        energies.append(discrete_energy(state, v))

    trace[:, 0] = psi[observer_cells]
    if 0 in record:
        keep(0)
    logger.debug(f"time domain ell={ell}: {steps} steps, dt={dt:.4g}, {grid.size} nodes")
    for n in range(1, steps + 1):
        k1p, k1q = rhs(psi, pi)
        k2p, k2q = rhs(psi + 0.5 * dt * k1p, pi + 0.5 * dt * k1q)
        k3p, k3q = rhs(psi + 0.5 * dt * k2p, pi + 0.5 * dt * k2q)
        k4p, k4q = rhs(psi + dt * k3p, pi + dt * k3q)
        psi = psi + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        pi = pi + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        if n % check_every == 0 or n == steps:
            if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(pi))):
                raise NonFiniteError(f"Failed to evolve mode ell={ell}: non-finite field", step=n, time=n * dt)
        trace[:, n] = psi[observer_cells]
        if n in record:
            keep(n)
    return TimeDomainRun(states=states, energies=np.array(energies), observer_positions=grid.nodes[observer_cells],
                         observer_times=dt * np.arange(steps + 1), observer_values=trace, dt=dt, steps=steps)


def fit_decay(times, values, window: tuple[float, float], min_samples: int = 10) -> DecayFit:
    """Least-squares power law on (log t, log envelope) inside the window.

    The envelope is the set of local maxima of |psi| when there are enough of them,
    otherwise |psi| itself (monotone tails have no interior maxima).

    Raises:
        FitError: fewer than min_samples points or a nonpositive envelope
    """
    t_lo, t_hi = window
    if not t_hi > t_lo > 0:
        raise FitError(f"Failed to fit decay: bad window {window}")
    times = np.asarray(times, dtype=float)
    magnitude = np.abs(np.asarray(values, dtype=float))
    inside = (times >= t_lo) & (times <= t_hi)
    peaks, _ = signal.find_peaks(magnitude)
    peaks = peaks[inside[peaks]]
    if peaks.size >= min_samples:
        t, env, source = times[peaks], magnitude[peaks], "peaks"
    else:
        t, env, source = times[inside], magnitude[inside], "samples"
    if t.size < min_samples:
        raise FitError(f"Failed to fit decay: {t.size} samples in [{t_lo}, {t_hi}], need {min_samples}")
    if np.any(env <= 0):
        raise FitError("Failed to fit decay: nonpositive envelope")
    if t.size < 2 * min_samples:
        logger.warning(f"decay fit over [{t_lo}, {t_hi}] rests on only {t.size} samples")
    result = stats.linregress(np.log(t), np.log(env))
    r_squared = float(min(1.0, max(0.0, result.rvalue**2)))
    logger.debug(f"decay fit [{t_lo}, {t_hi}] on {t.size} {source}: p={result.slope:.4f} r2={r_squared:.6f}")
    return DecayFit(exponent=float(result.slope), amplitude=float(np.exp(result.intercept)), t_lo=t_lo,
                    t_hi=t_hi, r_squared=r_squared, samples=int(t.size), envelope=source)
