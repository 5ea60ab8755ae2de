"""Finite-box realizations of H, the dilation generator A and the estimates built on them.

H = -hbar^2 d^2/dx^2 + V and A = (y p + p y)/2 with y = x - x_max are discretized by symmetric
finite differences with Dirichlet walls. All functions of H or A go through dense
eigendecompositions, computed once per pair and shared.

The positive commutator used for the Mourre bounds is the formal one,
(i/hbar)[H, A] = 2 p^2 - y V'. In a finite box the matrix commutator has zero expectation on
every eigenvector of H (virial identity), so it cannot detect positivity; commutator()
still returns it on request for consistency checks on smooth states.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr
from scipy import linalg, sparse, stats

from rw_decay_lab.physics.errors import DomainError, EigenSolverError, EmptyProjectorError, FitError
from rw_decay_lab.physics.evolution import smooth_step
from rw_decay_lab.physics.geometry import ModeContext

__all__ = [
    'OperatorPair',
    'Spectrum',
    'PowerFit',
    'discretize',
    'with_hbar',
    'commutator',
    'function_of_operator',
    'smooth_indicator',
    'sharp_indicator',
    'mourre_bound',
    'sqrt_mourre_bound',
    'uncertainty_check',
    'commutator_norms',
    'position_commutator_norms',
    'propagation_curve',
    'minimal_velocity_curve',
    'recurrence_time',
    'fit_power',
]

logger = logging.getLogger("rw_decay_lab.mourre")

MIN_POINTS = 200
MAX_POINTS = 4000
HALF_WIDTH = 50.0
RESIDUAL_TOL = 1e-10

Spectral = Callable[[np.ndarray], np.ndarray]


class Spectrum(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    vectors: np.ndarray
    residual: float


class OperatorPair(BaseModel):
    """Discretized H and A on the interior nodes of a Dirichlet box.

    Attributes:
        h: real symmetric matrix of H
        a: Hermitian matrix of A (purely imaginary, antisymmetric)
        p: Hermitian matrix of p = -i hbar d/dx
        nodes: interior nodes
        center: origin of y in A
        potential: V at the nodes
        virial: y V'(x) at the nodes
        order: finite-difference order (2 or 4)
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    h: np.ndarray
    a: np.ndarray
    p: np.ndarray
    nodes: np.ndarray
    center: float
    potential: np.ndarray
    virial: np.ndarray
    hbar: float
    order: Literal[2, 4]
    spacing: float
    domain: tuple[float, float]

    _spectrum: Optional[Spectrum] = PrivateAttr(default=None)
    _conjugate: Optional[Spectrum] = PrivateAttr(default=None)
    _lock: threading.Lock = PrivateAttr(default_factory=threading.Lock)

    @property
    def size(self) -> int:
        return self.nodes.size

    def spectrum(self) -> Spectrum:
        """Eigendecomposition of H (cached)."""
        with self._lock:
            if self._spectrum is None:
                self._spectrum = _diagonalize(self.h, "H")
            return self._spectrum

    def conjugate_spectrum(self) -> Spectrum:
        """Eigendecomposition of A (cached)."""
        with self._lock:
            if self._conjugate is None:
                self._conjugate = _diagonalize(self.a, "A")
            return self._conjugate


def _diagonalize(matrix: np.ndarray, name: str) -> Spectrum:
    try:
        values, vectors = linalg.eigh(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"Failed to diagonalize {name}: {str(e)}") from e
    scale = max(1.0, float(np.max(np.abs(values))))
    residual = float(np.max(np.abs(matrix @ vectors - vectors * values))) / scale
    if residual > RESIDUAL_TOL:
        raise EigenSolverError(f"Failed to diagonalize {name}: residual {residual:.2e} exceeds {RESIDUAL_TOL}")
    logger.debug(f"diagonalized {name} ({matrix.shape[0]} x {matrix.shape[0]}), residual {residual:.2e}")
    return Spectrum(values=values, vectors=vectors, residual=residual)


def _difference_matrices(n: int, h: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    if order == 2:
        d1 = sparse.diags([-1.0, 1.0], [-1, 1], shape=(n, n)).toarray() / (2.0 * h)
        d2 = sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)).toarray() / h**2
        return d1, d2
    d1 = sparse.diags([1.0, -8.0, 8.0, -1.0], [-2, -1, 1, 2], shape=(n, n)).toarray() / (12.0 * h)
    d2 = sparse.diags([-1.0, 16.0, -30.0, 16.0, -1.0], [-2, -1, 0, 1, 2], shape=(n, n)).toarray() / (12.0 * h**2)
    # odd reflection across the walls for the wide stencil
    d2[0, 0] += 1.0 / (12.0 * h**2)
    d2[-1, -1] += 1.0 / (12.0 * h**2)
    return d1, d2


def discretize(mode: ModeContext, domain: Optional[tuple[float, float]] = None, n_points: int = 1000,
               order: Literal[2, 4] = 4, center: Optional[float] = None) -> OperatorPair:
    """Assemble H and A for a mode on a Dirichlet box.

    Args:
        mode: mode context, whose hbar and potential are used
        domain: box walls, default x_max -/+ 50
        n_points: interior nodes, 200 .. 4000
        order: 2 or 4
        center: origin of the dilation, default x_max

    Raises:
        DomainError: box too small, too few or too many points, or unknown order
    """
    lo, hi = domain if domain is not None else (mode.x_max - HALF_WIDTH, mode.x_max + HALF_WIDTH)
    if not MIN_POINTS <= n_points <= MAX_POINTS:
        raise DomainError(f"n_points must lie in [{MIN_POINTS}, {MAX_POINTS}], got {n_points}")
    if lo > mode.x_max - HALF_WIDTH + 1e-12 or hi < mode.x_max + HALF_WIDTH - 1e-12:
        raise DomainError(f"box [{lo}, {hi}] must contain x_max -/+ {HALF_WIDTH}")
    if order not in (2, 4):
        raise DomainError(f"order must be 2 or 4, got {order}")
    spacing = (hi - lo) / (n_points + 1)
    nodes = lo + spacing * np.arange(1, n_points + 1)
    center = mode.x_max if center is None else float(center)
    d1, d2 = _difference_matrices(n_points, spacing, order)
    v = np.asarray(mode.V(nodes), dtype=float)
    y = nodes - center
    hb = mode.hbar
    h = -hb**2 * d2 + np.diag(v)
    p = -1j * hb * d1
    a = 0.5 * (y[:, None] * p + p * y[None, :])
    logger.debug(f"discretized ell={mode.ell} hbar={hb:.4g} on [{lo:.4g}, {hi:.4g}] with {n_points} nodes, order {order}")
    return OperatorPair(h=h, a=a, p=p, nodes=nodes, center=center, potential=v,
                        virial=y * np.asarray(mode.dV(nodes), dtype=float), hbar=hb, order=order,
                        spacing=spacing, domain=(lo, hi))


def with_hbar(mode: ModeContext, hbar: float) -> ModeContext:
    """Same normalized potential, different semiclassical parameter."""
    if hbar <= 0:
        raise DomainError(f"hbar must be positive, got {hbar}")
    return mode.model_copy(update={"hbar": float(hbar)})


def commutator(pair: OperatorPair, formal: bool = True) -> np.ndarray:
    """(i/hbar)[H, A] as a real symmetric matrix.

    formal=True gives 2 p^2 - y V' = 2 (H - V) - y V'; formal=False the matrix commutator.
    """
    if formal:
        return 2.0 * (pair.h - np.diag(pair.potential)) - np.diag(pair.virial)
    return np.real(1j / pair.hbar * (pair.h @ pair.a - pair.a @ pair.h))


def function_of_operator(pair: OperatorPair, g: Spectral) -> np.ndarray:
    """g(H) by functional calculus on the eigendecomposition of H."""
    spectrum = pair.spectrum()
    values = np.asarray(g(spectrum.values))
    return (spectrum.vectors * values) @ spectrum.vectors.T


def smooth_indicator(interval: tuple[float, float], width: float) -> Spectral:
    """C-infinity cutoff equal to one on the interval and vanishing a width outside it."""
    a, b = interval
    if width <= 0 or not b > a:
        raise DomainError(f"need a nonempty interval and positive width, got {interval}, {width}")

    def g(values):
        values = np.asarray(values, dtype=float)
        return smooth_step((values - a + width) / width) * (1.0 - smooth_step((values - b) / width))
    return g


def sharp_indicator(interval: tuple[float, float]) -> Spectral:
    a, b = interval

    def g(values):
        values = np.asarray(values, dtype=float)
        return ((values >= a) & (values <= b)).astype(float)
    return g


def _range(pair: OperatorPair, interval: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    a, b = interval
    if not 0 < a < b:
        raise DomainError(f"Mourre interval must satisfy 0 < a < b, got {interval}")
    spectrum = pair.spectrum()
    inside = (spectrum.values >= a) & (spectrum.values <= b)
    if not np.any(inside):
        raise EmptyProjectorError(f"Failed to find eigenvalues of H in [{a}, {b}]")
    return spectrum.values[inside], spectrum.vectors[:, inside]


def mourre_bound(pair: OperatorPair, interval: tuple[float, float]) -> float:
    """Smallest eigenvalue of chi_I(H) (i/hbar)[H, A] chi_I(H) on the range of chi_I, over hbar.

    Raises:
        DomainError: interval not inside (0, inf)
        EmptyProjectorError: no eigenvalue of H in the interval
    """
    _, basis = _range(pair, interval)
    restricted = basis.T @ commutator(pair) @ basis
    lowest = float(linalg.eigvalsh(restricted)[0])
    logger.debug(f"Mourre bound on {interval}: rank {basis.shape[1]}, lambda_min/hbar = {lowest / pair.hbar:.6g}")
    return lowest / pair.hbar


def sqrt_mourre_bound(pair: OperatorPair, interval: tuple[float, float]) -> float:
    """Mourre bound for sqrt(H) from divided differences of the commutator in the H eigenbasis.

    [sqrt(H), A]_{mn} = [H, A]_{mn} / (sqrt(lambda_m) + sqrt(lambda_n)).
    """
    values, basis = _range(pair, interval)
    roots = np.sqrt(values)
    restricted = (basis.T @ commutator(pair) @ basis) / (roots[:, None] + roots[None, :])
    return float(linalg.eigvalsh(restricted)[0]) / pair.hbar


def uncertainty_check(pair: OperatorPair, vectors) -> float:
    """min over vectors of (|p psi|^2 + |y psi|^2) / |psi|^2; bounded below by hbar.

    Raises:
        DomainError: if any vector vanishes
    """
    psi = np.atleast_2d(np.asarray(vectors))
    if psi.shape[1] != pair.size:
        raise DomainError("vectors must live on the pair's nodes")
    norms = np.sum(np.abs(psi) ** 2, axis=1)
    if np.any(norms == 0):
        raise DomainError("uncertainty quotient of a zero vector")
    momentum = np.sum(np.abs(psi @ pair.p.T) ** 2, axis=1)
    position = np.sum(np.abs((pair.nodes - pair.center) * psi) ** 2, axis=1)
    return float(np.min((momentum + position) / norms))


def _norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2))


def commutator_norms(pair: OperatorPair, g: Spectral, k_max: int = 3) -> np.ndarray:
    """|ad_A^k g(H)| for k = 0 .. k_max, with ad_A X = [X, A]."""
    if k_max < 0:
        raise DomainError(f"k_max must be nonnegative, got {k_max}")
    current = function_of_operator(pair, g).astype(complex)
    norms = [_norm(current)]
    for _ in range(k_max):
        current = current @ pair.a - pair.a @ current
        norms.append(_norm(current))
    return np.array(norms)


def position_commutator_norms(pair: OperatorPair, f: Spectral, g: Spectral) -> tuple[float, float]:
    """|[F(x), g(H)]| and |[F(x), [F(x), g(H)]]|"""
    values = np.asarray(f(pair.nodes), dtype=float)
    gap = values[:, None] - values[None, :]
    cutoff = function_of_operator(pair, g)
    return _norm(gap * cutoff), _norm(gap**2 * cutoff)


def _conjugate_weight(pair: OperatorPair, alpha: float) -> np.ndarray:
    spectrum = pair.conjugate_spectrum()
    weights = (1.0 + spectrum.values**2) ** (-0.5 * alpha)
    return (spectrum.vectors * weights) @ spectrum.vectors.conj().T


def _frequencies(values: np.ndarray, generator: str) -> np.ndarray:
    if generator == "H":
        return values
    if generator == "sqrtH":
        if np.any(values < -1e-12):
            raise DomainError("sqrt(H) propagator needs the cutoff supported in [0, inf)")
        return np.sqrt(np.clip(values, 0.0, None))
    raise DomainError(f"generator must be 'H' or 'sqrtH', got {generator!r}")


def _over_times(func: Callable[[float], float], times, threads: int) -> np.ndarray:
    times = [float(t) for t in times]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(func, times)))
    return np.array([func(t) for t in times])


def propagation_curve(pair: OperatorPair, generator: Literal["H", "sqrtH"], g: Spectral, alpha: float,
                      times: Sequence[float], threads: int = 1) -> np.ndarray:
    """|<A>^{-alpha} exp(-i t G / hbar) g(H) <A>^{-alpha}| for G = H or sqrt(H)."""
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    spectrum = pair.spectrum()
    cutoff = np.asarray(g(spectrum.values), dtype=float)
    if not np.any(cutoff):
        return np.zeros(len(times))
    support = np.abs(cutoff) > 1e-14 * float(np.max(np.abs(cutoff)))
    omega = _frequencies(spectrum.values[support], generator) / pair.hbar
    cutoff = cutoff[support]
    # <A>^-alpha Q_s diag(d) Q_s^T <A>^-alpha = Q_r R diag(d) R^H Q_r^H with X^H = Q_r R
    weighted = _conjugate_weight(pair, alpha) @ spectrum.vectors[:, support]
    r = linalg.qr(weighted, mode="economic")[1]

    def value(t):
        return _norm((r * (np.exp(-1j * t * omega) * cutoff)) @ r.conj().T)

    return _over_times(value, times, threads)


def minimal_velocity_curve(pair: OperatorPair, g: Spectral, theta: float, times: Sequence[float],
                           a: float = 0.0, threads: int = 1) -> np.ndarray:
    """|chi_-(A - a - hbar theta t) exp(-i t H / hbar) g(H) chi_+(A - a)| with spectral indicators of A."""
    spectrum = pair.spectrum()
    conjugate = pair.conjugate_spectrum()
    cutoff = np.asarray(g(spectrum.values), dtype=float)
    support = np.abs(cutoff) > 0
    overlap = spectrum.vectors[:, support].T @ conjugate.vectors
    start = overlap[:, conjugate.values > a]
    omega = spectrum.values[support] / pair.hbar
    cutoff = cutoff[support]

    def value(t):
        behind = overlap[:, conjugate.values < a + pair.hbar * theta * t]
        if behind.shape[1] == 0 or start.shape[1] == 0:
            return 0.0
        return _norm(behind.conj().T @ ((np.exp(-1j * t * omega) * cutoff)[:, None] * start))

    return _over_times(value, times, threads)


def recurrence_time(pair: OperatorPair, interval: tuple[float, float], generator: Literal["H", "sqrtH"] = "H") -> float:
    """Time for the fastest wave packet with energy in the interval to travel from the center to a wall."""
    distance = min(pair.center - pair.domain[0], pair.domain[1] - pair.center)
    speed = 2.0 * np.sqrt(interval[1]) if generator == "H" else 1.0
    return float(distance / speed)


class PowerFit(BaseModel):
    """values ~ constant * <hbar t>^slope"""
    slope: float
    intercept: float
    constant: float
    samples: int


def fit_power(times, values, hbar: float, window: tuple[float, float] = (1.0, 30.0)) -> PowerFit:
    """Log-log slope of values against <hbar t> over hbar t in the window.

    constant is the smallest C with values <= C <hbar t>^slope on the window.

    Raises:
        FitError: fewer than three samples or nonpositive values in the window
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    scaled = hbar * times
    inside = (scaled >= window[0]) & (scaled <= window[1])
    if np.count_nonzero(inside) < 3:
        raise FitError(f"Failed to fit power law: fewer than 3 samples with hbar t in {window}")
    if np.any(values[inside] <= 0):
        raise FitError("Failed to fit power law: nonpositive values")
    bracket = np.sqrt(1.0 + scaled[inside] ** 2)
    result = stats.linregress(np.log(bracket), np.log(values[inside]))
    constant = float(np.max(values[inside] * bracket ** (-result.slope)))
    return PowerFit(slope=float(result.slope), intercept=float(result.intercept), constant=constant,
                    samples=int(np.count_nonzero(inside)))
