"""Approximate Jost machinery: modified potential, turning points, the Langer map, action
integrals, the Airy representation of f_+, the Bessel representation of f_- near the
horizon, the approximate Wronskian and the large-energy WKB ansatz.

Every object here is a leading-order approximation meant to be compared against the
converged solutions in rw_decay_lab.physics.jost.
"""

import logging
import threading
from functools import cached_property
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate, interpolate, optimize

from rw_decay_lab.physics import specfun
from rw_decay_lab.physics.errors import BracketError, DomainError
from rw_decay_lab.physics.geometry import Grid, ModeContext
from rw_decay_lab.physics.jost import jost_pair, wronskian

__all__ = [
    'ActionData',
    'LangerData',
    'HorizonFrame',
    'HorizonSeries',
    'LiouvilleGreenMap',
    'EPSILON',
    'X0',
    'WRONSKIAN_ENERGY_POWER',
    'TABLE_MIN_NODES',
    'modified_potential',
    'modified_potential_derivative',
    'turning_point',
    'langer_map',
    'actions',
    'airy_jost_plus',
    'horizon_frame',
    'fit_horizon_series',
    'liouville_green_w',
    'horizon_jost_minus',
    'exact_wronskian',
    'calibrate_wronskian',
    'wkb_wronskian',
    'large_e_phase',
    'large_e_jost',
]

logger = logging.getLogger("rw_decay_lab.wkb")

EPSILON = 0.15
X0 = -2.0
# f_+ (Airy side) and f_- (Bessel side) each carry E^{1/4} at the matching point
WRONSKIAN_ENERGY_POWER = 0.5
# horizon_jost_minus switches from pointwise root finding to a table above this many nodes
TABLE_MIN_NODES = 64
TABLE_POINTS = 513
LARGE_ENERGY = 100.0
QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=500)
TAYLOR_RADIUS = 1e-5
SERIES_ORDER = 12


class ActionData(BaseModel):
    """Turning point and the far-field / horizon actions and phases"""
    x1: float
    s_plus: float
    t_plus: float
    s_minus: float
    t_minus: float


class LangerData(BaseModel):
    """Langer variable zeta(x) with q = -Q0/zeta, tau = -hbar^{-2/3} zeta and zeta' = sqrt(q)"""
    zeta: float
    q: float
    tau: float
    zeta_prime: float


def modified_potential(x, mode: ModeContext):
    """V0 = V + hbar^2 <x>^{-2} / 4"""
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    return mode.V(x) + mode.hbar**2 / (4.0 * (1.0 + x * x))


def modified_potential_derivative(x, mode: ModeContext, order: int = 1):
    """First or second x-derivative of V0."""
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    h2 = mode.hbar**2
    if order == 1:
        return mode.dV(x) - h2 * x / (2.0 * (1.0 + x * x) ** 2)
    if order == 2:
        return mode.d2V(x) + h2 * (3.0 * x * x - 1.0) / (2.0 * (1.0 + x * x) ** 3)
    raise DomainError(f"derivative order must be 1 or 2, got {order}")


def _split_quad(func, a: float, b: float, anchor: float) -> float:
    """quad over [a, b] split on a geometric ladder away from anchor."""
    if b <= a:
        return 0.0
    edges = [a, b]
    if b - max(a, anchor) > 2.0:
        start = max(a, anchor) + 1.0
        ladder = start + np.geomspace(1.0, b - start + 1.0, 24) - 1.0
        edges.extend(e for e in ladder if a < e < b)
    if min(b, anchor) - a > 2.0:
        start = min(b, anchor) - 1.0
        ladder = start - (np.geomspace(1.0, start - a + 1.0, 24) - 1.0)
        edges.extend(e for e in ladder if a < e < b)
    edges = np.unique(edges)
    return float(sum(integrate.quad(func, lo, hi, **QUAD_OPTS)[0] for lo, hi in zip(edges[:-1], edges[1:])))


def _root_sqrt_integral(q, a: float, b: float, root: float, slope: float, anchor: float) -> float:
    """Integral of sqrt|q| over [a, b] where q vanishes linearly at root (= a or b).

    The square-root endpoint behaviour is carried by the algebraic quadrature weight; the
    remaining factor sqrt(|q| / |x - root|) is smooth.
    """
    if b <= a:
        return 0.0
    span = min(b - a, max(1.0, 0.05 * abs(root)))
    guard = 1e-12 * max(1.0, abs(root))

    def ratio(x):
        d = abs(x - root)
        return np.sqrt(abs(slope)) if d < guard else np.sqrt(abs(q(x)) / d)

    if root == b:
        singular = integrate.quad(ratio, b - span, b, weight="alg", wvar=(0.0, 0.5), **QUAD_OPTS)[0]
        regular = _split_quad(lambda x: np.sqrt(abs(q(x))), a, b - span, anchor)
    else:
        singular = integrate.quad(ratio, a, a + span, weight="alg", wvar=(0.5, 0.0), **QUAD_OPTS)[0]
        regular = _split_quad(lambda x: np.sqrt(abs(q(x))), a + span, b, anchor)
    return singular + regular


def turning_point(energy: float, mode: ModeContext) -> float:
    """Unique turning point x1 > x_max with V0(x1) = E^2.

    Raises:
        DomainError: for E <= 0
        BracketError: if E^2 is not below V0 at the potential top
    """
    if energy <= 0:
        raise DomainError(f"turning point needs E > 0, got {energy}")
    level = energy * energy
    a = mode.x_max
    if modified_potential(a, mode) <= level:
        raise BracketError(f"Failed to bracket turning point: E^2={level:.4g} above the barrier top")
    step = 1.0
    while modified_potential(a + step, mode) > level:
        step *= 2.0
        if step > 1e12:
            raise BracketError(f"Failed to bracket turning point for E={energy:.3e}")
    x1 = optimize.brentq(lambda x: modified_potential(x, mode) - level, a, a + step,
                         xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    logger.debug(f"turning point E={energy:.4g}: x1={x1:.10g}")
    return float(x1)


def _langer(x: float, energy: float, mode: ModeContext, x1: float) -> LangerData:
    level = energy * energy

    def q0(y):
        return modified_potential(y, mode) - level

    slope = modified_potential_derivative(x1, mode)
    u = x - x1
    if abs(u) < TAYLOR_RADIUS:
        c1 = abs(slope) ** (1.0 / 3.0)
        c2 = -modified_potential_derivative(x1, mode, 2) / (10.0 * c1 * c1)
        zeta = c1 * u + c2 * u * u
        q = (c1 + 2.0 * c2 * u) ** 2
    else:
        if u < 0:
            action = _root_sqrt_integral(q0, x, x1, x1, slope, mode.x_max)
            zeta = -(1.5 * action) ** (2.0 / 3.0)
        else:
            action = _root_sqrt_integral(q0, x1, x, x1, slope, mode.x_max)
            zeta = (1.5 * action) ** (2.0 / 3.0)
        q = -q0(x) / zeta
    return LangerData(zeta=zeta, q=q, tau=-mode.hbar ** (-2.0 / 3.0) * zeta, zeta_prime=np.sqrt(q))


def langer_map(x: float, energy: float, mode: ModeContext, x1: Optional[float] = None) -> LangerData:
    """Langer transform at one point: (2/3)|zeta|^{3/2} is the action measured from the turning point.

    Args:
        x: tortoise coordinate, x >= X0
        energy: 0 < E < EPSILON
        mode: normalized mode
        x1: turning point if already known
    """
    if x < X0:
        raise DomainError(f"Langer map defined for x >= {X0}, got {x}")
    x1 = turning_point(energy, mode) if x1 is None else x1
    return _langer(float(x), energy, mode, x1)


def _far_actions(energy: float, mode: ModeContext, x0: float) -> tuple[float, float, float]:
    level = energy * energy
    x1 = turning_point(energy, mode)
    slope = modified_potential_derivative(x1, mode)

    def q0(y):
        return modified_potential(y, mode) - level

    s_plus = _root_sqrt_integral(q0, x0, x1, x1, slope, mode.x_max)
    far = 2.0 * x1 + 10.0
    near = _root_sqrt_integral(q0, x1, far, x1, slope, mode.x_max)
    tail = _split_quad(lambda y: modified_potential(y, mode) / (np.sqrt(level - modified_potential(y, mode)) + energy),
                       far, far * 1e6, far)
    tail += (mode.hbar * (mode.ell + 0.5)) ** 2 / (2.0 * energy * far * 1e6)
    t_plus = energy * x1 - (near - energy * (far - x1)) + tail
    return x1, s_plus, t_plus


def actions(energy: float, mode: ModeContext, x0: float = X0) -> ActionData:
    """S_+, T_+ from the far-field turning point and S_-, T_- from the horizon map.

    S_+ = int_{x0}^{x1} sqrt(V0 - E^2) and T_+ = E x1 - int_{x1}^inf (sqrt(E^2 - V0) - E).
    S_- and T_- are read off the large-argument form of the horizon Bessel representation
    at x0, so that |f_-(x0)| ~ e^{S_-/hbar} and arg f_-(x0) ~ T_-/hbar.
    """
    if not 0 < energy:
        raise DomainError(f"actions need E > 0, got {energy}")
    x1, s_plus, t_plus = _far_actions(energy, mode, x0)
    s_minus, t_minus = _horizon_actions(energy, mode, x0)
    return ActionData(x1=x1, s_plus=s_plus, t_plus=t_plus, s_minus=s_minus, t_minus=t_minus)


def airy_jost_plus(x, energy: float, mode: ModeContext, x0: float = X0):
    """Leading-order f_+ = sqrt(pi) E^{1/2} hbar^{-1/6} e^{i(T_+/hbar + pi/4)} q^{-1/4} (Ai - i Bi)(tau).

    Raises:
        OverflowRangeError: when |tau| exceeds the Airy range deep in the forbidden region
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < x0):
        raise DomainError(f"Airy representation needs x >= {x0}")
    x1, _, t_plus = _far_actions(energy, mode, x0)
    hb = mode.hbar
    prefactor = np.sqrt(np.pi * energy) * hb ** (-1.0 / 6.0) * np.exp(1j * (t_plus / hb + np.pi / 4.0))
    out = np.empty(xs.shape, dtype=complex)
    for i, xi in enumerate(xs):
        data = _langer(float(xi), energy, mode, x1)
        ai = specfun.airy(data.tau)
        out[i] = prefactor * data.q ** -0.25 * (ai.ai - 1j * ai.bi)
    return complex(out[0]) if np.ndim(x) == 0 else out


class HorizonFrame(BaseModel):
    """Exponential variables near the horizon.

    With s' = x/2M - shift and y = 2 e^{s'/2}, the rescaled potential 4M^2 V equals
    e^{s'} Omega(y) with Omega(0) = 1; shift = 1 - log(hbar^2 (l(l+1) + sigma)).
    """
    model_config = ConfigDict(frozen=True)

    mass: float
    hbar: float
    shift: float

    def y_of_x(self, x):
        return 2.0 * np.exp(0.5 * (np.asarray(x, dtype=float) / (2.0 * self.mass) - self.shift))

    def x_of_y(self, y):
        return 2.0 * self.mass * (2.0 * np.log(np.asarray(y, dtype=float) / 2.0) + self.shift)


def horizon_frame(mode: ModeContext) -> HorizonFrame:
    if not mode.is_regge_wheeler or mode.geometry is None:
        raise DomainError("horizon representation needs a Regge-Wheeler mode")
    coupling = mode.ell * (mode.ell + 1) + mode.geometry.sigma
    if coupling <= 0:
        raise DomainError(f"horizon representation needs l(l+1) + sigma > 0, got {coupling}")
    return HorizonFrame(mass=mode.geometry.mass, hbar=mode.hbar,
                        shift=1.0 - np.log(mode.hbar**2 * coupling))


def _omega_exact(y, mode: ModeContext, frame: HorizonFrame):
    m = frame.mass
    return 16.0 * m * m * mode.V(frame.x_of_y(y)) / np.asarray(y, dtype=float) ** 2


class HorizonSeries(BaseModel):
    """Omega(y) = sum_n c_n (y^2/4)^n fitted for x <= x0"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    coefficients: np.ndarray
    y0: float
    remainder: float

    def omega(self, y):
        return np.polynomial.polynomial.polyval(np.asarray(y, dtype=float) ** 2 / 4.0, self.coefficients)


def fit_horizon_series(mode: ModeContext, x0: float = X0, order: int = SERIES_ORDER,
                       samples: int = 200) -> HorizonSeries:
    """Least-squares fit of the horizon series on log-spaced nodes in (0, y0]."""
    if not 0 <= order <= SERIES_ORDER:
        raise DomainError(f"series order must be in [0, {SERIES_ORDER}], got {order}")
    frame = horizon_frame(mode)
    y0 = float(frame.y_of_x(x0))
    ys = np.geomspace(y0 * 1e-3, y0, samples)
    u0 = y0 * y0 / 4.0
    t = ys**2 / 4.0 / u0
    design = np.vander(t, order + 1, increasing=True)
    scaled, *_ = np.linalg.lstsq(design, _omega_exact(ys, mode, frame), rcond=None)
    coefficients = scaled / u0 ** np.arange(order + 1)
    series = HorizonSeries(coefficients=coefficients, y0=y0, remainder=0.0)
    remainder = float(abs(series.omega(y0) - _omega_exact(y0, mode, frame)))
    logger.debug(f"horizon series ell={mode.ell}: c0={coefficients[0]:.12f} remainder={remainder:.2e}")
    return series.model_copy(update={"remainder": remainder})


def _small_w(value: float) -> float:
    """w in (0, 1) with artanh(sqrt(1 - w^2)) - sqrt(1 - w^2) = value."""
    def g(t):
        root = np.sqrt(-np.expm1(2.0 * t))
        return np.log1p(root) - t - root - value

    if value <= 0:
        return 1.0
    t = optimize.brentq(g, -value - 10.0, -1e-300, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.exp(t))


def _large_w(value: float) -> float:
    """w >= 1 with sqrt(w^2 - 1) - arccos(1/w) = value."""
    if value <= 0:
        return 1.0
    return float(optimize.brentq(lambda w: np.sqrt(w * w - 1.0) - np.arccos(1.0 / w) - value,
                                 1.0, value + 3.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


class LiouvilleGreenMap:
    """Implicit map w(z) between the horizon equation and the model Bessel equation.

    Built for one alpha = sqrt(hbar^2/4 + 4 (2ME)^2). The turning point z_t solves
    z^{-2} = Omega(alpha z), which in x reads V(x_t) = alpha^2 / 16M^2; w is fixed by
    equating the model action of the Bessel equation with the action of the potential
    measured from the turning point.
    """

    def __init__(self, mode: ModeContext, alpha: float, x0: float = X0):
        self.mode = mode
        self.alpha = float(alpha)
        self.frame = horizon_frame(mode)
        self.x0 = x0
        m = self.frame.mass
        self.level = self.alpha**2 / (16.0 * m * m)
        if mode.V(x0) <= self.level:
            raise BracketError(f"Failed to invert horizon map: no turning point below x0={x0} for alpha={alpha:.4g}")
        lo = x0 - 1.0
        while mode.V(lo) > self.level:
            lo = x0 - 2.0 * (x0 - lo)
            if lo < -1e6:
                raise BracketError("Failed to bracket the horizon turning point")
        self.x_t = float(optimize.brentq(lambda x: mode.V(x) - self.level, lo, x0, xtol=1e-14,
                                         rtol=4 * np.finfo(float).eps, maxiter=500))
        self.slope = float(mode.dV(self.x_t))

    @cached_property
    def tangency(self) -> float:
        """Limit of w/z as z -> 0, equal to 1 + O(alpha^2)."""
        x = self.x_t - 80.0 * self.frame.mass
        w, _ = self(x)
        return float(w / self.z_of_x(x))

    def z_of_x(self, x):
        return self.frame.y_of_x(x) / self.alpha

    def x_of_z(self, z):
        return self.frame.x_of_y(self.alpha * np.asarray(z, dtype=float))

    def __call__(self, x: float) -> tuple[float, float]:
        """(w, dw/dz) at tortoise coordinate x <= x0."""
        if x > self.x0 + 1e-12:
            raise DomainError(f"horizon map defined for x <= {self.x0}, got {x}")
        mode, alpha, m = self.mode, self.alpha, self.frame.mass

        def gap(y):
            return mode.V(y) - self.level

        if x < self.x_t:
            value = _root_sqrt_integral(gap, x, self.x_t, self.x_t, self.slope, self.x_t) / alpha
            w = _small_w(value)
        elif x > self.x_t:
            value = _root_sqrt_integral(gap, self.x_t, x, self.x_t, self.slope, self.x_t) / alpha
            w = _large_w(value)
        else:
            w = 1.0
        y = float(self.frame.y_of_x(x))
        if abs(x - self.x_t) < 1e-7 * max(1.0, abs(self.x_t)):
            w_prime = (32.0 * m**3 * alpha * self.slope / y**3) ** (1.0 / 3.0)
        else:
            numerator = (alpha**2 - 16.0 * m * m * mode.V(x)) / (y * y)
            w_prime = np.sqrt(numerator / (w ** -2 - 1.0))
        return w, float(w_prime)

    def tabulated(self, x_lo: float, points: int = TABLE_POINTS):
        """PCHIP table of (w, dw/dz) on [x_lo, x0], interpolated in log w and log w'."""
        if not x_lo < self.x0:
            raise DomainError(f"table needs x_lo < {self.x0}, got {x_lo}")
        nodes = np.linspace(x_lo, self.x0, points)
        values = np.array([self(float(x)) for x in nodes])
        log_w = interpolate.PchipInterpolator(nodes, np.log(values[:, 0]))
        log_w_prime = interpolate.PchipInterpolator(nodes, np.log(values[:, 1]))

        def lookup(x):
            return np.exp(log_w(x)), np.exp(log_w_prime(x))

        return lookup


_MAPS: dict[tuple, LiouvilleGreenMap] = {}
_MAPS_LOCK = threading.Lock()


def _mode_key(mode: ModeContext) -> tuple:
    geometry = mode.geometry
    return (mode.ell, mode.hbar, geometry.mass if geometry else None, geometry.sigma if geometry else None)


def _lg_map(mode: ModeContext, alpha: float, x0: float = X0) -> LiouvilleGreenMap:
    key = (*_mode_key(mode), float(alpha), x0)
    with _MAPS_LOCK:
        found = _MAPS.get(key)
        if found is None:
            found = LiouvilleGreenMap(mode, alpha, x0)
            _MAPS[key] = found
        return found


def _alpha_nu(energy: float, mode: ModeContext) -> tuple[float, float, float]:
    e_hat = 2.0 * horizon_frame(mode).mass * energy
    alpha = np.sqrt(mode.hbar**2 / 4.0 + 4.0 * e_hat * e_hat)
    return float(alpha), 2.0 * e_hat / mode.hbar, e_hat


def liouville_green_w(z, alpha: float, mode: ModeContext):
    """w(z) and w'(z) for the map keyed by alpha (arrays allowed)."""
    lg = _lg_map(mode, alpha)
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    pairs = np.array([lg(float(lg.x_of_z(zi))) for zi in zs])
    if np.ndim(z) == 0:
        return float(pairs[0, 0]), float(pairs[0, 1])
    return pairs[:, 0], pairs[:, 1]


def horizon_jost_minus(x, energy: float, mode: ModeContext, x0: float = X0):
    """Leading-order f_- for x <= x0 in the modified Bessel basis.

    f_- = e^{-i E_h shift/hbar} Gamma(1 - i nu) (kappa/hbar)^{i nu} y^{-1/2} (alpha w / w')^{1/2}
    I_{-i nu}(alpha w / hbar), with E_h = 2ME, nu = 2 E_h / hbar and kappa = lim w/z, normalized to
    e^{-iEx/hbar} as x -> -inf.
    """
    if energy <= 0:
        raise DomainError(f"horizon representation needs E > 0, got {energy}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs > x0):
        raise DomainError(f"horizon representation needs x <= {x0}")
    alpha, nu, e_hat = _alpha_nu(energy, mode)
    lg = _lg_map(mode, alpha, x0)
    hb = mode.hbar
    prefactor = (np.exp(-1j * e_hat * lg.frame.shift / hb) * specfun.complex_gamma(1.0 - 1j * nu)
                 * np.exp(1j * nu * (np.log(lg.tangency) - np.log(hb))))
    if xs.size > TABLE_MIN_NODES and xs.min() < x0:
        w_all, w_prime_all = lg.tabulated(float(xs.min()))(xs)
    else:
        w_all, w_prime_all = np.array([lg(float(xi)) for xi in xs]).reshape(-1, 2).T
    out = np.empty(xs.shape, dtype=complex)
    for i, xi in enumerate(xs):
        w, w_prime = float(w_all[i]), float(w_prime_all[i])
        y = float(lg.frame.y_of_x(xi))
        _, bessel = specfun.bessel_imag_order(nu, alpha * w / hb)
        out[i] = prefactor * y ** -0.5 * np.sqrt(alpha * w / w_prime) * bessel
    return complex(out[0]) if np.ndim(x) == 0 else out


def _horizon_actions(energy: float, mode: ModeContext, x0: float) -> tuple[float, float]:
    alpha, nu, e_hat = _alpha_nu(energy, mode)
    lg = _lg_map(mode, alpha, x0)
    w0, _ = lg(x0)
    hb = mode.hbar
    log_gamma = specfun.log_complex_gamma(1.0 - 1j * nu)
    s_minus = alpha * w0 + hb * log_gamma.real
    t_minus = (hb * log_gamma.imag + 2.0 * e_hat * (np.log(lg.tangency) - np.log(hb))
               - e_hat * lg.frame.shift)
    return float(s_minus), float(t_minus)


def _wronskian_model(energy: float, mode: ModeContext, x0: float) -> complex:
    data = actions(energy, mode, x0)
    s = data.s_plus + data.s_minus
    t = data.t_plus + data.t_minus
    return energy ** WRONSKIAN_ENERGY_POWER / mode.hbar * np.exp((s + 1j * t) / mode.hbar)


_GAMMA: dict[tuple, complex] = {}
_GAMMA_LOCK = threading.Lock()


def exact_wronskian(energy: float, mode: ModeContext, x0: float = X0) -> complex:
    grid = Grid.uniform(x0, mode.x_max, 3)
    plus, minus = jost_pair(energy, mode, grid)
    return wronskian(plus, minus).value


def calibrate_wronskian(mode: ModeContext, epsilon: float = EPSILON, x0: float = X0) -> complex:
    """gamma_0 from one exact Wronskian at E = epsilon/2 (cached per mode)."""
    key = (*_mode_key(mode), epsilon, x0)
    with _GAMMA_LOCK:
        if key in _GAMMA:
            return _GAMMA[key]
    energy = 0.5 * epsilon
    gamma = complex(exact_wronskian(energy, mode, x0) / _wronskian_model(energy, mode, x0))
    logger.debug(f"wronskian calibration ell={mode.ell}: |gamma0|={abs(gamma):.6g}")
    with _GAMMA_LOCK:
        _GAMMA[key] = gamma
    return gamma


def wkb_wronskian(energy: float, mode: ModeContext, epsilon: float = EPSILON, x0: float = X0,
                  gamma0: Optional[complex] = None) -> complex:
    """gamma_0 E^p hbar^{-1} e^{(S + iT)/hbar} with S = S_+ + S_-, T = T_+ + T_-.

    The energy power p is WRONSKIAN_ENERGY_POWER = 1/2, the product of the E^{1/4} amplitudes
    of the two representations. gamma_0 is calibrated once per mode at E = epsilon/2 unless given.

    Raises:
        DomainError: E outside (0, epsilon)
    """
    if not 0 < energy < epsilon:
        raise DomainError(f"WKB Wronskian needs 0 < E < {epsilon}, got {energy}")
    gamma0 = calibrate_wronskian(mode, epsilon, x0) if gamma0 is None else gamma0
    return complex(gamma0 * _wronskian_model(energy, mode, x0))


def large_e_phase(energy: float, mode: ModeContext) -> float:
    """T_+ = int_0^inf V / (E + sqrt(E^2 - V)) for energies above the barrier."""
    def integrand(y):
        v = mode.V(y)
        return v / (energy + np.sqrt(energy * energy - v))

    far = 1e7
    total = _split_quad(integrand, 0.0, far, mode.x_max)
    # V ~ hbar^2 l(l+1) / x^2 beyond far
    total += mode.hbar**2 * mode.ell * (mode.ell + 1) / (2.0 * energy * far)
    return total


def _phase_integral(x: float, energy: float, mode: ModeContext) -> float:
    """int_0^x sqrt(E^2 - V) = E x - int_0^x V / (E + sqrt(E^2 - V))."""
    def integrand(y):
        v = mode.V(y)
        return v / (energy + np.sqrt(energy * energy - v))
    return energy * x - _split_quad(integrand, 0.0, x, mode.x_max)


def _volterra(xs: np.ndarray, energy: float, mode: ModeContext, order: int) -> np.ndarray:
    """Iterates of the correction a in f = (WKB)(1 + hbar a).

    a = (1/2i) [int_x^inf g - e^{-2iP(x)/hbar} int_x^inf e^{2iP/hbar} g] with
    g = rho sqrt(Q) (1 + hbar a_prev); the oscillatory integral is replaced by its leading
    boundary term, -hbar g(x) / (2i sqrt(Q(x))).
    """
    hb = mode.hbar
    lo, hi = float(xs.min()), float(xs.max())
    nodes = np.unique(np.concatenate([np.linspace(lo, hi + 20.0, 4001),
                                      hi + 20.0 + np.geomspace(1e-2, 1e5, 2000), xs]))
    q = energy * energy - mode.V(nodes)
    weight = 0.25 * mode.d2V(nodes) / q**1.5 + (5.0 / 16.0) * mode.dV(nodes) ** 2 / q**2.5
    tail = -mode.dV(nodes[-1]) / (4.0 * q[-1] ** 1.5)
    a = np.zeros(nodes.shape, dtype=complex)
    for _ in range(order):
        g = weight * (1.0 + hb * a)
        running = integrate.cumulative_simpson(g, x=nodes, initial=0.0)
        upper = running[-1] - running + tail
        a = (upper + hb * g / (2j * np.sqrt(q))) / 2j
    return a[np.searchsorted(nodes, xs)]


def large_e_jost(x, energy: float, mode: ModeContext, order: int = 0):
    """Large-energy WKB f_+ = E^{1/2} e^{iT_+/hbar} Q^{-1/4} e^{(i/hbar) int_0^x sqrt(Q)} (1 + hbar a).

    Args:
        x: x >= 0 (scalar or array)
        energy: E >= 100
        mode: mode context
        order: number of Volterra iterations for a (0, 1 or 2)
    """
    if energy < LARGE_ENERGY:
        raise DomainError(f"large-energy ansatz needs E >= {LARGE_ENERGY}, got {energy}")
    if order not in (0, 1, 2):
        raise DomainError(f"order must be 0, 1 or 2, got {order}")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise DomainError("large-energy ansatz is valid for x >= 0")
    hb = mode.hbar
    t_plus = large_e_phase(energy, mode)
    phases = np.array([_phase_integral(float(xi), energy, mode) for xi in xs])
    q = energy * energy - mode.V(xs)
    correction = 1.0 + hb * _volterra(xs, energy, mode, order) if order else 1.0
    values = np.sqrt(energy) * np.exp(1j * (t_plus + phases) / hb) * q ** -0.25 * correction
    return complex(values[0]) if np.ndim(x) == 0 else values
