"""Outgoing Jost solutions, Wronskians, the spectral measure and the (1 + H)^{-1} kernel.

The stationary equation -hbar^2 f'' + V f = E^2 f is integrated in log-derivative form
with the plane-wave phase removed: with k = E/hbar, c = +-ik, h = log f - c x and
z = f'/f - c,

    h' = z,    z' = V/hbar^2 - z (z + 2c).

f_+ is seeded far to the right with a Riccati-Hankel function carrying a first-order
Born phase and integrated inward down to the matching point x_m (the potential top);
f_- is seeded near the horizon with a plane wave and integrated up to x_m. On the far
side of x_m each solution is rebuilt from the other one and its conjugate using
Wronskians at x_m, which keeps the solver away from the standing-wave region where
|f| nearly vanishes and the log-derivative becomes singular.
"""

import logging
from typing import Literal, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, interpolate, special

from rw_decay_lab.physics.errors import DomainError, GridTooShortError, NumericalError, StiffnessError
from rw_decay_lab.physics.geometry import Grid, ModeContext

__all__ = [
    'JostSolution',
    'SpectralSample',
    'WronskianResult',
    'GreenValue',
    'jost_pair',
    'jost_solution',
    'wronskian',
    'spectral_measure',
    'spectral_sample',
    'green_kernel',
    'plug_in_residual',
    'MATCH_TOL',
]

logger = logging.getLogger("rw_decay_lab.jost")

MATCH_TOL = 1e-8
RTOL = 1e-10
ATOL = 1e-12
OVERLAP = 0.5
SEED_LIMIT = 1e12
GREEN_PAD = 30.0


class JostSolution(BaseModel):
    """Outgoing solution f_side(x, E; hbar) and f' on a grid"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    side: Literal["plus", "minus"]
    energy: float = Field(gt=0)
    hbar: float = Field(gt=0)
    grid: Grid
    values: np.ndarray
    derivative: np.ndarray
    overlap_variation: float = 0.0


class SpectralSample(BaseModel):
    """e(E, x, x') on grid x grid"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    energy: float
    hbar: float
    grid: Grid
    values: np.ndarray


class WronskianResult(NamedTuple):
    value: complex
    variation: float


class GreenValue(NamedTuple):
    value: float
    ratio: float


def _p(mode: ModeContext, x):
    return mode.V(x) / mode.hbar**2


def _breakpoints(mode: ModeContext) -> list[float]:
    lo, hi = mode.potential.support()
    return [b for b in (lo, hi) if np.isfinite(b) and lo != hi]


def _riccati(mode: ModeContext, k: float, x_from: float, x_to: float, h0: complex, z0: complex,
             targets: np.ndarray, shift: complex = 0j) -> tuple[np.ndarray, np.ndarray]:
    """Integrate (h, z) = (log f - shift x, f'/f - shift) from x_from to x_to.

    With shift = +-ik the plane-wave phase is carried analytically, so the stepper only
    tracks the slowly varying remainder. Returns h and z at the targets (inside the span).
    """
    inv_h2 = 1.0 / mode.hbar**2
    offset = -k * k - shift * shift

    def segment_rhs(seg_lo, seg_hi):
        # one-sided limits of V at jump points
        pad = 1e-13 * max(1.0, abs(seg_lo), abs(seg_hi))

        def rhs(x, state):
            z = state[1]
            xc = min(max(x, seg_lo + pad), seg_hi - pad)
            return [z, mode.V(xc) * inv_h2 + offset - z * (z + 2.0 * shift)]
        return rhs

    direction = 1.0 if x_to > x_from else -1.0
    lo, hi = min(x_from, x_to), max(x_from, x_to)
    cuts = sorted((b for b in _breakpoints(mode) if lo < b < hi), key=lambda b: direction * b)
    stops = [x_from, *cuts, x_to]

    h_out = np.empty(targets.shape, dtype=complex)
    z_out = np.empty(targets.shape, dtype=complex)
    state = np.array([h0, z0], dtype=complex)
    for start, stop in zip(stops[:-1], stops[1:]):
        seg_lo, seg_hi = min(start, stop), max(start, stop)
        inside = np.nonzero((targets >= seg_lo) & (targets <= seg_hi))[0]
        order = inside[np.argsort(direction * targets[inside])]
        t_eval = np.unique(np.concatenate([targets[order], [stop]]))
        if direction < 0:
            t_eval = t_eval[::-1]
        sol = integrate.solve_ivp(segment_rhs(seg_lo, seg_hi), (start, stop), state, method="DOP853",
                                  t_eval=t_eval, rtol=RTOL, atol=ATOL)
        if not sol.success:
            raise StiffnessError(f"Failed to integrate log-derivative from {start:.6g} to {stop:.6g}: "
                                 f"{sol.message}; consider a coarser energy or exponent rescaling")
        lookup = {float(t): i for i, t in enumerate(sol.t)}
        for idx in order:
            j = lookup[float(targets[idx])]
            h_out[idx], z_out[idx] = sol.y[0, j], sol.y[1, j]
        state = sol.y[:, -1]
    return h_out, z_out


def _plus_seed(mode: ModeContext, k: float, right_edge: float):
    pot = mode.potential
    lc = pot.far_field_index
    ang = float(lc * (lc + 1))
    _, support_hi = pot.support()
    x = max(1.0, mode.x_max + 1.0, right_edge + 1.0, (lc + 10.0) / k)
    if np.isfinite(support_hi):
        x = max(x, support_hi + 1.0)
    while True:
        dp = _p(mode, x) - ang / x**2
        if abs(dp) <= 4.0 * MATCH_TOL * k * k and k * x >= lc + 10.0:
            break
        x *= 2.0
        if x > SEED_LIMIT:
            raise GridTooShortError(
                f"Failed to reach the far-field matching tolerance for k={k:.3e} before x={SEED_LIMIT:.0e}")
    kx = k * x
    hankel = special.spherical_jn(lc, kx) + 1j * special.spherical_yn(lc, kx)
    hankel_prime = special.spherical_jn(lc, kx, derivative=True) + 1j * special.spherical_yn(lc, kx, derivative=True)
    phase = 1j ** (lc + 1)
    u = phase * kx * hankel
    du = phase * k * (hankel + kx * hankel_prime)
    tail = pot.right_tail(x) / mode.hbar**2 - ang / x
    h0 = np.log(u * np.exp(-1j * k * x)) + 1j * tail / (2.0 * k)
    z0 = du / u - 1j * k - 1j * dp / (2.0 * k)
    return x, h0, z0


def _minus_seed(mode: ModeContext, k: float, left_edge: float):
    pot = mode.potential
    support_lo, _ = pot.support()
    x = min(-1.0, mode.x_max - 1.0, left_edge - 1.0)
    if np.isfinite(support_lo):
        x = min(x, support_lo - 1.0)
    while abs(_p(mode, x)) > 4.0 * MATCH_TOL * k * k:
        x *= 2.0
        if x < -SEED_LIMIT:
            raise GridTooShortError(f"Failed to reach the horizon-side plane wave regime for k={k:.3e}")
    p = _p(mode, x)
    tail = pot.left_tail(x) / mode.hbar**2
    h0 = 1j * tail / (2.0 * k)
    z0 = 1j * p / (2.0 * k)
    return x, h0, z0


def _w(u, du, v, dv):
    return u * dv - du * v


def jost_pair(energy: float, mode: ModeContext, grid: Grid) -> tuple[JostSolution, JostSolution]:
    """Both outgoing Jost solutions on a grid.

    Args:
        energy: E > 0 (normalized units, k = E/hbar)
        mode: mode context carrying hbar, x_max and the potential
        grid: evaluation nodes

    Returns:
        (f_plus, f_minus)

    Raises:
        DomainError: for E <= 0
        GridTooShortError: if a seed point cannot be found
        StiffnessError: if the ODE stepper fails
    """
    if energy <= 0:
        raise DomainError(f"Jost solutions need E > 0, got {energy}")
    k = energy / mode.hbar
    xm = mode.x_max
    nodes = grid.nodes
    band = np.linspace(xm - OVERLAP, xm + OVERLAP, 11)

    right_targets = np.unique(np.concatenate([nodes[nodes >= xm], band]))
    left_targets = np.unique(np.concatenate([nodes[nodes <= xm], band]))

    x_r, h0, z0 = _plus_seed(mode, k, float(nodes[-1]))
    h_plus, z_plus = _riccati(mode, k, x_r, float(right_targets[0]), h0, z0, right_targets, 1j * k)
    x_l, h0, z0 = _minus_seed(mode, k, float(nodes[0]))
    h_minus, z_minus = _riccati(mode, k, x_l, float(left_targets[-1]), h0, z0, left_targets, -1j * k)
    logger.debug(f"jost E={energy:.6g} hbar={mode.hbar:.4g}: seeds x_R={x_r:.4g} x_L={x_l:.4g}")

    with np.errstate(over="raise", invalid="raise"):
        try:
            fp = np.exp(h_plus) * np.exp(1j * k * right_targets)
            fm = np.exp(h_minus) * np.exp(-1j * k * left_targets)
        except FloatingPointError as e:
            raise NumericalError(f"Failed to represent Jost solution at E={energy:.3e}: dynamic range exceeded") from e
    dfp, dfm = (z_plus + 1j * k) * fp, (z_minus - 1j * k) * fm

    # direct values on the overlap band
    band_p = np.searchsorted(right_targets, band)
    band_m = np.searchsorted(left_targets, band)
    w_band = _w(fp[band_p], dfp[band_p], fm[band_m], dfm[band_m])
    centre = len(band) // 2
    w_mid = w_band[centre]
    overlap_variation = float(np.max(np.abs(w_band - w_mid)) / abs(w_mid))

    ip, im = band_p[centre], band_m[centre]
    fp0, dfp0, fm0, dfm0 = fp[ip], dfp[ip], fm[im], dfm[im]
    wm = _w(fm0, dfm0, np.conj(fm0), np.conj(dfm0))
    a = _w(fp0, dfp0, np.conj(fm0), np.conj(dfm0)) / wm
    b = _w(fm0, dfm0, fp0, dfp0) / wm
    wp = _w(fp0, dfp0, np.conj(fp0), np.conj(dfp0))
    c = _w(fm0, dfm0, np.conj(fp0), np.conj(dfp0)) / wp
    d = _w(fp0, dfp0, fm0, dfm0) / wp

    plus_vals = np.empty(nodes.shape, dtype=complex)
    plus_der = np.empty(nodes.shape, dtype=complex)
    minus_vals = np.empty(nodes.shape, dtype=complex)
    minus_der = np.empty(nodes.shape, dtype=complex)

    right = nodes >= xm
    left = ~right
    ir = np.searchsorted(right_targets, nodes[right])
    il = np.searchsorted(left_targets, nodes[left])
    plus_vals[right], plus_der[right] = fp[ir], dfp[ir]
    plus_vals[left] = a * fm[il] + b * np.conj(fm[il])
    plus_der[left] = a * dfm[il] + b * np.conj(dfm[il])

    left_m = nodes <= xm
    right_m = ~left_m
    jl = np.searchsorted(left_targets, nodes[left_m])
    jr = np.searchsorted(right_targets, nodes[right_m])
    minus_vals[left_m], minus_der[left_m] = fm[jl], dfm[jl]
    minus_vals[right_m] = c * fp[jr] + d * np.conj(fp[jr])
    minus_der[right_m] = c * dfp[jr] + d * np.conj(dfp[jr])

    common = dict(energy=energy, hbar=mode.hbar, grid=grid, overlap_variation=overlap_variation)
    return (JostSolution(side="plus", values=plus_vals, derivative=plus_der, **common),
            JostSolution(side="minus", values=minus_vals, derivative=minus_der, **common))


def jost_solution(side: Literal["plus", "minus"], energy: float, mode: ModeContext,
                  grid: Grid) -> JostSolution:
    """One outgoing Jost solution, f_+ ~ e^{iEx/hbar} as x -> inf or f_- ~ e^{-iEx/hbar} as x -> -inf."""
    if side not in ("plus", "minus"):
        raise DomainError(f"side must be 'plus' or 'minus', got {side!r}")
    plus, minus = jost_pair(energy, mode, grid)
    return plus if side == "plus" else minus


def wronskian(f_plus: JostSolution, f_minus: JostSolution) -> WronskianResult:
    """W(f_+, f_-) = f_+ f_-' - f_+' f_- at the grid midpoint with its relative variation.

    Raises:
        DomainError: if the two solutions do not share (E, hbar, grid)
    """
    if (f_plus.energy != f_minus.energy or f_plus.hbar != f_minus.hbar
            or f_plus.grid.size != f_minus.grid.size
            or not np.array_equal(f_plus.grid.nodes, f_minus.grid.nodes)):
        raise DomainError("Wronskian needs solutions with the same energy, hbar and grid")
    w = _w(f_plus.values, f_plus.derivative, f_minus.values, f_minus.derivative)
    mid = w[f_plus.grid.size // 2]
    variation = float(np.max(np.abs(w - mid)) / abs(mid))
    variation = max(variation, f_plus.overlap_variation, f_minus.overlap_variation)
    return WronskianResult(value=complex(mid), variation=variation)


def _measure(f_plus: JostSolution, f_minus: JostSolution) -> np.ndarray:
    w = wronskian(f_plus, f_minus).value
    fp, fm = f_plus.values, f_minus.values
    n = fp.size
    upper = np.greater_equal.outer(np.arange(n), np.arange(n))
    kernel = np.where(upper, np.outer(fp, fm), np.outer(fm, fp))
    return np.imag(kernel / w)


def spectral_sample(energy: float, mode: ModeContext, grid: Grid) -> SpectralSample:
    """e(E, x, x') = Im[f_+(max) f_-(min) / W] on grid x grid."""
    plus, minus = jost_pair(energy, mode, grid)
    return SpectralSample(energy=energy, hbar=mode.hbar, grid=grid, values=_measure(plus, minus))


def spectral_measure(energy: float, x: float, x_prime: float, mode: ModeContext) -> float:
    """Semiclassical spectral measure at one pair of points."""
    lo, hi = min(x, x_prime), max(x, x_prime)
    nodes = np.array([lo, hi]) if hi > lo else np.array([lo, lo + 1.0])
    plus, minus = jost_pair(energy, mode, Grid(nodes=nodes))
    w = wronskian(plus, minus).value
    return float(np.imag(plus.values[-1 if hi > lo else 0] * minus.values[0] / w))


def plug_in_residual(solution: JostSolution, mode: ModeContext) -> float:
    """max |-hbar^2 f'' + (V - E^2) f| / (max(E^2, sup V) max|f|), f'' from a spline of f'."""
    nodes = solution.grid.nodes
    spline = interpolate.CubicSpline(nodes, solution.derivative)
    second = spline(nodes, 1)
    v = mode.V(nodes)
    residual = -mode.hbar**2 * second + (v - solution.energy**2) * solution.values
    scale = max(solution.energy**2, float(np.max(v))) * float(np.max(np.abs(solution.values)))
    interior = slice(2, -2)
    return float(np.max(np.abs(residual[interior])) / scale)


def _decaying(mode: ModeContext, x_from: float, x_to: float, sign: float, targets: np.ndarray):
    """Log-derivative of the solution of -hbar^2 psi'' + (V + 1) psi = 0 decaying towards x_from."""
    hb = mode.hbar
    q = 1.0 + mode.V(x_from)
    kappa = np.sqrt(q) / hb
    y0 = sign * kappa - mode.dV(x_from) / (4.0 * q)

    def rhs(x, state):
        y = state[1]
        return [y, (mode.V(x) + 1.0) / hb**2 - y * y]

    t_eval = np.unique(targets)
    if x_to < x_from:
        t_eval = t_eval[::-1]
    sol = integrate.solve_ivp(rhs, (x_from, x_to), [0.0, y0], method="DOP853", t_eval=t_eval,
                              rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise StiffnessError(f"Failed to integrate Green function solution: {sol.message}")
    lookup = {float(t): i for i, t in enumerate(sol.t)}
    return {float(t): (sol.y[0, lookup[float(t)]], sol.y[1, lookup[float(t)]]) for t in targets}


def green_kernel(x: float, x_prime: float, mode: ModeContext,
                 pad: Optional[float] = None) -> GreenValue:
    """Kernel of (1 + H)^{-1}, H = -hbar^2 d^2 + V, with its ratio to hbar^{-1} e^{-|x - x'|/hbar}.

    G = -psi_+(x>) psi_-(x<) / (hbar^2 W(psi_-, psi_+)) with psi_+ decaying to the right and
    psi_- to the left; both are integrated as log-derivatives from WKB seeds placed
    `pad` hbar-lengths beyond the evaluation points.
    """
    hb = mode.hbar
    pad = GREEN_PAD * hb if pad is None else pad
    lo, hi = min(x, x_prime), max(x, x_prime)
    right = _decaying(mode, hi + pad, lo, -1.0, np.array([hi, lo]))
    left = _decaying(mode, lo - pad, lo, 1.0, np.array([lo]))
    g_hi, _ = right[hi]
    g_lo, y_plus = right[lo]
    _, y_minus = left[lo]
    value = float(np.exp(g_hi - g_lo) / (hb**2 * (y_minus - y_plus)))
    reference = np.exp(-(hi - lo) / hb) / hb
    return GreenValue(value=value, ratio=float(value / reference))
