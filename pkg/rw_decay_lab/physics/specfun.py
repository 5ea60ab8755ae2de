"""Special functions for the WKB bases: Airy pair, modified Bessel functions of imaginary
order, complex Gamma and spherical harmonics."""

import logging
from typing import Union

import numpy as np
from pydantic import BaseModel
from scipy import integrate, special

from rw_decay_lab.physics.errors import ModeIndexError, OverflowRangeError, PoleError

__all__ = [
    'AiryValues',
    'airy',
    'airy_scaled',
    'bessel_imag_order',
    'bessel_imag_order_derivative',
    'complex_gamma',
    'log_complex_gamma',
    'spherical_harmonic',
]

logger = logging.getLogger("rw_decay_lab.specfun")

AIRY_LIMIT = 120.0
BESSEL_LIMIT = 700.0
SERIES_TERMS = 400


class AiryValues(BaseModel):
    """Ai, Ai', Bi, Bi' at one point"""
    ai: float
    ai_prime: float
    bi: float
    bi_prime: float

    @property
    def wronskian(self) -> float:
        return self.ai * self.bi_prime - self.ai_prime * self.bi


def airy(x: float) -> AiryValues:
    """Airy functions and derivatives.

    Raises:
        OverflowRangeError: for |x| > 120
    """
    if abs(x) > AIRY_LIMIT:
        raise OverflowRangeError(f"Failed to evaluate Airy functions: |x|={abs(x)} > {AIRY_LIMIT}")
    ai, aip, bi, bip = special.airy(float(x))
    return AiryValues(ai=ai, ai_prime=aip, bi=bi, bi_prime=bip)


def airy_scaled(x: Union[float, np.ndarray]) -> tuple:
    """Exponentially scaled Airy functions (scipy.special.airye convention).

    For x > 0 the Ai pair is multiplied by exp(xi) and the Bi pair by exp(-xi),
    xi = (2/3) x^{3/2}. No range restriction.
    """
    return special.airye(x)


def complex_gamma(z: complex) -> complex:
    """Gamma function on the complex plane.

    Raises:
        PoleError: at nonpositive integers
    """
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == np.floor(z.real):
        raise PoleError(f"Gamma has a pole at z={z.real:g}")
    if z.imag == 0:
        return complex(special.gamma(z.real))
    return complex(np.exp(special.loggamma(z)))


def log_complex_gamma(z: complex) -> complex:
    """Principal branch of log Gamma, continuous in the upper and lower half planes."""
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == np.floor(z.real):
        raise PoleError(f"Gamma has a pole at z={z.real:g}")
    return complex(special.loggamma(z))


def spherical_harmonic(ell: int, j: int, theta, phi):
    """Orthonormal spherical harmonic Y_{l,j}(theta, phi), Condon-Shortley phase.

    theta is the polar angle in [0, pi], phi the azimuth in [0, 2 pi).

    Raises:
        ModeIndexError: for |j| > ell
    """
    if ell < 0 or abs(j) > ell:
        raise ModeIndexError(f"spherical harmonic index out of range: ell={ell}, j={j}")
    if hasattr(special, "sph_harm_y"):
        return special.sph_harm_y(ell, j, theta, phi)
    return special.sph_harm(j, ell, phi, theta)


def _series(mu: complex, x: float) -> tuple[complex, complex]:
    """Power series for I_mu and its derivative."""
    half = 0.5 * x
    term = np.exp(mu * np.log(half) - special.loggamma(1.0 + mu))
    total = term
    deriv = mu * term
    quarter = half * half
    for k in range(1, SERIES_TERMS):
        term = term * quarter / (k * (k + mu))
        total += term
        deriv += (2 * k + mu) * term
        if abs(term) < 1e-17 * abs(total):
            break
    return total, deriv / x


def _continue(nu: float, x0: float, start: tuple[complex, complex], targets: np.ndarray):
    """Integrate u = exp(-x) I outward from x0, returning (u, u') at the targets."""
    i0, d0 = start
    u0 = np.exp(-x0) * i0
    du0 = np.exp(-x0) * (d0 - i0)

    def rhs(x, y):
        u, du = y
        return [du, -(2.0 + 1.0 / x) * du - (1.0 / x + nu * nu / (x * x)) * u]

    sol = integrate.solve_ivp(rhs, (x0, float(targets.max())), [complex(u0), complex(du0)],
                              method="DOP853", t_eval=targets, rtol=1e-12, atol=1e-300)
    if not sol.success:
        raise OverflowRangeError(f"Failed to continue Bessel function: {sol.message}")
    return sol.y[0], sol.y[1]


def _bessel(nu: float, x, scaled: bool):
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr <= 0):
        raise ValueError("bessel_imag_order needs x > 0")
    if nu < 0:
        raise ValueError("bessel_imag_order needs nu >= 0")
    if not scaled and np.any(x_arr > BESSEL_LIMIT):
        raise OverflowRangeError(f"Failed to evaluate I_(i nu): x={x_arr.max()} > {BESSEL_LIMIT}")
    mu = 1j * nu
    switch = 2.0 * (1.0 + nu)
    values = np.empty(x_arr.shape, dtype=complex)
    derivs = np.empty(x_arr.shape, dtype=complex)
    inner = x_arr <= switch
    for i in np.nonzero(inner)[0]:
        values[i], derivs[i] = _series(mu, x_arr[i])
        if scaled:
            values[i] *= np.exp(-x_arr[i])
            derivs[i] *= np.exp(-x_arr[i])
    outer = np.nonzero(~inner)[0]
    if outer.size:
        targets, inverse = np.unique(x_arr[outer], return_inverse=True)
        u, du = _continue(nu, switch, _series(mu, switch), targets)
        u, du = u[inverse], du[inverse]
        if scaled:
            values[outer], derivs[outer] = u, du + u
        else:
            growth = np.exp(x_arr[outer])
            values[outer], derivs[outer] = growth * u, growth * (du + u)
    return values, derivs


def bessel_imag_order(nu: float, x, scaled: bool = False):
    """Modified Bessel functions I_{i nu}(x) and I_{-i nu}(x) for real x > 0.

    Power series for x <= 2(1 + nu); beyond, the ODE for exp(-x) I is integrated outward
    from the series value.

    Args:
        nu: nonnegative order parameter
        x: positive argument (scalar or array)
        scaled: return exp(-x) I instead of I

    Returns:
        (I_{i nu}(x), I_{-i nu}(x)); the second is the complex conjugate of the first

    Raises:
        OverflowRangeError: for x > 700 unless scaled
    """
    values, _ = _bessel(nu, x, scaled)
    if np.ndim(x) == 0:
        return complex(values[0]), complex(np.conj(values[0]))
    return values, np.conj(values)


def bessel_imag_order_derivative(nu: float, x, scaled: bool = False):
    """Derivatives d/dx of the pair returned by bessel_imag_order, times exp(-x) when scaled."""
    _, derivs = _bessel(nu, x, scaled)
    if np.ndim(x) == 0:
        return complex(derivs[0]), complex(np.conj(derivs[0]))
    return derivs, np.conj(derivs)
