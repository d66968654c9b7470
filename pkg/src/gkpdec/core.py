"""Shared numeric kernels.

Symmetric modular reduction, Gaussian sampling, wrapped-Gaussian sums and
the Villain potential used by every decoder in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)

# Terms whose log-weight sits this far below the leading term are below
# double precision and are skipped by the compiled kernels.
_LOG_SKIP = 80.0


class ConfigurationError(ValueError):
    """Raised for invalid numerical settings (cutoffs, grids, windows)."""


@dataclass(frozen=True)
class NoiseParams:
    """Noise strengths of the Gaussian displacement model.

    Parameters
    ----------
    sigma0 : float
        Bare standard deviation of the data shifts.
    alpha : float
        GKP lattice parameter, ``sqrt(pi)`` for the symmetric code.
    sigma : float
        Rescaled data standard deviation ``2 * alpha * sigma0``.
    sigmaM : float
        Rescaled standard deviation of GKP ancilla measurement shifts.
    sigmaT : float
        Rescaled standard deviation of toric ancilla measurement shifts.
    """

    sigma0: float
    alpha: float
    sigma: float
    sigmaM: float
    sigmaT: float

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ConfigurationError("sigma0 must be positive")
        for name in ("sigma", "sigmaM", "sigmaT"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")

    @classmethod
    def from_sigma0(cls, sigma0: float, sigma_m_ratio: float = 1.0,
                    sigma_t_ratio: float = 1.0, alpha: float = SQRT_PI) -> "NoiseParams":
        """Build parameters with measurement noise given as ratios of ``sigma``."""
        sigma = 2.0 * alpha * sigma0
        return cls(sigma0, alpha, sigma, sigma_m_ratio * sigma, sigma_t_ratio * sigma)


def sigma0_from_photon_number(nbar: float) -> float:
    """Bare standard deviation matching an approximate GKP state with ``nbar`` photons."""
    return 1.0 / math.sqrt(2.0 * (2.0 * nbar + 1.0))


# ---------------------------------------------------------------- wrapping

@njit(cache=True)
def _wrap_scalar(x, period):
    half = 0.5 * period
    k = math.floor((x + half) / period)
    r = x - k * period
    # guard the half-open interval against rounding at the edges
    if r >= half:
        r -= period
        k += 1
    elif r < -half:
        r += period
        k -= 1
    return r, k


def wrap(x, period: float = TWO_PI):
    """Reduce ``x`` into ``[-period/2, period/2)``.

    Parameters
    ----------
    x : float or array_like
        Value(s) to reduce.
    period : float
        Positive period.

    Returns
    -------
    r : float or ndarray
        Remainder in the symmetric half-open interval.
    k : int or ndarray
        Integer winding such that ``x = r + k * period``.
    """
    if not period > 0:
        raise ConfigurationError("period must be positive")
    if np.ndim(x) == 0:
        r, k = _wrap_scalar(float(x), float(period))
        return r, int(k)
    x = np.asarray(x, dtype=float)
    half = 0.5 * period
    k = np.floor((x + half) / period)
    r = x - k * period
    hi = r >= half
    lo = r < -half
    r = np.where(hi, r - period, np.where(lo, r + period, r))
    k = np.where(hi, k + 1, np.where(lo, k - 1, k))
    return r, k.astype(np.int64)


def wrap_value(x, period: float = TWO_PI):
    """Remainder part of :func:`wrap` only."""
    return wrap(x, period)[0]


# ---------------------------------------------------------------- Villain

@njit(cache=True)
def villain_value_nb(x, sigma, cutoff):
    r, _ = _wrap_scalar(x, TWO_PI)
    inv = 1.0 / (2.0 * sigma * sigma)
    # the k = 0 term is the largest once x is wrapped
    lead = -r * r * inv
    s = 0.0
    for k in range(-cutoff, cutoff + 1):
        y = r + TWO_PI * k
        a = -y * y * inv - lead
        if a > -_LOG_SKIP:
            s += math.exp(a)
    return -(lead + math.log(s))


@njit(cache=True)
def villain_derivative_nb(x, sigma, cutoff):
    r, _ = _wrap_scalar(x, TWO_PI)
    inv = 1.0 / (2.0 * sigma * sigma)
    lead = -r * r * inv
    num = r
    den = 1.0
    # +k and -k together so that V'(0) is exactly zero
    for k in range(1, cutoff + 1):
        yp = r + TWO_PI * k
        ym = r - TWO_PI * k
        ap = -yp * yp * inv - lead
        am = -ym * ym * inv - lead
        wp = math.exp(ap) if ap > -_LOG_SKIP else 0.0
        wm = math.exp(am) if am > -_LOG_SKIP else 0.0
        num += wp * yp + wm * ym
        den += wp + wm
    return num / (den * sigma * sigma)


@dataclass(frozen=True)
class VillainPotential:
    """The 2*pi periodic potential ``-ln sum_k exp(-(x + 2 pi k)^2 / 2 sigma^2)``.

    Parameters
    ----------
    sigma : float
        Width of the wrapped Gaussian.
    cutoff : int
        The winding sum runs over ``-cutoff..cutoff``.
    """

    sigma: float
    cutoff: int = 10

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError("Villain potential needs sigma > 0")
        if int(self.cutoff) < 1:
            raise ConfigurationError("Villain cutoff must be at least 1")


def _check_potential(V: VillainPotential):
    if not V.sigma > 0:
        raise ConfigurationError("Villain potential needs sigma > 0")
    if int(V.cutoff) < 1:
        raise ConfigurationError("Villain cutoff must be at least 1")


def villain_value(V: VillainPotential, x):
    """Evaluate the Villain potential at ``x`` (scalar or array)."""
    _check_potential(V)
    if np.ndim(x) == 0:
        return villain_value_nb(float(x), float(V.sigma), int(V.cutoff))
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    flat = out.reshape(-1)
    for i, xi in enumerate(x.reshape(-1)):
        flat[i] = villain_value_nb(float(xi), float(V.sigma), int(V.cutoff))
    return out


def villain_derivative(V: VillainPotential, x):
    """Derivative of the Villain potential (scalar or array)."""
    _check_potential(V)
    if np.ndim(x) == 0:
        return villain_derivative_nb(float(x), float(V.sigma), int(V.cutoff))
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    flat = out.reshape(-1)
    for i, xi in enumerate(x.reshape(-1)):
        flat[i] = villain_derivative_nb(float(xi), float(V.sigma), int(V.cutoff))
    return out


def villain_cosine_fit(V: VillainPotential, npoints: int = 2048):
    """Fit ``V(x) ~ A0 - beta_V cos x`` over one period.

    Least squares weighted by the wrapped-Gaussian density ``exp(-V)``, so the
    fit follows the potential where the shifts actually sit; an unweighted fit
    is dominated by the cusp at ``x = pi`` and overshoots ``beta_V`` about
    twofold for small ``sigma``.

    Returns
    -------
    A0, beta_V : float
    """
    x = -math.pi + TWO_PI * np.arange(npoints) / npoints
    v = villain_value(V, x)
    w = np.sqrt(np.exp(-(v - v.min())))
    X = np.column_stack([np.ones_like(x), -np.cos(x)])
    A0, beta = np.linalg.lstsq(X * w[:, None], v * w, rcond=None)[0]
    return float(A0), float(beta)


@njit(cache=True)
def log_wrapped_gaussian_nb(x, sigma, period, cutoff):
    """``ln sum_k exp(-(x + period k)^2 / 2 sigma^2)`` for ``|k| <= cutoff``."""
    inv = 1.0 / (2.0 * sigma * sigma)
    lead = -1e300
    for k in range(-cutoff, cutoff + 1):
        y = x + period * k
        a = -y * y * inv
        if a > lead:
            lead = a
    s = 0.0
    for k in range(-cutoff, cutoff + 1):
        y = x + period * k
        a = -y * y * inv - lead
        if a > -_LOG_SKIP:
            s += math.exp(a)
    return lead + math.log(s)


# ---------------------------------------------------------------- sampling

def sample_gaussian_shift(rng: np.random.Generator, sigma: float, size=None):
    """Draw zero-mean Gaussian shifts with standard deviation ``sigma``."""
    if sigma < 0:
        raise ConfigurationError("sigma must be non-negative")
    if sigma == 0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma, size)


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream labelled by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.PCG64(ss))
