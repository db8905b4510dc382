"""Exact samplers for symmetric and isotropic stable laws."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError

_EDGE = 2.0**-54


def check_alpha(alpha: float) -> float:
    if not 1.0 < alpha < 2.0:
        raise ParameterError("alpha", alpha, "1 < alpha < 2")
    return float(alpha)


def _open_uniform(rng: np.random.Generator, low: float, high: float, size):
    u = rng.random(size)
    return low + (high - low) * (_EDGE + (1.0 - 2.0 * _EDGE) * u)


def sample_sas_1d(alpha: float, scale: float, rng: np.random.Generator, size=None):
    """Symmetric alpha-stable draw with characteristic function ``exp(-scale^alpha |s|^alpha)``.

    Uses the Chambers-Mallows-Stuck construction.
    """
    check_alpha(alpha)
    if not scale >= 0:
        raise ParameterError("scale", scale, "scale >= 0")
    v = _open_uniform(rng, -np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
         * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
    out = scale * x
    return float(out) if size is None else out


def sample_positive_stable(alpha_half: float, rng: np.random.Generator, size=None):
    """Positive stable draw with Laplace transform ``exp(-u**alpha_half)``.

    Kanter's representation with ``U ~ Unif(0, pi)`` and ``E ~ Exp(1)``.
    """
    a = alpha_half
    if not 0.5 < a < 1.0:
        raise ParameterError("alpha_half", a, "0.5 < alpha_half < 1")
    u = _open_uniform(rng, 0.0, np.pi, size)
    e = rng.standard_exponential(size)
    zolotarev = (np.sin(a * u) ** a * np.sin((1.0 - a) * u) ** (1.0 - a)
                 / np.sin(u)) ** (1.0 / (1.0 - a))
    out = (zolotarev / e) ** ((1.0 - a) / a)
    return float(out) if size is None else out


def sample_isotropic_increment(alpha: float, dt: float, dim: int,
                               rng: np.random.Generator, size=None) -> np.ndarray:
    """Isotropic stable vector with characteristic function ``exp(-dt ||u||^alpha)``.

    Realized by subordination: ``dt**(1/alpha) * sqrt(2A) * Z`` with ``A``
    positive ``alpha/2``-stable and ``Z`` standard Gaussian.

    Returns
    -------
    ndarray of shape ``size + (dim,)`` (``(dim,)`` when ``size`` is None).
    """
    check_alpha(alpha)
    if not dt > 0:
        raise ParameterError("dt", dt, "dt > 0")
    if int(dim) < 1:
        raise ParameterError("dim", dim, "dim >= 1")
    shape = () if size is None else (tuple(size) if np.iterable(size) else (int(size),))
    a = sample_positive_stable(alpha / 2.0, rng, shape if shape else None)
    z = rng.standard_normal(shape + (int(dim),))
    return dt ** (1.0 / alpha) * np.sqrt(2.0 * np.asarray(a))[..., None] * z


def uniform_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    z = rng.standard_normal((n, dim))
    nrm = np.linalg.norm(z, axis=1, keepdims=True)
    nrm[nrm == 0] = 1.0
    return z / nrm


def sample_radii_between(alpha: float, lo: float, hi: float,
                         rng: np.random.Generator, n: int) -> np.ndarray:
    """Radii with density proportional to ``r**(-1-alpha)`` on ``(lo, hi]``; ``hi`` may be inf."""
    u = _open_uniform(rng, 0.0, 1.0, n)
    a_lo = lo ** -alpha
    a_hi = 0.0 if np.isinf(hi) else hi ** -alpha
    return (a_hi + u * (a_lo - a_hi)) ** (-1.0 / alpha)
