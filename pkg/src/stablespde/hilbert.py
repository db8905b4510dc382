"""Spectral Galerkin spaces: semigroup, fractional powers and Yosida resolvents.

All operators are diagonal in the eigenbasis of ``A`` so their actions are
exact.  Vectors may carry leading batch axes; the last axis is the mode index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType

import numpy as np

from .errors import DimensionError, ParameterError

_CACHED_DELTAS = (0.0, 0.25, 0.5, 1.0)


def analytic_constant(delta: float) -> float:
    """Smallest ``c`` with ``mu**delta * exp(-mu t) <= c t**-delta`` for all ``mu, t > 0``.

    The product ``(mu t)**delta exp(-mu t)`` peaks at ``mu t = delta``.
    """
    if not 0.0 <= delta <= 1.0:
        raise ParameterError("delta", delta, "0 <= delta <= 1")
    return 1.0 if delta == 0 else float((delta / np.e) ** delta)


@dataclass(frozen=True)
class GalerkinModel:
    """Diagonal model of a negative self-adjoint generator on ``R^dim``.

    Parameters
    ----------
    mu : array_like
        Positive, nondecreasing decay rates; ``A`` has eigenvalues ``-mu``.
    basis_label : str
        Name of the eigenbasis, e.g. ``"dirichlet-sine"``.
    """

    mu: np.ndarray
    basis_label: str = "explicit"
    domain_exponent_cache: MappingProxyType = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if mu.size == 0:
            raise ParameterError("dim", 0, "dim >= 1")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
            raise ParameterError("mu", mu.tolist(), "all decay rates finite and > 0")
        if np.any(np.diff(mu) < 0):
            raise ParameterError("mu", mu.tolist(), "nondecreasing")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        cache = {}
        for d in _CACHED_DELTAS:
            arr = mu**d
            arr.setflags(write=False)
            cache[d] = arr
        object.__setattr__(self, "domain_exponent_cache", MappingProxyType(cache))

    @classmethod
    def dirichlet_laplacian(cls, dim: int, diffusivity: float = 1.0) -> "GalerkinModel":
        """``A = diffusivity * d^2/dx^2`` on (0, 1) with Dirichlet conditions."""
        if int(dim) < 1:
            raise ParameterError("dim", dim, "dim >= 1")
        k = np.arange(1, int(dim) + 1)
        return cls(diffusivity * (k * np.pi) ** 2, "dirichlet-sine")

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "GalerkinModel":
        """Build from the (negative) spectrum of ``A``."""
        ev = np.asarray(eigenvalues, dtype=float)
        if np.any(ev >= 0):
            raise ParameterError("eigenvalues", ev.tolist(), "all eigenvalues < 0")
        return cls(np.sort(-ev), "explicit")

    @property
    def dim(self) -> int:
        return int(self.mu.size)

    @property
    def eigenvalues(self) -> np.ndarray:
        return -self.mu

    def c_delta(self, delta: float) -> float:
        return analytic_constant(delta)

    def power_diag(self, delta: float) -> np.ndarray:
        """Diagonal of ``(-A)**delta``."""
        if not 0.0 <= delta <= 1.0:
            raise ParameterError("delta", delta, "0 <= delta <= 1")
        cached = self.domain_exponent_cache.get(float(delta))
        return cached if cached is not None else self.mu**delta

    def semigroup_diag(self, t) -> np.ndarray:
        """``exp(-mu t)``; ``t`` may be an array, giving shape ``t.shape + (dim,)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ParameterError("t", t.min(), "t >= 0")
        return np.exp(-t[..., None] * self.mu)

    def resolvent_diag(self, n: float) -> np.ndarray:
        """Diagonal of ``R_n = n (n - A)^{-1}``; ``n = inf`` gives the identity."""
        if not n > 0:
            raise ParameterError("n", n, "n > 0")
        if np.isinf(n):
            return np.ones_like(self.mu)
        return n / (n + self.mu)

    def check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.dim,):
            raise DimensionError(self.dim, v.shape[-1] if v.ndim else 0)
        return v

    @cached_property
    def first_eigenvector(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e


@dataclass(frozen=True)
class HSOperator:
    """Hilbert-Schmidt operator given by its coordinate matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim == 1:
            m = np.diag(m)
        if m.ndim != 2:
            raise DimensionError(2, m.ndim, "operator matrix rank")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @cached_property
    def hs_norm(self) -> float:
        return float(np.sqrt(np.sum(self.matrix**2)))

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    @classmethod
    def identity(cls, d: int) -> "HSOperator":
        return cls(np.eye(d))

    def __mul__(self, c: float) -> "HSOperator":
        return HSOperator(c * self.matrix)

    __rmul__ = __mul__

    def __add__(self, other: "HSOperator") -> "HSOperator":
        return HSOperator(self.matrix + other.matrix)


def apply_semigroup(model: GalerkinModel, t: float, v) -> np.ndarray:
    """Apply ``S(t) = exp(tA)`` to ``v``."""
    v = model.check(v)
    if not t >= 0:
        raise ParameterError("t", t, "t >= 0")
    return np.exp(-t * model.mu) * v


def yosida_resolvent(model: GalerkinModel, n: float, v) -> np.ndarray:
    """Apply ``R_n = n (n - A)^{-1}`` to ``v``."""
    v = model.check(v)
    return model.resolvent_diag(n) * v


def fractional_norm(model: GalerkinModel, delta: float, v) -> np.ndarray:
    """``||(-A)^delta v||``; reduces over the last axis."""
    v = model.check(v)
    return np.sqrt(np.sum((model.power_diag(delta) * v) ** 2, axis=-1))
