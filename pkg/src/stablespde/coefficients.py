"""Lipschitz and bounded drift and diffusion coefficients.

Each coefficient declares one constant ``K`` serving both as Lipschitz
constant and as uniform bound, in the Euclidean norm for drifts and the
Hilbert-Schmidt norm for diffusions.  Inputs carry a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterError


class Drift:
    name = "drift"
    K: float

    def __call__(self, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroDrift(Drift):
    dim: int
    name = "zero"

    @property
    def K(self):
        return 0.0

    def __call__(self, h):
        return np.zeros_like(np.asarray(h, float))

    def to_dict(self):
        return {"type": "zero"}


@dataclass(frozen=True)
class SigmoidDrift(Drift):
    """``F(h)_k = -a_k tanh(h_k)``, bounded by ``||a||`` and ``max a_k``-Lipschitz."""

    a: np.ndarray
    name = "sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, float))

    @property
    def K(self):
        return float(max(np.linalg.norm(self.a), np.max(np.abs(self.a))))

    def __call__(self, h):
        return -self.a * np.tanh(h)

    def to_dict(self):
        return {"type": "sigmoid", "a": self.a.tolist()}


@dataclass(frozen=True)
class ProjectedLinearDrift(Drift):
    """``F(h) = -kappa * P(h)`` with ``P`` the projection onto the ball of radius ``radius``."""

    kappa: float
    radius: float
    name = "projected_linear"

    @property
    def K(self):
        return float(self.kappa * max(1.0, self.radius))

    def __call__(self, h):
        h = np.asarray(h, float)
        nrm = np.linalg.norm(h, axis=-1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(nrm, 1e-300))
        return -self.kappa * h * scale

    def to_dict(self):
        return {"type": "projected_linear", "kappa": self.kappa, "radius": self.radius}


@dataclass(frozen=True)
class ConstantDrift(Drift):
    b: np.ndarray
    name = "constant"

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, float))

    @property
    def K(self):
        return float(np.linalg.norm(self.b))

    def __call__(self, h):
        return np.broadcast_to(self.b, np.shape(h)).copy()

    def to_dict(self):
        return {"type": "constant", "b": self.b.tolist()}


class Diffusion:
    """State-dependent Hilbert-Schmidt operator ``G(h): R^noise_dim -> R^dim``."""

    name = "diffusion"
    dim: int
    noise_dim: int
    K: float

    def diag(self, h) -> np.ndarray | None:
        """Diagonal of ``G(h)`` (shape ``(..., dim)``) for diagonal coefficients, else None."""
        return None

    def matrix(self, h) -> np.ndarray:
        d = self.diag(h)
        if d is None:
            raise NotImplementedError
        return d[..., :, None] * np.eye(self.dim)

    def apply(self, h, v, row_scale=None) -> np.ndarray:
        """``diag(row_scale) G(h) v`` batched over the leading axis."""
        d = self.diag(h)
        out = d * v if d is not None else np.einsum("...ij,...j->...i", self.matrix(h), v)
        return out if row_scale is None else row_scale * out

    def sq_singular_values(self, h, row_scale=None) -> np.ndarray:
        d = self.diag(h)
        if d is not None:
            return (d if row_scale is None else row_scale * d) ** 2
        m = self.matrix(h)
        if row_scale is not None:
            m = row_scale[..., :, None] * m
        return np.linalg.svd(m, compute_uv=False) ** 2

    def hs_norm(self, h, row_scale=None) -> np.ndarray:
        return np.sqrt(np.sum(self.sq_singular_values(h, row_scale), axis=-1))

    @property
    def op_bound(self) -> float:
        """Upper bound on ``sup_h ||G(h)||_op``; the HS bound unless a class knows better."""
        return float(self.K)

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def is_constant(self) -> bool:
        return False


@dataclass(frozen=True)
class ZeroDiffusion(Diffusion):
    dim: int
    noise_dim: int | None = None
    name = "zero"

    def __post_init__(self):
        if self.noise_dim is None:
            object.__setattr__(self, "noise_dim", self.dim)

    @property
    def K(self):
        return 0.0

    def matrix(self, h):
        h = np.asarray(h)
        return np.zeros(h.shape[:-1] + (self.dim, self.noise_dim))

    def diag(self, h):
        if self.noise_dim != self.dim:
            return None
        return np.zeros(np.shape(h))

    def apply(self, h, v, row_scale=None):
        return np.zeros(np.shape(h))

    @property
    def is_zero(self):
        return True

    @property
    def is_constant(self):
        return True

    def to_dict(self):
        return {"type": "zero"}


@dataclass(frozen=True)
class ConstantDiffusion(Diffusion):
    """``G(h) = Phi``; a 1-D ``phi`` is read as a diagonal."""

    phi: np.ndarray
    name = "constant"

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, float))

    @property
    def _is_diag(self):
        return self.phi.ndim == 1

    @property
    def dim(self):
        return self.phi.shape[0]

    @property
    def noise_dim(self):
        return self.phi.shape[0] if self._is_diag else self.phi.shape[1]

    @property
    def K(self):
        return float(np.sqrt(np.sum(self.phi**2)))

    @property
    def full_matrix(self):
        return np.diag(self.phi) if self._is_diag else self.phi

    @property
    def op_bound(self):
        if self._is_diag:
            return float(np.max(np.abs(self.phi), initial=0.0))
        return float(np.linalg.norm(self.phi, 2))

    def diag(self, h):
        if not self._is_diag:
            return None
        return np.broadcast_to(self.phi, np.shape(h)[:-1] + (self.dim,))

    def matrix(self, h):
        return np.broadcast_to(self.full_matrix, np.shape(h)[:-1] + self.full_matrix.shape)

    @property
    def is_constant(self):
        return True

    @property
    def is_zero(self):
        return not np.any(self.phi)

    def to_dict(self):
        key = "diag" if self._is_diag else "matrix"
        return {"type": "constant", key: self.phi.tolist()}


@dataclass(frozen=True)
class DiagonalSigmoidDiffusion(Diffusion):
    """``G(h) = diag(g_k (base + amp * tanh(h_k)))`` with ``0 <= amp <= base``."""

    g: np.ndarray
    base: float = 1.0
    amp: float = 0.5
    name = "diagonal_sigmoid"

    def __post_init__(self):
        object.__setattr__(self, "g", np.asarray(self.g, float))
        if not 0 <= self.amp <= self.base:
            raise ParameterError("amp", self.amp, "0 <= amp <= base")

    @property
    def dim(self):
        return self.g.size

    @property
    def noise_dim(self):
        return self.g.size

    @property
    def K(self):
        return float(max(np.linalg.norm(self.g) * (self.base + self.amp),
                         self.amp * np.max(np.abs(self.g))))

    @property
    def op_bound(self):
        return float(np.max(np.abs(self.g)) * (self.base + self.amp))

    def diag(self, h):
        return self.g * (self.base + self.amp * np.tanh(h))

    def to_dict(self):
        return {"type": "diagonal_sigmoid", "g": self.g.tolist(), "base": self.base,
                "amp": self.amp}


def decay_profile(dim: int, scale: float, power: float) -> np.ndarray:
    k = np.arange(1, dim + 1)
    return scale * k ** (-float(power))


def _vector(spec, key, dim, default_scale, default_power):
    if key in spec:
        v = np.asarray(spec[key], float)
        if v.shape != (dim,):
            raise ConfigError([f"{key}: expected {dim} entries, got {v.size}"])
        return v
    return decay_profile(dim, float(spec.get("scale", default_scale)),
                         float(spec.get("power", default_power)))


def drift_from_spec(spec: dict, dim: int) -> Drift:
    kind = spec.get("type", "sigmoid")
    if kind == "zero":
        return ZeroDrift(dim)
    if kind == "sigmoid":
        return SigmoidDrift(_vector(spec, "a", dim, 1.0, 1.0))
    if kind == "projected_linear":
        return ProjectedLinearDrift(float(spec.get("kappa", 1.0)), float(spec.get("radius", 10.0)))
    if kind == "constant":
        return ConstantDrift(np.asarray(spec["b"], float))
    raise ConfigError([f"F.type: unknown drift '{kind}'"])


def diffusion_from_spec(spec: dict, dim: int) -> Diffusion:
    kind = spec.get("type", "diagonal_sigmoid")
    if kind == "zero":
        return ZeroDiffusion(dim)
    if kind in ("constant", "diagonal_decay"):
        if "matrix" in spec:
            return ConstantDiffusion(np.asarray(spec["matrix"], float))
        return ConstantDiffusion(_vector(spec, "diag", dim, 0.5, 2.0))
    if kind in ("diagonal_sigmoid", "state_nemytskii"):
        return DiagonalSigmoidDiffusion(_vector(spec, "g", dim, 0.5, 2.0),
                                        float(spec.get("base", 1.0)), float(spec.get("amp", 0.5)))
    raise ConfigError([f"G.type: unknown diffusion '{kind}'"])


def verify_constants(coef, dim: int, rng: np.random.Generator, n_pairs: int = 2000,
                     scale: float = 3.0) -> dict:
    """Check the declared ``K`` on random point pairs; returns the worst observed ratios."""
    h1 = scale * rng.standard_normal((n_pairs, dim))
    h2 = h1 + rng.standard_normal((n_pairs, dim)) * rng.random((n_pairs, 1)) ** 3
    dist = np.linalg.norm(h1 - h2, axis=-1)
    if isinstance(coef, Drift):
        f1, f2 = coef(h1), coef(h2)
        bound = np.max(np.linalg.norm(f1, axis=-1))
        lip = np.max(np.linalg.norm(f1 - f2, axis=-1) / dist)
    else:
        bound = np.max(coef.hs_norm(h1))
        m1 = coef.matrix(h1)
        m2 = coef.matrix(h2)
        lip = np.max(np.sqrt(np.sum((m1 - m2) ** 2, axis=(-2, -1))) / dist)
    return {"bound": float(bound), "lipschitz": float(lip), "K": float(coef.K),
            "ok": bool(bound <= coef.K * (1 + 1e-12) and lip <= coef.K * (1 + 1e-12))}
