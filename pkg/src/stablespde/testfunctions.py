"""Test functions with bounded first and second derivatives, and their Levy integrals.

Every function here exposes its Gaussian smoothing
``E f(h + sqrt(2 s) W)`` for ``W ~ N(0, C)``.  Because an isotropic stable
vector is ``sqrt(2A) Z`` with ``A`` positive ``alpha/2``-stable, the jump
integral against ``lambda o G^{-1}`` with ``C = G G^T`` becomes

    J f(h) = k * int_0^inf s^{-1-alpha/2} (E f(h + sqrt(2 s) W) - f(h)) ds,
    k = (alpha/2) / Gamma(1 - alpha/2),

which :func:`levy_integral` evaluates on a log-spaced Gauss-Legendre grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats
from scipy.stats import qmc

from .errors import DimensionError, ParameterError, QuadratureError
from .stable_noise.sampling import check_alpha

LOG_HALF_WIDTH = 18.5   # s ranges over tau * exp([-18.5, 18.5])
PANELS = 25
NODES_PER_PANEL = 6
GH_MAX_RANK = 3
GH_NODES = 16
GH_SPREAD = 4.0
QMC_POINTS = 2 ** 12


def subordinator_constant(alpha: float) -> float:
    return (alpha / 2.0) / special.gamma(1.0 - alpha / 2.0)


def _log_grid():
    x, w = np.polynomial.legendre.leggauss(NODES_PER_PANEL)
    edges = np.linspace(-LOG_HALF_WIDTH, LOG_HALF_WIDTH, PANELS + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wy = (half[:, None] * w[None, :]).ravel()
    return y, wy


_Y, _WY = _log_grid()


@dataclass(frozen=True)
class ImageGeometry:
    """Eigen-decomposition ``C = U diag(lam) U^T`` of ``G G^T`` per state.

    ``U`` is None when ``C`` is diagonal in the coordinate basis.
    """

    lam: np.ndarray            # (B, d)
    U: np.ndarray | None = None  # (B, d, d)

    @property
    def lam_max(self) -> np.ndarray:
        return self.lam.max(axis=-1)

    @property
    def trace(self) -> np.ndarray:
        return self.lam.sum(axis=-1)

    def rotate(self, v: np.ndarray) -> np.ndarray:
        """``U^T v`` batched."""
        return v if self.U is None else np.einsum("bji,bj->bi", self.U, v)

    def diag_of_c(self) -> np.ndarray:
        """Diagonal of ``C``."""
        return self.lam if self.U is None else np.einsum("bij,bj->bi", self.U**2, self.lam)

    def quad_form(self, a: np.ndarray) -> np.ndarray:
        """``a^T C a``."""
        return np.sum(self.lam * self.rotate(a) ** 2, axis=-1)

    def trace_with(self, hess: np.ndarray) -> np.ndarray:
        """``tr(C H)``."""
        if self.U is None:
            return np.sum(self.lam * np.diagonal(hess, axis1=-2, axis2=-1), axis=-1)
        hu = np.einsum("bji,bjk,bkl->bil", self.U, hess, self.U)
        return np.sum(self.lam * np.diagonal(hu, axis1=-2, axis2=-1), axis=-1)

    @classmethod
    def from_operator(cls, G, h: np.ndarray, row_scale=None) -> "ImageGeometry":
        d = G.diag(h)
        if d is not None:
            if row_scale is not None:
                d = row_scale * d
            return cls(np.broadcast_to(d**2, h.shape).copy())
        m = G.matrix(h)
        if m.ndim == 2:
            m = np.broadcast_to(m, (h.shape[0],) + m.shape)
        if row_scale is not None:
            m = row_scale[:, None] * m
        lam, U = np.linalg.eigh(m @ np.swapaxes(m, -1, -2))
        return cls(np.maximum(lam, 0.0), U)

    @classmethod
    def from_matrix(cls, phi: np.ndarray, batch: int) -> "ImageGeometry":
        phi = np.asarray(phi, float)
        lam, U = np.linalg.eigh(phi @ phi.T)
        return cls(np.broadcast_to(np.maximum(lam, 0), (batch, lam.size)).copy(),
                   np.broadcast_to(U, (batch,) + U.shape).copy())


@dataclass(frozen=True)
class TestFunction:
    """``f`` with ``Df`` and ``D^2 f`` and sup-norm bounds on both.

    ``length_scale`` sets where the smoothing changes; ``uniform`` declares
    uniform continuity of ``D^2 f`` (needed by the mild Ito formula).
    """

    label: str
    dim: int
    grad_bound: float
    hess_bound: float
    length_scale: float = 1.0
    uniform: bool = True

    def value(self, h):
        raise NotImplementedError

    def grad(self, h):
        raise NotImplementedError

    def hess(self, h):
        raise NotImplementedError

    def smoothing(self, h, geom: ImageGeometry, s) -> np.ndarray:
        """``E f(h + sqrt(2 s) W) - f(h)`` for ``s`` of shape ``(B, S)``."""
        return _generic_smoothing(self, h, geom, s)

    def levy_integral(self, h, geom: ImageGeometry, alpha: float) -> np.ndarray:
        return levy_integral(self, h, geom, alpha)

    def _check(self, h):
        h = np.atleast_2d(np.asarray(h, float))
        if h.shape[-1] != self.dim:
            raise DimensionError(self.dim, h.shape[-1], self.label)
        return h


def levy_integral(f: TestFunction, h, geom: ImageGeometry, alpha: float) -> np.ndarray:
    """``int (f(h+g) - f(h) - <Df(h), g>) (lambda o G^{-1})(dg)`` for a batch of states."""
    check_alpha(alpha)
    h = f._check(h)
    B = h.shape[0]
    lmax = geom.lam_max
    out = np.zeros(B)
    live = lmax > 0
    if not np.any(live):
        return out
    hl = h[live]
    g = _subset(geom, live)
    tau = f.length_scale**2 / g.lam_max
    s = tau[:, None] * np.exp(_Y)[None, :]
    body = f.smoothing(hl, g, s)
    if not np.all(np.isfinite(body)):
        raise QuadratureError("non-finite smoothing values", {"label": f.label})
    a2 = alpha / 2.0
    s_lo = tau * np.exp(-LOG_HALF_WIDTH)
    s_hi = tau * np.exp(LOG_HALF_WIDTH)
    head = g.trace_with(f.hess(hl)) * s_lo ** (1 - a2) / (1 - a2)
    tail = body[:, -1] * s_hi ** (-a2) / a2
    mid = np.sum(_WY * s ** (-a2) * body, axis=1)
    out[live] = subordinator_constant(alpha) * (head + mid + tail)
    return out


def _subset(geom: ImageGeometry, mask) -> ImageGeometry:
    return ImageGeometry(geom.lam[mask], None if geom.U is None else geom.U[mask])


def _hermite_nodes(rank: int):
    x, w = special.roots_hermitenorm(GH_NODES)
    w = w / w.sum()
    grids = np.meshgrid(*([x] * rank), indexing="ij")
    z = np.stack([gr.ravel() for gr in grids], axis=-1)
    wz = np.prod(np.meshgrid(*([w] * rank), indexing="ij"), axis=0).ravel()
    return z, wz


def _sobol_nodes(rank: int):
    """Antithetic scrambled Sobol normals; the pairing cancels odd moments exactly."""
    u = qmc.Sobol(rank, scramble=True, seed=0).random(QMC_POINTS)
    z = stats.norm.ppf(u)
    z = np.concatenate([z, -z])
    return z, np.full(z.shape[0], 1.0 / z.shape[0])


def _generic_smoothing(f: TestFunction, h, geom: ImageGeometry, s) -> np.ndarray:
    """Gaussian expectation over the range of ``C``.

    Tensor Gauss-Hermite (rank <= 3) while the Gaussian spread is within
    ``GH_SPREAD`` length scales; antithetic Sobol points otherwise, where
    Hermite nodes are too sparse to resolve ``f``.
    """
    B, S = s.shape
    d = h.shape[1]
    out = np.empty((B, S))
    for b in range(B):
        lam = geom.lam[b]
        keep = lam > 1e-14 * lam.max()
        rank = int(keep.sum())
        U = np.eye(d) if geom.U is None else geom.U[b]
        basis = U[:, keep] * np.sqrt(lam[keep])
        f0 = f.value(h[b:b + 1])[0]
        spread = np.sqrt(2 * s[b] * lam.max()) / f.length_scale
        use_gh = (spread <= GH_SPREAD) if rank <= GH_MAX_RANK else np.zeros(S, bool)
        for nodes, sel in ((_hermite_nodes, use_gh), (_sobol_nodes, ~use_gh)):
            if not np.any(sel):
                continue
            z, wz = nodes(rank)
            dirs = z @ basis.T
            for j in np.flatnonzero(sel):
                out[b, j] = np.dot(wz, f.value(h[b] + np.sqrt(2 * s[b, j]) * dirs) - f0)
    return out


# -- shipped functions ---------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantFunction(TestFunction):
    c: float = 0.0

    def value(self, h):
        return np.full(self._check(h).shape[0], self.c)

    def grad(self, h):
        return np.zeros_like(self._check(h))

    def hess(self, h):
        h = self._check(h)
        return np.zeros(h.shape + (h.shape[-1],))

    def smoothing(self, h, geom, s):
        return np.zeros(s.shape)

    @classmethod
    def make(cls, dim: int, c: float = 1.0):
        return cls("constant", dim, 0.0, 0.0, 1.0, True, c)


@dataclass(frozen=True)
class TrigFunction(TestFunction):
    """``amp * cos(<a, h> + phase)``; its jump integral is ``-(a^T C a)^{alpha/2} f(h)``."""

    a: np.ndarray = field(default=None)
    phase: float = 0.0
    amp: float = 1.0

    def value(self, h):
        return self.amp * np.cos(self._check(h) @ self.a + self.phase)

    def grad(self, h):
        h = self._check(h)
        return -self.amp * np.sin(h @ self.a + self.phase)[:, None] * self.a

    def hess(self, h):
        h = self._check(h)
        return -self.amp * np.cos(h @ self.a + self.phase)[:, None, None] * np.outer(self.a, self.a)

    def smoothing(self, h, geom, s):
        q = geom.quad_form(np.broadcast_to(self.a, h.shape))
        return self.value(h)[:, None] * np.expm1(-s * q[:, None])

    def levy_integral(self, h, geom, alpha):
        check_alpha(alpha)
        q = geom.quad_form(np.broadcast_to(self.a, self._check(h).shape))
        return -q ** (alpha / 2) * self.value(h)

    @classmethod
    def make(cls, a, phase: float = 0.0, amp: float = 1.0):
        a = np.asarray(a, float)
        na = float(np.linalg.norm(a))
        if na == 0:
            raise ParameterError("a", a.tolist(), "nonzero frequency vector")
        return cls("trig", a.size, amp * na, amp * na**2, 1.0 / na, True, a, phase, amp)


@dataclass(frozen=True)
class GaussianBump(TestFunction):
    """``amp * exp(-|P(h - c)|^2 / (2 sigma^2))`` with ``P`` the identity or one coordinate."""

    center: np.ndarray = field(default=None)
    sigma: float = 1.0
    coord: int | None = None
    amp: float = 1.0

    def _y(self, h):
        y = self._check(h) - self.center
        return y if self.coord is None else y[:, self.coord:self.coord + 1]

    def value(self, h):
        y = self._y(h)
        return self.amp * np.exp(-0.5 * np.sum(y * y, axis=-1) / self.sigma**2)

    def grad(self, h):
        h = self._check(h)
        y = h - self.center
        g = -(self.value(h) / self.sigma**2)[:, None] * y
        if self.coord is not None:
            mask = np.zeros(self.dim)
            mask[self.coord] = 1.0
            g = g * mask
        return g

    def hess(self, h):
        h = self._check(h)
        f = self.value(h)
        s2 = self.sigma**2
        if self.coord is None:
            y = h - self.center
            return f[:, None, None] * (np.einsum("bi,bj->bij", y, y) / s2**2 - np.eye(self.dim) / s2)
        y = (h - self.center)[:, self.coord]
        out = np.zeros(h.shape + (self.dim,))
        out[:, self.coord, self.coord] = f * (y * y / s2**2 - 1 / s2)
        return out

    def smoothing(self, h, geom, s):
        s2 = self.sigma**2
        f0 = self.value(h)
        if self.coord is None:
            y = geom.rotate(self._check(h) - self.center)
            # den / s2 per mode; the hot loop of the PowerMixture integral, so fused in place
            ratio = 1.0 + s[..., None] * (2.0 / s2 * geom.lam)[:, None, :]
            quad = np.einsum("bsd,bd->bs", 1.0 / ratio, y * y / s2)
            np.log(ratio, out=ratio)
            logv = -0.5 * ratio.sum(axis=-1) - 0.5 * quad
        else:
            c = geom.diag_of_c()[:, self.coord][:, None]
            y = self._y(h)[:, 0][:, None]
            den = s2 + 2 * s * c
            logv = -0.5 * np.log(den / s2) - 0.5 * y * y / den
        return self.amp * np.exp(logv) - f0[:, None]

    @classmethod
    def isotropic(cls, dim: int, sigma: float = 1.0, center=None, amp: float = 1.0):
        c = np.zeros(dim) if center is None else np.asarray(center, float)
        return cls("gaussian_bump", dim, amp / (sigma * np.sqrt(np.e)), amp / sigma**2, sigma,
                   True, c, sigma, None, amp)

    @classmethod
    def coordinate(cls, dim: int, coord: int, sigma: float = 1.0, center: float = 0.0,
                   amp: float = 1.0):
        if not 0 <= coord < dim:
            raise ParameterError("coord", coord, f"0 <= coord < {dim}")
        c = np.zeros(dim)
        c[coord] = center
        return cls(f"coordinate_bump[{coord}]", dim, amp / (sigma * np.sqrt(np.e)),
                   amp / sigma**2, sigma, True, c, sigma, coord, amp)


T_PANELS = 12
T_NODES = 6
T_LOG_RANGE = (-18.0, 4.2)


@dataclass(frozen=True)
class PowerMixture(TestFunction):
    """``V(h) = (1 + |h|^2)^{p/2} - 1``.

    Satisfies ``|h|^p - 1 <= V(h) <= |h|^p``.  The Bernstein representation
    ``(1+x)^q = q/Gamma(1-q) int (1 - e^{-t(1+x)}) t^{-1-q} dt`` writes its
    smoothing as a mixture of Gaussian-bump smoothings.
    """

    p: float = 0.5

    def _x(self, h):
        h = self._check(h)
        return h, np.sum(h * h, axis=-1)

    def value(self, h):
        _, x = self._x(h)
        return (1 + x) ** (self.p / 2) - 1

    def grad(self, h):
        h, x = self._x(h)
        return (self.p * (1 + x) ** (self.p / 2 - 1))[:, None] * h

    def hess(self, h):
        h, x = self._x(h)
        p = self.p
        a = p * (1 + x) ** (p / 2 - 1)
        b = p * (p - 2) * (1 + x) ** (p / 2 - 2)
        return a[:, None, None] * np.eye(self.dim) + b[:, None, None] * np.einsum("bi,bj->bij", h, h)

    def _t_grid(self):
        x, w = np.polynomial.legendre.leggauss(T_NODES)
        edges = np.linspace(*T_LOG_RANGE, T_PANELS + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        y = (mid[:, None] + half[:, None] * x).ravel()
        return np.exp(y), (half[:, None] * w).ravel()

    def levy_integral(self, h, geom, alpha):
        """``-c_q int e^{-t} t^{-1-q} J[e^{-t|.|^2}](h) dt`` with a power-law head below ``t_lo``."""
        check_alpha(alpha)
        h = self._check(h)
        q = self.p / 2
        if not q < alpha / 2:
            raise ParameterError("p", self.p, f"p < alpha={alpha}")
        cq = q / special.gamma(1 - q)
        t, wy = self._t_grid()
        total = np.zeros(h.shape[0])
        j_first = None
        for ti, wi in zip(t, wy):
            sig = 1.0 / np.sqrt(2 * ti)
            jt = GaussianBump.isotropic(self.dim, sig).levy_integral(h, geom, alpha)
            if j_first is None:
                j_first = jt
            total += wi * np.exp(-ti) * ti ** (-q) * jt
        t_lo = t[0]
        # J_t ~ t^{alpha/2} for t -> 0
        head = j_first * t_lo ** (-q) / (alpha / 2 - q)
        return -cq * (total + head)

    def smoothing(self, h, geom, s):
        raise NotImplementedError("PowerMixture evaluates its Levy integral directly")

    def dv_bound(self) -> float:
        q = self.p / 2
        x = 1.0 / (1.0 - 2 * q) if q < 0.5 else np.inf
        return float(2 * q * np.sqrt(x) * (1 + x) ** (q - 1)) if np.isfinite(x) else 1.0

    @classmethod
    def make(cls, dim: int, p: float = 0.5):
        if not 0 < p < 1:
            raise ParameterError("p", p, "0 < p < 1")
        obj = cls("power_mixture", dim, 0.0, p, 1.0, True, p)
        object.__setattr__(obj, "grad_bound", obj.dv_bound())
        return obj


@dataclass(frozen=True)
class TruncatedPower(TestFunction):
    """``V(h) = zeta(|h|^2)`` with ``zeta(x) = x^{p/2}`` for ``x >= 1`` and a cubic below.

    The cubic has ``zeta(0) = 0`` and matches value, slope and curvature at
    ``x = 1``, so ``zeta`` is C^2 and ``V <= |h|^p`` where checked.
    """

    p: float = 0.5
    coef: tuple = (0.0, 0.0, 0.0)

    def _zeta(self, x, order=0):
        a, b, c = self.coef
        q = self.p / 2
        inner = [a * x + b * x**2 + c * x**3, a + 2 * b * x + 3 * c * x**2, 2 * b + 6 * c * x][order]
        xs = np.maximum(x, 1.0)
        outer = [xs**q, q * xs ** (q - 1), q * (q - 1) * xs ** (q - 2)][order]
        return np.where(x < 1, inner, outer)

    def value(self, h):
        h = self._check(h)
        return self._zeta(np.sum(h * h, axis=-1))

    def grad(self, h):
        h = self._check(h)
        return (2 * self._zeta(np.sum(h * h, axis=-1), 1))[:, None] * h

    def hess(self, h):
        h = self._check(h)
        x = np.sum(h * h, axis=-1)
        z1, z2 = self._zeta(x, 1), self._zeta(x, 2)
        return (2 * z1)[:, None, None] * np.eye(self.dim) + \
            (4 * z2)[:, None, None] * np.einsum("bi,bj->bij", h, h)

    @classmethod
    def make(cls, dim: int, p: float = 0.5):
        if not 0 < p < 1:
            raise ParameterError("p", p, "0 < p < 1")
        q = p / 2
        M = np.array([[1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [0.0, 2.0, 6.0]])
        coef = tuple(np.linalg.solve(M, [1.0, q, q * (q - 1)]))
        obj = cls("truncated_power", dim, 0.0, 0.0, 1.0, True, p, coef)
        x = np.concatenate([np.linspace(0, 1, 4001), np.geomspace(1, 1e8, 4001)])
        z0, z1, z2 = obj._zeta(x), obj._zeta(x, 1), obj._zeta(x, 2)
        if np.any(z0[x < 1] > x[x < 1] ** q + 1e-12) or np.any(z0 < -1e-12):
            raise ParameterError("p", p, "cubic truncation must satisfy 0 <= zeta(x) <= x^{p/2}")
        gb = float(np.max(2 * np.abs(z1) * np.sqrt(x)))
        hb = float(np.max(np.maximum(np.abs(2 * z1), np.abs(2 * z1 + 4 * z2 * x))))
        object.__setattr__(obj, "grad_bound", gb * (1 + 1e-3))
        object.__setattr__(obj, "hess_bound", hb * (1 + 1e-3))
        return obj


# -- checks -------------------------------------------------------------------------------

def check_derivatives(f: TestFunction, rng: np.random.Generator, n: int = 50,
                      scale: float = 1.0) -> dict:
    """Central-difference checks of ``grad`` and ``hess`` at random points."""
    h = scale * rng.standard_normal((n, f.dim))
    step = 1e-6 * scale
    eye = np.eye(f.dim)
    g = f.grad(h)
    H = f.hess(h)
    g_fd = np.stack([(f.value(h + step * e) - f.value(h - step * e)) / (2 * step) for e in eye],
                    axis=-1)
    H_fd = np.stack([(f.grad(h + step * e) - f.grad(h - step * e)) / (2 * step) for e in eye],
                    axis=-1)
    gerr = np.max(np.abs(g - g_fd)) / max(np.max(np.abs(g)), 1e-12)
    herr = np.max(np.abs(H - H_fd)) / max(np.max(np.abs(H)), 1e-12)
    return {"grad_rel_err": float(gerr), "hess_rel_err": float(herr),
            "ok": bool(gerr < 1e-5 and herr < 1e-5)}


def check_bounds(f: TestFunction, rng: np.random.Generator, n: int = 2000,
                 scales=(0.1, 1.0, 3.0, 10.0)) -> dict:
    """Declared sup bounds against random point batteries at several scales."""
    worst_g = worst_h = 0.0
    for sc in scales:
        h = sc * f.length_scale * rng.standard_normal((n, f.dim))
        worst_g = max(worst_g, float(np.max(np.linalg.norm(f.grad(h), axis=-1))))
        worst_h = max(worst_h, float(np.max(np.linalg.norm(f.hess(h), ord=2, axis=(-2, -1)))))
    return {"grad_max": worst_g, "hess_max": worst_h,
            "ok": bool(worst_g <= f.grad_bound * (1 + 1e-9) + 1e-15
                       and worst_h <= f.hess_bound * (1 + 1e-9) + 1e-15)}


def hessian_modulus(f: TestFunction, rng: np.random.Generator, deltas=(1e-1, 1e-2, 1e-3),
                    n: int = 500) -> np.ndarray:
    """``max |D^2 f(h + delta u) - D^2 f(h)|`` over random ``h`` and unit ``u``, per delta.

    A uniformly continuous Hessian makes this tend to 0 with delta.
    """
    out = []
    for sc in (1.0, 10.0):
        h = sc * f.length_scale * rng.standard_normal((n, f.dim))
        u = rng.standard_normal((n, f.dim))
        u /= np.linalg.norm(u, axis=-1, keepdims=True)
        out.append([float(np.max(np.linalg.norm(f.hess(h + dl * f.length_scale * u) - f.hess(h),
                                                ord=2, axis=(-2, -1)))) for dl in deltas])
    return np.max(np.array(out), axis=0)
