"""Stochastic integrals against the projected stable noise, with moment and Fubini checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError, ParameterError
from .sample_path import SamplePath
from .stable_noise.constants import Provenance, StableConstants
from .stable_noise.paths import INCREMENT_EXACT, NoisePath, sample_noise_path
from .stats import Estimate, moment_estimate


@dataclass(frozen=True)
class SimpleIntegrand:
    """Piecewise-constant operator process: ``pieces[i]`` acts on ``(t_{i-1}, t_i]``.

    ``pieces`` has shape ``(n_pieces, dim_out, dim_in)`` for a deterministic
    integrand or ``(n_paths, n_pieces, dim_out, dim_in)`` for a random one
    whose piece ``i`` is known at ``t_{i-1}``.
    """

    breakpoints: np.ndarray
    pieces: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, float)
        pc = np.asarray(self.pieces, float)
        if bp[0] != 0 or np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints", bp.tolist(), "0 = t_0 < t_1 < ... < t_N")
        if pc.shape[-3] != bp.size - 1:
            raise ParameterError("pieces", pc.shape, f"{bp.size - 1} pieces")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", pc)

    @property
    def measurability_tag(self) -> np.ndarray:
        """Piece ``i`` is determined by information up to ``breakpoints[i]``."""
        return np.arange(self.breakpoints.size - 1)

    @classmethod
    def constant(cls, phi, T: float) -> "SimpleIntegrand":
        phi = np.atleast_2d(np.asarray(phi, float))
        return cls(np.array([0.0, T]), phi[None])


@dataclass(frozen=True)
class IntegrandProcess:
    """Operator-valued integrand ``G``.

    ``evaluator(t)`` returns a ``(dim_out, dim_in)`` matrix for deterministic
    integrands; with ``state_dependent`` it is called as ``evaluator(h, t)``
    with ``h`` of shape ``(n_paths, dim)`` and returns ``(n_paths, dim_out, dim_in)``.
    """

    evaluator: object
    dim_out: int
    dim_in: int
    state_dependent: bool = False
    alpha_norm_budget: float = np.inf
    label: str = ""

    @classmethod
    def deterministic(cls, fn, dim_out, dim_in, label="") -> "IntegrandProcess":
        return cls(fn, dim_out, dim_in, False, np.inf, label)

    @classmethod
    def from_diffusion(cls, G, T: float, alpha: float) -> "IntegrandProcess":
        return cls(lambda h, t: G.matrix(h), G.dim, G.noise_dim, True, T * G.K**alpha, G.name)

    def at(self, t, h=None):
        if self.state_dependent:
            return self.evaluator(h, t)
        return np.asarray(self.evaluator(t), float)

    def alpha_norm_integral(self, times, alpha, states=None) -> np.ndarray | float:
        """Left-point Riemann sum of ``||G(t)||_HS^alpha``."""
        dt = np.diff(times)
        if not self.state_dependent:
            vals = np.array([np.sum(self.at(t) ** 2) ** (alpha / 2) for t in times[:-1]])
            return float(np.sum(vals * dt))
        out = np.zeros(states.shape[0])
        for k, t in enumerate(times[:-1]):
            m = self.at(t, states[:, k])
            out += dt[k] * np.sum(m**2, axis=(-2, -1)) ** (alpha / 2)
        return out


def _path_from_increments(times, inc, seed_record, listed=None) -> SamplePath:
    states = np.zeros((inc.shape[0], inc.shape[1] + 1, inc.shape[2]))
    np.cumsum(inc, axis=1, out=states[:, 1:])
    left = states.copy()
    if listed is None:
        left[:, 1:] -= inc
        return SamplePath(times, states, left, seed_record)
    per_cell, delta = listed
    left[:, 1:] -= per_cell
    return SamplePath(times, states, left, seed_record, jump_delta=delta)


def _listed_per_cell(path: NoisePath, weights_fn):
    """Images of the listed jumps and their per-cell sums."""
    cells = path.jump_cells()
    contrib = weights_fn(cells)
    out = np.zeros((path.n_paths * path.n_cells, contrib.shape[1]))
    flat = path.jump_path * path.n_cells + cells
    for j in range(contrib.shape[1]):
        out[:, j] = np.bincount(flat, weights=contrib[:, j], minlength=out.shape[0])
    return out.reshape(path.n_paths, path.n_cells, -1), contrib


def integrate_simple(g: SimpleIntegrand, path: NoisePath) -> SamplePath:
    """``t -> sum_i Phi_i (L(t_i ^ t) - L(t_{i-1} ^ t))`` on the noise grid."""
    times = path.times
    idx = np.searchsorted(times, g.breakpoints)
    if (idx.size != g.breakpoints.size or np.any(idx >= times.size)
            or not np.allclose(times[np.minimum(idx, times.size - 1)], g.breakpoints)
            or not np.isclose(g.breakpoints[-1], path.horizon)):
        raise GridError("integrand breakpoints must lie on the noise grid and end at the horizon")
    # piece index of every grid cell
    piece = np.searchsorted(idx, np.arange(path.n_cells), side="right") - 1
    pcs = g.pieces
    if pcs.shape[-1] != path.dim:
        raise GridError(f"integrand input dimension {pcs.shape[-1]} != noise dimension {path.dim}")
    inc = path.cell_increments()
    if pcs.ndim == 3:
        out_inc = np.einsum("kij,pkj->pki", pcs[piece], inc)
    else:
        out_inc = np.einsum("pkij,pkj->pki", pcs[:, piece], inc)
    listed = None
    if path.mode != INCREMENT_EXACT:
        def weights(cells):
            mats = pcs[piece[cells]] if pcs.ndim == 3 else pcs[path.jump_path, piece[cells]]
            return np.einsum("mij,mj->mi", mats, path.jump_size)
        listed = _listed_per_cell(path, weights)
    return _path_from_increments(times, out_inc, path.seed_record, listed)


def integrate_euler(g: IntegrandProcess, driver_state: SamplePath | None, path: NoisePath,
                    evaluation: str = "left") -> SamplePath:
    """Left-point sums ``I_k = sum_{j<k} G(X(t_j), t_j) Delta L_{j+1}``."""
    if evaluation != "left":
        raise ParameterError("evaluation", evaluation,
                             "left-point evaluation only (keeps the integrand predictable)")
    times = path.times
    inc = path.cell_increments()
    if g.state_dependent:
        if driver_state is None:
            raise ParameterError("driver_state", None, "required for state-dependent integrands")
        if driver_state.states.shape[:2] != (path.n_paths, path.n_cells + 1):
            raise GridError("driver path and noise path must share paths and grid")
        mats = np.stack([g.at(t, driver_state.states[:, k]) for k, t in enumerate(times[:-1])],
                        axis=1)
        out_inc = np.einsum("pkij,pkj->pki", mats, inc)
    else:
        mats = np.stack([g.at(t) for t in times[:-1]])
        out_inc = np.einsum("kij,pkj->pki", mats, inc)
    listed = None
    if path.mode != INCREMENT_EXACT:
        def weights(cells):
            m = mats[cells] if mats.ndim == 3 else mats[path.jump_path, cells]
            return np.einsum("mij,mj->mi", m, path.jump_size)
        listed = _listed_per_cell(path, weights)
    return _path_from_increments(times, out_inc, path.seed_record, listed)


# -- moment inequality ---------------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    p: float
    lhs: Estimate
    rhs_base: float
    e_p: float | None
    bound: float | None
    label: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.bound is None or self.lhs.ci_lo <= self.bound)

    def rows(self) -> list[dict]:
        return [{"quantity": f"E sup|I|^p (p={self.p:g}){' ' + self.label if self.label else ''}",
                 "estimate": self.lhs.value, "ci_lo": self.lhs.ci_lo, "ci_hi": self.lhs.ci_hi,
                 "bound": self.bound if self.bound is not None else float("nan"),
                 "pass": bool(self.passed)}]


def sup_moment_samples(g: IntegrandProcess, p: float, n_paths: int, alpha: float, T: float,
                       n_cells: int, rng, driver=None) -> tuple[np.ndarray, float | np.ndarray]:
    """Per-path ``sup_k |I_k|^p`` and ``int ||G||^alpha dt`` under fresh exact-increment noise."""
    path = sample_noise_path(alpha, T, g.dim_in, n_cells, INCREMENT_EXACT, rng=rng,
                             n_paths=n_paths)
    drv = driver(path) if driver is not None else None
    integral = integrate_euler(g, drv, path)
    sup = np.max(np.linalg.norm(integral.states, axis=-1), axis=1) ** p
    norm_int = g.alpha_norm_integral(path.times, alpha, None if drv is None else drv.states)
    return sup, norm_int


def moment_bound_check(g: IntegrandProcess, p: float, n_paths: int, constants: StableConstants,
                       T: float = 1.0, n_cells: int = 64, rng=None, samples=None,
                       label: str = "") -> MomentReport:
    """Monte Carlo check of ``E sup_t |int_0^t G dL|^p <= e_p (E int ||G||^alpha)^{p/alpha}``.

    ``samples`` may pass precomputed ``(sup_norms, alpha_norm_integrals)`` where
    ``sup_norms`` are per-path ``sup_k |I_k|`` (unpowered).
    """
    alpha = constants.alpha
    if not 0 < p < alpha:
        raise ParameterError("p", p, f"0 < p < alpha={alpha} (higher moments are infinite)")
    if samples is None:
        sup, norm_int = sup_moment_samples(g, 1.0, n_paths, alpha, T, n_cells, rng)
    else:
        sup, norm_int = samples
    lhs = moment_estimate(np.asarray(sup) ** p, p, alpha)
    base = float(np.mean(norm_int)) if np.ndim(norm_int) else float(norm_int)
    rhs_base = alpha / (alpha - p) * base ** (p / alpha)
    if constants.e2_alpha is None:
        return MomentReport(p, lhs, rhs_base, None, None, label)
    e_p = constants.e_p_alpha(p)
    return MomentReport(p, lhs, rhs_base, e_p, e_p * base ** (p / alpha), label)


def calibrate_e2(reports: list[MomentReport], alpha: float, inflation: float = 1.25) -> Provenance:
    """``e_2 := inflation * max_i (LHS_i / RHS_i without constant)^{alpha/p}``."""
    ratios = []
    for r in reports:
        if r.rhs_base > 0:
            ratios.append((r.lhs.value / r.rhs_base) ** (alpha / r.p))
    value = inflation * max(ratios)
    p_set = ",".join(f"{v:g}" for v in sorted({r.p for r in reports}))
    return Provenance(value, f"max training ratio over p in {{{p_set}}}, inflated x{inflation}",
                      sample_size=int(sum(r.lhs.n for r in reports)),
                      notes=f"{len(reports)} integrand-p pairs; raw max {max(ratios):.6g}")


def random_deterministic_integrand(rng: np.random.Generator, dim: int = 8,
                                   T: float = 1.0, label: str = "") -> IntegrandProcess:
    """Smooth random ``G(t) = (M_0 + sin(w t) M_1) D`` with decaying column scales ``D``."""
    m0 = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    m1 = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    cols = np.arange(1, dim + 1) ** -rng.uniform(0.5, 2.0)
    w = rng.uniform(0.5, 6.0) / T
    scale = rng.uniform(0.2, 2.0)

    def fn(t, m0=m0, m1=m1, cols=cols, w=w, scale=scale):
        return scale * (m0 + np.sin(w * t) * m1) * cols

    return IntegrandProcess.deterministic(fn, dim, dim, label)


# -- stochastic Fubini ---------------------------------------------------------------------

@dataclass(frozen=True)
class FubiniReport:
    n_cells: int
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def discrepancy(self) -> np.ndarray:
        return np.linalg.norm(self.lhs - self.rhs, axis=-1)


@dataclass(frozen=True)
class Kernel:
    """Operator kernel ``K(t, s)`` on ``[0, T]^2``.

    ``fn(t, s)`` broadcasts over array arguments and returns ``(..., dim_out, dim_in)``.
    ``dt_integral(s)``, when given, returns ``int_0^T K(t, s) dt`` exactly.
    """

    fn: object
    dim_out: int
    dim_in: int
    dt_integral: object = None

    @classmethod
    def semigroup(cls, mu, phi, T: float | None = None) -> "Kernel":
        """``1_{s <= t} S(t - s) Phi`` for a diagonal semigroup with rates ``mu``.

        With ``T`` given the time integral is the exact ``(1 - e^{-mu (T - s)}) / mu``.
        """
        mu = np.asarray(mu, float)
        if np.any(mu < 0):
            raise ParameterError("mu", mu.min(), "decay rates >= 0 (pass -eigenvalues of A)")
        phi = np.atleast_2d(np.asarray(phi, float))

        def fn(t, s):
            t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
            lag = t - s
            diag = np.where(lag[..., None] >= 0, np.exp(-np.maximum(lag, 0)[..., None] * mu), 0.0)
            return diag[..., :, None] * phi

        exact = None if T is None else _semigroup_dt_integral(mu, phi, T)
        return cls(fn, phi.shape[0], phi.shape[1], exact)

    @classmethod
    def separable(cls, a, b, phi) -> "Kernel":
        phi = np.atleast_2d(np.asarray(phi, float))

        def fn(t, s):
            t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
            return (a(t) * b(s))[..., None, None] * phi

        return cls(fn, phi.shape[0], phi.shape[1], None)

    def integrate_dt(self, s, T: float, n_nodes: int = 2048) -> np.ndarray:
        s = np.asarray(s, float)
        if self.dt_integral is not None:
            return np.asarray(self.dt_integral(s), float)
        # composite midpoint on a fine grid; exact for kernels with a jump only at t = s
        # once the jump location is a node boundary
        edges = np.linspace(0.0, T, n_nodes + 1)
        out = np.zeros(s.shape + (self.dim_out, self.dim_in))
        for i, si in np.ndenumerate(s):
            e = np.unique(np.concatenate([edges, [si]]))
            mids = 0.5 * (e[1:] + e[:-1])
            out[i] = np.tensordot(np.diff(e), self.fn(mids, si), axes=(0, 0))
        return out


def _semigroup_dt_integral(mu, phi, T):
    def f(s):
        s = np.asarray(s, float)
        diag = -np.expm1(-mu * (T - s)[..., None]) / mu
        return diag[..., :, None] * phi
    return f


def fubini_check(kernel: Kernel, path: NoisePath) -> FubiniReport:
    """Both iterated integrals on the noise grid.

    ``lhs = sum_j (int_0^T K(t, s_j) dt) Delta L_j`` (time integral first) and
    ``rhs = sum_i dt sum_j K(t_i^mid, s_j) Delta L_j`` (stochastic integral
    first, midpoint rule in ``t``).  Both use left points ``s_j``.
    """
    T = path.horizon
    s = path.times[:-1]
    inc = path.cell_increments()
    a = kernel.integrate_dt(s, T)
    lhs = np.einsum("kij,pkj->pi", a, inc)
    mids = 0.5 * (path.times[1:] + path.times[:-1])
    rhs = np.zeros_like(lhs)
    for ti in mids:
        rhs += path.dt * np.einsum("kij,pkj->pi", kernel.fn(ti, s), inc)
    return FubiniReport(path.n_cells, lhs, rhs)


def fubini_refinement_study(kernel: Kernel, fine: NoisePath, levels) -> dict:
    """Discrepancies on coarsened copies of ``fine`` for each cell count in ``levels``."""
    out = {}
    for n in levels:
        rep = fubini_check(kernel, fine.coarsen(fine.n_cells // n))
        out[n] = rep.discrepancy
    return out
