"""Exponential Euler for ``dX = (AX + F(X)) dt + G(X-) dL`` and its Yosida ladder."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import Diffusion, Drift, verify_constants
from .errors import ConfigError, NonFiniteStateError, ParameterError
from .hilbert import GalerkinModel
from .rng import PathStreams, as_streams, iter_blocks, make_generator
from .sample_path import SamplePath
from .stable_noise.paths import INCREMENT_EXACT, JUMP_RESOLVED, MODES, NoisePath, sample_noise_path
from .stable_noise.sampling import check_alpha, sample_isotropic_increment

OVERFLOW_NORM = 1e12


@dataclass(frozen=True)
class Scheme:
    n_cells: int = 256
    noise_mode: str = INCREMENT_EXACT
    epsilon: float = 1e-3
    yosida_n: float | None = None
    series_budget: float = 1e4

    def __post_init__(self):
        if int(self.n_cells) < 1:
            raise ConfigError(["scheme.n_cells: must be >= 1"])
        if self.noise_mode not in MODES:
            raise ConfigError([f"scheme.noise_mode: must be one of {MODES}"])
        if self.noise_mode == JUMP_RESOLVED and not self.epsilon > 0:
            raise ConfigError(["scheme.epsilon: must be > 0 in jump_resolved mode"])
        if self.yosida_n is not None and not self.yosida_n > 0:
            raise ConfigError(["scheme.yosida_n: must be > 0"])


@dataclass(frozen=True)
class InitialLaw:
    """Law of ``X(0)``.

    ``kind`` is ``"deterministic"`` (the vector ``mean``), ``"gaussian"``
    (``mean + scale Z``) or ``"stable"`` (``mean + scale`` times an isotropic
    stable vector of index ``alpha``, which has finite moments of order < alpha).
    """

    mean: np.ndarray
    kind: str = "deterministic"
    scale: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float))
        if self.kind not in ("deterministic", "gaussian", "stable"):
            raise ConfigError([f"x0.kind: unknown '{self.kind}'"])
        if self.kind == "stable" and self.alpha is None:
            raise ConfigError(["x0.alpha: required for stable initial laws"])

    @property
    def is_deterministic(self) -> bool:
        return self.kind == "deterministic" or self.scale == 0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        base = np.broadcast_to(self.mean, (n, self.mean.size)).copy()
        if self.is_deterministic:
            return base
        if self.kind == "gaussian":
            return base + self.scale * rng.standard_normal(base.shape)
        return base + self.scale * sample_isotropic_increment(self.alpha, 1.0, self.mean.size,
                                                              rng, size=n)

    def moment(self, p: float, rng: np.random.Generator | None = None, n: int = 200_000) -> float:
        """``E ||x0||^p`` (exact when deterministic, Monte Carlo otherwise)."""
        if self.is_deterministic:
            return float(np.linalg.norm(self.mean) ** p)
        rng = rng or make_generator(0, "x0-moment")
        return float(np.mean(np.linalg.norm(self.sample(rng, n), axis=-1) ** p))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mean.tolist(), "scale": self.scale,
                "alpha": self.alpha}


@dataclass(frozen=True)
class Scenario:
    alpha: float
    T: float
    model: GalerkinModel
    F: Drift
    G: Diffusion
    x0: InitialLaw
    scheme: Scheme = field(default_factory=Scheme)
    p_report: tuple = (0.5, 1.0)
    name: str = "scenario"

    def __post_init__(self):
        errors = []
        try:
            check_alpha(self.alpha)
        except ParameterError as exc:
            errors.append(f"alpha: {exc.requirement}")
        if not self.T > 0:
            errors.append("T: must be > 0")
        d = self.model.dim
        if self.G.dim != d:
            errors.append(f"G: output dimension {self.G.dim} != model dimension {d}")
        if self.x0.mean.shape != (d,):
            errors.append(f"x0: dimension {self.x0.mean.size} != model dimension {d}")
        bad_p = [p for p in self.p_report if not 0 < p < self.alpha]
        if bad_p:
            errors.append(f"p_report: values {bad_p} not in (0, alpha)")
        if self.x0.kind == "stable" and self.x0.alpha is not None and \
                any(p >= self.x0.alpha for p in self.p_report):
            errors.append("x0: p-moment budget exceeded by p_report")
        if errors:
            raise ConfigError(errors)
        object.__setattr__(self, "p_report", tuple(float(p) for p in self.p_report))

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def noise_dim(self) -> int:
        return self.G.noise_dim

    @property
    def dt(self) -> float:
        return self.T / self.scheme.n_cells

    @property
    def K_F(self) -> float:
        return self.F.K

    @property
    def K_G(self) -> float:
        return self.G.K

    def verify(self, rng: np.random.Generator | None = None) -> dict:
        rng = rng or make_generator(0, "verify", self.name)
        out = {"F": verify_constants(self.F, self.dim, rng),
               "G": verify_constants(self.G, self.dim, rng)}
        bad = [f"{k}: declared K={v['K']:.4g} but observed bound {v['bound']:.4g}, "
               f"Lipschitz ratio {v['lipschitz']:.4g}" for k, v in out.items() if not v["ok"]]
        if bad:
            raise ConfigError(bad)
        return out

    def replace(self, **kw) -> "Scenario":
        from dataclasses import replace
        return replace(self, **kw)

    def with_scheme(self, **kw) -> "Scenario":
        from dataclasses import replace
        return replace(self, scheme=replace(self.scheme, **kw))

    def sample_noise(self, rng, n_paths: int, n_cells: int | None = None, **kw) -> NoisePath:
        sc = self.scheme
        return sample_noise_path(
            self.alpha, self.T, self.noise_dim, n_cells or sc.n_cells,
            kw.pop("mode", sc.noise_mode), kw.pop("epsilon", sc.epsilon), rng=rng,
            n_paths=n_paths, series_budget=kw.pop("series_budget", sc.series_budget), **kw)

    def sample_x0(self, rng, n_paths: int) -> np.ndarray:
        if self.x0.is_deterministic:
            return np.broadcast_to(self.x0.mean, (n_paths, self.dim)).copy()
        out = np.empty((n_paths, self.dim))
        streams = as_streams(rng, n_paths)
        if isinstance(streams, PathStreams):
            streams = streams.child("x0")
        for start, stop, g in iter_blocks(streams, n_paths):
            out[start:stop] = self.x0.sample(g, stop - start)
        return out


def _jump_schedule(path: NoisePath):
    """Listed jumps grouped by cell and by within-cell rank.

    Returns ``order`` (jump indices sorted by cell then rank) and the cell /
    rank arrays in that order.
    """
    cells = path.jump_cells()
    key = path.jump_path * path.n_cells + cells
    first = np.searchsorted(key, key, side="left")
    rank = np.arange(key.size) - first
    order = np.lexsort((rank, cells))
    return order, cells[order], rank[order]


def mild_solve(s: Scenario, path: NoisePath, n: float | None = None,
               x0: np.ndarray | None = None, rng=None) -> SamplePath:
    """Exponential Euler: ``X_{k+1} = S(dt)(X_k + dt F(X_k) + G(X_k) dL_k)``.

    With ``n`` given, ``F``, ``G`` and ``x0`` are composed with ``R_n``.  In
    jump-resolved mode each listed jump is applied at its own time with the
    left limit as coefficient argument; the residual increment enters at the
    left grid point.

    Paths whose norm exceeds ``1e12`` are flagged in ``failed`` and frozen.
    """
    path.check_compatible(s.alpha, s.noise_dim, horizon=s.T)
    N, P, d = path.n_cells, path.n_paths, s.dim
    dt = path.dt
    times = path.times
    mu = s.model.mu
    R = s.model.resolvent_diag(np.inf if n is None else n)
    ident = n is None or np.isinf(n)
    E = np.exp(-mu * dt)
    if x0 is None:
        x0 = s.sample_x0(rng if rng is not None else 0, P)
    x = np.array(np.broadcast_to(x0, (P, d)), float)
    if not ident:
        x = R * x
    states = np.empty((P, N + 1, d))
    left = np.empty_like(states)
    states[:, 0] = x
    left[:, 0] = x
    failed = np.zeros(P, dtype=bool)
    row = None if ident else R
    G, F = s.G, s.F
    g_zero = G.is_zero

    if path.mode == INCREMENT_EXACT:
        inc = path.increments
        for k in range(N):
            y = x + dt * (F(x) if ident else R * F(x))
            if not g_zero:
                y += G.apply(x, inc[:, k], row)
            xn = E * y
            left[:, k + 1] = x
            x = _guard(xn, x, failed, k)
            states[:, k + 1] = x
        return SamplePath(times, states, left, path.seed_record, failed, yosida_n=R_label(n))

    order, cells, ranks = _jump_schedule(path)
    jt = path.jump_time[order]
    jpath = path.jump_path[order]
    jsize = path.jump_size[order]
    pre_rec = np.zeros((order.size, d))
    delta_rec = np.zeros((order.size, d))
    cell_start = np.searchsorted(cells, np.arange(N + 1))
    res = path.residual
    for k in range(N):
        tk, tk1 = times[k], times[k + 1]
        z = x.copy()
        tcur = np.full(P, tk)
        a, b = cell_start[k], cell_start[k + 1]
        listed = np.zeros((P, d))
        if b > a:
            rk = ranks[a:b]
            bounds = np.searchsorted(rk, np.arange(rk.max() + 2)) + a
            for j0, j1 in zip(bounds[:-1], bounds[1:]):
                idx = jpath[j0:j1]
                tau = jt[j0:j1]
                z[idx] *= np.exp(-mu * (tau - tcur[idx])[:, None])
                pre = z[idx]
                dlt = G.apply(pre, jsize[j0:j1], row) if not g_zero else np.zeros_like(pre)
                z[idx] += dlt
                tcur[idx] = tau
                pre_rec[j0:j1] = pre
                delta_rec[j0:j1] = dlt
                listed[idx] += np.exp(-mu * (tk1 - tau)[:, None]) * dlt
        drift = dt * (F(x) if ident else R * F(x))
        tail = drift if g_zero else drift + G.apply(x, res[:, k], row)
        xn = np.exp(-mu * (tk1 - tcur)[:, None]) * z + E * tail
        x = _guard(xn, x, failed, k)
        states[:, k + 1] = x
        left[:, k + 1] = x - np.where(failed[:, None], 0.0, listed)
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    return SamplePath(times, states, left, path.seed_record, failed,
                      jump_pre=pre_rec[inv], jump_delta=delta_rec[inv], yosida_n=R_label(n))


def R_label(n):
    return np.inf if n is None else float(n)


def _guard(xn, x, failed, k):
    nrm = np.linalg.norm(xn, axis=-1)
    bad = ~np.isfinite(nrm)
    newly = (nrm > OVERFLOW_NORM) & ~failed
    if np.any(bad & ~failed & ~newly):
        i = int(np.flatnonzero(bad & ~failed)[0])
        # infinite norms come from overflow, NaNs from invalid arithmetic
        if np.isnan(nrm[i]):
            raise NonFiniteStateError(k, i)
    failed |= newly | bad
    if np.any(failed):
        xn = np.where(failed[:, None], x, xn)
    return xn


def yosida_solve(s: Scenario, n: float, path: NoisePath, x0=None, rng=None) -> SamplePath:
    """Solution of the equation with ``R_n F``, ``R_n G`` and ``R_n x0``."""
    if not n > 0:
        raise ParameterError("n", n, "n > 0")
    return mild_solve(s, path, n=n, x0=x0, rng=rng)


# -- studies ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    n_list: tuple
    p: float
    times: np.ndarray
    gap_profiles: dict   # (n, m) -> per-time mean of ||X_n - X_m||^p
    uniform_gaps: dict   # n -> per-path sup_t ||X_n - X_max||
    n_paths: int
    n_failed: int

    @property
    def D(self) -> dict:
        return {k: float(v.max()) for k, v in self.gap_profiles.items()}

    @property
    def uniform_gap_medians(self) -> dict:
        return {n: float(np.median(v)) for n, v in self.uniform_gaps.items()}

    def rows(self) -> list[dict]:
        out = []
        for (n, m), v in self.D.items():
            out.append({"quantity": f"D({n:g},{m:g})", "estimate": v, "ci_lo": float("nan"),
                        "ci_hi": float("nan"), "bound": float("nan"), "pass": True})
        for n, v in self.uniform_gap_medians.items():
            out.append({"quantity": f"median sup_t gap n={n:g}", "estimate": v,
                        "ci_lo": float("nan"), "ci_hi": float("nan"), "bound": float("nan"),
                        "pass": True})
        return out


def convergence_study(s: Scenario, n_list, n_paths: int, p: float = 1.0, rng=None,
                      block: int = 256) -> ConvergenceReport:
    """Cauchy profile ``D(n, m) = sup_t E||X_n(t) - X_m(t)||^p`` under coupled noise.

    Pairs are consecutive entries of ``n_list``; uniform gaps are measured
    against the last entry.
    """
    if not 0 < p < s.alpha:
        raise ParameterError("p", p, f"0 < p < alpha={s.alpha}")
    n_list = tuple(float(n) for n in n_list)
    streams = as_streams(rng if rng is not None else 0, n_paths)
    pairs = list(zip(n_list[:-1], n_list[1:]))
    prof = {pr: np.zeros(s.scheme.n_cells + 1) for pr in pairs}
    unif = {n: [] for n in n_list[:-1]}
    n_failed = 0
    for start in range(0, n_paths, block):
        stop = min(start + block, n_paths)
        sub = _sub_streams(streams, start, stop)
        noise = s.sample_noise(sub, stop - start)
        x0 = s.sample_x0(sub, stop - start)
        sols = {n: yosida_solve(s, n, noise, x0=x0) for n in n_list}
        ok = np.ones(stop - start, dtype=bool)
        for sol in sols.values():
            ok &= sol.ok
        n_failed += int((~ok).sum())
        for pr in pairs:
            diff = np.linalg.norm(sols[pr[0]].states - sols[pr[1]].states, axis=-1) ** p
            prof[pr] += np.where(ok[:, None], diff, 0.0).sum(axis=0)
        last = sols[n_list[-1]].states
        for n in n_list[:-1]:
            gap = np.max(np.linalg.norm(sols[n].states - last, axis=-1), axis=1)
            unif[n].append(gap[ok])
    n_ok = n_paths - n_failed
    prof = {k: v / max(n_ok, 1) for k, v in prof.items()}
    unif = {k: np.concatenate(v) for k, v in unif.items()}
    return ConvergenceReport(n_list, p, np.linspace(0, s.T, s.scheme.n_cells + 1), prof, unif,
                             n_paths, n_failed)


def _sub_streams(streams, start, stop):
    if isinstance(streams, PathStreams):
        return streams.subrange(start, stop)
    return streams


def refinement_study(s: Scenario, levels, n_paths: int, p: float = 1.0, rng=None,
                     n: float | None = None) -> dict:
    """``sup_t E||X^(N)(t) - X^(2N)(t)||^p`` on common grid points, noise coupled by aggregation."""
    levels = sorted(int(v) for v in levels)
    fine = s.sample_noise(rng if rng is not None else 0, n_paths, n_cells=levels[-1])
    x0 = s.sample_x0(rng if rng is not None else 0, n_paths)
    sols = {N: mild_solve(s, fine.coarsen(levels[-1] // N), n=n, x0=x0) for N in levels}
    out = {}
    for a, b in zip(levels[:-1], levels[1:]):
        xa = sols[a].states
        xb = sols[b].states[:, :: b // a]
        out[(a, b)] = float(np.max(np.mean(np.linalg.norm(xa - xb, axis=-1) ** p, axis=0)))
    return out
