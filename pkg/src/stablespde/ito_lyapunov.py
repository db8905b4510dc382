"""Generators, term-by-term Ito decompositions and the Lyapunov moment certificate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.stats import qmc

from .errors import DriftConditionError, HypothesisError, ModeError, ParameterError
from .rng import as_streams
from .sample_path import SamplePath
from .spde_solver import Scenario, _sub_streams, mild_solve, yosida_solve
from .stable_noise.constants import StableConstants
from .stable_noise.paths import INCREMENT_EXACT, NoisePath
from .stats import mean_ci, moment_estimate, zero_mean_test
from .testfunctions import ImageGeometry, PowerMixture, TestFunction

EVAL_CHUNK = 2048


def _row(s: Scenario, n):
    return None if n is None or np.isinf(n) else s.model.resolvent_diag(n)


def generator_terms(f: TestFunction, h, s: Scenario, n=None) -> tuple[np.ndarray, np.ndarray]:
    """``(<Df(h), Ah + R_n F(h)>, jump integral against lambda o (R_n G(h))^{-1})``."""
    h = np.atleast_2d(np.asarray(h, float))
    row = _row(s, n)
    drift = np.empty(h.shape[0])
    jump = np.empty(h.shape[0])
    for a in range(0, h.shape[0], EVAL_CHUNK):
        hb = h[a:a + EVAL_CHUNK]
        Fh = s.F(hb)
        if row is not None:
            Fh = row * Fh
        drift[a:a + EVAL_CHUNK] = np.sum(f.grad(hb) * (-s.model.mu * hb + Fh), axis=-1)
        if s.G.is_zero:
            jump[a:a + EVAL_CHUNK] = 0.0
        else:
            geom = ImageGeometry.from_operator(s.G, hb, row)
            jump[a:a + EVAL_CHUNK] = f.levy_integral(hb, geom, s.alpha)
    return drift, jump


def generator_eval(f: TestFunction, h, s: Scenario) -> np.ndarray:
    """``Lf(h) = <Df(h), Ah + F(h)> + int (f(h+g) - f(h) - <Df(h), g>) (lambda o G(h)^{-1})(dg)``."""
    d, j = generator_terms(f, h, s)
    return d + j


def yosida_generator_eval(f: TestFunction, h, s: Scenario, n: float) -> np.ndarray:
    """``L_n f(h)``: as :func:`generator_eval` with ``F <- R_n F`` and ``G <- R_n G``."""
    if not n > 0:
        raise ParameterError("n", n, "n > 0")
    d, j = generator_terms(f, h, s, n)
    return d + j


def jump_term_bound(f: TestFunction, hs_norm, alpha: float,
                    constants: StableConstants | None = None) -> np.ndarray:
    """``d_alpha^1 (2|Df| + |D^2 f|/2) ||G||_HS^alpha``."""
    c = constants or StableConstants.for_alpha(alpha)
    return c.d_alpha(1.0) * (2 * f.grad_bound + 0.5 * f.hess_bound) * np.asarray(hs_norm) ** alpha


# -- Ito decompositions ---------------------------------------------------------------------

@dataclass(frozen=True)
class TermReport:
    """Cumulative Ito terms on the grid; ``terms[name][i, k]`` is the sum over cells ``< k``."""

    times: np.ndarray
    terms: dict
    probe_index: np.ndarray
    tests: dict
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(t["pass"] for v in self.tests.values() for t in v)

    def rows(self) -> list[dict]:
        out = []
        for name, arr in self.terms.items():
            for k in self.probe_index:
                est = mean_ci(arr[:, k])
                tst = None
                if name in self.tests:
                    tst = self.tests[name][list(self.probe_index).index(k)]
                out.append({"term": name, "t": float(self.times[k]), "mean": est.value,
                            "se": est.se, "ci_lo": est.ci_lo, "ci_hi": est.ci_hi,
                            "tested": tst is not None,
                            "pass": True if tst is None else tst["pass"]})
        return out


def _probe_index(times, n_probe=5):
    T = times[-1]
    return np.searchsorted(times, T * np.arange(1, n_probe + 1) / n_probe - 1e-12)


def _cell_terms(f: TestFunction, s: Scenario, x: SamplePath, path: NoisePath, n):
    """Per-cell pieces of the exponential-Euler step ``X_{k+1} = S(dt)(X_k + dt F_n + G_n dL_k)``.

    Returns per-cell arrays of shape (P, N): flow ``f(X_{k+1}) - f(Y_k)``,
    drift ``dt <Df, F_n>``, noise ``<Df, G_n dL_k>``, compensator ``dt J_n``
    and the jump remainder ``f(Y_k) - f(X_k) - drift - noise - compensator``.
    """
    if path.mode != INCREMENT_EXACT:
        raise ModeError("increment_exact mode required for the Ito decomposition")
    row = _row(s, n)
    P, N = x.n_paths, x.n_cells
    dt = x.dt
    out = {k: np.empty((P, N)) for k in ("flow", "drift", "noise", "compensator", "remainder")}
    for k in range(N):
        xk = x.states[:, k]
        Fk = s.F(xk)
        if row is not None:
            Fk = row * Fk
        gdl = np.zeros_like(xk) if s.G.is_zero else s.G.apply(xk, path.increments[:, k], row)
        y = xk + dt * Fk + gdl
        fx = f.value(xk)
        fy = f.value(y)
        Df = f.grad(xk)
        _, jump = generator_terms(f, xk, s, n) if not s.G.is_zero else (None, np.zeros(P))
        out["flow"][:, k] = f.value(x.states[:, k + 1]) - fy
        out["drift"][:, k] = dt * np.sum(Df * Fk, axis=-1)
        out["noise"][:, k] = np.sum(Df * gdl, axis=-1)
        out["compensator"][:, k] = dt * jump
        out["remainder"][:, k] = fy - fx - out["drift"][:, k] - out["noise"][:, k] - dt * jump
    return out


def _cumulative(cells: np.ndarray) -> np.ndarray:
    P, N = cells.shape
    out = np.zeros((P, N + 1))
    np.cumsum(cells, axis=1, out=out[:, 1:])
    return out


def _require_bounds(f: TestFunction):
    if not (np.isfinite(f.grad_bound) and np.isfinite(f.hess_bound)):
        raise ParameterError("f", f.label, "declared finite |Df| and |D^2 f| bounds")


def ito_decompose_strong(x: SamplePath, path: NoisePath, f: TestFunction, s: Scenario,
                         n_probe: int = 5, n_se: float = 3.0) -> TermReport:
    """Terms of the strong Ito formula along a Yosida path.

    ``drift_pairing`` is ``int <Df(X), A X + R_n F(X)> ds`` with the ``A``
    part taken exactly along each semigroup flow; ``M_f`` is the residual
    ``f(X(t)) - f(X(0))`` minus every explicit term.  Its probe values
    are tested for zero mean.
    """
    _require_bounds(f)
    n = x.yosida_n
    c = _cell_terms(f, s, x, path, n)
    ok = x.ok
    terms = {
        "drift_pairing": _cumulative(c["flow"] + c["drift"]),
        "noise_integral": _cumulative(c["noise"]),
        "compensator_integral": _cumulative(c["compensator"]),
    }
    fX = np.stack([f.value(x.states[:, k]) for k in range(x.n_cells + 1)], axis=1)
    explicit = sum(terms.values())
    terms["M_f"] = fX - fX[:, :1] - explicit
    terms = {k: v[ok] for k, v in terms.items()}
    idx = _probe_index(x.times, n_probe)
    tests = {"M_f": [zero_mean_test(terms["M_f"][:, k], n_se) for k in idx]}
    return TermReport(x.times, terms, idx, tests, {"n_failed": x.n_failed, "yosida_n": n})


@dataclass(frozen=True)
class MildReport(TermReport):
    ladder: tuple = ()
    cauchy_gaps: dict = field(default_factory=dict)

    @property
    def gaps_decreasing(self) -> bool:
        g = [self.cauchy_gaps[k] for k in sorted(self.cauchy_gaps)]
        return all(b < a for a, b in zip(g[:-1], g[1:]))


def ladder_term(f: TestFunction, s: Scenario, xn: SamplePath, path: NoisePath) -> np.ndarray:
    """``int_0^t <Df(X_n), A X_n> ds`` on the grid, exact along each semigroup flow."""
    c = _cell_terms_flow(f, s, xn, path)
    return _cumulative(c)


def _cell_terms_flow(f, s, x, path):
    row = _row(s, x.yosida_n)
    dt = x.dt
    out = np.empty((x.n_paths, x.n_cells))
    for k in range(x.n_cells):
        xk = x.states[:, k]
        Fk = s.F(xk)
        if row is not None:
            Fk = row * Fk
        y = xk + dt * Fk
        if not s.G.is_zero:
            y = y + s.G.apply(xk, path.increments[:, k], row)
        out[:, k] = f.value(x.states[:, k + 1]) - f.value(y)
    return out


def ito_decompose_mild(x: SamplePath, ladder: dict, f: TestFunction, s: Scenario,
                       path: NoisePath, n_probe: int = 5, n_se: float = 3.0,
                       rng=None, extrapolate: bool = True) -> MildReport:
    """Terms of the mild Ito formula with the ``A``-term taken from a coupled Yosida ladder.

    ``ladder`` maps ``n`` to Yosida paths driven by ``path``.  The limit term
    is the top rung, Richardson-extrapolated from the top two rungs under the
    ``O(1/n)`` rate of ``R_n -> I`` when ``extrapolate``; ``cauchy_gaps[n]``
    is ``sup_t E|T_n(t) - T_m(t)|`` for consecutive ladder entries ``n < m``.
    """
    if not f.uniform:
        raise HypothesisError(f"{f.label}: D^2 f is not declared uniformly continuous")
    _require_bounds(f)
    if rng is not None:
        from .testfunctions import hessian_modulus
        mod = hessian_modulus(f, np.random.default_rng(rng) if isinstance(rng, int) else rng)
        if not mod[-1] < mod[0]:
            raise HypothesisError(f"{f.label}: Hessian modulus probe does not decrease: {mod}")
    c = _cell_terms(f, s, x, path, None)
    ns = sorted(ladder)
    T = {n: ladder_term(f, s, ladder[n], path) for n in ns}
    ok = x.ok.copy()
    for n in ns:
        ok &= ladder[n].ok
    fX = np.stack([f.value(x.states[:, k]) for k in range(x.n_cells + 1)], axis=1)
    terms = {
        "noise_integral": _cumulative(c["noise"]),
        "compensated_measure": _cumulative(c["remainder"]),
        "ladder_limit": _ladder_limit(T, ns, extrapolate),
        "drift_pairing": _cumulative(c["drift"]),
        "compensator_integral": _cumulative(c["compensator"]),
    }
    explicit = sum(terms.values())
    terms["closure_residual"] = fX - fX[:, :1] - explicit
    terms["mild_flow"] = _cumulative(c["flow"])
    terms = {k: v[ok] for k, v in terms.items()}
    gaps = {}
    for a, b in zip(ns[:-1], ns[1:]):
        gaps[a] = float(np.max(np.mean(np.abs(T[a][ok] - T[b][ok]), axis=0)))
    idx = _probe_index(x.times, n_probe)
    tests = {name: [zero_mean_test(terms[name][:, k], n_se) for k in idx]
             for name in ("closure_residual", "compensated_measure")}
    return MildReport(x.times, terms, idx, tests, {"n_failed": int((~ok).sum())},
                      tuple(ns), gaps)


def _ladder_limit(T: dict, ns: list, extrapolate: bool) -> np.ndarray:
    top = T[ns[-1]]
    if not extrapolate or len(ns) < 2:
        return top
    ratio = ns[-1] / ns[-2]
    return top + (top - T[ns[-2]]) / (ratio - 1.0)


# -- generator convergence -----------------------------------------------------------------

def generator_gap_study(V: TestFunction, s: Scenario, n_list, n_paths: int, rng=None,
                        stride: int = 8, block: int = 256) -> dict:
    """``E int_0^T |L_n V(X_n) - L V(X_n)| ds`` per ``n`` under coupled noise.

    The time integral uses every ``stride``-th grid point (left Riemann sum).
    Returns ``n -> Estimate``.
    """
    streams = as_streams(rng if rng is not None else 0, n_paths)
    vals = {float(n): [] for n in n_list}
    for start in range(0, n_paths, block):
        stop = min(start + block, n_paths)
        sub = _sub_streams(streams, start, stop)
        noise = s.sample_noise(sub, stop - start)
        x0 = s.sample_x0(sub, stop - start)
        for n in vals:
            xn = yosida_solve(s, n, noise, x0=x0)
            ks = np.arange(0, xn.n_cells, stride)
            pts = xn.states[:, ks].reshape(-1, s.dim)
            dn, jn = generator_terms(V, pts, s, n)
            d0, j0 = generator_terms(V, pts, s, None)
            gap = np.abs(dn + jn - d0 - j0).reshape(stop - start, ks.size)
            integral = gap.sum(axis=1) * stride * xn.dt
            vals[n].append(integral[xn.ok])
    return {n: mean_ci(np.concatenate(v)) for n, v in vals.items()}


# -- Lyapunov certificate ------------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovSpec:
    V: TestFunction
    beta1: float
    beta2: float
    beta3: float
    k1: float
    k3: float
    p: float

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "k1", "k3"):
            if not getattr(self, name) > 0:
                raise ParameterError(name, getattr(self, name), "> 0")
        if not 0 < self.p < 1:
            raise ParameterError("p", self.p, "0 < p < 1")

    def verify_bounds(self, rng: np.random.Generator, n: int = 4000,
                      scales=(0.01, 0.1, 1.0, 10.0, 1e3)) -> dict:
        """``beta1 |h|^p - k1 <= V(h) <= beta2 |h|^p`` on random batteries."""
        worst_lo = worst_hi = -np.inf
        for sc in scales:
            h = sc * rng.standard_normal((n, self.V.dim))
            r = np.linalg.norm(h, axis=-1) ** self.p
            v = self.V.value(h)
            worst_lo = max(worst_lo, float(np.max(self.beta1 * r - self.k1 - v)))
            worst_hi = max(worst_hi, float(np.max(v - self.beta2 * r)))
        ok = worst_lo <= 1e-12 and worst_hi <= 1e-12
        if not ok:
            raise ParameterError("V", self.V.label,
                                 f"beta1|h|^p - k1 <= V <= beta2|h|^p (excess {worst_lo:.3g}, "
                                 f"{worst_hi:.3g})")
        return {"lower_excess": worst_lo, "upper_excess": worst_hi}

    def bound(self, t, x0_moment: float) -> np.ndarray:
        t = np.asarray(t, float)
        return (self.beta2 / self.beta1 * np.exp(-self.beta3 * t) * x0_moment
                + (self.k1 + self.k3 / self.beta3) / self.beta1)

    def to_dict(self) -> dict:
        return {"V": self.V.label, "beta1": self.beta1, "beta2": self.beta2,
                "beta3": self.beta3, "k1": self.k1, "k3": self.k3, "p": self.p}


def coercivity_excess(s: Scenario, h: np.ndarray, eps: float) -> np.ndarray:
    """``<Ah + F(h), h> + eps |h|^2``; nonpositive where the coercivity condition holds."""
    h = np.atleast_2d(h)
    return np.sum((-s.model.mu * h + s.F(h)) * h, axis=-1) + eps * np.sum(h * h, axis=-1)


def corollary_spec(s: Scenario, eps: float, p: float,
                   constants: StableConstants | None = None) -> LyapunovSpec:
    """Certificate constants for ``V(h) = (1 + |h|^2)^{p/2} - 1`` under coercivity ``eps``.

    ``<DV, Ah + F> = p (1+|h|^2)^{p/2 - 1} <h, Ah + F> <= -eps p V``, so
    ``beta3 = eps p``, and the jump term is bounded by the inner-integral
    estimate with ``K_G``; ``beta1 = beta2 = k1 = 1``.
    """
    V = PowerMixture.make(s.dim, p)
    k3 = float(jump_term_bound(V, s.K_G, s.alpha, constants))
    return LyapunovSpec(V, 1.0, 1.0, eps * p, 1.0, k3, p)


def sobol_ball(dim: int, radius: float, n: int, seed: int = 0) -> np.ndarray:
    """Scrambled Sobol points mapped uniformly into the ball of the given radius."""
    u = qmc.Sobol(dim + 1, scramble=True, seed=seed).random(n)
    z = sps.norm.ppf(np.clip(u[:, :dim], 1e-12, 1 - 1e-12))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    return radius * u[:, dim:] ** (1.0 / dim) * z


@dataclass(frozen=True)
class CertificateReport:
    spec: LyapunovSpec
    times: np.ndarray
    estimates: list
    bounds: np.ndarray
    x0_moment: float
    drift_check: dict
    n_paths: int
    n_failed: int

    @property
    def passed(self) -> bool:
        return bool(all(e.ci_lo <= b for e, b in zip(self.estimates, self.bounds)))

    def rows(self) -> list[dict]:
        return [{"t": float(t), "p": self.spec.p, "estimate": e.value, "ci_lo": e.ci_lo,
                 "ci_hi": e.ci_hi, "bound": float(b), "pass": bool(e.ci_lo <= b)}
                for t, e, b in zip(self.times, self.estimates, self.bounds)]


def check_drift_conditions(spec: LyapunovSpec, s: Scenario, points: np.ndarray,
                           eps: float | None = None) -> dict:
    """Coercivity (when ``eps`` is given) and ``LV <= -beta3 V + k3`` at the points.

    Raises :class:`DriftConditionError` when either fails anywhere.
    """
    out = {"n_points": int(points.shape[0])}
    if eps is not None:
        exc = coercivity_excess(s, points, eps)
        tol = 1e-10 * (1 + np.sum(points * points, axis=-1) * np.max(s.model.mu))
        bad = exc > tol
        out["coercivity_worst"] = float(exc.max())
        if np.any(bad):
            i = int(np.argmax(exc))
            raise DriftConditionError(int(bad.sum()), float(exc[i]), points[i])
    lv = generator_eval(spec.V, points, s)
    excess = lv + spec.beta3 * spec.V.value(points) - spec.k3
    out["generator_worst"] = float(excess.max())
    if np.any(excess > 0):
        i = int(np.argmax(excess))
        raise DriftConditionError(int((excess > 0).sum()), float(excess[i]), points[i])
    return out


def lyapunov_certify(spec: LyapunovSpec, s: Scenario, t_grid, n_paths: int, rng=None,
                     eps: float | None = None, n_sobol: int = 1024, n_visited: int = 1000,
                     block: int = 1024) -> CertificateReport:
    """Monte Carlo ``E|X(t)|^p`` on ``t_grid`` against the ultimate-boundedness bound.

    The drift conditions are checked first on Sobol points in a ball of
    radius three times the 99th percentile of visited state norms, plus a
    subsample of visited states; a violation raises
    :class:`DriftConditionError` and no report is produced.
    """
    spec.verify_bounds(np.random.default_rng(0))
    streams = as_streams(rng if rng is not None else 0, n_paths)
    times = np.linspace(0.0, s.T, s.scheme.n_cells + 1)
    t_grid = np.asarray(t_grid, float)
    idx = np.searchsorted(times, t_grid - 1e-12)
    if np.any(np.abs(times[idx] - t_grid) > 1e-9 * s.T):
        raise ParameterError("t_grid", t_grid.tolist(), "points on the solver grid")
    moments = []
    visited = []
    n_failed = 0
    pick = np.random.default_rng(12345)
    for start in range(0, n_paths, block):
        stop = min(start + block, n_paths)
        sub = _sub_streams(streams, start, stop)
        noise = s.sample_noise(sub, stop - start)
        x = mild_solve(s, noise, x0=s.sample_x0(sub, stop - start))
        ok = x.ok
        n_failed += int((~ok).sum())
        moments.append(np.linalg.norm(x.states[ok][:, idx], axis=-1) ** spec.p)
        flat = x.states[ok].reshape(-1, s.dim)
        take = pick.choice(flat.shape[0], size=min(flat.shape[0], n_visited), replace=False)
        visited.append(flat[take])
    moments = np.concatenate(moments)
    visited = np.concatenate(visited)
    visited = visited[pick.choice(visited.shape[0], size=min(n_visited, visited.shape[0]),
                                  replace=False)]
    radius = 3.0 * float(np.quantile(np.linalg.norm(visited, axis=-1), 0.99))
    pts = np.concatenate([sobol_ball(s.dim, max(radius, 1e-6), n_sobol), visited])
    drift = check_drift_conditions(spec, s, pts, eps)
    drift["radius"] = radius
    x0m = s.x0.moment(spec.p)
    est = [moment_estimate(moments[:, i], spec.p, s.alpha) for i in range(idx.size)]
    return CertificateReport(spec, t_grid, est, spec.bound(t_grid, x0m), x0m, drift,
                             n_paths, n_failed)
