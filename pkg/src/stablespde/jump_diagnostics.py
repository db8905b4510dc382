"""Jump measures, their compensators, and pure-discontinuity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .errors import ModeError, ParameterError, QuadratureError
from .sample_path import SamplePath
from .stable_noise.oracle import (isotropic_tail_mass, small_jump_second_moment,
                                  unit_tail_from_weights)
from .stable_noise.paths import JUMP_RESOLVED, NoisePath
from .stats import binomial_ci, poisson_tests, zero_mean_test

TAIL_CHUNK = 8192


@dataclass(frozen=True)
class JumpRecord:
    time: float
    size: np.ndarray
    pre_state: np.ndarray
    path: int = 0


@dataclass(frozen=True)
class JumpTable:
    """Columnar jump records for a batch of paths."""

    path: np.ndarray
    time: np.ndarray
    size: np.ndarray
    pre_state: np.ndarray
    n_paths: int
    horizon: float

    def __len__(self):
        return int(self.time.size)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.size, axis=-1)

    def records(self) -> list[JumpRecord]:
        return [JumpRecord(float(t), s, x, int(p))
                for p, t, s, x in zip(self.path, self.time, self.size, self.pre_state)]

    def counts(self, lo: float, hi: float, t: float | None = None) -> np.ndarray:
        """Per-path number of jumps with ``lo < ||size|| <= hi`` up to time ``t``."""
        r = self.norms
        sel = (r > lo) & (r <= hi)
        if t is not None:
            sel &= self.time <= t
        return np.bincount(self.path[sel], minlength=self.n_paths)


def extract_jumps(x: SamplePath, path: NoisePath, s=None) -> JumpTable:
    """Jumps ``Delta X(s) = G(X(s-)) Delta L(s)`` of the solution at the listed noise jumps.

    Zero jumps (where the coefficient vanishes) are dropped.
    """
    if path.mode != JUMP_RESOLVED:
        raise ModeError("jump-resolved mode required")
    if x.jump_delta is None:
        raise ParameterError("x", "no jump record", "path produced from jump-resolved noise")
    pre = x.jump_pre if x.jump_pre is not None else np.full_like(x.jump_delta, np.nan)
    keep = np.any(x.jump_delta != 0, axis=-1)
    if x.failed is not None and np.any(x.failed):
        keep &= ~x.failed[path.jump_path]
    return JumpTable(path.jump_path[keep], path.jump_time[keep], x.jump_delta[keep], pre[keep],
                     path.n_paths, path.horizon)


@dataclass(frozen=True)
class CompensatorGrid:
    """Cumulative compensator masses ``cells[i, k, a] = nu((0, t_k] x annulus_a)`` for path ``i``.

    Annulus ``a`` is ``(radii[a], radii[a + 1]]``; the last radius may be inf.
    ``unit_tail[i, k]`` is the mass outside the unit ball on cell ``k``.
    """

    radii: np.ndarray
    times: np.ndarray
    cells: np.ndarray
    unit_tail: np.ndarray
    alpha: float

    def mass_between(self, k0: int, k1: int) -> np.ndarray:
        return self.cells[:, k1] - self.cells[:, k0]

    def weight_integral(self, c_w: float) -> np.ndarray:
        """Cumulative ``int_0^{t_k} int w d nu`` for a radial weight with radial constant ``c_w``."""
        out = np.zeros((self.unit_tail.shape[0], self.times.size))
        np.cumsum(self.unit_tail * np.diff(self.times) * c_w, axis=1, out=out[:, 1:])
        return out


def image_unit_tail(s, states: np.ndarray, n: float = np.inf) -> np.ndarray:
    """``(lambda o G_n(h)^{-1})(||g|| > 1)`` for every state, ``G_n = R_n G``."""
    row = None if np.isinf(n) else s.model.resolvent_diag(n)
    flat = states.reshape(-1, states.shape[-1])
    if s.G.is_zero:
        return np.zeros(states.shape[:-1])
    if s.G.is_constant:
        lam = s.G.sq_singular_values(flat[:1], row)
        return np.full(states.shape[:-1], float(unit_tail_from_weights(lam[0], s.alpha)))
    out = np.empty(flat.shape[0])
    for a in range(0, flat.shape[0], TAIL_CHUNK):
        lam = s.G.sq_singular_values(flat[a:a + TAIL_CHUNK], row)
        out[a:a + TAIL_CHUNK] = unit_tail_from_weights(lam, s.alpha)
    return out.reshape(states.shape[:-1])


def compensator_eval(x: SamplePath, s, radii, cell_rule: str = "auto",
                     flow_nodes: int = 3) -> CompensatorGrid:
    """Riemann sums of ``(lambda o G(X)^{-1})(annulus)`` over the grid.

    ``cell_rule="left"`` evaluates cell ``(t_j, t_{j+1}]`` at ``X(t_j)``,
    which is exact for increment-exact paths (one coefficient per cell).
    ``"flow"`` integrates along ``S(u - t_j) X(t_j)`` with Gauss-Legendre
    nodes, the between-jump dynamics of jump-resolved paths.  ``"auto"``
    picks ``"flow"`` when ``x`` carries listed jumps.  On annuli the image
    measure is ``T(1) (lo^-alpha - hi^-alpha)``.
    """
    radii = np.asarray(radii, float)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ParameterError("radii", radii.tolist(), "positive and increasing")
    if cell_rule == "auto":
        cell_rule = "flow" if x.jump_pre is not None else "left"
    if cell_rule not in ("left", "flow"):
        raise ParameterError("cell_rule", cell_rule, "'left', 'flow' or 'auto'")
    n = np.inf if x.yosida_n is None else x.yosida_n
    dt = np.diff(x.times)
    start = x.states[:, :-1]
    try:
        if cell_rule == "left" or s.G.is_constant:
            tail = image_unit_tail(s, start, n)
        else:
            theta, wts = np.polynomial.legendre.leggauss(flow_nodes)
            theta, wts = 0.5 * (theta + 1.0), 0.5 * wts
            tail = np.zeros(start.shape[:-1])
            for th, wt in zip(theta, wts):
                decay = np.exp(-np.outer(th * dt, s.model.mu))
                tail += wt * image_unit_tail(s, start * decay, n)
    except QuadratureError as exc:
        raise QuadratureError("compensator oracle failed", {"cells": "states",
                                                               **exc.diagnostics}) from exc
    powers = np.where(np.isinf(radii), 0.0, radii ** -s.alpha)
    ann = powers[:-1] - powers[1:]
    per_cell = tail[..., None] * dt[None, :, None] * ann
    cells = np.zeros((x.n_paths, x.times.size, ann.size))
    np.cumsum(per_cell, axis=1, out=cells[:, 1:])
    return CompensatorGrid(radii, x.times, cells, tail, s.alpha)


# -- weights -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialWeight:
    """Bounded weight ``w(h) = psi(||h||)`` vanishing on ``||h|| <= r_vanish``."""

    psi: object
    r_vanish: float
    label: str = "w"

    def __post_init__(self):
        if not self.r_vanish > 0:
            raise ParameterError("r_vanish", self.r_vanish, "> 0 (weight must vanish near 0)")
        probe = np.concatenate([np.geomspace(1e-12, self.r_vanish, 200), [0.0]])
        vals = np.asarray(self.psi(probe), float)
        if np.any(vals != 0):
            raise ParameterError("w", self.label, f"w(h) = 0 for ||h|| <= {self.r_vanish}")

    def __call__(self, h) -> np.ndarray:
        return np.asarray(self.psi(np.linalg.norm(h, axis=-1)), float)

    def radial_constant(self, alpha: float) -> float:
        """``int psi(r) alpha r^{-1-alpha} dr``, so that ``int w d(lambda o Phi^-1) = T(1) c_w``."""
        # u = r^-alpha maps (r_vanish, inf) onto the finite (0, r_vanish^-alpha)
        val, err = integrate.quad(lambda u: self.psi(np.array([u ** (-1.0 / alpha)]))[0]
                                  if u > 0 else self.psi(np.array([np.inf]))[0],
                                  0.0, self.r_vanish ** -alpha, limit=400)
        if err > 1e-8 * max(1.0, abs(val)):
            raise QuadratureError("weight radial integral", {"err": err})
        return float(val)

    def scaled(self, c: float) -> "RadialWeight":
        return RadialWeight(lambda r: c * np.asarray(self.psi(r)), self.r_vanish,
                            f"{c:g}*{self.label}")

    @classmethod
    def smooth_indicator(cls, r0: float, r1: float) -> "RadialWeight":
        """``0`` below ``r0``, ``1`` above ``r1``, cubic smoothstep in between."""
        def psi(r):
            u = np.clip((np.asarray(r, float) - r0) / (r1 - r0), 0.0, 1.0)
            return u * u * (3.0 - 2.0 * u)
        return cls(psi, r0, f"smooth_indicator({r0:g},{r1:g})")

    @classmethod
    def zero(cls) -> "RadialWeight":
        return cls(lambda r: np.zeros_like(np.asarray(r, float)), 1.0, "zero")


@dataclass(frozen=True)
class MartingaleReport:
    probe_times: np.ndarray
    values: np.ndarray        # (P, n_probe): M(t_i) per path
    tests: list

    @property
    def passed(self) -> bool:
        return all(t["pass"] for t in self.tests)

    def rows(self) -> list[dict]:
        return [{"quantity": f"M(t={t:g})", "estimate": r["mean"],
                 "ci_lo": r["mean"] - 3 * r["se"], "ci_hi": r["mean"] + 3 * r["se"],
                 "bound": 0.0, "pass": r["pass"]}
                for t, r in zip(self.probe_times, self.tests)]


def compensated_process(jumps: JumpTable, comp: CompensatorGrid, w: RadialWeight) -> np.ndarray:
    """``M(t_k) = sum_{s <= t_k} w(Delta X(s)) - int_0^{t_k} int w d nu`` on the grid, per path."""
    times = comp.times
    k = np.searchsorted(times, jumps.time, side="left")  # jump in (t_{k-1}, t_k]
    vals = w(jumps.size)
    P = comp.unit_tail.shape[0]
    summed = np.zeros((P, times.size))
    np.add.at(summed, (jumps.path, k), vals)
    summed = np.cumsum(summed, axis=1)
    return summed - comp.weight_integral(w.radial_constant(comp.alpha))


def compensated_martingale_test(jumps: JumpTable, comp: CompensatorGrid, w: RadialWeight,
                                probe_times=None, n_se: float = 3.0) -> MartingaleReport:
    """Zero-mean test of ``M(t)`` at the probe times across paths."""
    times = comp.times
    if probe_times is None:
        probe_times = times[-1] * np.arange(1, 6) / 5
    idx = np.searchsorted(times, np.asarray(probe_times) - 1e-12)
    m = compensated_process(jumps, comp, w)[:, idx]
    tests = [zero_mean_test(m[:, i], n_se) for i in range(idx.size)]
    return MartingaleReport(times[idx], m, tests)


def annulus_report(jumps: JumpTable, comp: CompensatorGrid, probe_times, level: float = 0.01,
                   poisson: bool = True) -> list[dict]:
    """Counts per (time, annulus) against compensator means.

    With ``poisson`` the dispersion test applies as well; the level is
    Bonferroni-corrected over all cells.
    """
    idx = np.searchsorted(comp.times, np.asarray(probe_times) - 1e-12)
    n_ann = comp.radii.size - 1
    n_tests = idx.size * n_ann
    per_level = level / n_tests
    rows = []
    for k, t in zip(idx, comp.times[idx]):
        for a in range(n_ann):
            lo, hi = comp.radii[a], comp.radii[a + 1]
            counts = jumps.counts(lo, hi, t)
            expected = comp.cells[:, k, a]
            if poisson:
                res = poisson_tests(counts, float(np.mean(expected)), per_level)
            else:
                z = zero_mean_test(counts - expected, float(stats.norm.isf(per_level / 2)))
                res = {"observed": float(counts.mean()), "expected": float(expected.mean()),
                       "dispersion": float(counts.var(ddof=1) / max(counts.mean(), 1e-300)),
                       "pass": z["pass"]}
            rows.append({"time": float(t), "annulus_lo": float(lo), "annulus_hi": float(hi),
                         "observed": res["observed"], "expected": res["expected"],
                         "dispersion": res["dispersion"], "pass": bool(res["pass"])})
    return rows


def tail_ratio_test(jumps_norms: np.ndarray, r: float, alpha: float, level: float = 0.99) -> dict:
    """Among jumps with norm ``> r`` the fraction with norm ``> 2r`` is binomial with ``2^-alpha``."""
    n = int(np.sum(jumps_norms > r))
    k = int(np.sum(jumps_norms > 2 * r))
    lo, hi = binomial_ci(k, n, level)
    target = 2.0 ** -alpha
    return {"n": n, "k": k, "ratio": k / n if n else float("nan"), "ci": (lo, hi),
            "target": target, "pass": bool(lo <= target <= hi)}


# -- quadratic variation ----------------------------------------------------------------------

@dataclass(frozen=True)
class QVReport:
    n_cells: int
    thresholds: np.ndarray
    realized: np.ndarray      # (P,)
    jump_sums: np.ndarray     # (P, n_thr)

    @property
    def proxy(self) -> np.ndarray:
        return self.realized[:, None] - self.jump_sums


def quadratic_variation(x: SamplePath, thresholds, path: NoisePath | None = None) -> QVReport:
    """Realized QV on the grid and sums of squared solution jumps above each threshold.

    Jump sums come from the listed jumps recorded on ``x``; without a
    jump record (or without ``path``) they are zero.
    """
    thresholds = np.atleast_1d(np.asarray(thresholds, float))
    q = np.sum(np.diff(x.states, axis=1) ** 2, axis=(1, 2))
    sums = np.zeros((x.n_paths, thresholds.size))
    if path is not None:
        if path.mode != JUMP_RESOLVED:
            raise ModeError("jump-resolved mode required for the jump-sum side")
        if x.jump_delta is None:
            raise ParameterError("x", "no jump record", "path produced from jump-resolved noise")
        r2 = np.sum(x.jump_delta ** 2, axis=-1)
        r = np.sqrt(r2)
        for i, e in enumerate(thresholds):
            sums[:, i] = np.bincount(path.jump_path, weights=np.where(r > e, r2, 0.0),
                                     minlength=x.n_paths)
    return QVReport(x.n_cells, thresholds, q, sums)


def qv_expected_proxy(phi_sq_sv: np.ndarray, alpha: float, noise_dim: int, eps: float,
                      floor: float, T: float) -> dict:
    """Expected ``Q - J_eps`` for ``X = Phi L`` when noise jumps below ``floor`` are not simulated.

    ``oracle`` is ``T int_{||h|| <= eps} ||h||^2 (lambda o Phi^-1)(dh)``;
    ``correction`` is the part carried by the unsimulated noise jumps,
    ``T ||Phi||_HS^2 / d * int_{||y|| <= floor} ||y||^2 lambda(dy)``.
    """
    oracle = T * small_jump_second_moment(np.diag(np.sqrt(phi_sq_sv)), eps, alpha)
    tail_d = isotropic_tail_mass(alpha, noise_dim)
    correction = T * np.sum(phi_sq_sv) / noise_dim * tail_d * alpha / (2 - alpha) * floor ** (2 - alpha)
    return {"oracle": float(oracle), "correction": float(correction),
            "expected": float(oracle - correction)}
