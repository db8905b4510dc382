"""Noise paths on a uniform grid, in exact-increment or jump-resolved form."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import GridError, ModeError, ParameterError
from ..rng import as_streams, iter_blocks, seed_record_of
from .oracle import isotropic_tail_mass
from .sampling import (check_alpha, sample_isotropic_increment, sample_radii_between,
                       uniform_directions)

INCREMENT_EXACT = "increment_exact"
JUMP_RESOLVED = "jump_resolved"
MODES = (INCREMENT_EXACT, JUMP_RESOLVED)
REMAINDERS = ("drop", "gaussian")
_CHUNK = 2_000_000


@dataclass(frozen=True)
class NoisePath:
    """A batch of ``n_paths`` realizations of the projected noise on ``[0, horizon]``.

    In ``increment_exact`` mode ``increments[i, k]`` is the exact increment
    of path ``i`` over cell ``k``.  In ``jump_resolved`` mode the jumps with
    norm above ``truncation_level`` are listed individually (sorted by path,
    then time; ``jump_offsets`` is the CSR index by path) and ``residual``
    holds the per-cell sum of the smaller jumps kept by the series budget.
    """

    mode: str
    alpha: float
    horizon: float
    dim: int
    n_cells: int
    n_paths: int
    increments: np.ndarray | None = None
    residual: np.ndarray | None = None
    jump_path: np.ndarray | None = None
    jump_time: np.ndarray | None = None
    jump_size: np.ndarray | None = None
    truncation_level: float = 0.0
    series_floor: float = 0.0
    series_budget: float = 0.0
    remainder: str = "drop"
    seed_record: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_cells

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_cells + 1)

    @property
    def jump_offsets(self) -> np.ndarray:
        self._require_jumps()
        counts = np.bincount(self.jump_path, minlength=self.n_paths)
        return np.concatenate([[0], np.cumsum(counts)])

    def _require_jumps(self):
        if self.mode != JUMP_RESOLVED:
            raise ModeError("jump-resolved mode required")

    def jump_cells(self) -> np.ndarray:
        """Cell index ``k`` with ``t_k < time <= t_{k+1}`` for every listed jump."""
        self._require_jumps()
        k = np.ceil(self.jump_time / self.dt).astype(np.int64) - 1
        return np.clip(k, 0, self.n_cells - 1)

    def jumps_of(self, i: int):
        off = self.jump_offsets
        sl = slice(off[i], off[i + 1])
        return self.jump_time[sl], self.jump_size[sl]

    def cell_increments(self) -> np.ndarray:
        """Total increment per cell, shape ``(n_paths, n_cells, dim)``."""
        if self.mode == INCREMENT_EXACT:
            return self.increments
        out = self.residual.copy()
        flat = self.jump_path * self.n_cells + self.jump_cells()
        size = self.n_paths * self.n_cells
        for j in range(self.dim):
            out[..., j] += np.bincount(flat, weights=self.jump_size[:, j],
                                       minlength=size).reshape(self.n_paths, self.n_cells)
        return out

    def values(self) -> np.ndarray:
        """``L(t_k)`` on the grid, shape ``(n_paths, n_cells + 1, dim)``."""
        inc = self.cell_increments()
        out = np.zeros((self.n_paths, self.n_cells + 1, self.dim))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out

    def coarsen(self, factor: int) -> "NoisePath":
        """Same realization on a grid with ``n_cells / factor`` cells."""
        factor = int(factor)
        if factor < 1 or self.n_cells % factor:
            raise GridError(f"cannot coarsen {self.n_cells} cells by {factor}")
        if factor == 1:
            return self
        shape = (self.n_paths, self.n_cells // factor, factor, self.dim)
        if self.mode == INCREMENT_EXACT:
            return replace(self, n_cells=self.n_cells // factor,
                           increments=self.increments.reshape(shape).sum(axis=2))
        return replace(self, n_cells=self.n_cells // factor,
                       residual=self.residual.reshape(shape).sum(axis=2))

    def select(self, paths) -> "NoisePath":
        """Sub-batch of the given path indices (reindexed from 0)."""
        idx = np.asarray(paths, dtype=np.int64)
        if self.mode == INCREMENT_EXACT:
            return replace(self, n_paths=idx.size, increments=self.increments[idx])
        remap = -np.ones(self.n_paths, dtype=np.int64)
        remap[idx] = np.arange(idx.size)
        keep = remap[self.jump_path] >= 0
        new_path = remap[self.jump_path[keep]]
        order = np.lexsort((self.jump_time[keep], new_path))
        return replace(self, n_paths=idx.size, residual=self.residual[idx],
                       jump_path=new_path[order], jump_time=self.jump_time[keep][order],
                       jump_size=self.jump_size[keep][order])

    def check_compatible(self, alpha: float, dim: int, n_cells: int | None = None,
                         horizon: float | None = None):
        if self.dim != dim:
            raise GridError(f"noise dimension {self.dim} != {dim}")
        if not np.isclose(self.alpha, alpha):
            raise GridError(f"noise alpha {self.alpha} != {alpha}")
        if n_cells is not None and self.n_cells != n_cells:
            raise GridError(f"noise grid has {self.n_cells} cells, expected {n_cells}")
        if horizon is not None and not np.isclose(self.horizon, horizon):
            raise GridError(f"noise horizon {self.horizon} != {horizon}")

    @classmethod
    def from_jumps(cls, alpha: float, horizon: float, n_cells: int, jumps,
                   dim: int | None = None, truncation_level: float = 0.0) -> "NoisePath":
        """Single-path jump-resolved noise with explicitly given ``(time, vector)`` jumps."""
        jumps = sorted(jumps, key=lambda x: x[0])
        times = np.array([t for t, _ in jumps], float)
        if not jumps and dim is None:
            raise ParameterError("dim", None, "required when no jumps are given")
        d = dim if dim is not None else len(jumps[0][1])
        sizes = np.array([np.asarray(v, float) for _, v in jumps]).reshape(len(jumps), d)
        if np.any(times <= 0) or np.any(times > horizon):
            raise ParameterError("jump times", times.tolist(), "all in (0, horizon]")
        return cls(JUMP_RESOLVED, alpha, horizon, d, n_cells, 1,
                   residual=np.zeros((1, n_cells, d)),
                   jump_path=np.zeros(times.size, dtype=np.int64), jump_time=times,
                   jump_size=sizes, truncation_level=truncation_level,
                   seed_record={"source": "explicit"})


def series_floor(alpha: float, dim: int, epsilon: float, budget: float) -> float:
    """Smallest residual jump radius kept when ``budget`` jumps per unit time lie in ``(floor, epsilon]``."""
    if budget <= 0:
        return float(epsilon)
    tail = isotropic_tail_mass(alpha, dim)
    return float((budget / tail + epsilon**-alpha) ** (-1.0 / alpha))


def dropped_variance(alpha: float, dim: int, floor: float) -> float:
    """Per-coordinate variance per unit time of the jumps with radius ``<= floor``."""
    tail = isotropic_tail_mass(alpha, dim)
    return tail * alpha / (2.0 - alpha) * floor ** (2.0 - alpha) / dim


def _jump_block(alpha, T, d, N, eps, floor, budget, remainder, rng, n):
    tail = isotropic_tail_mass(alpha, d)
    dt = T / N
    counts = rng.poisson(tail * eps**-alpha * T, size=n)
    m = int(counts.sum())
    path = np.repeat(np.arange(n, dtype=np.int64), counts)
    time = T * (1.0 - rng.random(m))
    radii = sample_radii_between(alpha, eps, np.inf, rng, m)
    size = radii[:, None] * uniform_directions(rng, m, d)
    order = np.lexsort((time, path))
    path, time, size = path[order], time[order], size[order]

    residual = np.zeros((n, N, d))
    if budget > 0:
        band = rng.poisson(budget * T, size=n)
        flat_all = np.repeat(np.arange(n, dtype=np.int64) * N, band)
        total = flat_all.size
        res_flat = residual.reshape(n * N, d)
        for start in range(0, total, _CHUNK):
            stop = min(start + _CHUNK, total)
            k = stop - start
            cells = flat_all[start:stop] + rng.integers(0, N, size=k)
            r = sample_radii_between(alpha, floor, eps, rng, k)
            v = r[:, None] * uniform_directions(rng, k, d)
            for j in range(d):
                res_flat[:, j] += np.bincount(cells, weights=v[:, j], minlength=n * N)
    if remainder == "gaussian":
        sd = np.sqrt(dropped_variance(alpha, d, floor) * dt)
        residual += sd * rng.standard_normal(residual.shape)
    return path, time, size, residual


def sample_noise_path(alpha: float, T: float, d: int, n_cells: int,
                      mode: str = INCREMENT_EXACT, epsilon: float = 1e-3, rng=None,
                      n_paths: int = 1, series_budget: float = 1e4,
                      remainder: str = "drop") -> NoisePath:
    """Sample ``n_paths`` noise realizations on a grid of ``n_cells`` cells.

    Parameters
    ----------
    mode : {"increment_exact", "jump_resolved"}
    epsilon : float
        Jump-listing level for ``jump_resolved`` mode.
    rng : numpy Generator, PathStreams or int
        Randomness; a :class:`~stablespde.rng.PathStreams` gives per-block streams.
    series_budget : float
        Expected residual jumps per unit time kept below ``epsilon``.
    remainder : {"drop", "gaussian"}
        Treatment of the jumps below the series floor.  ``"gaussian"``
        replaces them by a matched-covariance Gaussian, which adds continuous
        quadratic variation and is meant only for distributional cross-checks.
    """
    check_alpha(alpha)
    if not T > 0:
        raise ParameterError("T", T, "T > 0")
    if int(n_cells) < 1:
        raise ParameterError("n_cells", n_cells, "n_cells >= 1")
    if mode not in MODES:
        raise ParameterError("mode", mode, f"one of {MODES}")
    if remainder not in REMAINDERS:
        raise ParameterError("remainder", remainder, f"one of {REMAINDERS}")
    d, N, P = int(d), int(n_cells), int(n_paths)
    dt = T / N
    streams = as_streams(rng, P)
    blocks = list(iter_blocks(streams, P))
    record = seed_record_of(streams)
    if mode == INCREMENT_EXACT:
        inc = np.empty((P, N, d))
        for start, stop, g in blocks:
            inc[start:stop] = sample_isotropic_increment(alpha, dt, d, g, size=(stop - start, N))
        return NoisePath(mode, alpha, T, d, N, P, increments=inc, seed_record=record)

    if not epsilon > 0:
        raise ParameterError("epsilon", epsilon, "epsilon > 0 in jump_resolved mode")
    floor = series_floor(alpha, d, epsilon, series_budget)
    parts = [_jump_block(alpha, T, d, N, epsilon, floor, series_budget, remainder, g, stop - start)
             for start, stop, g in blocks]
    path = np.concatenate([p[0] + start for p, (start, _, _) in zip(parts, blocks)])
    return NoisePath(
        mode, alpha, T, d, N, P,
        residual=np.concatenate([p[3] for p in parts]),
        jump_path=path, jump_time=np.concatenate([p[1] for p in parts]),
        jump_size=np.concatenate([p[2] for p in parts]),
        truncation_level=float(epsilon), series_floor=floor,
        series_budget=float(series_budget), remainder=remainder, seed_record=record)
