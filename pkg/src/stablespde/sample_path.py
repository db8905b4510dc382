"""Grid-valued trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SamplePath:
    """Batch of trajectories on a time grid.

    ``states[i, k]`` is ``X(t_k)`` for path ``i``.  ``left_limits[i, k]`` is the
    state at ``t_k`` with the jumps attributed to cell ``k - 1`` removed: the
    listed jumps in jump-resolved mode, the whole increment in
    increment-exact mode.  ``jump_pre`` and ``jump_delta`` align with the
    listed jumps of the driving noise and hold ``X(s-)`` and ``Delta X(s)``.
    """

    times: np.ndarray
    states: np.ndarray
    left_limits: np.ndarray
    seed_record: dict = field(default_factory=dict)
    failed: np.ndarray | None = None
    jump_pre: np.ndarray | None = None
    jump_delta: np.ndarray | None = None
    yosida_n: float = np.inf

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_cells(self) -> int:
        return self.states.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def ok(self) -> np.ndarray:
        if self.failed is None:
            return np.ones(self.n_paths, dtype=bool)
        return ~self.failed

    @property
    def n_failed(self) -> int:
        return 0 if self.failed is None else int(self.failed.sum())

    def norms(self, p: float = 1.0) -> np.ndarray:
        return np.linalg.norm(self.states, axis=-1) ** p

    def subsample(self, factor: int) -> "SamplePath":
        """Every ``factor``-th grid point; jump records are kept, left limits are not."""
        if factor < 1 or self.n_cells % factor:
            raise ValueError(f"factor {factor} must divide n_cells={self.n_cells}")
        st = self.states[:, ::factor]
        return SamplePath(self.times[::factor], st, st.copy(), self.seed_record, self.failed,
                          self.jump_pre, self.jump_delta, self.yosida_n)
