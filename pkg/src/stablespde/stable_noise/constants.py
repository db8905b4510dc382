"""Constant family ``c_alpha``, ``d_alpha^m``, ``e_{2,alpha}``, ``e_{p,alpha}`` with provenance."""

from __future__ import annotations

import datetime as _dt
from dataclasses import asdict, dataclass, field, replace
from types import MappingProxyType

import numpy as np

from ..errors import ParameterError
from .oracle import isotropic_tail_mass, tail_ratio_supremum, unit_tail_from_weights
from .sampling import check_alpha


def _today() -> str:
    return _dt.date.today().isoformat()


@dataclass(frozen=True)
class Provenance:
    """How a numerical constant was obtained."""

    value: float
    method: str
    sample_size: int = 0
    date: str = field(default_factory=_today)
    notes: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def probe_tail_ratios(alpha: float, dim: int = 16, n_random: int = 32, seed: int = 0):
    """Tail-mass ratios ``tail(Phi, 1) / ||Phi||_HS^alpha`` over a probe family.

    The family holds flat-spectrum operators of every rank up to ``dim``
    and random unit-norm operators.  Returns ``(ratios, labels)``.
    """
    lam, labels = [], []
    for k in range(1, dim + 1):
        w = np.zeros(dim)
        w[:k] = 1.0 / k
        lam.append(w)
        labels.append(f"flat-rank-{k}")
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        sv = np.abs(rng.standard_normal(dim)) * rng.random(dim) ** 2
        w = sv**2 / np.sum(sv**2)
        lam.append(w)
        labels.append(f"random-{i}")
    return unit_tail_from_weights(np.array(lam), alpha), labels


@dataclass(frozen=True)
class StableConstants:
    """Constants attached to one stability index.

    ``tail_constant`` bounds ``tail(Phi, 1) <= tail_constant ||Phi||_HS^alpha``.
    ``c_alpha`` additionally absorbs the radial-moment factors
    ``alpha/(2-alpha)`` and ``alpha/(alpha-1)`` so that
    ``int_{B(1/m)} ||h||^2 + int_{B(m)^c} ||h|| <= d_alpha(m) ||Phi||^alpha``.
    """

    alpha: float
    tail_constant: float
    c_alpha: float
    c_alpha_record: Provenance
    e2_alpha: float | None = None
    e2_record: Provenance | None = None
    lepage_scale: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))
    lepage_records: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    @classmethod
    def for_alpha(cls, alpha: float, probe_dim: int = 16) -> "StableConstants":
        check_alpha(alpha)
        ratios, labels = probe_tail_ratios(alpha, probe_dim)
        sup = tail_ratio_supremum(alpha)
        i = int(np.argmax(ratios))
        tail_constant = max(sup, float(ratios[i]))
        factor = max(alpha / (2 - alpha), alpha / (alpha - 1))
        c_alpha = factor * tail_constant
        rec = Provenance(
            c_alpha, "tail-ratio supremum times radial-moment factor",
            sample_size=len(labels),
            notes=(f"probe max {ratios[i]:.6g} at {labels[i]}; analytic sup {sup:.6g}; "
                   f"factor max(a/(2-a), a/(a-1)) = {factor:.6g}"))
        return cls(alpha, tail_constant, c_alpha, rec)

    def d_alpha(self, m) -> np.ndarray | float:
        m = np.asarray(m, float)
        if np.any(m < 1):
            raise ParameterError("m", m, "m >= 1")
        out = (m ** (self.alpha - 2) + m ** (1 - self.alpha)) * self.c_alpha
        return float(out) if out.ndim == 0 else out

    def e_p_alpha(self, p: float) -> float:
        if not 0 < p < self.alpha:
            raise ParameterError("p", p, f"0 < p < alpha={self.alpha}")
        if self.e2_alpha is None:
            raise ParameterError("e2_alpha", None, "calibrated value required")
        return self.alpha / (self.alpha - p) * self.e2_alpha ** (p / self.alpha)

    def with_e2(self, record: Provenance) -> "StableConstants":
        return replace(self, e2_alpha=float(record.value), e2_record=record)

    def lepage(self, dim: int) -> float:
        """Series normalization for ``dim`` dimensions.

        A recorded calibration is returned when present; otherwise the
        analytic value ``tail_mass(dim)^(1/alpha)``.
        """
        if dim in self.lepage_scale:
            return self.lepage_scale[dim]
        return isotropic_tail_mass(self.alpha, dim) ** (1.0 / self.alpha)

    def with_lepage(self, dim: int, record: Provenance) -> "StableConstants":
        scales = dict(self.lepage_scale)
        recs = dict(self.lepage_records)
        scales[dim] = float(record.value)
        recs[dim] = record
        return replace(self, lepage_scale=MappingProxyType(scales),
                       lepage_records=MappingProxyType(recs))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tail_constant": self.tail_constant,
            "c_alpha": self.c_alpha_record.to_dict(),
            "e2_alpha": None if self.e2_record is None else self.e2_record.to_dict(),
            "lepage_scale": {str(k): v.to_dict() for k, v in self.lepage_records.items()},
        }
