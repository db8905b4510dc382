"""Small statistical helpers shared by the Monte Carlo checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

MOM_BLOCKS = 16


@dataclass(frozen=True)
class Estimate:
    value: float
    ci_lo: float
    ci_hi: float
    se: float
    method: str
    n: int


def mean_ci(x, level: float = 0.99) -> Estimate:
    x = np.asarray(x, float)
    n = x.size
    m = float(x.mean()) if n else 0.0
    se = float(x.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    z = stats.norm.ppf(0.5 + level / 2)
    return Estimate(m, m - z * se, m + z * se, se, "mean", n)


def median_of_means(x, blocks: int = MOM_BLOCKS) -> Estimate:
    """Median of block means with an order-statistic interval.

    With 16 blocks the interval between the 4th and 13th block means covers
    the median of the block-mean law with probability about 0.979.
    """
    x = np.asarray(x, float)
    n = x.size
    if n < blocks:
        return mean_ci(x)
    means = np.sort(np.array([b.mean() for b in np.array_split(x, blocks)]))
    lo_idx = int(stats.binom.ppf(0.01, blocks, 0.5))
    lo_idx = max(lo_idx - 1, 0)
    hi_idx = blocks - 1 - lo_idx
    med = float(np.median(means))
    spread = float(np.std(means, ddof=1) / np.sqrt(blocks))
    return Estimate(med, float(means[lo_idx]), float(means[hi_idx]), spread, "median_of_means", n)


def moment_estimate(x, p: float, alpha: float) -> Estimate:
    """Estimate ``E x`` for ``x = |Y|^p`` with ``Y`` having tail index ``alpha``."""
    if 2 * p >= alpha:
        return median_of_means(x)
    return mean_ci(x)


def zero_mean_test(x, n_se: float = 3.0) -> dict:
    """Is the sample mean within ``n_se`` standard errors of zero?"""
    x = np.asarray(x, float)
    m = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return {"mean": m, "se": se, "z": m / se if se > 0 else 0.0,
            "pass": bool(abs(m) <= n_se * se or (se == 0 and m == 0))}


def poisson_tests(counts, expected: float, level: float) -> dict:
    """Dispersion (chi-square) and mean (normal) tests for Poisson counts."""
    counts = np.asarray(counts, float)
    n = counts.size
    mean = counts.mean()
    var = counts.var(ddof=1)
    out = {"observed": float(mean), "expected": float(expected),
           "dispersion": float(var / mean) if mean > 0 else float("nan")}
    if expected <= 0:
        out.update(p_dispersion=1.0, p_mean=1.0 if mean == 0 else 0.0,
                   **{"pass": bool(mean == 0)})
        return out
    if mean == 0:
        out.update(p_dispersion=1.0, p_mean=float(stats.poisson.cdf(0, n * expected) * 2),
                   **{"pass": bool(2 * stats.poisson.cdf(0, n * expected) > level)})
        return out
    # index of dispersion about the sample mean, so a mean misfit cannot leak in
    stat = (n - 1) * var / mean
    cdf = stats.chi2.cdf(stat, n - 1)
    p_disp = 2 * min(cdf, 1 - cdf)
    z = (mean - expected) / np.sqrt(expected / n)
    p_mean = 2 * stats.norm.sf(abs(z))
    out.update(p_dispersion=float(p_disp), p_mean=float(p_mean),
               **{"pass": bool(p_disp > level and p_mean > level)})
    return out


def binomial_ci(k: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    a = 1 - level
    lo = stats.beta.ppf(a / 2, k, n - k + 1) if k > 0 else 0.0
    hi = stats.beta.ppf(1 - a / 2, k + 1, n - k) if k < n else 1.0
    return float(lo), float(hi)
