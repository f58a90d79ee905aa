"""Distributional analysis of replication outputs.

Kolmogorov-Smirnov distances are computed from sorted order statistics;
p-values use the asymptotic series K(x) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2)
truncated once terms drop below 1e-12.  All sample sizes used by the
verification suites are >= 1000, where the asymptotic approximation is accurate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigurationError

_SERIES_TOL = 1e-12
_SERIES_MAX_TERMS = 100_000


def normal_cdf(x) -> np.ndarray:
    """Standard normal CDF via the complementary error function."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * special.erfc(-x / math.sqrt(2.0))


def normal_inverse_cdf(u) -> np.ndarray:
    """Standard normal quantile function (absolute error well below 1e-8)."""
    return special.ndtri(np.asarray(u, dtype=np.float64))


def kolmogorov_pvalue(x: float) -> float:
    """P(sup-distance limit > x): alternating exponential series, clamped to [0, 1]."""
    if x <= 0.0:
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, _SERIES_MAX_TERMS + 1):
        term = math.exp(-2.0 * j * j * x * x)
        if term < _SERIES_TOL:
            break
        total += sign * term
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def _ks_distance_sorted(ordered: np.ndarray, cdf_values: np.ndarray) -> float:
    m = len(ordered)
    i = np.arange(1, m + 1, dtype=np.float64)
    d_plus = np.max(i / m - cdf_values)
    d_minus = np.max(cdf_values - (i - 1.0) / m)
    return float(max(d_plus, d_minus))


def ks_one_sample(samples, target_mean: float, target_sd: float) -> tuple[float, float]:
    """Sup-distance of the ECDF from Normal(target_mean, target_sd^2) and its p-value."""
    if not target_sd > 0:
        raise ConfigurationError(
            "target_sd must be > 0 (a degenerate limit needs a point-mass check)",
            field="target_sd")
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = len(x)
    if m < 10:
        raise ConfigurationError("need at least 10 samples", field="samples")
    cdf = normal_cdf((x - target_mean) / target_sd)
    ks = _ks_distance_sorted(x, cdf)
    return ks, kolmogorov_pvalue(ks * math.sqrt(m))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Sup-distance of two ECDFs; p-value at effective size m_a m_b/(m_a+m_b)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) < 10 or len(b) < 10:
        raise ConfigurationError("need at least 10 samples per side", field="samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    ks = float(np.max(np.abs(fa - fb)))
    m_eff = len(a) * len(b) / (len(a) + len(b))
    return ks, kolmogorov_pvalue(ks * math.sqrt(m_eff))


def summarize(samples) -> tuple[float, float, float]:
    """(mean, unbiased variance, bias-corrected skewness).

    Skewness is m/((m-1)(m-2)) sum(((x-mean)/s)^3) with s the unbiased standard
    deviation; it is NaN (flagged) for constant samples or m < 3.
    """
    x = np.asarray(samples, dtype=np.float64)
    m = len(x)
    if m < 2:
        raise ConfigurationError("need at least 2 samples", field="samples")
    mean = float(np.mean(x))
    var = float(np.var(x, ddof=1))
    if m < 3 or var == 0.0:
        return mean, var, math.nan
    z = (x - mean) / math.sqrt(var)
    skew = m / ((m - 1.0) * (m - 2.0)) * float(np.sum(z ** 3))
    return mean, var, skew


def qq_export(samples, target_mean: float, target_sd: float) -> list[tuple[float, float]]:
    """(theoretical quantile, order statistic) pairs at levels (i-0.5)/m."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = len(x)
    if m < 2:
        raise ConfigurationError("need at least 2 samples", field="samples")
    levels = (np.arange(1, m + 1) - 0.5) / m
    theo = target_mean + target_sd * normal_inverse_cdf(levels)
    return list(zip(theo.tolist(), x.tolist()))


@dataclass(frozen=True)
class GofReport:
    """Goodness-of-fit summary against the Normal(target_mean, target_sd^2) limit."""

    m: int
    target_mean: float
    target_sd: float
    ks_stat: float
    ks_pvalue: float
    sample_mean: float
    sample_var: float
    sample_skew: float
    qq: tuple[tuple[float, float], ...]
    excluded_count: int = 0

    def to_json(self) -> str:
        payload = {
            "m": self.m,
            "target_mean": self.target_mean,
            "target_sd": self.target_sd,
            "ks_stat": self.ks_stat,
            "ks_pvalue": self.ks_pvalue,
            "sample_mean": self.sample_mean,
            "sample_var": self.sample_var,
            "sample_skew": None if math.isnan(self.sample_skew) else self.sample_skew,
            "excluded_count": self.excluded_count,
            "qq_rows": len(self.qq),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def gof_report(samples, target_mean: float, target_sd: float,
               excluded_count: int = 0) -> GofReport:
    """Run the one-sample KS test plus summary moments on a cleaned sample."""
    ks, p = ks_one_sample(samples, target_mean, target_sd)
    mean, var, skew = summarize(samples)
    qq = qq_export(samples, target_mean, target_sd)
    return GofReport(
        m=len(np.asarray(samples)), target_mean=float(target_mean),
        target_sd=float(target_sd), ks_stat=ks, ks_pvalue=p,
        sample_mean=mean, sample_var=var, sample_skew=skew,
        qq=tuple(qq), excluded_count=int(excluded_count),
    )
