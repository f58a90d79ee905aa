"""Monte Carlo core for triangular-array row-sum statistics.

Rows are mutually independent: the depth-k row sum S_k is a fresh sum of k iid
draws, so one replication of depth n consumes exactly n(n+1)/2 draws.  Each
replication owns a counter-based substream jumped from (master_seed,
rep_index), which makes every output independent of execution order and worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from . import distributions as dists
from . import functions as fns
from . import normalizers as norms
from .errors import ConfigurationError, NumericError

CHUNK = 1 << 21

_N_TOO_SMALL = "n must be >= 2: a_1 = 0 makes the statistic undefined"


def substream(master_seed: int, index: int) -> dists.RandomStream:
    """Independent stream number ``index`` under ``master_seed``.

    Philox is counter-based; ``jumped`` advances the counter by index * 2^128
    blocks, so substreams never overlap and can be created in any order.
    """
    bitgen = np.random.Philox(key=master_seed).jumped(index)
    return dists.RandomStream(np.random.Generator(bitgen))


@dataclass(frozen=True)
class ExperimentConfig:
    """Plan for one simulation: law, function, depth, replication budget.

    centering selects which sequence recenters the statistic: "b" uses the
    truncated-moment sum, "b_tilde" the plain sigma^2/2 log n form.
    collect_product defaults to automatic: on for positive-support laws with
    mu > 0 and sigma > 0, off otherwise.
    """

    spec: dists.DistributionSpec
    fs: fns.FunctionSpec
    n: int
    replications: int
    master_seed: int
    centering: str = "b"
    collect_remainders: bool = True
    collect_product: bool | None = None

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise ConfigurationError(_N_TOO_SMALL, field="n")
        if not (isinstance(self.replications, (int, np.integer)) and self.replications >= 1):
            raise ConfigurationError("replications must be >= 1", field="replications")
        if not (isinstance(self.master_seed, (int, np.integer))
                and 0 <= self.master_seed < 2 ** 64):
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer",
                                     field="master_seed")
        if self.centering not in ("b", "b_tilde"):
            raise ConfigurationError("centering must be 'b' or 'b_tilde'",
                                     field="centering")
        if self.collect_product is True:
            _require_product_preconditions(self.spec)

    def wants_product(self) -> bool:
        if self.collect_product is None:
            return (self.spec.positive_support and self.spec.mu > 0
                    and self.spec.sigma2 > 0)
        return self.collect_product


def _require_product_preconditions(spec: dists.DistributionSpec) -> None:
    if not spec.positive_support:
        raise ConfigurationError(
            "product statistic needs a positive-support law", field="collect_product")
    if not spec.mu > 0:
        raise ConfigurationError(
            "product statistic needs mu > 0", field="collect_product")
    if not spec.sigma2 > 0:
        raise ConfigurationError(
            "product statistic needs sigma > 0", field="collect_product")


@dataclass(frozen=True)
class ReplicationResult:
    """One replication's statistic values and event counters."""

    rep_index: int
    t_stat: float
    product_stat: float | None
    r1: float | None
    r2: float | None
    out_of_neighborhood_count: int
    domain_violation: bool


def row_sum(spec: dists.DistributionSpec, k: int, stream: dists.RandomStream) -> float:
    """Sum of k independent draws; consumes exactly k draws."""
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ConfigurationError("k must be an integer >= 1", field="k")
    remaining = int(k)
    acc = 0.0
    while remaining > 0:
        take = min(remaining, CHUNK)
        acc += float(np.sum(dists.sample_array(spec, stream, take)))
        remaining -= take
    return acc


def _row_sums_depth(spec: dists.DistributionSpec, stream: dists.RandomStream,
                    n: int) -> np.ndarray:
    """S_k for k = 1..n, drawn in fixed 2^21-variate blocks of whole rows.

    The grouping depends only on n, so values are identical no matter how the
    replications are scheduled.
    """
    out = np.empty(n, dtype=np.float64)
    k = 1
    while k <= n:
        total = 0
        k_end = k
        while k_end <= n and total + k_end <= CHUNK:
            total += k_end
            k_end += 1
        if k_end == k:  # single row wider than the block budget
            out[k - 1] = row_sum(spec, k, stream)
            k += 1
            continue
        draws = dists.sample_array(spec, stream, total)
        lengths = np.arange(k, k_end)
        starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        out[k - 1:k_end - 1] = np.add.reduceat(draws, starts)
        k = k_end
    return out


def replicate(config: ExperimentConfig, table: norms.NormalizerTable,
              rep_index: int) -> ReplicationResult:
    """Run one replication on its own substream and assemble the statistic."""
    spec, fs, n = config.spec, config.fs, config.n
    if len(table.c) < n:
        raise ConfigurationError("normalizer table does not cover depth n", field="n")
    row = table.row(n)
    stream = substream(config.master_seed, rep_index)
    sums = _row_sums_depth(spec, stream, n)
    ks = np.arange(1, n + 1, dtype=np.float64)
    means = sums / ks

    oon = int(np.count_nonzero(np.abs(means - spec.mu) >= fs.neighborhood_radius))
    inside = fns.contains_array(fs, means)
    domain_violation = not bool(np.all(inside))

    a_n = row["a_n"]
    center = row["b_n"] if config.centering == "b" else row["b_tilde_n"]
    if domain_violation:
        t_stat = math.nan
    else:
        t_stat = (float(np.sum(fns.eval_array(fs, means))) - center) / a_n

    product_stat = None
    if config.wants_product():
        if np.any(sums <= 0.0):
            raise NumericError(
                "positive-support law produced a nonpositive row sum; "
                "the distribution spec is mislabeled")
        gamma = spec.gamma
        log_n = math.log(n)
        log_prod = (0.5 * gamma * gamma * log_n
                    + float(np.sum(np.log(means / spec.mu)))) / (gamma * math.sqrt(log_n))
        product_stat = math.exp(log_prod)

    r1 = r2 = None
    if config.collect_remainders:
        dev = means - spec.mu
        r1 = float(np.sum(dev * dev - table.c[:n] / ks))
        r2 = float(np.sum(np.abs(dev) ** 3))

    return ReplicationResult(
        rep_index=int(rep_index), t_stat=t_stat, product_stat=product_stat,
        r1=r1, r2=r2, out_of_neighborhood_count=oon,
        domain_violation=domain_violation,
    )


def product_statistic(config: ExperimentConfig, table: norms.NormalizerTable,
                      rep_index: int = 0) -> float:
    """The normalized-product statistic from one fresh replication.

    Computed in log space: exp[((gamma^2/2) log n + sum log(S_k/(k mu))) /
    (gamma sqrt(log n))].
    """
    forced = replace(config, collect_product=True)
    return replicate(forced, table, rep_index).product_stat


def remainder_sums(config: ExperimentConfig, table: norms.NormalizerTable,
                   rep_index: int = 0) -> tuple[float, float]:
    """(r1, r2): centered-square minus c_k/k sum, and absolute-cube sum."""
    forced = replace(config, collect_remainders=True)
    result = replicate(forced, table, rep_index)
    return result.r1, result.r2


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[ReplicationResult]:
    """All replications, merged in rep_index order.

    Output is bitwise identical for identical (config, master_seed) regardless
    of worker count; workers only change scheduling.
    """
    if not workers >= 1:
        raise ConfigurationError("workers must be >= 1", field="workers")
    table = norms.build_table(config.spec, config.fs, [config.n])
    results: list[ReplicationResult | None] = [None] * config.replications
    errors: list[tuple[int, Exception]] = []

    def one(i: int) -> None:
        try:
            results[i] = replicate(config, table, i)
        except Exception as exc:  # collected and re-raised with attribution
            errors.append((i, exc))

    if workers == 1:
        for i in range(config.replications):
            one(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(config.replications)))
    if errors:
        errors.sort(key=lambda pair: pair[0])
        shown = "; ".join(f"rep {i}: {exc}" for i, exc in errors[:5])
        raise NumericError(
            f"{len(errors)} replication(s) failed: {shown}") from errors[0][1]
    return results  # type: ignore[return-value]


class LindebergEstimate(NamedTuple):
    value: float
    std_error: float


def lindeberg_value(spec: dists.DistributionSpec, n: int, r: float,
                    replications: int, master_seed: int = 0) -> LindebergEstimate:
    """Monte Carlo estimate of the normalized truncated-second-moment sum.

    Works with the normalized law (X - mu)/sigma: with T_k the centered scaled
    row mean, estimates (1/log n) sum_{k<=n} E[T_k^2 1{|T_k| > r sqrt(log n)}].
    Row depth k gets m_k = max(ceil(replications/k), 2) independent rows, which
    keeps the total cost near replications * n draws while leaving every term
    with a sample variance for the reported standard error.
    """
    if not n >= 2:
        raise ConfigurationError(_N_TOO_SMALL, field="n")
    if not r > 0:
        raise ConfigurationError("r must be > 0", field="r")
    if not replications >= 2:
        raise ConfigurationError("replications must be >= 2", field="replications")
    if not spec.sigma2 > 0:
        raise ConfigurationError("law must have sigma > 0", field="spec")
    log_n = math.log(n)
    thr = r * math.sqrt(log_n)
    total = 0.0
    var_total = 0.0
    for k in range(1, n + 1):
        m_k = max(-(-replications // k), 2)
        stream = substream(master_seed, k - 1)
        sums = _rows_of_depth(spec, stream, k, m_k)
        t = (sums / k - spec.mu) / spec.sigma
        contrib = np.where(np.abs(t) > thr, t * t, 0.0)
        total += float(np.mean(contrib))
        var_total += float(np.var(contrib, ddof=1)) / m_k
    return LindebergEstimate(total / log_n, math.sqrt(var_total) / log_n)


def _rows_of_depth(spec: dists.DistributionSpec, stream: dists.RandomStream,
                   k: int, rows: int) -> np.ndarray:
    """``rows`` independent depth-k row sums from one stream, chunked."""
    out = np.empty(rows, dtype=np.float64)
    done = 0
    block = max(1, CHUNK // k)
    while done < rows:
        take = min(rows - done, block)
        draws = dists.sample_array(spec, stream, take * k)
        out[done:done + take] = draws.reshape(take, k).sum(axis=1)
        done += take
    return out


def hsu_robbins_partial(spec: dists.DistributionSpec, t: float, horizon: int,
                        replications: int, master_seed: int = 0) -> np.ndarray:
    """Partial sums of estimated P(|S_n/n - mu| > t) for n = 1..horizon.

    Complete-convergence proxy: the increments must die fast enough for the
    series to converge.  Each depth gets its own substream and
    ``replications`` Monte Carlo rows.
    """
    if not t > 0:
        raise ConfigurationError("t must be > 0", field="t")
    if not (isinstance(horizon, (int, np.integer)) and horizon >= 1):
        raise ConfigurationError("horizon must be an integer >= 1", field="horizon")
    if not replications >= 1:
        raise ConfigurationError("replications must be >= 1", field="replications")
    p_hat = np.empty(horizon, dtype=np.float64)
    for n in range(1, horizon + 1):
        stream = substream(master_seed, n - 1)
        exceed = 0
        done = 0
        block = max(1, CHUNK // n)
        while done < replications:
            take = min(replications - done, block)
            draws = dists.sample_array(spec, stream, take * n)
            dev = draws.reshape(take, n).sum(axis=1) / n - spec.mu
            exceed += int(np.count_nonzero(np.abs(dev) > t))
            done += take
        p_hat[n - 1] = exceed / replications
    return np.cumsum(p_hat)


def _abs_central_moment(spec: dists.DistributionSpec, p: float) -> float:
    """E|X - mu|^p, exact per family (quadrature only for non-integer cases)."""
    family = spec.family
    if family == "point_mass":
        return 0.0
    if family == "rademacher":
        return 1.0
    if family == "normal":
        return spec.sigma ** p * 2 ** (p / 2.0) * special.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)
    if family == "uniform":
        lo, hi = spec.params
        h = 0.5 * (hi - lo)
        return h ** p / (p + 1.0)
    if family == "finite_discrete":
        return sum(w * abs(v - spec.mu) ** p for v, w in spec.atoms)
    if family == "exponential":
        if p == 4.0:
            return 9.0 * spec.sigma2 * spec.sigma2
        inner, abserr = integrate.quad(
            lambda v: v ** p * math.exp(v - 1.0), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
        return spec.sigma ** p * (special.gamma(p + 1.0) / math.e + inner)
    if family == "lattice_counterexample":
        raise ConfigurationError(
            f"lattice family has no finite absolute moment of order {p} > 2",
            field="p")
    raise ConfigurationError(f"no moment formula for family {family!r}")


def rosenthal_ratio(spec: dists.DistributionSpec, n: int, p: float,
                    replications: int = 0, master_seed: int = 0) -> float:
    """E|S_n - n mu|^p over the two-term moment bound n E|X-mu|^p + n^(p/2) sigma^p.

    The ratio plays the role of an empirical bounding constant.  p = 4 uses the
    exact identity E(S_n - n mu)^4 = n m4 + 3 n (n-1) sigma^4 and needs no
    sampling; other p > 2 are estimated from ``replications`` row sums.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ConfigurationError("n must be an integer >= 1", field="n")
    if not p > 2:
        raise ConfigurationError("p must be > 2", field="p")
    m_p = _abs_central_moment(spec, float(p))
    denom = n * m_p + n ** (p / 2.0) * spec.sigma2 ** (p / 2.0)
    if p == 4.0:
        m4 = _abs_central_moment(spec, 4.0)
        numer = n * m4 + 3.0 * n * (n - 1.0) * spec.sigma2 * spec.sigma2
    else:
        if not replications >= 1:
            raise ConfigurationError(
                "replications must be >= 1 for Monte Carlo exponents",
                field="replications")
        stream = substream(master_seed, 0)
        sums = _rows_of_depth(spec, stream, int(n), replications)
        numer = float(np.mean(np.abs(sums - n * spec.mu) ** p))
    if numer == 0.0:
        return 0.0
    if denom == 0.0:
        raise NumericError("moment bound degenerate but numerator positive")
    return numer / denom
