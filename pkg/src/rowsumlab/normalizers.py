"""Deterministic normalizing sequences for the row-sum statistic.

For a law with mean mu, variance sigma^2 and truncated moments c_k, and a
function f, the statistic at depth n uses

    a_n = sqrt(log n)                                   (natural log)
    b_n = n f(mu) + (f''(mu)/2) * sum_{k<=n} c_k / k
    b~_n = n f(mu) + f''(mu) sigma^2 / 2 * log n

together with the cumulative tail weights

    Q_n  = sum_{k<=n} (sigma^2 - c_k) / k
    Q~_n = E |X-mu|^2 log+( n  ^  |X-mu|/sigma )        (capped log)

Q_n / sqrt(log n) -> 0 exactly when the simpler centering b~_n is admissible;
the heavy-tailed lattice family exists to break that decay, and its Q_n at the
astronomically large breakpoints n = floor(exp(M^(2+eps))) is evaluated through
the piecewise-constant tail structure plus harmonic-number asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import distributions as dists
from . import functions as fns
from .errors import ConfigurationError, NumericError

EULER_GAMMA = 0.5772156649015328606
_HARMONIC_DIRECT_LIMIT = 10_000_000
# log of the largest n whose floor(exp(.)) is exact in double precision
_LOG_EXACT_FLOOR = 36.0


def harmonic_number(n: int) -> float:
    """H_n by direct summation up to 1e7, Euler-Maclaurin asymptotic beyond."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise ConfigurationError("harmonic index must be a nonnegative integer", field="n")
    if n == 0:
        return 0.0
    if n <= _HARMONIC_DIRECT_LIMIT:
        return float(np.sum(1.0 / np.arange(1, n + 1, dtype=np.float64)))
    return harmonic_from_log(math.log(n))


def harmonic_from_log(log_n: float) -> float:
    """H_n from log n alone: log n + gamma + 1/(2n) - 1/(12 n^2).

    The asymptotic error is ~1/(120 n^4); in the regimes where this is used
    (n > 1e7) that is far below 1e-20.  For astronomically large n the 1/n
    terms underflow to zero, which is exact behavior.
    """
    inv = math.exp(-log_n) if log_n < 700.0 else 0.0
    return log_n + EULER_GAMMA + 0.5 * inv - inv * inv / 12.0


@dataclass(frozen=True)
class NormalizerTable:
    """Normalizing sequences evaluated on an ascending grid of depths n.

    ``c`` holds c_k for k = 1..max(n_grid); the per-n sequences are aligned
    with ``n_grid``.
    """

    n_grid: tuple[int, ...]
    a: np.ndarray
    c: np.ndarray
    b: np.ndarray
    b_tilde: np.ndarray
    q: np.ndarray
    q_tilde: np.ndarray

    def row(self, n: int) -> dict:
        try:
            i = self.n_grid.index(n)
        except ValueError:
            raise ConfigurationError(f"table was not built for n={n}", field="n") from None
        return {
            "n": n, "a_n": float(self.a[i]), "b_n": float(self.b[i]),
            "b_tilde_n": float(self.b_tilde[i]), "Q_n": float(self.q[i]),
            "Q_tilde_n": float(self.q_tilde[i]),
        }


def build_table(spec: dists.DistributionSpec, fs: fns.FunctionSpec, n_grid) -> NormalizerTable:
    """Compute every sequence on the grid; c is computed once and prefix-summed."""
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ConfigurationError("n_grid is empty", field="n_grid")
    if any(n < 1 for n in grid):
        raise ConfigurationError("grid depths must be >= 1", field="n_grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("n_grid must be sorted strictly ascending", field="n_grid")
    n_max = grid[-1]
    ks = np.arange(1, n_max + 1, dtype=np.float64)
    c = dists._truncated_array(spec, ks)
    tails = dists._tail_array(spec, ks)
    prefix_ck = np.cumsum(c / ks)
    prefix_tail = np.cumsum(tails / ks)

    f_mu = fns.eval(fs, spec.mu)
    d2_mu = fns.eval_d2(fs, spec.mu)
    idx = np.asarray(grid, dtype=np.int64) - 1
    n_arr = np.asarray(grid, dtype=np.float64)
    log_n = np.log(n_arr)
    a = np.sqrt(log_n)
    b = n_arr * f_mu + 0.5 * d2_mu * prefix_ck[idx]
    b_tilde = n_arr * f_mu + 0.5 * d2_mu * spec.sigma2 * log_n
    q = prefix_tail[idx]
    q_tilde = np.asarray([q_tilde_n(spec, n) for n in grid])
    return NormalizerTable(
        n_grid=tuple(grid), a=a, c=c, b=b, b_tilde=b_tilde, q=q, q_tilde=q_tilde,
    )


def q_n(spec: dists.DistributionSpec, n: int) -> float:
    """Q_n by direct summation of tail moments over k = 1..n."""
    if not n >= 1:
        raise ConfigurationError("n must be >= 1", field="n")
    ks = np.arange(1, int(n) + 1, dtype=np.float64)
    return float(np.sum(dists._tail_array(spec, ks) / ks))


def _q_tilde_exponential(spec, n: int) -> float:
    # scale-free: |X-mu|/sigma = |Y-1| with Y ~ Exp(1); the capped log is zero
    # on y in [0, 2], the cap binds beyond y = 1+n where the integral has a
    # closed form, and the middle piece is quadrature.
    log_n = math.log(n)
    hi = min(1.0 + n, 710.0)
    value = 0.0
    if hi > 2.0:
        value += _quad_checked(
            lambda y: (y - 1.0) ** 2 * math.log(min(float(n), y - 1.0)) * math.exp(-y),
            2.0, hi)
    if 1.0 + n < 710.0:
        a = 1.0 + n
        value += log_n * math.exp(-a) * (a * a + 1.0)
    return spec.sigma2 * value


def _q_tilde_normal(spec, n: int) -> float:
    # E Z^2 log+(n ^ |Z|): zero on |Z| <= 1, cap binds beyond |Z| = n.
    from scipy import special
    hi = min(float(n), 45.0)
    value = 0.0
    if hi > 1.0:
        value += 2.0 * _quad_checked(
            lambda z: z * z * math.log(min(float(n), z)) * math.exp(-0.5 * z * z)
            / math.sqrt(2.0 * math.pi),
            1.0, hi)
    if n < 45:
        k = float(n)
        phi = math.exp(-0.5 * k * k) / math.sqrt(2.0 * math.pi)
        value += math.log(n) * (special.erfc(k / math.sqrt(2.0)) + 2.0 * k * phi)
    return spec.sigma2 * value


def _q_tilde_uniform(spec, n: int) -> float:
    # |X-mu| is uniform on (0, h); the positive log part lives on (sigma, h).
    lo, hi = spec.params
    h = 0.5 * (hi - lo)
    sigma = spec.sigma
    return _quad_checked(
        lambda u: u * u * math.log(max(1.0, min(float(n), u / sigma))) / h,
        sigma, h)


def _quad_checked(fn, lo: float, hi: float) -> float:
    out = integrate.quad(fn, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=400,
                         full_output=True)
    value, abserr = out[0], out[1]
    if len(out) > 3:
        raise NumericError("capped-log moment quadrature failed", achieved=abserr)
    return value


def q_tilde_n(spec: dists.DistributionSpec, n: int) -> float:
    """Q~_n = E|X-mu|^2 log+(n ^ |X-mu|/sigma).

    Exact atom sums for discrete families, quadrature with the cap inside the
    integrand for continuous ones.
    """
    if not n >= 1:
        raise ConfigurationError("n must be >= 1", field="n")
    n = int(n)
    family = spec.family
    if family in ("point_mass", "rademacher"):
        return 0.0  # |X-mu|/sigma <= 1 everywhere, the positive log part is empty
    if family == "finite_discrete":
        if spec.sigma2 == 0.0:
            return 0.0
        log_n = math.log(n)
        total = 0.0
        for v, p in spec.atoms:
            d = abs(v - spec.mu)
            ratio = d / spec.sigma
            if ratio > 1.0:
                total += p * d * d * min(log_n, math.log(ratio))
        return total
    if family == "lattice_counterexample":
        table = spec.lattice
        log_n = math.log(n)
        m_count = len(table.log_atoms)
        total = 0.0
        for m, log_atom in enumerate(table.log_atoms, start=1):
            total += dists._LATTICE_C * min(log_n, log_atom) / (m * m)
        total += dists._LATTICE_C * log_n * dists.zeta2_tail(m_count + 1)
        return total
    if family == "exponential":
        return _q_tilde_exponential(spec, n)
    if family == "normal":
        return _q_tilde_normal(spec, n)
    if family == "uniform":
        return _q_tilde_uniform(spec, n)
    raise ConfigurationError(f"no capped-log moment for family {family!r}")


def counterexample_q_breakdown(epsilon: float, m: int) -> tuple[float, float, float]:
    """(log n, Q_n, Q_n/sqrt(log n)) at n = floor(exp(m^(2+eps))).

    Piecewise-constant tails between atom breakpoints reduce Q_n to
    sum_j T_j (H_{e_j} - H_{e_{j-1}}) with e_j = floor(k_j).  Harmonic numbers
    use direct summation up to 1e7 and the asymptotic beyond; breakpoints whose
    floor is no longer exact in double precision (exponent > 36) use the
    exponent itself as log n, an error below exp(-36) in relative terms.
    """
    if not (isinstance(m, (int, np.integer)) and m >= 2):
        raise ConfigurationError("M must be an integer >= 2", field="M")
    table = dists.counterexample_tail_table(epsilon, int(m))
    q = 0.0
    h_prev = 0.0
    log_e = 0.0
    for tail, log_atom in zip(table.tail_second_moments, table.log_atoms):
        if log_atom <= _LOG_EXACT_FLOOR:
            e = math.floor(math.exp(log_atom))
            h = harmonic_number(e)
            log_e = math.log(e)
        else:
            h = harmonic_from_log(log_atom)
            log_e = log_atom
        q += tail * (h - h_prev)
        h_prev = h
    return log_e, q, q / math.sqrt(log_e)


def counterexample_q_ratio(epsilon: float, m: int) -> float:
    """Q_n / sqrt(log n) at the m-th atom breakpoint; grows like m^(eps/2)."""
    return counterexample_q_breakdown(epsilon, m)[2]
