"""The function f applied to normalized row sums, with its derivative bundle.

Each FunctionSpec supplies f, f', f'' analytically (never by numeric
differentiation) plus a bound on |f'''| valid on a stated neighborhood of the
anchor point.  The log-product kind mu*log(x/mu) is the specialization whose
row-sum statistic is the logarithm of the normalized product of row sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, OutOfNeighborhoodError


@dataclass(frozen=True)
class FunctionSpec:
    """f with analytic first/second derivatives and a third-derivative bound.

    ``third_derivative_bound`` is sup |f'''| on
    (center - neighborhood_radius, center + neighborhood_radius) intersected
    with the domain.  ``closed_domain`` controls whether the endpoints belong
    to the domain (true for windowed polynomials, false for log-type kinds).
    """

    kind: str
    domain_lo: float
    domain_hi: float
    third_derivative_bound: float
    neighborhood_radius: float
    center: float
    closed_domain: bool = False
    _f: Callable = field(repr=False, compare=False, default=None)
    _d1: Callable = field(repr=False, compare=False, default=None)
    _d2: Callable = field(repr=False, compare=False, default=None)


def natural_log(mu: float) -> FunctionSpec:
    """f(x) = log x on (0, inf), neighborhood anchored at mu."""
    if not mu > 0:
        raise ConfigurationError("natural log needs an anchor mu > 0", field="mu")
    mu = float(mu)
    radius = mu / 2.0
    return FunctionSpec(
        kind="natural_log", domain_lo=0.0, domain_hi=math.inf,
        third_derivative_bound=2.0 / (mu - radius) ** 3,
        neighborhood_radius=radius, center=mu,
        _f=np.log, _d1=lambda x: 1.0 / x, _d2=lambda x: -1.0 / (x * x),
    )


def log_product(mu: float) -> FunctionSpec:
    """f(x) = mu * log(x/mu): f(mu) = 0, f'(mu) = 1, f''(mu) = -1/mu."""
    if not mu > 0:
        raise ConfigurationError("log product needs mu > 0", field="mu")
    mu = float(mu)
    radius = mu / 2.0
    return FunctionSpec(
        kind="log_product", domain_lo=0.0, domain_hi=math.inf,
        third_derivative_bound=2.0 * mu / (mu - radius) ** 3,
        neighborhood_radius=radius, center=mu,
        _f=lambda x: mu * np.log(x / mu),
        _d1=lambda x: mu / x,
        _d2=lambda x: -mu / (x * x),
    )


def quadratic(a: float, b: float, c: float) -> FunctionSpec:
    """f(x) = a x^2 + b x + c on all reals; f''' = 0."""
    a, b, c = float(a), float(b), float(c)
    return FunctionSpec(
        kind="quadratic", domain_lo=-math.inf, domain_hi=math.inf,
        third_derivative_bound=0.0, neighborhood_radius=math.inf, center=0.0,
        _f=lambda x: (a * x + b) * x + c,
        _d1=lambda x: 2.0 * a * x + b * np.ones_like(np.asarray(x, dtype=np.float64)),
        _d2=lambda x: 2.0 * a * np.ones_like(np.asarray(x, dtype=np.float64)),
    )


def cubic_window(coeffs, window, center: float) -> FunctionSpec:
    """Cubic polynomial restricted to a closed window [lo, hi].

    coeffs = (c3, c2, c1, c0); |f'''| = 6|c3| everywhere, so the bound holds on
    the full window and the neighborhood radius is the distance from center to
    the nearer endpoint.
    """
    try:
        c3, c2, c1, c0 = (float(v) for v in coeffs)
    except (TypeError, ValueError):
        raise ConfigurationError("coeffs must be four numbers (c3, c2, c1, c0)",
                                 field="coeffs") from None
    try:
        lo, hi = (float(v) for v in window)
    except (TypeError, ValueError):
        raise ConfigurationError("window must be a (lo, hi) pair", field="window") from None
    if not lo < hi:
        raise ConfigurationError("window lo must be < hi", field="window")
    center = float(center)
    if not lo < center < hi:
        raise ConfigurationError("center must lie strictly inside the window",
                                 field="center")
    return FunctionSpec(
        kind="cubic_window", domain_lo=lo, domain_hi=hi,
        third_derivative_bound=6.0 * abs(c3),
        neighborhood_radius=min(center - lo, hi - center), center=center,
        closed_domain=True,
        _f=lambda x: ((c3 * x + c2) * x + c1) * x + c0,
        _d1=lambda x: (3.0 * c3 * x + 2.0 * c2) * x + c1,
        _d2=lambda x: 6.0 * c3 * x + 2.0 * c2,
    )


def custom(f, d1, d2, third_derivative_bound: float, neighborhood_radius: float,
           center: float, domain_lo: float = -math.inf,
           domain_hi: float = math.inf, closed_domain: bool = False) -> FunctionSpec:
    """User-supplied evaluator triple with an explicit |f'''| bound."""
    if not third_derivative_bound >= 0:
        raise ConfigurationError("third_derivative_bound must be >= 0",
                                 field="third_derivative_bound")
    if not neighborhood_radius > 0:
        raise ConfigurationError("neighborhood_radius must be > 0",
                                 field="neighborhood_radius")
    return FunctionSpec(
        kind="custom", domain_lo=float(domain_lo), domain_hi=float(domain_hi),
        third_derivative_bound=float(third_derivative_bound),
        neighborhood_radius=float(neighborhood_radius), center=float(center),
        closed_domain=closed_domain, _f=f, _d1=d1, _d2=d2,
    )


def contains_array(fs: FunctionSpec, x: np.ndarray) -> np.ndarray:
    """Boolean mask of points inside f's domain."""
    x = np.asarray(x, dtype=np.float64)
    if fs.closed_domain:
        return (x >= fs.domain_lo) & (x <= fs.domain_hi)
    return (x > fs.domain_lo) & (x < fs.domain_hi)


def _check_domain(fs: FunctionSpec, x: float) -> None:
    if not bool(contains_array(fs, np.asarray([x]))[0]):
        raise DomainError(float(x), fs.domain_lo, fs.domain_hi)


def eval_array(fs: FunctionSpec, x: np.ndarray) -> np.ndarray:
    """Vectorized f over points the caller has already domain-checked."""
    return np.asarray(fs._f(np.asarray(x, dtype=np.float64)), dtype=np.float64)


def eval(fs: FunctionSpec, x: float) -> float:  # noqa: A001 - spec-named operation
    _check_domain(fs, x)
    return float(fs._f(np.float64(x)))


def eval_d1(fs: FunctionSpec, x: float) -> float:
    _check_domain(fs, x)
    return float(fs._d1(np.float64(x)))


def eval_d2(fs: FunctionSpec, x: float) -> float:
    _check_domain(fs, x)
    return float(fs._d2(np.float64(x)))


def taylor_remainder_bound(fs: FunctionSpec, x: float, mu: float) -> float:
    """Upper bound for |f(x) - f(mu) - f'(mu)(x-mu) - f''(mu)(x-mu)^2/2|.

    Valid only inside the stated neighborhood; outside it the caller must
    handle the event explicitly (the simulation engine counts such rows).
    """
    gap = abs(float(x) - float(mu))
    if gap >= fs.neighborhood_radius:
        raise OutOfNeighborhoodError(float(x), float(mu), fs.neighborhood_radius)
    return fs.third_derivative_bound / 6.0 * gap ** 3
