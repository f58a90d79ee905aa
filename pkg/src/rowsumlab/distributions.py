"""Sampleable distribution families with exact moment bookkeeping.

Every family carries its exact mean, variance, and closed-form truncated
second central moments c_k = E|X-mu|^2 1{|X-mu| <= sigma*k}.  A heavy-tailed
lattice family (atoms at +-exp(m^(2+eps))) is handled in log space because its
atom values dwarf double precision; it exists to violate the square-root
log-moment condition E X^2 (log+ |X|)^(1/2) < inf while keeping mu=0, sigma=1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, NumericError, SamplingOverflowError

_ZETA2 = math.pi * math.pi / 6.0
_LATTICE_C = 6.0 / (math.pi * math.pi)
_LOG_MAX_DOUBLE = math.log(np.finfo(np.float64).max)  # ~709.78
_ZETA_DIRECT_TERMS = 1_000_000

_zeta_tail_cache: dict[int, float] = {}


def zeta2_tail(m: int) -> float:
    """Sum_{j>=m} 1/j^2 by direct summation plus a midpoint integral remainder.

    The remainder 1/(J+0.5) after J direct terms is accurate to ~1/(12 J^3),
    far below 1e-14 for J = 1e6.
    """
    if m < 1:
        raise ConfigurationError("zeta tail index must be >= 1")
    hit = _zeta_tail_cache.get(m)
    if hit is not None:
        return hit
    j = np.arange(m, m + _ZETA_DIRECT_TERMS, dtype=np.float64)
    value = float(np.sum(1.0 / (j * j))) + 1.0 / (m + _ZETA_DIRECT_TERMS - 0.5)
    _zeta_tail_cache[m] = value
    return value


class RandomStream:
    """Counting wrapper around a numpy Generator.

    One "draw" is one variate requested from the stream, the unit the engine's
    draw-accounting contract is stated in.  All sampling goes through this
    wrapper so tests can assert exact draw counts.
    """

    def __init__(self, generator: np.random.Generator):
        self.generator = generator
        self.draws = 0

    def tally(self, size: int) -> None:
        self.draws += int(size)

    def standard_exponential(self, size: int) -> np.ndarray:
        self.tally(size)
        return self.generator.standard_exponential(size)

    def normal(self, loc: float, scale: float, size: int) -> np.ndarray:
        self.tally(size)
        return self.generator.normal(loc, scale, size)

    def uniform(self, lo: float, hi: float, size: int) -> np.ndarray:
        self.tally(size)
        return self.generator.uniform(lo, hi, size)

    def signs(self, size: int) -> np.ndarray:
        """Uniform +-1 values."""
        self.tally(size)
        return self.generator.integers(0, 2, size=size).astype(np.float64) * 2.0 - 1.0

    def random(self, size: int) -> np.ndarray:
        self.tally(size)
        return self.generator.random(size)


@dataclass(frozen=True)
class LatticeAtomTable:
    """Log-space description of the heavy-tailed lattice family.

    Atom m sits at |x| = exp(m^(2+eps)) with
    ln P(|X| = k_m) = ln C - 2 m^(2+eps) - 2 ln m,  C = 6/pi^2.
    ``tail_second_moments[m-1]`` is E X^2 1{|X| > k} for any k in
    [k_{m-1}, k_m), which equals C * sum_{j>=m} 1/j^2.
    """

    epsilon: float
    log_atoms: tuple[float, ...]
    atom_log_probs: tuple[float, ...]
    tail_second_moments: tuple[float, ...]


def counterexample_tail_table(epsilon: float, m_max: int) -> LatticeAtomTable:
    """Build the lattice family's breakpoint table for atoms m = 1..m_max."""
    if not (isinstance(epsilon, (int, float)) and epsilon > 0):
        raise ConfigurationError("epsilon must be > 0", field="epsilon")
    if not (isinstance(m_max, int) and m_max >= 2):
        raise ConfigurationError("m_max must be an integer >= 2", field="m_max")
    log_c = math.log(_LATTICE_C)
    exps = [float(m) ** (2.0 + epsilon) for m in range(1, m_max + 1)]
    log_probs = [log_c - 2.0 * e - 2.0 * math.log(m) for m, e in zip(range(1, m_max + 1), exps)]
    tails = [_LATTICE_C * zeta2_tail(m) for m in range(1, m_max + 1)]
    return LatticeAtomTable(
        epsilon=float(epsilon),
        log_atoms=tuple(exps),
        atom_log_probs=tuple(log_probs),
        tail_second_moments=tuple(tails),
    )


def lattice_zero_probability(table: LatticeAtomTable) -> float:
    """P(X = 0): complement of the total atom mass, accumulated in log space."""
    log_mass = float(np.logaddexp.reduce(np.asarray(table.atom_log_probs)))
    p0 = -math.expm1(log_mass)
    if not (0.0 < p0 < 1.0):
        raise NumericError(f"lattice zero-atom probability {p0!r} outside (0, 1)")
    return p0


def lattice_sampling_atoms(table: LatticeAtomTable) -> tuple[np.ndarray, np.ndarray]:
    """Signed atom values and cumulative probabilities for inverse-CDF sampling.

    Refuses any atom that has strictly positive double-precision probability
    but a value beyond double range.  (For this family that combination is
    impossible: a value overflow at m forces ln p < -1419, which underflows to
    exactly 0.0, so the guard is defensive.)
    """
    values = []
    probs = []
    for log_atom, log_p in zip(table.log_atoms, table.atom_log_probs):
        p = math.exp(log_p)
        if p == 0.0:
            continue
        if log_atom > _LOG_MAX_DOUBLE:
            raise SamplingOverflowError(
                f"atom at ln|x| = {log_atom:.6g} exceeds double range but has "
                f"probability {p:.3e}; use analytic mode (moment/tail queries) instead"
            )
        values.append(math.exp(log_atom))
        probs.append(p)
    zero_p = lattice_zero_probability(table)
    signed_values = [-v for v in reversed(values)] + [0.0] + values
    signed_probs = [0.5 * p for p in reversed(probs)] + [zero_p] + [0.5 * p for p in probs]
    cum = np.cumsum(np.asarray(signed_probs))
    cum[-1] = 1.0
    return np.asarray(signed_values), cum


@dataclass(frozen=True)
class DistributionSpec:
    """A law with exact mean/variance and truncated-moment closed forms.

    gamma is sigma/mu, or None when mu = 0 (the coefficient is undefined).
    log_moment_finite states analytically whether E X^2 (log+ |X|)^(1/2) is
    finite; it is an attribute of the family, never a numerical estimate.
    """

    family: str
    params: tuple[float, ...]
    mu: float
    sigma2: float
    gamma: float | None
    positive_support: bool
    log_moment_finite: bool
    atoms: tuple[tuple[float, float], ...] | None = None
    lattice: LatticeAtomTable | None = None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def point_mass(value: float) -> DistributionSpec:
    value = float(value)
    return DistributionSpec(
        family="point_mass", params=(value,), mu=value, sigma2=0.0,
        gamma=(0.0 if value != 0 else None), positive_support=value > 0,
        log_moment_finite=True,
    )


def rademacher() -> DistributionSpec:
    return DistributionSpec(
        family="rademacher", params=(), mu=0.0, sigma2=1.0, gamma=None,
        positive_support=False, log_moment_finite=True,
    )


def exponential(rate: float) -> DistributionSpec:
    if not rate > 0:
        raise ConfigurationError("rate must be > 0", field="rate")
    rate = float(rate)
    mu = 1.0 / rate
    return DistributionSpec(
        family="exponential", params=(rate,), mu=mu, sigma2=1.0 / rate ** 2,
        gamma=1.0, positive_support=True, log_moment_finite=True,
    )


def uniform(lo: float, hi: float) -> DistributionSpec:
    if not lo < hi:
        raise ConfigurationError("lo must be < hi", field="lo")
    lo, hi = float(lo), float(hi)
    mu = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    sigma2 = h * h / 3.0
    return DistributionSpec(
        family="uniform", params=(lo, hi), mu=mu, sigma2=sigma2,
        gamma=(math.sqrt(sigma2) / mu if mu != 0 else None),
        positive_support=lo >= 0, log_moment_finite=True,
    )


def normal(mean: float, sd: float) -> DistributionSpec:
    if not sd >= 0:
        raise ConfigurationError("sd must be >= 0", field="sd")
    if sd == 0:
        return point_mass(mean)
    mean, sd = float(mean), float(sd)
    return DistributionSpec(
        family="normal", params=(mean, sd), mu=mean, sigma2=sd * sd,
        gamma=(sd / mean if mean != 0 else None),
        positive_support=False, log_moment_finite=True,
    )


def lattice_counterexample(epsilon: float, m_max: int = 64) -> DistributionSpec:
    table = counterexample_tail_table(epsilon, m_max)
    return DistributionSpec(
        family="lattice_counterexample", params=(float(epsilon),),
        mu=0.0, sigma2=1.0, gamma=None,
        positive_support=False, log_moment_finite=False, lattice=table,
    )


def finite_discrete(atoms) -> DistributionSpec:
    cleaned = []
    total = 0.0
    for i, pair in enumerate(atoms):
        try:
            v, p = pair
        except (TypeError, ValueError):
            raise ConfigurationError(
                "each atom must be a (value, probability) pair", field=f"atoms[{i}]"
            ) from None
        v, p = float(v), float(p)
        if not p > 0:
            raise ConfigurationError("probabilities must be > 0", field=f"atoms[{i}]")
        cleaned.append((v, p))
        total += p
    if not cleaned:
        raise ConfigurationError("atom list is empty", field="atoms")
    if abs(total - 1.0) > 1e-12:
        raise ConfigurationError(
            f"probabilities sum to {total!r}, not 1 within 1e-12", field="atoms"
        )
    mu = sum(v * p for v, p in cleaned)
    sigma2 = sum(p * (v - mu) ** 2 for v, p in cleaned)
    return DistributionSpec(
        family="finite_discrete", params=(), mu=mu, sigma2=sigma2,
        gamma=(math.sqrt(sigma2) / mu if mu != 0 else None),
        positive_support=all(v > 0 for v, _ in cleaned),
        log_moment_finite=True, atoms=tuple(cleaned),
    )


_FAMILY_BUILDERS = {
    "point_mass": (point_mass, ("value",)),
    "rademacher": (rademacher, ()),
    "exponential": (exponential, ("rate",)),
    "uniform": (uniform, ("lo", "hi")),
    "normal": (normal, ("mean", "sd")),
    "lattice_counterexample": (lattice_counterexample, ("epsilon",)),
    "finite_discrete": (finite_discrete, ("atoms",)),
}


def make_spec(descriptor: dict) -> DistributionSpec:
    """Build a DistributionSpec from a tagged record, e.g.

        {"family": "exponential", "rate": 1.0}
    """
    if not isinstance(descriptor, dict):
        raise ConfigurationError("distribution descriptor must be a mapping")
    desc = dict(descriptor)
    family = desc.pop("family", None)
    if family not in _FAMILY_BUILDERS:
        known = ", ".join(sorted(_FAMILY_BUILDERS))
        raise ConfigurationError(
            f"unknown family {family!r} (expected one of: {known})", field="family"
        )
    builder, fields = _FAMILY_BUILDERS[family]
    kwargs = {}
    for name in fields:
        if name not in desc:
            raise ConfigurationError("missing required field", field=name)
        kwargs[name] = desc.pop(name)
    if desc:
        extra = sorted(desc)
        raise ConfigurationError(
            f"unknown field(s) for family {family!r}: {', '.join(extra)}",
            field=extra[0],
        )
    return builder(**kwargs)


# ---------------------------------------------------------------------------
# Sampling


def sample_array(spec: DistributionSpec, stream: RandomStream, size: int) -> np.ndarray:
    """Draw ``size`` iid variates; consumes exactly ``size`` draws."""
    family = spec.family
    if family == "point_mass":
        stream.tally(size)
        return np.full(size, spec.params[0])
    if family == "rademacher":
        return stream.signs(size)
    if family == "exponential":
        return stream.standard_exponential(size) / spec.params[0]
    if family == "uniform":
        return stream.uniform(spec.params[0], spec.params[1], size)
    if family == "normal":
        return stream.normal(spec.params[0], spec.params[1], size)
    if family == "finite_discrete":
        values = np.asarray([v for v, _ in spec.atoms])
        cum = np.cumsum(np.asarray([p for _, p in spec.atoms]))
        cum[-1] = 1.0
        idx = np.searchsorted(cum, stream.random(size), side="right")
        return values[idx]
    if family == "lattice_counterexample":
        values, cum = lattice_sampling_atoms(spec.lattice)
        idx = np.searchsorted(cum, stream.random(size), side="right")
        return values[idx]
    raise ConfigurationError(f"unknown family {family!r}", field="family")


def sample(spec: DistributionSpec, stream: RandomStream) -> float:
    """One draw from the law."""
    return float(sample_array(spec, stream, 1)[0])


# ---------------------------------------------------------------------------
# Truncated / tail second central moments
#
# c_k = E|X-mu|^2 1{|X-mu| <= sigma k}; the threshold always uses the exact
# sigma of the spec.  Each family gets a closed form; the tail sigma^2 - c_k is
# computed by its own closed form where naive subtraction would cancel.


def _validate_k(k) -> None:
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ConfigurationError("k must be an integer >= 1", field="k")


def _truncated_array(spec: DistributionSpec, ks: np.ndarray) -> np.ndarray:
    """Vectorized c_k over an integer array ks (closed forms)."""
    ks = np.asarray(ks, dtype=np.float64)
    family = spec.family
    if family == "point_mass":
        return np.zeros_like(ks)
    if family == "rademacher":
        return np.ones_like(ks)
    if family == "exponential":
        a = 1.0 + ks
        return spec.sigma2 * (1.0 - np.exp(-a) * (a * a + 1.0))
    if family == "normal":
        phi = np.exp(-0.5 * ks * ks) / math.sqrt(2.0 * math.pi)
        return spec.sigma2 * (special.erf(ks / math.sqrt(2.0)) - 2.0 * ks * phi)
    if family == "uniform":
        lo, hi = spec.params
        h = 0.5 * (hi - lo)
        u = np.minimum(h, spec.sigma * ks)
        return u ** 3 / (3.0 * h)
    if family == "finite_discrete":
        out = np.zeros_like(ks)
        for v, p in spec.atoms:
            d = abs(v - spec.mu)
            out += np.where(d <= spec.sigma * ks, p * d * d, 0.0)
        return out
    if family == "lattice_counterexample":
        return 1.0 - _lattice_tail_array(spec.lattice, ks)
    raise ConfigurationError(f"unknown family {family!r}", field="family")


def _tail_array(spec: DistributionSpec, ks: np.ndarray) -> np.ndarray:
    """Vectorized sigma^2 - c_k by closed forms that avoid cancellation."""
    ks = np.asarray(ks, dtype=np.float64)
    family = spec.family
    if family in ("point_mass", "rademacher"):
        return np.zeros_like(ks)
    if family == "exponential":
        a = 1.0 + ks
        return spec.sigma2 * np.exp(-a) * (a * a + 1.0)
    if family == "normal":
        phi = np.exp(-0.5 * ks * ks) / math.sqrt(2.0 * math.pi)
        return spec.sigma2 * (special.erfc(ks / math.sqrt(2.0)) + 2.0 * ks * phi)
    if family == "uniform":
        lo, hi = spec.params
        h = 0.5 * (hi - lo)
        u = np.minimum(h, spec.sigma * ks)
        return (h ** 3 - u ** 3) / (3.0 * h)
    if family == "finite_discrete":
        out = np.zeros_like(ks)
        for v, p in spec.atoms:
            d = abs(v - spec.mu)
            out += np.where(d > spec.sigma * ks, p * d * d, 0.0)
        return out
    if family == "lattice_counterexample":
        return _lattice_tail_array(spec.lattice, ks)
    raise ConfigurationError(f"unknown family {family!r}", field="family")


def _lattice_tail_array(table: LatticeAtomTable, ks: np.ndarray) -> np.ndarray:
    """E X^2 1{|X| > k}: piecewise constant between consecutive atoms.

    The tail at k is C * sum_{j >= m*} 1/j^2 with m* the first atom above k,
    i.e. the smallest m with m^(2+eps) > ln k.
    """
    log_k = np.log(np.asarray(ks, dtype=np.float64))
    idx = np.searchsorted(np.asarray(table.log_atoms), log_k, side="right")
    if np.any(idx >= len(table.tail_second_moments)):
        raise ConfigurationError(
            "k beyond the built atom table; rebuild with a larger m_max", field="k"
        )
    return np.asarray(table.tail_second_moments)[idx]


def _pdf(spec: DistributionSpec, x: np.ndarray) -> np.ndarray:
    family = spec.family
    if family == "exponential":
        rate = spec.params[0]
        return np.where(x >= 0, rate * np.exp(-rate * np.maximum(x, 0.0)), 0.0)
    if family == "normal":
        mean, sd = spec.params
        z = (x - mean) / sd
        return np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))
    if family == "uniform":
        lo, hi = spec.params
        return np.where((x >= lo) & (x <= hi), 1.0 / (hi - lo), 0.0)
    raise ConfigurationError(f"no density for family {family!r}")


_QUAD_ABS_TOL = 1e-10


def _quad(fn, lo: float, hi: float, points=None) -> float:
    kwargs = dict(epsabs=_QUAD_ABS_TOL, epsrel=1e-12, limit=400, full_output=True)
    if points is not None and np.isfinite(lo) and np.isfinite(hi):
        pts = [p for p in points if lo < p < hi]
        if pts:
            kwargs["points"] = pts
    out = integrate.quad(fn, lo, hi, **kwargs)
    value, abserr = out[0], out[1]
    if len(out) > 3:
        raise NumericError("adaptive quadrature failed to converge", achieved=abserr)
    if abserr > 1e-8:
        raise NumericError("adaptive quadrature tolerance not reached", achieved=abserr)
    return value


def truncated_moment_quadrature(spec: DistributionSpec, k: int) -> float:
    """Generic quadrature route for c_k (continuous families).

    Exists alongside the closed forms so the two can cross-check each other;
    the closed form is the production path for every built-in family.
    """
    _validate_k(k)
    mu, s = spec.mu, spec.sigma
    lo, hi = mu - s * k, mu + s * k
    if spec.family == "exponential":
        lo = max(lo, 0.0)
    if spec.family == "uniform":
        lo = max(lo, spec.params[0])
        hi = min(hi, spec.params[1])
    return _quad(lambda x: (x - mu) ** 2 * float(_pdf(spec, np.asarray(x))), lo, hi,
                 points=[mu])


def truncated_second_central_moment(spec: DistributionSpec, k: int) -> float:
    """c_k = E|X-mu|^2 1{|X-mu| <= sigma k}; nondecreasing in k, <= sigma^2."""
    _validate_k(k)
    if spec.family in ("exponential", "normal", "uniform", "rademacher",
                       "point_mass", "finite_discrete", "lattice_counterexample"):
        return float(_truncated_array(spec, np.asarray([k]))[0])
    return truncated_moment_quadrature(spec, k)


def tail_second_central_moment(spec: DistributionSpec, k: int) -> float:
    """sigma^2 - c_k; nonincreasing in k, -> 0 whenever sigma^2 < inf."""
    _validate_k(k)
    return float(_tail_array(spec, np.asarray([k]))[0])
