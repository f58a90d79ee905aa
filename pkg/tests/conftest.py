"""Session-scoped simulation fixtures shared by the acceptance and module tests.

The heavy Monte Carlo runs are computed once per session; every consumer sees
the same frozen seeds, so expected values derived offline stay valid.
"""

import numpy as np
import pytest

from rowsumlab import distributions as dists
from rowsumlab import engine
from rowsumlab import functions as fns


def _t_array(results):
    return np.asarray([r.t_stat for r in results], dtype=np.float64)


@pytest.fixture(scope="session")
def exp_spec():
    return dists.exponential(1.0)


@pytest.fixture(scope="session")
def exp_linear_t(exp_spec):
    """10^4 replications of the identity-function statistic at n = 1000."""
    fs = fns.quadratic(0.0, 1.0, 0.0)
    cfg = engine.ExperimentConfig(
        spec=exp_spec, fs=fs, n=1000, replications=10**4, master_seed=42,
        collect_remainders=False)
    return _t_array(engine.run_experiment(cfg))


@pytest.fixture(scope="session")
def exp_log_t(exp_spec):
    """5000 log-statistic replications at n = 2000 (seed 42) and n = 200 (seed 43)."""
    fs = fns.natural_log(1.0)
    out = {}
    for n, seed in ((2000, 42), (200, 43)):
        cfg = engine.ExperimentConfig(
            spec=exp_spec, fs=fs, n=n, replications=5000, master_seed=seed,
            collect_remainders=False)
        out[n] = _t_array(engine.run_experiment(cfg))
    return out


@pytest.fixture(scope="session")
def exp_logprod(exp_spec):
    """Product-form runs: per n, (t_stat array, log(product_stat) array)."""
    fs = fns.log_product(1.0)
    out = {}
    for n, seed in ((2000, 42), (200, 43)):
        cfg = engine.ExperimentConfig(
            spec=exp_spec, fs=fs, n=n, replications=5000, master_seed=seed,
            centering="b_tilde", collect_product=True, collect_remainders=False)
        results = engine.run_experiment(cfg)
        t = _t_array(results)
        logp = np.log(np.asarray([r.product_stat for r in results]))
        out[n] = (t, logp)
    return out


@pytest.fixture(scope="session")
def exp_remainders(exp_spec):
    """Remainder samples (r1, r2 arrays), 2000 replications at n = 10^3 and 10^4."""
    fs = fns.natural_log(1.0)
    out = {}
    for n, seed in ((10**3, 101), (10**4, 102)):
        cfg = engine.ExperimentConfig(
            spec=exp_spec, fs=fs, n=n, replications=2000, master_seed=seed)
        results = engine.run_experiment(cfg)
        out[n] = (np.asarray([r.r1 for r in results]),
                  np.asarray([r.r2 for r in results]))
    return out
