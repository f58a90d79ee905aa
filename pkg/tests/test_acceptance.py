"""Acceptance gate: ten pinned criteria, one printed verdict line each.

Every test prints "[criterion NN] PASS/FAIL: ..." with its measured values
and pinned tolerances before asserting, so the scoreboard is visible in the
test log even where a criterion is red.  Three legs fail by design at the
pinned tolerances (criteria 2, 3, and 5); they are kept failing rather than
loosened.  See README for the analysis.
"""

import json
import math
import subprocess
import sys
from fractions import Fraction

import numpy as np

from rowsumlab import distributions as dists
from rowsumlab import engine
from rowsumlab import functions as fns
from rowsumlab import normalizers as norms
from rowsumlab import stats


def _verdict(num: int, ok: bool, detail: str) -> bool:
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def _iqr(x):
    return float(np.percentile(x, 75) - np.percentile(x, 25))


def test_criterion_01_linear_function_sanity(exp_linear_t):
    t = exp_linear_t
    var = float(np.var(t, ddof=1))
    ks, _ = stats.ks_one_sample(t, 0.0, 1.0)
    ok = 0.85 <= var <= 1.15 and ks < 0.03
    assert _verdict(
        1, ok,
        f"exp(1), f(x)=x, n=1000, reps=10^4: var={var:.6f} (need [0.85, 1.15]), "
        f"KS={ks:.6f} (need < 0.03)")


def test_criterion_02_log_function_distribution(exp_log_t):
    ks_big, _ = stats.ks_one_sample(exp_log_t[2000], 0.0, 1.0)
    ks_small, _ = stats.ks_one_sample(exp_log_t[200], 0.0, 1.0)
    band = ks_big < 0.06
    direction = ks_big < ks_small
    assert _verdict(
        2, band and direction,
        f"exp(1), f=log, 5000 reps: KS(n=2000)={ks_big:.6f} (need < 0.06, "
        f"band leg {'ok' if band else 'RED'}), KS(n=200)={ks_small:.6f} "
        f"(decrease leg {'ok' if direction else 'RED'})")


def test_criterion_03_product_sum_identity(exp_logprod):
    gaps = [float(np.max(np.abs(logp - t))) for t, logp in exp_logprod.values()]
    gap = max(gaps)
    ks_big, _ = stats.ks_one_sample(exp_logprod[2000][1], 0.0, 1.0)
    ks_small, _ = stats.ks_one_sample(exp_logprod[200][1], 0.0, 1.0)
    identity = gap < 1e-10
    band = ks_big < 0.06
    direction = ks_big < ks_small
    assert _verdict(
        3, identity and band and direction,
        f"log(product) vs sum form: max gap={gap:.3e} (need < 1e-10, "
        f"{'ok' if identity else 'RED'}); KS(n=2000)={ks_big:.6f} (need < 0.06, "
        f"{'ok' if band else 'RED'}), KS(n=200)={ks_small:.6f} "
        f"(decrease leg {'ok' if direction else 'RED'})")


def test_criterion_04_centering_gap_decay(exp_spec):
    grid = [10**3, 10**4, 10**5, 10**6]
    cases = {
        "exp(1)/log": (exp_spec, fns.natural_log(1.0)),
        "N(0,1)/quadratic": (dists.normal(0.0, 1.0), fns.quadratic(0.5, 0.0, 0.0)),
    }
    details = []
    ok = True
    for label, (spec, fs) in cases.items():
        table = norms.build_table(spec, fs, grid)
        q_scaled, gap_scaled = [], []
        for n in grid:
            row = table.row(n)
            root = math.sqrt(math.log(n))
            q_scaled.append(row["Q_n"] / root)
            gap_scaled.append(abs(row["b_tilde_n"] - row["b_n"]) / root)
        q_dec = all(b < a for a, b in zip(q_scaled, q_scaled[1:]))
        g_dec = all(b < a for a, b in zip(gap_scaled, gap_scaled[1:]))
        ok = ok and q_dec and g_dec
        details.append(
            f"{label}: Q/sqrt(log n) {q_scaled[0]:.4f}->{q_scaled[-1]:.4f} "
            f"{'strictly dec' if q_dec else 'NOT dec'}, |b_tilde-b|/sqrt(log n) "
            f"{gap_scaled[0]:.4f}->{gap_scaled[-1]:.4f} "
            f"{'strictly dec' if g_dec else 'NOT dec'}")
    assert _verdict(4, ok, "; ".join(details) + " over n in {1e3..1e6}")


def test_criterion_05_counterexample_divergence():
    ratios = [norms.counterexample_q_ratio(0.5, m) for m in range(2, 9)]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    growth = ratios[-1] / ratios[0]

    # Brute-force oracle at M=2: n = floor(exp(2^2.5)) = 286, every tail
    # weight summed term by term, no breakpoint shortcuts.
    spec = dists.lattice_counterexample(0.5)
    n = math.floor(math.exp(2.0 ** 2.5))
    brute = sum(
        dists.tail_second_central_moment(spec, k) / k for k in range(1, n + 1))
    brute /= math.sqrt(math.log(n))
    match = abs(ratios[0] - brute) < 1e-6

    ok = increasing and growth > 3.0 and match
    assert _verdict(
        5, ok,
        f"ratio(M) for M=2..8: {ratios[0]:.6f}..{ratios[-1]:.6f} "
        f"({'strictly inc' if increasing else 'NOT inc'}); "
        f"ratio(8)/ratio(2)={growth:.6f} (need > 3, "
        f"{'ok' if growth > 3.0 else 'RED'}); |ratio(2) - brute|="
        f"{abs(ratios[0] - brute):.3e} (need < 1e-6, brute={brute:.6f})")


def test_criterion_06_remainder_spread_stability(exp_remainders):
    r1_small, r2_small = exp_remainders[10**3]
    r1_big, r2_big = exp_remainders[10**4]
    pairs = {"r1": (_iqr(r1_small), _iqr(r1_big)),
             "r2": (_iqr(r2_small), _iqr(r2_big))}
    ok = True
    parts = []
    for label, (a, b) in pairs.items():
        ratio = max(a, b) / min(a, b)
        ok = ok and ratio <= 1.5
        parts.append(f"IQR({label}) n=1e3/1e4: {a:.4f}/{b:.4f} "
                     f"ratio={ratio:.4f} (need <= 1.5)")
    assert _verdict(6, ok, "; ".join(parts))


def test_criterion_07_lindeberg_decay(exp_spec):
    small = engine.lindeberg_value(exp_spec, 100, 0.5, 4000, master_seed=7)
    big = engine.lindeberg_value(exp_spec, 10**4, 0.5, 4000, master_seed=7)
    halved = 2.0 * big.value <= small.value
    separated = small.value - small.std_error > big.value + big.std_error
    assert _verdict(
        7, halved and separated,
        f"Lindeberg(r=0.5): n=100 -> {small.value:.5f}+-{small.std_error:.5f}, "
        f"n=1e4 -> {big.value:.5f}+-{big.std_error:.5f}; factor-2 decay "
        f"{'ok' if halved else 'RED'}, error bars "
        f"{'separate' if separated else 'OVERLAP'}")


def test_criterion_08_tail_probability_increments(exp_spec):
    partial = engine.hsu_robbins_partial(exp_spec, 0.5, 200, 10**5, master_seed=7)
    inc20 = partial[19] - partial[18]
    inc200 = partial[199] - partial[198]
    ok = inc200 < inc20 / 10.0
    assert _verdict(
        8, ok,
        f"P(|S_n/n - mu| > 0.5) at 1e5 reps: n=20 -> {inc20:.6f}, "
        f"n=200 -> {inc200:.6f} (need < {inc20 / 10.0:.6f})")


def test_criterion_09_moment_ratio_exact():
    spec = dists.rademacher()
    ok = True
    parts = []
    for n in (2, 8, 32, 128):
        got = engine.rosenthal_ratio(spec, n, 4.0)
        want = Fraction(3 * n * n - 2 * n, n * n + n)
        ok = ok and abs(got - float(want)) < 1e-12 and got <= 3.0
        parts.append(f"n={n}: {got:.12f} vs {float(want):.12f}")
    assert _verdict(
        9, ok, "Rademacher p=4 ratio " + ", ".join(parts) +
        " (need match to 1e-12, all <= 3.0)")


def test_criterion_10_byte_identical_artifacts(tmp_path):
    config = {
        "experiment": {
            "distribution": {"family": "exponential", "rate": 1.0},
            "function": {"kind": "natural_log"},
            "n": 400,
            "replications": 200,
            "master_seed": 7,
        },
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config), encoding="utf-8")

    def run(outdir, workers):
        proc = subprocess.run(
            [sys.executable, "-m", "rowsumlab.cli", "simulate",
             "--config", str(cfg), "--out", str(outdir),
             "--workers", str(workers)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        return outdir

    a = run(tmp_path / "a", 1)
    b = run(tmp_path / "b", 1)
    c = run(tmp_path / "c", 4)

    names = ("normalizers.csv", "replications.csv", "gof.json", "qq.csv")
    mismatched = [
        f"{name}({tag})"
        for name in names
        for tag, other in (("rerun", b), ("workers=4", c))
        if (a / name).read_bytes() != (other / name).read_bytes()
    ]
    ok = not mismatched
    assert _verdict(
        10, ok,
        "rerun and 4-thread artifacts byte-identical"
        if ok else "mismatch in " + ", ".join(mismatched))
