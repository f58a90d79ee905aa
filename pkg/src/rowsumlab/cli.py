"""Batch front end: archivable JSON configs in, CSV/JSON artifacts out.

Four subcommands mirror the four independently runnable analyses:

    simulate        sum/product statistic replications + goodness of fit
    normalizers     normalizing-sequence tables only
    counterexample  heavy-tailed lattice divergence table
    diagnostics     Lindeberg / complete-convergence / moment-ratio series

Flags only override the seed and the output directory; everything else lives
in the config file so a run can be reproduced from the archived config alone.
Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import distributions as dists
from . import engine
from . import functions as fns
from . import normalizers as norms
from . import stats
from .errors import ConfigurationError, NumericError, RowSumLabError

_DEFAULT_OUT = "rowsumlab-out"


# ---------------------------------------------------------------------------
# Strict config parsing


def _join(path: str, key: str) -> str:
    return key if not path else f"{path}.{key}"


def _section(obj, path: str, required=(), optional=()) -> dict:
    """Validate a JSON object node: every key known, every required key present."""
    where = path or "config"
    if not isinstance(obj, dict):
        raise ConfigurationError("must be an object", field=where)
    allowed = set(required) | set(optional)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigurationError(
            f"unknown key(s): {', '.join(unknown)}", field=_join(path, unknown[0]))
    for key in required:
        if key not in obj:
            raise ConfigurationError("missing required key", field=_join(path, key))
    return obj


def _as_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError("must be an integer", field=path)
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"must be >= {minimum}", field=path)
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError("must be a number", field=path)
    v = float(value)
    if not math.isfinite(v):
        raise ConfigurationError("must be finite", field=path)
    return v


def _as_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError("must be true or false", field=path)
    return value


def _as_grid(value, path: str, minimum: int) -> list[int]:
    if not isinstance(value, list) or not value:
        raise ConfigurationError("must be a non-empty list of integers", field=path)
    grid = [_as_int(v, path, minimum=minimum) for v in value]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("must be sorted strictly ascending", field=path)
    return grid


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}", field="--config") from None
    try:
        root = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}", field="--config") from None
    if not isinstance(root, dict):
        raise ConfigurationError("top level must be an object", field="--config")
    return root


def _build_distribution(obj, path: str) -> dists.DistributionSpec:
    if not isinstance(obj, dict):
        raise ConfigurationError("must be an object", field=path)
    try:
        return dists.make_spec(obj)
    except ConfigurationError as exc:
        raise exc.with_prefix(path) from None


def _build_function(obj, spec: dists.DistributionSpec, path: str) -> fns.FunctionSpec:
    """Function config; location parameters are wired from the law's mean."""
    if not isinstance(obj, dict):
        raise ConfigurationError("must be an object", field=path)
    kind = obj.get("kind")
    try:
        if kind == "natural_log":
            _section(obj, path, required=("kind",))
            return fns.natural_log(spec.mu)
        if kind == "log_product":
            _section(obj, path, required=("kind",))
            return fns.log_product(spec.mu)
        if kind == "quadratic":
            _section(obj, path, required=("kind", "a", "b", "c"))
            return fns.quadratic(
                _as_float(obj["a"], _join(path, "a")),
                _as_float(obj["b"], _join(path, "b")),
                _as_float(obj["c"], _join(path, "c")),
            )
        if kind == "cubic_window":
            _section(obj, path, required=("kind", "coeffs", "window"), optional=("center",))
            center = obj.get("center", spec.mu)
            return fns.cubic_window(
                obj["coeffs"], obj["window"], _as_float(center, _join(path, "center")))
    except ConfigurationError as exc:
        raise exc.with_prefix(path) from None
    raise ConfigurationError(
        f"unknown kind {kind!r} (expected one of: cubic_window, log_product, "
        "natural_log, quadratic)", field=_join(path, "kind"))


# ---------------------------------------------------------------------------
# Artifact writing


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(outdir: Path, name: str, header, rows) -> tuple[str, str, int]:
    path = outdir / name
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
            count += 1
    return (name, name, count)


def _write_text(outdir: Path, name: str, text: str, rows: int) -> tuple[str, str, int]:
    (outdir / name).write_text(text, encoding="utf-8")
    return (name, name, rows)


def _digest(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(outdir: Path, payload: dict, outputs, started: str) -> None:
    manifest = {
        "config_digest": _digest(payload),
        "tool_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [
            {"name": name, "path": path, "rows": rows} for name, path, rows in outputs
        ],
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve_outdir(root: dict, flag_value: str | None) -> Path:
    section = root.get("output")
    directory = None
    if section is not None:
        _section(section, "output", optional=("directory",))
        if "directory" in section:
            directory = section["directory"]
            if not isinstance(directory, str) or not directory:
                raise ConfigurationError("must be a non-empty string",
                                         field="output.directory")
    if flag_value is not None:
        directory = flag_value
    outdir = Path(directory) if directory else Path(_DEFAULT_OUT)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


# ---------------------------------------------------------------------------
# Subcommands


def _parse_experiment(root: dict, seed_flag: int | None):
    _section(root, "", required=("experiment",), optional=("output",))
    exp = _section(
        root["experiment"], "experiment",
        required=("distribution", "function", "n", "replications", "master_seed"),
        optional=("centering", "product_statistic", "collect_remainders"),
    )
    spec = _build_distribution(exp["distribution"], "experiment.distribution")
    fs = _build_function(exp["function"], spec, "experiment.function")
    n = _as_int(exp["n"], "experiment.n")
    replications = _as_int(exp["replications"], "experiment.replications")
    master_seed = _as_int(exp["master_seed"], "experiment.master_seed")
    if seed_flag is not None:
        master_seed = seed_flag
    centering = exp.get("centering", "b")
    collect_product = None
    if "product_statistic" in exp:
        collect_product = _as_bool(exp["product_statistic"],
                                   "experiment.product_statistic")
    collect_remainders = _as_bool(
        exp.get("collect_remainders", True), "experiment.collect_remainders")
    try:
        config = engine.ExperimentConfig(
            spec=spec, fs=fs, n=n, replications=replications,
            master_seed=master_seed, centering=centering,
            collect_remainders=collect_remainders, collect_product=collect_product,
        )
    except ConfigurationError as exc:
        raise exc.with_prefix("experiment") from None
    payload = {
        "command": "simulate",
        "experiment": {
            "distribution": exp["distribution"],
            "function": exp["function"],
            "n": n, "replications": replications, "master_seed": master_seed,
            "centering": centering,
            "product_statistic": collect_product,
            "collect_remainders": collect_remainders,
        },
    }
    return config, payload


def _cmd_simulate(args) -> int:
    root = _load_config(args.config)
    config, payload = _parse_experiment(root, args.seed)
    outdir = _resolve_outdir(root, args.out)
    started = datetime.now(timezone.utc).isoformat()

    table = norms.build_table(config.spec, config.fs, [config.n])
    results = engine.run_experiment(config, workers=args.workers)

    outputs = []
    row = table.row(config.n)
    outputs.append(_write_csv(
        outdir, "normalizers.csv",
        ("n", "a_n", "b_n", "b_tilde_n", "Q_n", "Q_tilde_n"),
        [(row["n"], row["a_n"], row["b_n"], row["b_tilde_n"],
          row["Q_n"], row["Q_tilde_n"])],
    ))
    outputs.append(_write_csv(
        outdir, "replications.csv",
        ("rep_index", "t_stat", "product_stat", "r1", "r2",
         "out_of_neighborhood_count", "domain_violation"),
        [(r.rep_index, r.t_stat, r.product_stat, r.r1, r.r2,
          r.out_of_neighborhood_count, r.domain_violation) for r in results],
    ))

    t_all = np.asarray([r.t_stat for r in results], dtype=np.float64)
    kept = t_all[np.isfinite(t_all)]
    excluded = int(t_all.size - kept.size)
    target_sd = config.spec.sigma * abs(fns.eval_d1(config.fs, config.spec.mu))
    if target_sd > 0 and kept.size >= 10:
        report = stats.gof_report(kept, 0.0, target_sd, excluded_count=excluded)
        outputs.append(_write_text(outdir, "gof.json", report.to_json(), 1))
        outputs.append(_write_csv(
            outdir, "qq.csv", ("theoretical", "empirical"), list(report.qq)))
    else:
        # Degenerate limit (sigma * f'(mu) = 0) or too few usable replications:
        # the KS machinery has nothing meaningful to test against.
        mean, var, _ = stats.summarize(kept) if kept.size >= 2 else (None, None, None)
        reduced = {
            "degenerate": True,
            "m": int(kept.size),
            "target_mean": 0.0,
            "target_sd": target_sd,
            "sample_mean": mean,
            "sample_var": var,
            "excluded_count": excluded,
        }
        outputs.append(_write_text(
            outdir, "gof.json",
            json.dumps(reduced, indent=2, sort_keys=True) + "\n", 1))

    _write_manifest(outdir, payload, outputs, started)
    print(f"simulate: wrote {len(outputs) + 1} artifacts to {outdir}")
    return 0


def _cmd_normalizers(args) -> int:
    root = _load_config(args.config)
    _section(root, "", required=("normalizers",), optional=("output",))
    sec = _section(root["normalizers"], "normalizers",
                   required=("distribution", "function", "n_grid"))
    spec = _build_distribution(sec["distribution"], "normalizers.distribution")
    fs = _build_function(sec["function"], spec, "normalizers.function")
    grid = _as_grid(sec["n_grid"], "normalizers.n_grid", minimum=1)
    payload = {"command": "normalizers",
               "normalizers": {"distribution": sec["distribution"],
                               "function": sec["function"], "n_grid": grid}}
    outdir = _resolve_outdir(root, args.out)
    started = datetime.now(timezone.utc).isoformat()

    table = norms.build_table(spec, fs, grid)
    rows = []
    for n in grid:
        row = table.row(n)
        rows.append((row["n"], row["a_n"], row["b_n"], row["b_tilde_n"],
                     row["Q_n"], row["Q_tilde_n"]))
    outputs = [_write_csv(
        outdir, "normalizers.csv",
        ("n", "a_n", "b_n", "b_tilde_n", "Q_n", "Q_tilde_n"), rows)]
    _write_manifest(outdir, payload, outputs, started)
    print(f"normalizers: wrote {len(outputs) + 1} artifacts to {outdir}")
    return 0


def _cmd_counterexample(args) -> int:
    root = _load_config(args.config)
    _section(root, "", required=("counterexample",), optional=("output",))
    sec = _section(root["counterexample"], "counterexample",
                   required=("epsilon", "m_min", "m_max"))
    epsilon = _as_float(sec["epsilon"], "counterexample.epsilon")
    if not epsilon > 0:
        raise ConfigurationError("must be > 0", field="counterexample.epsilon")
    m_min = _as_int(sec["m_min"], "counterexample.m_min", minimum=2)
    m_max = _as_int(sec["m_max"], "counterexample.m_max", minimum=2)
    if m_max < m_min:
        raise ConfigurationError("must be >= m_min", field="counterexample.m_max")
    payload = {"command": "counterexample",
               "counterexample": {"epsilon": epsilon, "m_min": m_min, "m_max": m_max}}
    outdir = _resolve_outdir(root, args.out)
    started = datetime.now(timezone.utc).isoformat()

    rows = []
    for m in range(m_min, m_max + 1):
        log_n, q, ratio = norms.counterexample_q_breakdown(epsilon, m)
        rows.append((m, log_n, q, ratio))
    outputs = [_write_csv(outdir, "counterexample.csv",
                          ("M", "n_log", "Q", "ratio"), rows)]
    _write_manifest(outdir, payload, outputs, started)
    print(f"counterexample: wrote {len(outputs) + 1} artifacts to {outdir}")
    return 0


def _cmd_diagnostics(args) -> int:
    root = _load_config(args.config)
    _section(root, "", required=("diagnostics",), optional=("output",))
    sec = _section(root["diagnostics"], "diagnostics", required=("distribution",),
                   optional=("lindeberg", "hsu_robbins", "rosenthal"))
    spec = _build_distribution(sec["distribution"], "diagnostics.distribution")
    enabled = [k for k in ("lindeberg", "hsu_robbins", "rosenthal") if k in sec]
    if not enabled:
        raise ConfigurationError(
            "enable at least one of: lindeberg, hsu_robbins, rosenthal",
            field="diagnostics")

    def seed_for(block: dict, path: str) -> int:
        seed = _as_int(block.get("master_seed", 0), _join(path, "master_seed"))
        return args.seed if args.seed is not None else seed

    payload = {"command": "diagnostics",
               "diagnostics": {"distribution": sec["distribution"]}}
    plans = {}
    if "lindeberg" in sec:
        path = "diagnostics.lindeberg"
        blk = _section(sec["lindeberg"], path,
                       required=("r", "n_grid", "replications"),
                       optional=("master_seed",))
        r = _as_float(blk["r"], _join(path, "r"))
        grid = _as_grid(blk["n_grid"], _join(path, "n_grid"), minimum=2)
        reps = _as_int(blk["replications"], _join(path, "replications"), minimum=2)
        plans["lindeberg"] = (r, grid, reps, seed_for(blk, path))
        payload["diagnostics"]["lindeberg"] = {
            "r": r, "n_grid": grid, "replications": reps,
            "master_seed": plans["lindeberg"][3]}
    if "hsu_robbins" in sec:
        path = "diagnostics.hsu_robbins"
        blk = _section(sec["hsu_robbins"], path,
                       required=("t", "horizon", "replications"),
                       optional=("master_seed",))
        t = _as_float(blk["t"], _join(path, "t"))
        horizon = _as_int(blk["horizon"], _join(path, "horizon"), minimum=1)
        reps = _as_int(blk["replications"], _join(path, "replications"), minimum=1)
        plans["hsu_robbins"] = (t, horizon, reps, seed_for(blk, path))
        payload["diagnostics"]["hsu_robbins"] = {
            "t": t, "horizon": horizon, "replications": reps,
            "master_seed": plans["hsu_robbins"][3]}
    if "rosenthal" in sec:
        path = "diagnostics.rosenthal"
        blk = _section(sec["rosenthal"], path, required=("p", "n_grid"),
                       optional=("replications", "master_seed"))
        p = _as_float(blk["p"], _join(path, "p"))
        if not p > 2:
            raise ConfigurationError("must be > 2", field=_join(path, "p"))
        grid = _as_grid(blk["n_grid"], _join(path, "n_grid"), minimum=1)
        reps = _as_int(blk.get("replications", 0), _join(path, "replications"),
                       minimum=0)
        plans["rosenthal"] = (p, grid, reps, seed_for(blk, path))
        payload["diagnostics"]["rosenthal"] = {
            "p": p, "n_grid": grid, "replications": reps,
            "master_seed": plans["rosenthal"][3]}

    outdir = _resolve_outdir(root, args.out)
    started = datetime.now(timezone.utc).isoformat()
    outputs = []
    if "lindeberg" in plans:
        r, grid, reps, seed = plans["lindeberg"]
        rows = []
        for n in grid:
            est = engine.lindeberg_value(spec, n, r, reps, master_seed=seed)
            rows.append((n, est.value, est.std_error))
        outputs.append(_write_csv(outdir, "lindeberg.csv",
                                  ("n", "value", "std_error"), rows))
    if "hsu_robbins" in plans:
        t, horizon, reps, seed = plans["hsu_robbins"]
        partial = engine.hsu_robbins_partial(spec, t, horizon, reps, master_seed=seed)
        p_hat = np.diff(partial, prepend=0.0)
        rows = [(n, p_hat[n - 1], partial[n - 1]) for n in range(1, horizon + 1)]
        outputs.append(_write_csv(outdir, "hsu_robbins.csv",
                                  ("n", "p_hat", "partial_sum"), rows))
    if "rosenthal" in plans:
        p, grid, reps, seed = plans["rosenthal"]
        rows = []
        for n in grid:
            ratio = engine.rosenthal_ratio(spec, n, p, replications=reps,
                                           master_seed=seed)
            rows.append((n, ratio))
        outputs.append(_write_csv(outdir, "rosenthal.csv", ("n", "ratio"), rows))

    _write_manifest(outdir, payload, outputs, started)
    print(f"diagnostics: wrote {len(outputs) + 1} artifacts to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rowsumlab",
        description="Simulation laboratory for log-scaled sums of a function "
                    "of triangular-array row means.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("simulate", "run replications and goodness-of-fit analysis", _cmd_simulate),
        ("normalizers", "emit normalizing-sequence tables", _cmd_normalizers),
        ("counterexample", "heavy-tailed lattice divergence analysis", _cmd_counterexample),
        ("diagnostics", "standalone Lindeberg / complete-convergence / "
                        "moment-ratio series", _cmd_diagnostics),
    ]
    for name, help_text, func in specs:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the JSON config")
        sp.add_argument("--out", default=None, help="output directory override")
        if name in ("simulate", "diagnostics"):
            sp.add_argument("--seed", type=int, default=None,
                            help="master seed override")
        if name == "simulate":
            sp.add_argument("--workers", type=int, default=1,
                            help="replication worker threads (results identical "
                                 "for any worker count)")
        sp.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        # Unwritable output paths and the like are setup problems, not numeric.
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RowSumLabError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
