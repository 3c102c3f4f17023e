"""Command-line harness: orchestration, seeding, and artifact serialization.

Every subcommand reads one flat key-value config file and writes three
artifacts into the output directory:

  records.jsonl   one JSON record per realization (provenance included)
  summary.csv     flat key,value aggregate summary
  manifest.json   config hash, code version, wall time, status

Records and summaries are byte-identical across reruns of the same config;
only the manifest carries wall-clock information.  Workers affect wall time
only: realizations are independent work items keyed by realization_index and
the reduction order is fixed.
"""

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .box import Box
from .config import SUBCOMMANDS, RunConfig, parse_config
from .errors import PamlabError, UsageError
from .evolution import make_plan, new_health, point_to_point_field
from .experiments import (ExperimentRecord, attraction_experiment,
                          factorization_residual, partition_value,
                          probe_sites, sigma_decomposition, stationary_pair,
                          stationarity_check, tail_probability)
from .kernels import kernel_table, ratio_extremes
from .noise import NoiseField, moment_selftest
from .polymer import mc_point_to_line, mc_point_to_point
from .profiles import FunctionClassSpec, builtin_profile


def _plan(cfg: RunConfig):
    return make_plan(cfg.dim, cfg.dt, cfg.beta, cfg.radius,
                     kernel_halfwidth=cfg.kernel_halfwidth,
                     series_tol=cfg.series_tol, boundary=cfg.boundary,
                     leak_tol=cfg.leak_tol)


def _window(cfg: RunConfig) -> tuple:
    """Noise time window [t_start, t_end] needed by the subcommand."""
    sub = cfg.subcommand
    if sub in ("noise", "mc", "evolve", "tails"):
        return 0.0, cfg.t
    if sub in ("decompose", "factorize"):
        return -cfg.s_burn, cfg.t + cfg.t_burn
    if sub == "attract":
        return -cfg.s_burn, max(cfg.t_grid)
    if sub == "stationary":
        return -cfg.s_burn, cfg.t
    return 0.0, 0.0


def _noise(cfg: RunConfig, index: int) -> NoiseField:
    t0, t1 = _window(cfg)
    return NoiseField(cfg.dim, cfg.noise_radius, t0, t1, cfg.dt,
                      seed=cfg.seed, realization_index=index)


def _profile(cfg: RunConfig):
    return builtin_profile(cfg.profile, Box(cfg.dim, cfg.radius),
                           cfg.class_c, cfg.class_eps, cfg.profile_seed)


def _realization(cfg: RunConfig, index: int) -> ExperimentRecord:
    """Pure per-realization work item; deterministic in (config, index)."""
    sub = cfg.subcommand
    h = cfg.config_hash
    if sub == "noise":
        nf = _noise(cfg, index)
        stats = moment_selftest(nf, n_samples=10 ** 5)
        return ExperimentRecord(h, cfg.seed, index, stats)
    if sub == "mc":
        nf = _noise(cfg, index)
        p2p = mc_point_to_point(nf, cfg.x, cfg.s, cfg.y, cfg.t,
                                cfg.n_samples, cfg.beta)
        p2l = mc_point_to_line(nf, cfg.x, cfg.s, cfg.t, cfg.n_samples,
                               cfg.beta)
        return ExperimentRecord(h, cfg.seed, index, {
            "p2p_mean": p2p.mean, "p2p_std_error": p2p.std_error,
            "p2p_hits": p2p.n_effective, "p2l_mean": p2l.mean,
            "p2l_std_error": p2l.std_error})
    if sub == "evolve":
        nf = _noise(cfg, index)
        plan = _plan(cfg)
        health = new_health()
        field = point_to_point_field(cfg.x, 0.0, cfg.t, nf, plan,
                                     health=health)
        results = {"total_mass": field.total(),
                   "edge_mass_fraction": health["edge_mass_fraction"],
                   "kernel_deficit": health["kernel_deficit"],
                   "min_value": health["min_value"]}
        for site in probe_sites(cfg.dim):
            results[f"Z_site={site}"] = field.at(site)
        return ExperimentRecord(h, cfg.seed, index, results)
    if sub == "decompose":
        nf = _noise(cfg, index)
        spec = FunctionClassSpec(cfg.class_c, cfg.class_eps)
        return sigma_decomposition(_profile(cfg), cfg.y, cfg.t, nf,
                                   _plan(cfg), cfg.sigma, spec, cfg.s_burn,
                                   cfg.t_burn, config_hash=h)
    if sub == "factorize":
        nf = _noise(cfg, index)
        return factorization_residual(cfg.x, cfg.s, cfg.y, cfg.t, nf,
                                      _plan(cfg), cfg.s_burn, cfg.t_burn,
                                      sigma=cfg.sigma, eps=cfg.class_eps,
                                      config_hash=h)
    if sub == "attract":
        nf = _noise(cfg, index)
        spec = FunctionClassSpec(cfg.class_c, cfg.class_eps)
        return attraction_experiment(_profile(cfg), cfg.y, cfg.t_grid, nf,
                                     _plan(cfg), cfg.s_burn, spec=spec,
                                     config_hash=h)
    if sub == "tails":
        nf = _noise(cfg, index)
        z = partition_value(nf, cfg.t, _plan(cfg))
        return ExperimentRecord(h, cfg.seed, index, {"Z": z})
    if sub == "stationary":
        nf = _noise(cfg, index)
        y_vals, pushed = stationary_pair(nf, _plan(cfg), cfg.t, cfg.s_burn)
        results = {}
        for site, a, b in zip(probe_sites(cfg.dim), y_vals, pushed):
            results[f"Y_site={site}"] = float(a)
            results[f"pushed_site={site}"] = float(b)
        return ExperimentRecord(h, cfg.seed, index, results)
    raise UsageError(f"subcommand {sub!r} has no per-realization work")


def _work(item):
    values, index = item
    return _realization(RunConfig(values), index)


def _kernels_records(cfg: RunConfig) -> list:
    table = kernel_table(cfg.dim, cfg.t, cfg.radius, cfg.series_tol)
    results = {"t": cfg.t, "radius": cfg.radius, "total": table.total(),
               "tail_bound": table.tail_bound,
               "series_remainder": table.series_remainder}
    for site in probe_sites(cfg.dim):
        results[f"p_site={site}"] = table.prob(site)
    try:
        ext = ratio_extremes(cfg.dim, cfg.t, cfg.sigma, cfg.y1, cfg.y2,
                             cfg.radius, table=table)
        results.update({"ratio_inf": ext.inf_ratio, "ratio_sup": ext.sup_ratio,
                        "arg_inf": str(ext.arg_inf),
                        "arg_sup": str(ext.arg_sup)})
    except PamlabError as exc:
        results["ratio_error"] = str(exc)
    return [ExperimentRecord(cfg.config_hash, cfg.seed, 0, results)]


def _aggregate(cfg: RunConfig, records: list) -> dict:
    """Deterministic summary rows from the ordered record list."""
    out = {"subcommand": cfg.subcommand, "config_hash": cfg.config_hash,
           "realizations": len(records)}
    numeric = {}
    for rec in records:
        for k, v in rec.results.items():
            if isinstance(v, (int, float)) and np.isfinite(v):
                numeric.setdefault(k, []).append(float(v))
    for k in sorted(numeric):
        vals = np.array(numeric[k])
        out[f"mean_{k}"] = float(vals.mean())
        out[f"median_{k}"] = float(np.median(vals))
        if len(vals) > 1:
            out[f"std_error_{k}"] = float(vals.std(ddof=1)
                                          / np.sqrt(len(vals)))
    if cfg.subcommand == "tails":
        zs = [r.results["Z"] for r in records]
        tail = tail_probability(cfg.t, cfg.u_grid, None, _plan(cfg),
                                z_values=zs, config_hash=cfg.config_hash)
        for k, v in tail.results.items():
            out[f"tail_{k}"] = v
    if cfg.subcommand == "stationary":
        probes = probe_sites(cfg.dim)
        pairs = [(np.array([r.results[f"Y_site={s}"] for s in probes]),
                  np.array([r.results[f"pushed_site={s}"] for s in probes]))
                 for r in records]
        stat = stationarity_check(None, _plan(cfg), cfg.t, cfg.s_burn,
                                  probes=probes, pairs=pairs,
                                  config_hash=cfg.config_hash)
        for k, v in stat.results.items():
            out[f"stationarity_{k}"] = v
    return out


def run(cfg: RunConfig, out_dir, workers: int = 1) -> int:
    """Execute one subcommand; write records, summary, and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_begin = time.monotonic()
    status = "ok"
    failure = None
    records = []
    try:
        if cfg.subcommand == "kernels":
            records = _kernels_records(cfg)
        else:
            items = [(cfg.values, i) for i in range(cfg.realizations)]
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    records = list(pool.map(_work, items))
            else:
                records = [_work(item) for item in items]
            records.sort(key=lambda r: r.realization_index)
    except PamlabError as exc:
        status = "failed"
        failure = f"{type(exc).__name__}: {exc}"
        code = exc.exit_code
    with open(out / "records.jsonl", "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")
    if status == "ok":
        summary = _aggregate(cfg, records)
        with open(out / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["key", "value"])
            for k, v in summary.items():
                writer.writerow([k, v])
    manifest = {"config_hash": cfg.config_hash, "code_version": __version__,
                "subcommand": cfg.subcommand, "n_records": len(records),
                "wall_time_s": round(time.monotonic() - t_begin, 3),
                "status": status}
    if failure is not None:
        manifest["failure"] = failure
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if status == "ok" else code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pamlab",
        description="lattice polymer / stochastic heat equation laboratory")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="config file path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker processes (wall time only)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}")
        cfg = parse_config(text)
        if cfg.subcommand != args.subcommand:
            raise UsageError(
                f"config is for subcommand {cfg.subcommand!r}, "
                f"but {args.subcommand!r} was requested")
        return run(cfg, args.out, workers=args.workers)
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return 4
    except PamlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
