"""``aoimdp`` command-line runner.

Every subcommand reads an optional JSON config (``--config``), applies the
command-line overrides, writes CSV files into ``--out`` and finishes with a
``manifest.json`` holding the resolved config, its sha256 hash, the seeds and
a hash of every CSV written.  Passing that manifest back as ``--config``
re-runs the experiment and reproduces the CSVs byte for byte.

Exit codes: 0 success, 1 check failed or runtime error, 2 usage/config error.
Set ``AOI_MDP_LOG`` (DEBUG, INFO, WARNING, ...) to control log output.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .aoi_core import UpdateTimeline, integrate_sawtooth, time_averaged_aoi
from .config import COMMANDS, ConfigError, ExperimentConfig, config_hash, load_config
from .delay_models import kind_of
from .env_underwater import STATS_COLUMNS
from .estimation import DelayEstConfig, HeadingConfig, delay_recovery_rate, estimate_heading, \
    synthesize_heading_signal
from .rl_harness import METRICS, Arm, ComparisonReport, evaluate, make_policy, run_comparison, train

log = logging.getLogger("aoimdp")

# documented, golden-tested CSV headers
AOI_CHECK_COLUMNS = ("index", "n_updates", "initial_age", "horizon", "closed_form", "integrated", "rel_gap")
DELAY_BENCH_COLUMNS = ("snr", "noise_variance", "trials", "exact_recovery_rate")
HEADING_BENCH_COLUMNS = ("true_beta", "estimate", "abs_error")
CURVE_COLUMNS = ("episode", "epsilon") + tuple(f"{m}_{s}" for m in METRICS for s in ("mean", "std"))
EVAL_COLUMNS = ("seed", "episode") + STATS_COLUMNS
SUMMARY_COLUMNS = ("metric", "mean", "std")
TABLE_COLUMNS = ("arm",) + tuple(f"{m}_{s}" for m in METRICS for s in ("mean", "std"))
PER_SEED_COLUMNS = ("arm", "seed") + METRICS
DELTA_COLUMNS = ("seed",) + METRICS
CURVES_COLUMNS = ("arm", "seed") + CURVE_COLUMNS


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: ExperimentConfig, files: list[str]) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "seeds": cfg.resolved_seeds(),
        "rng": "numpy.random.default_rng (PCG64)",
        "outputs": {name: _sha256(out / name) for name in files},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# experiments ------------------------------------------------------------------


def random_timeline(rng: np.random.Generator, max_updates: int) -> UpdateTimeline:
    """1 to ``max_updates`` updates after the first, delays and waits uniform on (0, 10]."""
    n = int(rng.integers(1, max_updates + 1))
    delays = 10.0 - rng.uniform(0.0, 10.0, n + 1)
    waits = 10.0 - rng.uniform(0.0, 10.0, n)
    return UpdateTimeline.from_delays(delays, waits, float(rng.uniform(0.0, 10.0)))


def aoi_check(cfg: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    ac = cfg.aoi_check
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(ac["random"]):
        tl = random_timeline(rng, ac["max_updates"])
        closed = time_averaged_aoi(tl)
        numeric = integrate_sawtooth(tl, closed.horizon * ac["dt_ratio"])
        gap = abs(closed.time_avg_aoi - numeric) / closed.time_avg_aoi
        rows.append({"index": i, "n_updates": closed.update_count, "initial_age": tl.initial_age,
                     "horizon": closed.horizon, "closed_form": closed.time_avg_aoi,
                     "integrated": numeric, "rel_gap": gap})
    write_csv(out / "aoi_check.csv", AOI_CHECK_COLUMNS, rows)
    worst = max(r["rel_gap"] for r in rows)
    ok = worst <= 1e-4
    print(f"max relative gap {worst:.3e} over {len(rows)} timelines (tolerance 1e-4): {'PASS' if ok else 'FAIL'}")
    return ["aoi_check.csv"], 0 if ok else 1


def estimator_bench(cfg: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    est = cfg.estimator
    base = DelayEstConfig.pn(est["m"], est["n"], 0.0, seed=est["pn_seed"])
    rows = []
    for snr in est["snrs"]:
        c = base.with_snr(snr)
        rate = delay_recovery_rate(c, est["trials"], base_seed=cfg.seed)
        rows.append({"snr": float(snr), "noise_variance": c.noise_variance, "trials": est["trials"],
                     "exact_recovery_rate": rate})
        print(f"snr {snr:g}: exact recovery {rate:.3f}")
    write_csv(out / "delay_recovery.csv", DELAY_BENCH_COLUMNS, rows)

    h = est["heading"]
    hcfg = HeadingConfig(sample_count=h["sample_count"], carrier_frequency=h["carrier_frequency"],
                         sensor_spacing=h["sensor_spacing"], propagation_speed=h["propagation_speed"],
                         noise_variance=h["noise_variance"])
    hrows = []
    for k, beta in enumerate(np.linspace(0.1, 1.4, h["betas"] + 2)[1:-1]):
        sig = synthesize_heading_signal(hcfg, float(beta), cfg.seed + k)
        b = estimate_heading(hcfg, sig).estimate
        hrows.append({"true_beta": float(beta), "estimate": b, "abs_error": abs(b - float(beta))})
    write_csv(out / "heading.csv", HEADING_BENCH_COLUMNS, hrows)
    print(f"heading: max abs error {max(r['abs_error'] for r in hrows):.2e} rad")
    return ["delay_recovery.csv", "heading.csv"], 0


def _world_for(cfg: ExperimentConfig, seed: int):
    w = cfg.world
    return w if w.layout_seed is not None else replace(w, layout_seed=seed)


def train_experiment(cfg: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    seed = cfg.resolved_seeds()[0]
    world = _world_for(cfg, seed)
    arm = Arm(cfg.formulation, cfg.formulation, cfg.delay_model())
    view = arm.build(world)
    policy = make_policy(view, cfg.train)
    curve = train(view, policy, cfg.train, seed)
    summary = evaluate(view, policy, cfg.eval_episodes, seed)
    write_csv(out / "curve.csv", CURVE_COLUMNS, curve)
    eval_rows = [{"seed": seed, "episode": i, **e.as_row()} for i, e in enumerate(summary.episodes)]
    write_csv(out / "eval.csv", EVAL_COLUMNS, eval_rows)
    srows = [{"metric": m, "mean": summary.mean[m], "std": summary.std[m]} for m in STATS_COLUMNS]
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, srows)
    for r in srows:
        print(f"{r['metric']}: {r['mean']:.4g} +/- {r['std']:.4g}")
    return ["curve.csv", "eval.csv", "summary.csv"], 0


def _write_report(report: ComparisonReport, out: Path, prefix: str) -> list[str]:
    names = [f"{prefix}.csv", "per_seed.csv", "curves.csv"]
    write_csv(out / names[0], TABLE_COLUMNS, report.table())
    write_csv(out / names[1], PER_SEED_COLUMNS, report.per_seed_rows())
    rows = [{"arm": arm, "seed": seed, **r} for (arm, seed), curve in report.curves.items() for r in curve]
    write_csv(out / names[2], CURVES_COLUMNS, rows)
    for row in report.table():
        print(row["arm"] + ": " + ", ".join(f"{m} {row[m + '_mean']:.4g}+/-{row[m + '_std']:.4g}" for m in METRICS))
    return names


def compare_experiment(cfg: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    model = cfg.delay_model()
    arms = [Arm("aoi-mdp", "aoi", model), Arm("standard-mdp", "standard", model)]
    report = run_comparison(cfg.world, arms, cfg.train, cfg.resolved_seeds(), cfg.eval_episodes,
                            layout_from_seed=cfg.world.layout_seed is None)
    files = _write_report(report, out, "comparison")
    write_csv(out / "deltas.csv", DELTA_COLUMNS, report.deltas("aoi-mdp", "standard-mdp"))
    return files + ["deltas.csv"], 0


def ablate_delay(cfg: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    arms = []
    for kind in cfg.ablation["models"]:
        model = cfg.delay_model(kind)
        log.info("ablation arm %s: %r", kind, model if kind != "sdm" else kind_of(model))
        arms.append(Arm(kind, "aoi", model))
    report = run_comparison(cfg.world, arms, cfg.train, cfg.resolved_seeds(), cfg.eval_episodes,
                            layout_from_seed=cfg.world.layout_seed is None)
    return _write_report(report, out, "ablation"), 0


EXPERIMENTS = {
    "aoi-check": aoi_check,
    "estimator-bench": estimator_bench,
    "train": train_experiment,
    "compare": compare_experiment,
    "ablate-delay": ablate_delay,
}


# command line -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config or a previous run's manifest.json")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (default: aoimdp-out/<command>)")

    parser = argparse.ArgumentParser(prog="aoimdp", description="AoI-MDP experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("aoi-check", parents=[common], help="closed-form AoI vs numeric integration")
    p.add_argument("--random", type=int, help="number of random timelines")
    p.add_argument("--dt-ratio", type=float, help="integration step as a fraction of the horizon")
    sub.add_parser("estimator-bench", parents=[common], help="delay and heading estimator accuracy")
    p = sub.add_parser("train", parents=[common], help="train one Q-learning agent")
    p.add_argument("--formulation", choices=("aoi", "standard"))
    p.add_argument("--episodes", type=int)
    p = sub.add_parser("compare", parents=[common], help="AoI-MDP vs standard MDP over matched seeds")
    p.add_argument("--episodes", type=int)
    p = sub.add_parser("ablate-delay", parents=[common], help="delay-model ablation (AoI-MDP agent)")
    p.add_argument("--models", help="comma-separated delay kinds, e.g. sdm,poisson,exponential,geometric")
    p.add_argument("--episodes", type=int)
    return parser


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    from .config import from_dict

    data = cfg.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
        if data["seeds"] is not None:
            data["seeds"] = list(range(args.seed, args.seed + len(data["seeds"])))
    if getattr(args, "random", None) is not None:
        data["aoi_check"]["random"] = args.random
    if getattr(args, "dt_ratio", None) is not None:
        data["aoi_check"]["dt_ratio"] = args.dt_ratio
    if getattr(args, "formulation", None) is not None:
        data["formulation"] = args.formulation
    if getattr(args, "episodes", None) is not None:
        data["train"]["episodes"] = args.episodes
        data["train"]["eval_interval"] = min(data["train"]["eval_interval"], args.episodes)
    if getattr(args, "models", None) is not None:
        data["ablation"]["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    return from_dict(data)


def _setup_logging():
    level_name = os.environ.get("AOI_MDP_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not isinstance(level, int):
        log.warning("unknown AOI_MDP_LOG level %r; using WARNING", level_name)


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    assert args.command in COMMANDS
    try:
        if args.config is not None and not args.config.is_file():
            print(f"error: config file not found: {args.config}", file=sys.stderr)
            return 2
        cfg = load_config(args.config) if args.config is not None else ExperimentConfig()
        cfg = apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = args.out if args.out is not None else Path("aoimdp-out") / args.command
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {out} ({exc})", file=sys.stderr)
        return 2

    log.info("running %s, config hash %s, seeds %s", args.command, config_hash(cfg)[:12], cfg.resolved_seeds())
    t0 = time.perf_counter()
    try:
        files, code = EXPERIMENTS[args.command](cfg, out)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_manifest(out, args.command, cfg, files)
    log.info("%s finished in %.1f s; outputs in %s", args.command, time.perf_counter() - t0, out)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
