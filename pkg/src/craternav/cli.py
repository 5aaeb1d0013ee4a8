"""``craternav`` command line: gen, run, eval, version."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path

from . import harness
from .config import ConfigError, dump_config, load_config
from .core import save_crater_db
from .gmm import OptimizerError
from .world import ScenarioConfig

log = logging.getLogger("craternav")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class CliError(Exception):
    pass


def _setup_logging(verbose: int) -> None:
    level = os.environ.get("CRATERNAV_LOG", "").upper()
    if verbose:
        level = "DEBUG" if verbose > 1 else "INFO"
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _prepare_out(out: Path, force: bool) -> Path:
    if out.exists():
        if not out.is_dir():
            raise CliError(f"{out} exists and is not a directory")
        if any(out.iterdir()) and not force:
            raise CliError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_fractions(text: str) -> list[float]:
    try:
        fracs = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"--masking expects a comma list of fractions, got {text!r}") from None
    if not fracs or any(not 0.0 <= f <= 1.0 for f in fracs):
        raise CliError("--masking fractions must lie in [0, 1]")
    return fracs


def cmd_gen(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(Path(args.out), args.force)
    truth_db, map_db = harness.scenario_maps(cfg)
    save_crater_db(truth_db, out / "craters.csv")
    if cfg.orbital_mask_frac > 0:
        save_crater_db(map_db, out / "orbital_map.csv")
    (out / "scenario.cfg").write_text(dump_config(cfg), encoding="utf-8")
    print(f"wrote {len(truth_db)} craters to {out / 'craters.csv'}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(Path(args.out), args.force)
    run_log = harness.run_scenario(cfg)
    metrics = harness.compute_metrics(run_log)
    (out / "scenario.cfg").write_text(dump_config(cfg), encoding="utf-8")
    run_log.to_csv(out / "trajectory.csv")
    harness.write_run_metrics(metrics, out / "metrics.csv")
    if not args.no_plots:
        from . import plotting

        truth_db, map_db = harness.scenario_maps(cfg)
        plotting.plot_trajectory(run_log, truth_db, map_db, out / "trajectory.png")
        plotting.plot_run_errors(metrics, out / "errors.png")
    finals = " ".join(f"{m}={metrics.final(m):.3f}" for m in harness.METHODS)
    mode = "feedback" if cfg.gmm_feedback else "independent"
    print(f"final error [m]: {finals} baseline_2pct={metrics.baseline_2pct[-1]:.3f} (gmm mode: {mode})")
    return EXIT_OK


def _write_eval(stats: harness.AggregateStats, out: Path, title: str, cfg: ScenarioConfig, plots: bool) -> str:
    out.mkdir(parents=True, exist_ok=True)
    harness.write_aggregate_csv(stats, out / "aggregate.csv")
    harness.write_error_curves(stats, out / "error_curves.dat")
    harness.write_final_errors(stats, out / "final_errors.dat")
    if plots:
        from . import plotting

        plotting.plot_error_curves(stats, out / "errors.png", title)
        plotting.plot_final_error_hist(stats, out / "final_errors.png")
    return harness.summary_text(stats, title, cfg.path_length)


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    if args.n < 1:
        raise CliError("-n must be >= 1")
    fractions = _parse_fractions(args.masking) if args.masking else None
    out = _prepare_out(Path(args.out), args.force)
    (out / "scenario.cfg").write_text(dump_config(cfg), encoding="utf-8")
    mode = "feedback" if cfg.gmm_feedback else "independent"
    header = f"# runs={args.n} seed0={cfg.seed} gmm_mode={mode}\n"

    if fractions is None:
        stats = harness.monte_carlo(cfg, args.n, cfg.seed, args.jobs)
        text = _write_eval(stats, out, f"orbital_mask_frac={cfg.orbital_mask_frac:g}", cfg, not args.no_plots)
        (out / "report.txt").write_text(header + text, encoding="utf-8")
        print(text, end="")
        return EXIT_OK

    table = harness.masking_sweep(cfg, fractions, args.n, cfg.seed, args.jobs)
    sections = []
    with (out / "masking.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("orbital_mask_frac", *harness.AGGREGATE_HEADER))
        for frac, stats in table.items():
            for m in harness.METHODS:
                s = stats.methods[m]
                writer.writerow([f"{frac:g}", m, stats.n, f"{s.mean_final:.6f}", f"{s.median_final:.6f}",
                                 f"{s.std_final:.6f}", f"{s.win_rate:.6f}"])
            sub = out / f"mask_{int(round(frac * 100)):03d}"
            sections.append(_write_eval(stats, sub, f"orbital_mask_frac={frac:g}", cfg, not args.no_plots))
    if not args.no_plots:
        from . import plotting

        plotting.plot_masking(table, out / "masking.png")
    text = "\n".join(sections)
    (out / "report.txt").write_text(header + text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_version(args) -> int:
    try:
        version = metadata.version("craternav")
    except metadata.PackageNotFoundError:
        version = "unknown"
    print(f"craternav {version}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="craternav", description="Crater-landmark rover localization experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="scenario file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the config seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--force", action="store_true", help="write into a non-empty output directory")

    p = sub.add_parser("gen", help="generate a crater field")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run one traverse")
    common(p)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="Monte Carlo evaluation over seeds")
    common(p)
    p.add_argument("-n", type=int, default=50, help="number of runs (default 50)")
    p.add_argument("--jobs", type=int, default=harness.default_jobs(), help="worker processes")
    p.add_argument("--masking", help="comma list of orbital mask fractions to sweep, e.g. 0,0.25,0.5")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("version", help="print the version")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except (ConfigError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OptimizerError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
