"""Command-line entry point for the HAB station-keeping toolkit."""
import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add src to path - handle both frozen (PyInstaller) and development mode
if getattr(sys, 'frozen', False):
    bundle_dir = getattr(sys, '_MEIPASS', None)
    if bundle_dir and str(bundle_dir) not in sys.path:
        sys.path.insert(0, str(bundle_dir))
else:
    src_dir = Path(__file__).parent.parent.resolve()
    if str(src_dir) not in sys.path:
        sys.path.insert(0, str(src_dir))

import numpy as np
import pandas as pd

from agent.search import hyperparameter_search, write_trials
from agent.trainer import DQNTrainer, GridPair, greedy_policy, load_policy
from models.config_models import GridPairPaths, RunConfig
from models.geo_models import GeoCoord
from services.eval_service import (
    EvalCampaign,
    campaign_histogram,
    compare_models,
    export_top_trajectories,
    month_summary,
    paired_distributions,
    run_campaign,
    score_means_table,
    write_records,
    zero_score_table,
)
from services.forecast_score_service import forecast_score, score_distribution, score_times
from services.logging_service import get_logging_service
from services.runtime_metrics_service import default_workers
from services.sample_data_service import write_sample_day
from services.synth_service import densify_time, load_sounding_dir, summarize_ingestion, synthesize_forecast
from storage.config_store import ConfigStore
from storage.grid_store import ENCODING_BINARY, ENCODING_CSV, load_grid, save_grid
from utils.errors import ConfigurationError, CoverageError, DataError, HabStationError, RuntimeFailure
from utils.paths import ensure_dir, get_sample_data_dir
from utils.timeutil import format_compact, format_utc, month_label, to_epoch

try:
    from src import __version__
except ImportError:
    __version__ = "0.4.0"

TOOL_NAME = "hab-station"

# Process exit codes; errors report theirs through HabStationError.exit_code
EXIT_OK = 0
EXIT_CONFIG = ConfigurationError.exit_code
EXIT_DATA = DataError.exit_code
EXIT_RUNTIME = RuntimeFailure.exit_code
EXIT_COVERAGE = CoverageError.exit_code
EXIT_INTERRUPTED = 130

EXIT_CODES_HELP = (
    f"exit codes: {EXIT_OK} success, {EXIT_CONFIG} configuration error, {EXIT_DATA} missing or malformed "
    f"input (parse errors), {EXIT_RUNTIME} runtime or training failure, {EXIT_COVERAGE} input does not cover "
    f"the request (altitude window, arena, time span), {EXIT_INTERRUPTED} interrupted"
)


@dataclasses.dataclass
class RunContext:
    """Resolved configuration for one command invocation."""
    config: RunConfig
    config_hash: str
    seed: int
    workers: int
    out_dir: Path

    def metadata(self, **extra) -> Dict:
        block = {"tool": TOOL_NAME, "version": __version__, "config_hash": self.config_hash, "seed": self.seed}
        block.update(extra)
        return block

    def write_manifest(self, command: str, outputs: List[Path], **extra) -> Path:
        """Provenance document listing a command's output files."""
        document = {
            "command": command,
            "metadata": self.metadata(**extra),
            "outputs": sorted(str(Path(p).relative_to(self.out_dir)) if Path(p).is_relative_to(self.out_dir)
                              else str(p) for p in outputs),
        }
        path = self.out_dir / f"{command}_manifest.json"
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _entropy_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2 ** 31))


def build_context(args) -> RunContext:
    """Merge defaults, config file and CLI flags (CLI wins)."""
    store = ConfigStore(args.config)
    store.load()
    for item in args.overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got '{item}'")
        key, value = item.split("=", 1)
        store.override(key.strip(), value.strip())
    store.set_seed(args.seed)
    store.set_workers(args.workers)
    config = store.config

    seed = config.seed if config.seed is not None else _entropy_seed()
    workers = config.workers if config.workers > 0 else default_workers()
    out_dir = ensure_dir(Path(args.out or config.paths.output_dir))
    return RunContext(config, store.config_hash(), seed, workers, out_dir)


def _load_pairs(entries: List[GridPairPaths], what: str) -> List[GridPair]:
    if not entries:
        raise ConfigurationError(f"config paths.{what} lists no grid pairs")
    pairs = []
    for entry in entries:
        truth = load_grid(entry.truth)
        forecast = load_grid(entry.forecast)
        pairs.append(GridPair(entry.label or month_label(truth.times[0]), truth, forecast))
    return pairs


def _write_csv(frame: pd.DataFrame, path: Path, **kwargs) -> Path:
    frame.to_csv(path, float_format=kwargs.pop("float_format", "%.6f"), **kwargs)
    return path


# Subcommands

def cmd_synth(args, ctx: RunContext) -> int:
    """Synthesize one grid per launch time plus the densified series."""
    logger = get_logging_service()
    soundings_dir = args.soundings or ctx.config.paths.soundings_dir
    if not soundings_dir:
        raise ConfigurationError("no sounding directory (use --soundings or paths.soundings_dir)")
    soundings = load_sounding_dir(soundings_dir)
    cfg = ctx.config.synthesis
    result = synthesize_forecast(soundings, cfg)
    grid = result.grid
    metadata = ctx.metadata(stations_used=result.stations_used)

    outputs = []
    for index, launch_time in enumerate(grid.times):
        frame = grid.replace(times=grid.times[index:index + 1], u=grid.u[index:index + 1],
                             v=grid.v[index:index + 1])
        outputs.append(save_grid(frame, ctx.out_dir / f"synthetic_{format_compact(launch_time)}.json",
                                 encoding=args.encoding, metadata=metadata))
    if grid.times.size >= 2 and not args.no_densify:
        series = densify_time(grid, cfg.temporal_step)
        outputs.append(save_grid(series, ctx.out_dir / "synthetic_series.json", encoding=args.encoding,
                                 metadata=metadata))
    elif grid.times.size < 2:
        logger.info("Single launch time; no densified series written")

    summary = pd.DataFrame(summarize_ingestion(soundings, result),
                           columns=["station_id", "launch_time", "samples", "status", "reason"])
    outputs.append(_write_csv(summary, ctx.out_dir / "ingestion.csv", index=False))
    ctx.write_manifest("synth", outputs, levels=int(grid.n_levels))
    print(summary.to_string(index=False))
    print(f"{grid.n_levels} levels x {grid.latitudes.size} x {grid.longitudes.size} cells, "
          f"{grid.times.size} launch times -> {ctx.out_dir}")
    return EXIT_OK


def cmd_score(args, ctx: RunContext) -> int:
    """Forecast score at one coordinate, or a random-sample distribution."""
    cfg = ctx.config.score
    grid = load_grid(args.grid)
    outputs = []
    if args.random:
        paired = load_grid(args.paired) if args.paired else None
        dist = score_distribution(grid, args.random, ctx.seed, cfg, filter_zero=args.filter_zero,
                                  paired=paired, workers=ctx.workers)
        table = pd.DataFrame(dist.samples, columns=["latitude", "longitude", "start_time"])
        table["start_time"] = [format_utc(t) for t in table["start_time"]]
        table.insert(0, "sample", np.arange(len(table)))
        table["fs"] = dist.raw_scores
        models = {grid.kind: dist}
        if paired is not None:
            table["fs_paired"] = dist.paired.raw_scores
            models[f"paired_{paired.kind}"] = dist.paired
        outputs.append(_write_csv(table, ctx.out_dir / "scores.csv", index=False))
        summary = {
            "metadata": ctx.metadata(samples=args.random),
            "models": {name: {"kind": d.kind, "mean": d.mean, "std": d.std, "zero_fraction": d.zero_fraction,
                              "filtered": d.filtered, "count": int(d.scores.size)}
                       for name, d in models.items()},
        }
        path = ctx.out_dir / "score_summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        outputs.append(path)
        for name, d in models.items():
            print(f"{name}: mean {d.mean:.4f} std {d.std:.4f} zero fraction {d.zero_fraction:.4f}")
    else:
        if args.lat is None or args.lon is None:
            raise ConfigurationError("score needs --lat and --lon, or --random N")
        start = to_epoch(args.start) if args.start else float(grid.times[0])
        score = forecast_score(grid, GeoCoord(args.lat, args.lon), score_times(start, cfg), cfg)
        document = {"metadata": ctx.metadata(), "score": score.to_dict()}
        path = ctx.out_dir / "score.json"
        path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        outputs.append(path)
        print(json.dumps(score.to_dict(), sort_keys=True))
    ctx.write_manifest("score", outputs)
    return EXIT_OK


def _checkpoint_path(args, ctx: RunContext) -> Path:
    if getattr(args, "checkpoint", None):
        return Path(args.checkpoint)
    if ctx.config.paths.checkpoint:
        return Path(ctx.config.paths.checkpoint)
    return ctx.out_dir / "checkpoint.json"


def cmd_train(args, ctx: RunContext) -> int:
    """Train (or resume) a DQN agent and write the checkpoint and learning curve."""
    cfg = ctx.config
    library = _load_pairs(cfg.paths.training_pairs, "training_pairs")
    checkpoint = _checkpoint_path(args, ctx)
    if args.resume:
        trainer = DQNTrainer.resume(checkpoint, library, cfg.sim, cfg.reward, cfg.dqn, cfg.score, ctx.config_hash)
        ctx.seed = trainer.seed
    else:
        trainer = DQNTrainer(library, cfg.sim, cfg.reward, cfg.dqn, cfg.score, seed=ctx.seed,
                             checkpoint_path=checkpoint, config_hash=ctx.config_hash)
    result = trainer.train(stop_at=args.stop_after)
    curve_path = _write_csv(result.curve, ctx.out_dir / "learning_curve.csv", index=False)
    ctx.write_manifest("train", [checkpoint, curve_path], steps=result.steps, completed=result.completed)
    final = result.curve.iloc[-1] if len(result.curve) else None
    status = "completed" if result.completed else "paused"
    print(f"Training {status} at step {result.steps}; checkpoint {checkpoint}")
    if final is not None:
        print(f"last evaluation: step {int(final['step'])} mean reward {final['mean_reward']:.2f} "
              f"TWR50 {final['twr50']:.3f}")
    return EXIT_OK


def cmd_eval(args, ctx: RunContext) -> int:
    """Greedy-policy campaign over the evaluation months with report tables."""
    cfg = ctx.config
    checkpoint = _checkpoint_path(args, ctx)
    net, normalizer, _ = load_policy(checkpoint)
    if normalizer.column_levels != cfg.sim.column_levels:
        raise ConfigurationError("checkpoint observation size differs from sim.column_levels")
    months = _load_pairs(cfg.paths.eval_months, "eval_months")
    episodes = args.episodes or cfg.eval.episodes_per_month
    campaign = EvalCampaign(months, episodes, ctx.seed, cfg.score, str(checkpoint))
    policy = greedy_policy(net, normalizer)

    trajectory_dir = ctx.out_dir / "trajectories" if args.export_trajectories else None
    try:
        result = run_campaign(campaign, policy, cfg.sim, cfg.reward, workers=ctx.workers,
                              trajectory_dir=trajectory_dir, partial_path=ctx.out_dir / "episodes.partial.csv")
    except KeyboardInterrupt:
        print("Evaluation interrupted; partial records in episodes.partial.csv", file=sys.stderr)
        return EXIT_INTERRUPTED

    outputs = [write_records(result.records, ctx.out_dir / "episodes.csv")]
    summary = month_summary(result.records)
    outputs.append(_write_csv(summary, ctx.out_dir / "month_summary.csv", index=False))
    histogram = campaign_histogram(result.records, cfg.eval, zero_filter=True)
    outputs.append(_write_csv(histogram.to_frame(), ctx.out_dir / "heatmap.csv"))
    raw = campaign_histogram(result.records, cfg.eval, zero_filter=False)
    outputs.append(_write_csv(raw.to_frame(), ctx.out_dir / "heatmap_unfiltered.csv"))

    top_k = args.top_k if args.top_k is not None else cfg.eval.top_trajectories
    if top_k:
        outputs.extend(export_top_trajectories(campaign, result.records, top_k, policy, cfg.sim, cfg.reward,
                                               ctx.out_dir / "top_trajectories"))
    if trajectory_dir is not None:
        outputs.extend(sorted(trajectory_dir.glob("*.csv")))
    ctx.write_manifest("eval", outputs, checkpoint=str(checkpoint), episodes_per_month=episodes)
    print(summary.to_string(index=False))
    return EXIT_OK


def cmd_compare(args, ctx: RunContext) -> int:
    """Model-variation statistics and forecast-score tables for grid pairs."""
    cfg = ctx.config
    if args.a or args.b:
        if not (args.a and args.b):
            raise ConfigurationError("compare needs both --a and --b")
        b = load_grid(args.b)
        pairs = [GridPair(args.label or month_label(b.times[0]), b, load_grid(args.a))]
    else:
        pairs = _load_pairs(cfg.paths.eval_months, "eval_months")

    level_frames, aggregates = [], []
    for index, pair in enumerate(pairs):
        report = compare_models(pair.forecast, pair.truth, cfg.eval.compare_max_cells,
                                seed=ctx.seed + index, month=pair.label)
        level_frames.append(report.levels)
        aggregates.append(report.aggregate)
    outputs = [
        _write_csv(pd.concat(level_frames, ignore_index=True), ctx.out_dir / "model_diff_levels.csv", index=False),
        _write_csv(pd.DataFrame(aggregates), ctx.out_dir / "model_diff_months.csv", index=False),
    ]

    samples = args.score_samples if args.score_samples is not None else cfg.eval.score_samples
    if samples > 0:
        distributions = paired_distributions(pairs, samples, ctx.seed, cfg.score, ctx.workers)
        outputs.append(_write_csv(zero_score_table(pairs, samples, ctx.seed, cfg.score, distributions=distributions),
                                  ctx.out_dir / "zero_scores.csv", index=False))
        outputs.append(_write_csv(score_means_table(distributions), ctx.out_dir / "score_means.csv", index=False))
    ctx.write_manifest("compare", outputs, score_samples=samples)
    print(pd.DataFrame(aggregates).to_string(index=False))
    return EXIT_OK


def cmd_sample(args, ctx: RunContext) -> int:
    """Write the bundled sample day as truth and forecast interchange files."""
    soundings = args.soundings or get_sample_data_dir() / "soundings"
    paths = write_sample_day(ctx.out_dir, soundings, ctx.config.synthesis, seed=ctx.seed, metadata=ctx.metadata())
    ctx.write_manifest("sample", list(paths.values()))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_search(args, ctx: RunContext) -> int:
    """Random hyperparameter search over short training runs."""
    cfg = ctx.config
    library = _load_pairs(cfg.paths.training_pairs, "training_pairs")
    search = cfg.search if args.budget is None else dataclasses.replace(cfg.search, budget=args.budget)
    trials = hyperparameter_search(library, cfg.sim, cfg.reward, cfg.dqn, search, ctx.seed, cfg.score)
    path = write_trials(trials, ctx.out_dir / "search")
    ctx.write_manifest("search", [path], budget=search.budget)
    best = trials[0]
    print(f"best trial {best.trial}: lr={best.learning_rate:.3g} eps={best.epsilon_start:.3f}->"
          f"{best.epsilon_end:.3f} TWR50={best.score_twr50:.3f} ({best.status})")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "score": cmd_score,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "sample": cmd_sample,
    "search": cmd_search,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="RunConfig JSON document")
    common.add_argument("--seed", type=int, help="master seed (drawn from entropy and recorded when omitted)")
    common.add_argument("--workers", type=int, help="worker threads; 1 is the reference mode, 0 one per core")
    common.add_argument("--out", help="output directory (default paths.output_dir)")
    common.add_argument("--log-level", default="INFO", help="console log level")
    common.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        help="override a config value, e.g. --set dqn.learning_rate=1e-4")

    parser = argparse.ArgumentParser(prog=TOOL_NAME, description="HAB station-keeping toolkit", epilog=EXIT_CODES_HELP)
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesize wind grids from radiosonde soundings")
    p.add_argument("--soundings", help="directory of STATIONID_YYYYMMDDHH.csv files")
    p.add_argument("--encoding", choices=[ENCODING_BINARY, ENCODING_CSV], default=ENCODING_BINARY)
    p.add_argument("--no-densify", action="store_true", help="skip the time-densified series")

    p = sub.add_parser("score", parents=[common], help="opposing-winds forecast score")
    p.add_argument("--grid", required=True, help="grid header path")
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)
    p.add_argument("--start", help="window start, ISO-8601 UTC (default first grid time)")
    p.add_argument("--random", type=int, metavar="N", help="score N random coordinates")
    p.add_argument("--paired", help="second grid scored at the same random coordinates")
    p.add_argument("--filter-zero", action="store_true", help="drop zero scores from summary statistics")

    p = sub.add_parser("train", parents=[common], help="train a DQN station-keeping agent")
    p.add_argument("--checkpoint", help="checkpoint manifest path")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint")
    p.add_argument("--stop-after", type=int, metavar="STEP", help="pause at this global step")

    p = sub.add_parser("eval", parents=[common], help="evaluation campaign over the eval months")
    p.add_argument("--checkpoint", help="checkpoint manifest path")
    p.add_argument("--episodes", type=int, help="episodes per month")
    p.add_argument("--export-trajectories", action="store_true", help="write every episode's trajectory")
    p.add_argument("--top-k", type=int, help="re-run and export the top K episodes by TWR50")

    p = sub.add_parser("compare", parents=[common], help="forecast vs synthetic model statistics")
    p.add_argument("--a", help="forecast-like grid header (default: eval months)")
    p.add_argument("--b", help="synthetic grid header")
    p.add_argument("--label", help="month label for --a/--b")
    p.add_argument("--score-samples", type=int, help="paired score samples per month (0 skips the tables)")

    p = sub.add_parser("sample", parents=[common], help="write the bundled sample day as grid files")
    p.add_argument("--soundings", help="sounding directory (default bundled sample)")

    p = sub.add_parser("search", parents=[common], help="random hyperparameter search")
    p.add_argument("--budget", type=int, help="number of trials")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand, map errors to exit codes."""
    args = build_parser().parse_args(argv)
    logging_service = get_logging_service()
    logging_service.set_console_level(args.log_level)
    logging_service.info(f"{TOOL_NAME} {__version__}: {args.command}")
    try:
        ctx = build_context(args)
        return COMMANDS[args.command](args, ctx)
    except HabStationError as e:
        logging_service.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        # EXIT_CONFIG, EXIT_DATA (parse), EXIT_RUNTIME or EXIT_COVERAGE
        return e.exit_code
    except KeyboardInterrupt:
        logging_service.warning("Interrupted")
        return EXIT_INTERRUPTED
    except Exception as e:
        logging_service.exception(f"Unexpected failure: {e}")
        print(f"error: unexpected failure ({e}); see the log for the traceback", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
