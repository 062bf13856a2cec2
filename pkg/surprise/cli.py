from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import replace
from datetime import UTC, datetime
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import DEFAULT_PILOT_SIZE, DEFAULT_RUN, DEFAULT_SEED, DEFAULT_WORKERS
from .data import Dataset, load_csv, write_csv
from .design import build_plan, draw, kernel
from .errors import ConfigError, ContractError, SurpriseError
from .estimator import fit_ht
from .evaluation import cross_validated_armse, relative_variance
from .logging_setup import configure_logging
from .losses import LossModel
from .models import (
    Command,
    Family,
    Objective,
    ObjectiveKind,
    PilotEstimate,
    PilotMethod,
    RunConfig,
    RunManifest,
    SamplingPlan,
    Scenario,
    Subsample,
)
from .parsing import (
    fit_frame,
    format_fit_report,
    format_report,
    format_summary,
    parse_json_object,
    parse_vector,
    read_pilot_file,
)
from .pilot import pilot_external, pilot_uniform_mle, pilot_wcc
from .simulation import custom_scenario, run, scenario, summary_frame
from .storage import load_run_config, to_jsonable, write_manifest

logger = logging.getLogger(__name__)

PROG = "surprise-sampler"
METRICS = ("armse", "relvar")
STREAM_PILOT, STREAM_DRAW = 1, 2
DEFAULT_RELVAR_REPS = 100
CSV_FLOAT = "%.17g"


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="CSV file with a header row.")
    parser.add_argument("--response", help="Name of the response column.")
    parser.add_argument("--loss", choices=[f.value for f in Family], help="Working loss family (default logistic).")
    parser.add_argument("--standardize", action="store_true", help="Standardize covariate columns on load.")
    parser.add_argument("--log-offset", type=float, help="Replace every covariate x by log(x + OFFSET) on load.")


def _add_design_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--objective", choices=[k.value for k in ObjectiveKind], help="Sampling objective.")
    parser.add_argument("--direction-vector", help="Comma-separated v for the direction objective, intercept first.")
    parser.add_argument("--rate", type=float, help="Target sampling rate r in (0, 1).")
    parser.add_argument("--min-prob", type=float, help="Floor for every inclusion probability.")
    parser.add_argument("--pilot", choices=[p.value for p in PilotMethod], help="Pilot route.")
    parser.add_argument("--pilot-size", type=int, help="Pilot subsample size.")
    parser.add_argument("--pilot-file", help="One-column CSV with an external pilot, intercept first.")
    parser.add_argument("--level", type=float, help="Confidence level of the Wald intervals.")


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="Master random seed.")
    parser.add_argument("--out", help="Output directory.")
    parser.add_argument("--workers", type=int, help="Worker count (default: every CPU).")
    parser.add_argument("--config", help="JSON run configuration; flags override it.")
    parser.add_argument("--debug", action="store_true", help="Write debug logs to surprise_sampler.log.")
    parser.add_argument("--log-file", help="Debug log path (implies --debug).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Surprise subsampling with Horvitz-Thompson estimation.",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sample = commands.add_parser("sample", help="Draw a surprise subsample.", argument_default=argparse.SUPPRESS)
    fit = commands.add_parser("fit", help="Sample and fit the HT estimator.", argument_default=argparse.SUPPRESS)
    for sub in (sample, fit):
        _add_data_options(sub)
        _add_design_options(sub)
        _add_run_options(sub)

    simulate = commands.add_parser("simulate", help="Run a Monte-Carlo study.", argument_default=argparse.SUPPRESS)
    simulate.add_argument("--scenario", help="sim1 .. sim6, or a JSON file describing a custom scenario.")
    simulate.add_argument("--reps", type=int, help="Number of replications.")
    simulate.add_argument("--n", type=int, help="Full-data size of every replication.")
    simulate.add_argument("--misspecified", action="store_true", help="Add the x1^2 term (sim5, sim6).")
    simulate.add_argument("--pilot", choices=[p.value for p in PilotMethod], help="Pilot route of every replication.")
    simulate.add_argument("--pilot-size", type=int, help="Pilot subsample size.")
    _add_run_options(simulate)

    report = commands.add_parser("report", help="Evaluate on user data.", argument_default=argparse.SUPPRESS)
    _add_data_options(report)
    _add_design_options(report)
    report.add_argument("--metric", choices=METRICS, help="armse (cross-validated) or relvar.")
    report.add_argument("--folds", type=int, help="Cross-validation folds for armse.")
    report.add_argument("--reps", type=int, help="Replications for relvar.")
    report.add_argument("--n", type=int, help="Uniform sample size per relvar replication.")
    _add_run_options(report)
    return parser


def resolve_config(command: str, options: dict, config_path: str | None = None) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = replace(DEFAULT_RUN)
    if config_path:
        cfg = load_run_config(cfg, config_path)
    cfg = replace(cfg, **options, command=command)
    try:
        cfg.command = Command(cfg.command)
        cfg.loss = Family(cfg.loss)
        cfg.objective = ObjectiveKind(cfg.objective)
        if cfg.pilot is not None:
            cfg.pilot = PilotMethod(cfg.pilot)
    except ValueError as exc:
        raise ConfigError(str(exc))
    if cfg.command is not Command.SIMULATE:
        cfg.seed = DEFAULT_SEED if cfg.seed is None else cfg.seed
        cfg.pilot = cfg.pilot or PilotMethod.UNIFORM_MLE
        cfg.pilot_size = DEFAULT_PILOT_SIZE if cfg.pilot_size is None else cfg.pilot_size
    if isinstance(cfg.direction_vector, str):
        cfg.direction_vector = parse_vector(cfg.direction_vector).tolist()
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    needs_data = cfg.command in (Command.SAMPLE, Command.FIT, Command.REPORT)
    checks = [
        (needs_data and not cfg.data, f"The {cfg.command} command needs --data."),
        (cfg.command is Command.SIMULATE and not cfg.scenario, "The simulate command needs --scenario."),
        (not 0.0 < cfg.rate < 1.0, f"--rate must lie in (0, 1), got {cfg.rate}."),
        (not 0.0 <= cfg.min_prob < cfg.rate, f"--min-prob must lie in [0, rate), got {cfg.min_prob}."),
        (not 0.0 < cfg.level < 1.0, f"--level must lie in (0, 1), got {cfg.level}."),
        (cfg.pilot_size is not None and cfg.pilot_size < 1, "--pilot-size must be positive."),
        (cfg.workers is not None and cfg.workers < 1, "--workers must be positive."),
        (cfg.reps is not None and cfg.reps < 1, "--reps must be positive."),
        (
            cfg.objective is ObjectiveKind.DIRECTION and not cfg.direction_vector,
            "The direction objective needs --direction-vector.",
        ),
        (
            cfg.command is not Command.SIMULATE
            and cfg.pilot is PilotMethod.EXTERNAL
            and not (cfg.pilot_file or cfg.pilot_theta),
            "The external pilot needs --pilot-file or pilot_theta in the config file.",
        ),
        (cfg.metric not in METRICS, f"--metric must be one of {', '.join(METRICS)}."),
        (cfg.folds < 2, "--folds must be at least 2."),
    ]
    for failed, message in checks:
        if failed:
            raise ConfigError(message)


def _workers(cfg: RunConfig) -> int:
    return cfg.workers or DEFAULT_WORKERS


def _rng(cfg: RunConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0, stream)))


def _load(cfg: RunConfig, standardize: bool | None = None) -> tuple[Dataset, LossModel]:
    if not cfg.response:
        raise ConfigError("--response is required for the supervised losses.")
    standardize = cfg.standardize if standardize is None else standardize
    data = load_csv(cfg.data, cfg.response, standardize=standardize, log_offset=cfg.log_offset)
    return data, LossModel.for_dataset(cfg.loss, data.q)


def _pilot(cfg: RunConfig, data: Dataset, m: LossModel) -> PilotEstimate:
    rng = _rng(cfg, STREAM_PILOT)
    match cfg.pilot:
        case PilotMethod.WCC:
            return pilot_wcc(data, cfg.pilot_size, rng, m, workers=_workers(cfg))
        case PilotMethod.EXTERNAL:
            theta = read_pilot_file(cfg.pilot_file) if cfg.pilot_file else parse_vector(cfg.pilot_theta)
            return pilot_external(theta, data, m, workers=_workers(cfg))
    return pilot_uniform_mle(data, m, cfg.pilot_size, rng, workers=_workers(cfg))


def _objective(cfg: RunConfig) -> Objective:
    direction = None if cfg.direction_vector is None else np.asarray(cfg.direction_vector, dtype=float)
    return Objective(cfg.objective, direction)


def _design(cfg: RunConfig, data: Dataset, m: LossModel) -> tuple[PilotEstimate, SamplingPlan, Subsample]:
    pilot = _pilot(cfg, data, m)
    kernels = kernel(data, m, pilot, _objective(cfg), workers=_workers(cfg))
    plan = build_plan(kernels, cfg.rate, min_prob=cfg.min_prob)
    sub = draw(plan, _rng(cfg, STREAM_DRAW), workers=_workers(cfg))
    logger.info("Drew %d of %d rows (expected %.1f, c=%.6g)", len(sub), data.n, plan.expected_size, plan.c)
    return pilot, plan, sub


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_frame(frame: pd.DataFrame, path: Path, float_format: str = CSV_FLOAT) -> Path:
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
    return path


def cmd_sample(cfg: RunConfig) -> list[Path]:
    data, m = _load(cfg)
    _, plan, sub = _design(cfg, data, m)
    out = _output_dir(cfg)
    subsample = write_csv(
        data.subset(sub.indices), out / "subsample.csv", extra={"index": sub.indices, "weight": sub.weights}
    )
    plan_frame = pd.DataFrame({"index": np.arange(data.n), "kernel": plan.kernels, "prob": plan.probs})
    return [subsample, _write_frame(plan_frame, out / "plan.csv")]


def cmd_fit(cfg: RunConfig) -> list[Path]:
    data, m = _load(cfg)
    pilot, plan, sub = _design(cfg, data, m)
    fit = fit_ht(data, m, sub, pilot.theta_tilde, level=cfg.level, workers=_workers(cfg))
    names = data.coordinate_names
    out = _output_dir(cfg)
    estimates = _write_frame(fit_frame(fit, names), out / "estimates.csv")
    extra = {"pilot": str(pilot.method), "rate_constant": plan.c, "expected_size": plan.expected_size}
    report = out / "fit_report.txt"
    report.write_text(format_fit_report(fit, names, extra), encoding="utf-8")
    return [estimates, report]


def _scenario_file(cfg: RunConfig, path: Path) -> Scenario:
    try:
        fields = parse_json_object(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read scenario file {path}: {exc}")
    except ValueError as exc:
        raise ConfigError(f"Invalid scenario file {path}: {exc}")
    overrides = {
        "seed": cfg.seed,
        "replications": cfg.reps,
        "n": cfg.n,
        "pilot_method": cfg.pilot,
        "pilot_size": cfg.pilot_size,
    }
    fields.update({key: value for key, value in overrides.items() if value is not None})
    return custom_scenario(fields)


def _scenario(cfg: RunConfig) -> Scenario:
    path = Path(cfg.scenario)
    try:
        if path.suffix == ".json" or path.is_file():
            return _scenario_file(cfg, path)
        return scenario(
            cfg.scenario,
            n=cfg.n,
            misspecified=cfg.misspecified,
            replications=cfg.reps,
            seed=cfg.seed,
            pilot_size=cfg.pilot_size,
            pilot_method=cfg.pilot,
        )
    except ContractError as exc:
        raise ConfigError(str(exc))


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    s = _scenario(cfg)
    cfg.seed, cfg.pilot, cfg.pilot_size = s.seed, s.pilot_method, s.pilot_size
    summary = run(s, workers=_workers(cfg))
    frame = summary_frame(summary)
    out = _output_dir(cfg)
    csv_path = _write_frame(frame, out / "summary.csv", float_format="%.10e")
    text_path = out / "summary.txt"
    text_path.write_text(format_summary(summary, frame), encoding="utf-8")
    return [csv_path, text_path]


def cmd_report(cfg: RunConfig) -> list[Path]:
    out_name = f"report_{cfg.metric}"
    if cfg.metric == "armse":
        data, m = _load(cfg, standardize=False)
        train_size = data.n - data.n // cfg.folds
        frame = cross_validated_armse(
            data,
            m,
            folds=cfg.folds,
            subsample_size=max(m.dim, round(cfg.rate * train_size)),
            pilot_size=cfg.pilot_size,
            objective=_objective(cfg),
            standardize=cfg.standardize,
            seed=cfg.seed,
            workers=_workers(cfg),
        )
        means = frame.drop(columns="fold").mean().to_dict()
        frame = pd.concat([frame.astype({"fold": object}), pd.DataFrame([{"fold": "mean", **means}])])
        title = f"ARMSE over {cfg.folds} folds"
    else:
        data, m = _load(cfg)
        frame = relative_variance(
            data,
            m,
            replications=cfg.reps or DEFAULT_RELVAR_REPS,
            sample_size=cfg.n or data.n // 2,
            pilot_size=cfg.pilot_size,
            seed=cfg.seed,
            workers=_workers(cfg),
        )
        title = "Variance relative to the full-sample fit"
    out = _output_dir(cfg)
    text_path = out / f"{out_name}.txt"
    text_path.write_text(format_report(frame, title), encoding="utf-8")
    return [_write_frame(frame, out / f"{out_name}.csv"), text_path]


COMMANDS: dict[Command, Callable[[RunConfig], list[Path]]] = {
    Command.SAMPLE: cmd_sample,
    Command.FIT: cmd_fit,
    Command.SIMULATE: cmd_simulate,
    Command.REPORT: cmd_report,
}


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    log_file = args.pop("log_file", None)
    debug = args.pop("debug", False) or log_file is not None
    log_path = configure_logging(debug, Path(log_file) if log_file else None)
    if debug and log_path is None:
        logger.warning("Debug logging requested but log file could not be created.")

    started_at = datetime.now(UTC)
    started = time.perf_counter()
    try:
        cfg = resolve_config(command, args, config_path)
        outputs = COMMANDS[cfg.command](cfg)
        manifest = RunManifest(
            config=to_jsonable(cfg),
            version=__version__,
            seed=cfg.seed,
            started=started_at.isoformat(timespec="seconds"),
            finished=datetime.now(UTC).isoformat(timespec="seconds"),
            wall_seconds=round(time.perf_counter() - started, 3),
        )
        outputs.append(write_manifest(cfg.out, manifest, outputs))
    except ConfigError as exc:
        sys.stderr.write(f"{PROG}: error: {exc}\n")
        return 2
    except (SurpriseError, OSError, NotImplementedError) as exc:
        logger.debug("Command %s failed", command, exc_info=True)
        sys.stderr.write(f"{PROG}: error: {exc}\n")
        return 1
    for path in outputs:
        sys.stdout.write(f"{path}\n")
    return 0
