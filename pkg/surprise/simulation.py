"""Scenario presets, data generation and the Monte-Carlo replication engine."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.special import expit, ndtr

from . import storage
from .calibration import CALIBRATION_VERSION, SCHEMES, half_ones, scheme_intercept
from .config import DEFAULT_ORACLE_SIZE, MAX_FAILURE_RATE
from .data import Dataset
from .design import build_plan, draw, kernel
from .errors import ContractError, NumericalError, SimulationError, SurpriseError
from .estimator import fit_ht, full_fit, lcc_adjusted_fit, uniform_fit
from .losses import LossModel
from .models import (
    EstimatorSummary,
    Family,
    FitResult,
    MonteCarloSummary,
    Objective,
    ObjectiveKind,
    PilotEstimate,
    PilotMethod,
    Scenario,
)
from .numerics import newton_minimize, solve_spd, symmetrize
from .parallel import chunked_sum
from .pilot import pilot_external, pilot_probit_uniform, pilot_uniform_mle, pilot_wcc

logger = logging.getLogger(__name__)

ESTIMATORS = ("pilot", "full", "uniform", "lcc", "ht-lcc", "ht")
SUMMARY_COLUMNS = [
    "estimator",
    "bias2",
    "variance",
    "var_estimate",
    "coverage",
    "mean_fraction",
    "successes",
    "failures",
]

# spawn_key = (rep, stream)
STREAM_DATA, STREAM_PILOT, STREAM_LCC_DRAW, STREAM_DRAW, STREAM_UNIFORM = range(5)
ORACLE_KEY = 2**31 - 1
ORACLE_CHUNK = 200_000

_PRESETS: dict[str, dict[str, Any]] = {
    "sim1": {"n": 100_000, "pilot_size": 1000, "estimators": ("lcc", "ht-lcc", "full")},
    "sim2": {"n": 100_000, "pilot_size": 1000, "estimators": ("lcc", "ht-lcc")},
    "sim3": {
        "n": 100_000,
        "pilot_size": 1000,
        "pilot_family": Family.PROBIT,
        "estimators": ("pilot", "lcc", "ht-lcc"),
    },
    "sim4": {
        "n": 100_000,
        "pilot_size": 1000,
        "objective": ObjectiveKind.DIRECTION,
        "direction": (0.0, 1.0, 0.0, 0.0, 0.0, 0.0),
        "estimators": ("lcc", "ht-lcc", "ht"),
        "coordinates": (1,),
    },
    "sim5": {"n": 10_000, "pilot_size": 1000, "subsample": 1000, "uniform_size": 2000, "estimators": ("ht", "uniform")},
    "sim6": {"n": 10_000, "pilot_size": 1000, "subsample": 1000, "uniform_size": 2000, "estimators": ("ht", "uniform")},
}


def scenario(
    scenario_id: str,
    *,
    n: int | None = None,
    q: int | None = None,
    misspecified: bool | None = None,
    replications: int | None = None,
    seed: int | None = None,
    pilot_size: int | None = None,
    pilot_method: PilotMethod | str | None = None,
) -> Scenario:
    """Desk-scale preset for one of the built-in studies.

    ``q`` only applies to ``sim1`` (first half of the slopes one, the rest
    zero); ``misspecified`` toggles the x1^2 term of ``sim5``/``sim6``;
    ``pilot_method`` swaps the uniform pilot for the case-control one.
    """
    key = scenario_id.lower()
    if key not in _PRESETS:
        raise ContractError(f"Unknown scenario {scenario_id!r}; choose one of {', '.join(_PRESETS)}.")
    preset = dict(_PRESETS[key])
    scheme = SCHEMES[key]
    if q is not None:
        if key != "sim1":
            raise ContractError("Only sim1 accepts a different covariate count.")
        scheme = replace(scheme, q=q, slopes=half_ones(q))
    if misspecified is None:
        misspecified = scheme.misspecified
    elif misspecified != scheme.misspecified and key not in ("sim5", "sim6"):
        raise ContractError(f"{key} has a fixed specification.")
    default_n = preset.pop("n")
    n = n or default_n
    subsample = preset.pop("subsample", None)
    if pilot_size is not None:
        preset["pilot_size"] = pilot_size
    if pilot_method is not None:
        preset["pilot_method"] = PilotMethod(pilot_method)
    s = Scenario(
        id=key,
        family=scheme.family,
        n=n,
        q=scheme.q,
        intercept=scheme_intercept(scheme, misspecified),
        slopes=scheme.slopes,
        quadratic=scheme.quadratic,
        x_scale=scheme.x_scale,
        noise_sd=scheme.noise_sd,
        misspecified=misspecified,
        rate=None if subsample is None else subsample / n,
        **preset,
    )
    if replications is not None:
        s.replications = replications
    if seed is not None:
        s.seed = seed
    validate(s)
    return s


def custom_scenario(fields: dict[str, Any]) -> Scenario:
    """Build a ``custom`` scenario from a mapping of :class:`Scenario` fields."""
    fields = {str(k).replace("-", "_"): v for k, v in fields.items()}
    fields.setdefault("id", "custom")
    try:
        s = Scenario(**fields)
    except (TypeError, ValueError) as exc:
        raise ContractError(f"Invalid custom scenario: {exc}")
    validate(s)
    return s


def _validate_pilot(s: Scenario) -> None:
    if not 1 <= s.pilot_size <= s.n:
        raise ContractError(f"Pilot size {s.pilot_size} must lie in [1, n={s.n}].")
    if s.pilot_method is not PilotMethod.WCC:
        return
    if s.family not in (Family.LOGISTIC, Family.PROBIT):
        raise ContractError(f"A case-control pilot needs a binary response, not {s.family}.")
    if s.pilot_size % 2:
        raise ContractError(f"A case-control pilot needs an even pilot size, got {s.pilot_size}.")


def validate(s: Scenario) -> None:
    if len(s.slopes) != s.q:
        raise ContractError(f"Scenario has {len(s.slopes)} slopes for q={s.q}.")
    if s.replications < 1:
        raise ContractError("A scenario needs at least one replication.")
    _validate_pilot(s)
    if s.rate is not None and not 0.0 < s.rate <= 1.0:
        raise ContractError(f"Sampling rate must lie in (0, 1], got {s.rate}.")
    unknown = set(s.estimators) - set(ESTIMATORS)
    if unknown:
        raise ContractError(f"Unknown estimator(s): {', '.join(sorted(unknown))}.")
    if s.objective is ObjectiveKind.DIRECTION and (s.direction is None or len(s.direction) != s.dim):
        raise ContractError(f"A direction objective needs a direction vector of length {s.dim}.")
    if s.coordinates is not None and any(not 0 <= j < s.dim for j in s.coordinates):
        raise ContractError(f"Coordinates must lie in [0, {s.dim}).")


def _rng(s: Scenario, rep: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(s.seed, spawn_key=(rep, stream)))


def _simulate_rows(s: Scenario, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    x = s.x_scale * rng.standard_normal((size, s.q))
    t = s.intercept + x @ np.asarray(s.slopes, dtype=float)
    if s.misspecified:
        t = t + s.quadratic * x[:, 0] ** 2
    match s.family:
        case Family.LOGISTIC:
            y = (rng.random(size) < expit(t)).astype(float)
        case Family.PROBIT:
            y = (rng.random(size) < ndtr(t)).astype(float)
        case Family.POISSON:
            y = rng.poisson(np.exp(t)).astype(float)
        case Family.GAUSSIAN:
            y = t + s.noise_sd * rng.standard_normal(size)
    return x, y


def generate(s: Scenario, rep: int) -> Dataset:
    """The dataset of replication ``rep``; identical for identical (seed, rep)."""
    x, y = _simulate_rows(s, _rng(s, rep, STREAM_DATA), s.n)
    return Dataset.from_arrays(x, y)


@dataclass(frozen=True)
class OracleTarget:
    theta: np.ndarray
    std_errors: np.ndarray
    size: int


class _MegaSampleRisk:
    """Mean working-model loss over a large sample regenerated chunk by chunk."""

    def __init__(self, s: Scenario, size: int, workers: int) -> None:
        self.s = s
        self.size = size
        self.workers = workers
        self.m = LossModel.for_dataset(s.family, s.q)

    def _chunk(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(np.random.SeedSequence(self.s.seed, spawn_key=(ORACLE_KEY, start // ORACLE_CHUNK)))
        x, y = _simulate_rows(self.s, rng, stop - start)
        return np.column_stack([np.ones(stop - start), x]), y

    def _sum(self, part):
        return chunked_sum(part, self.size, workers=self.workers, chunk_size=ORACLE_CHUNK)

    def value(self, theta: np.ndarray) -> float:
        def part(start: int, stop: int) -> float:
            z, y = self._chunk(start, stop)
            return float(self.m.loss_terms(y, z @ theta).sum())

        with np.errstate(over="ignore", invalid="ignore"):
            return self._sum(part) / self.size

    def derivatives(self, theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        def part(start: int, stop: int):
            z, y = self._chunk(start, stop)
            t = z @ theta
            return (
                float(self.m.loss_terms(y, t).sum()),
                -self.m.score_terms(y, t) @ z,
                (z * self.m.curvature_terms(y, t)[:, None]).T @ z,
            )

        with np.errstate(over="ignore", invalid="ignore"):
            f, g, H = self._sum(part)
        return f / self.size, g / self.size, symmetrize(H / self.size)

    def score_outer(self, theta: np.ndarray) -> np.ndarray:
        def part(start: int, stop: int) -> np.ndarray:
            z, y = self._chunk(start, stop)
            s = self.m.score_terms(y, z @ theta)
            return (z * (s * s)[:, None]).T @ z

        return symmetrize(self._sum(part) / self.size)


def _oracle_key(s: Scenario, size: int) -> str:
    return storage.fingerprint(
        {
            "family": s.family,
            "q": s.q,
            "intercept": s.intercept,
            "slopes": s.slopes,
            "quadratic": s.quadratic,
            "x_scale": s.x_scale,
            "noise_sd": s.noise_sd,
            "seed": s.seed,
            "size": size,
            "version": CALIBRATION_VERSION,
        }
    )


def oracle_target(s: Scenario, *, workers: int = 1, use_cache: bool = True) -> OracleTarget:
    """Working-model minimiser on an independent sample of ``s.oracle_size`` rows.

    The standard errors are the sandwich errors of that fit; results are
    cached per generating process and seed.
    """
    size = int(s.oracle_size or DEFAULT_ORACLE_SIZE)
    key = _oracle_key(s, size)
    if use_cache:
        cached = storage.load_cached_target(key)
        if cached is not None:
            logger.debug("Using cached target %s for %s", key, s.id)
            return OracleTarget(np.asarray(cached["theta"]), np.asarray(cached["std_errors"]), int(cached["size"]))
    started = time.perf_counter()
    risk = _MegaSampleRisk(s, size, workers)
    try:
        theta, report = newton_minimize(risk, s.true_theta)
        a_inv = solve_spd(risk.derivatives(theta)[2], np.eye(s.dim))
    except NumericalError as exc:
        raise SimulationError(f"Target oracle fit failed for {s.id}: {exc}") from exc
    if not report.converged:
        raise SimulationError(f"Target oracle fit did not converge for {s.id}.")
    covariance = a_inv @ risk.score_outer(theta) @ a_inv / size
    target = OracleTarget(theta, np.sqrt(np.clip(np.diag(covariance), 0.0, None)), size)
    logger.info("Oracle target for %s on %d rows in %.1fs", s.id, size, time.perf_counter() - started)
    if use_cache:
        storage.save_cached_target(
            key, {"scenario": s.id, "theta": theta, "std_errors": target.std_errors, "size": size, "seed": s.seed}
        )
    return target


def true_target(s: Scenario, *, workers: int = 1, use_cache: bool = True) -> np.ndarray:
    """theta*: the generating parameter, or the oracle fit when misspecified."""
    if not s.misspecified:
        return s.true_theta
    return oracle_target(s, workers=workers, use_cache=use_cache).theta


@dataclass(frozen=True)
class _Record:
    theta: np.ndarray
    variance: np.ndarray | None
    covered: np.ndarray | None
    fraction: float
    seconds: float


def _pilot(s: Scenario, data: Dataset, m: LossModel, rep: int) -> PilotEstimate:
    rng = _rng(s, rep, STREAM_PILOT)
    if s.pilot_family is not None and s.pilot_family is not s.family:
        if s.pilot_family is not Family.PROBIT:
            raise ContractError(f"Unsupported pilot family {s.pilot_family}.")
        return pilot_probit_uniform(data, m, s.pilot_size, rng)
    match s.pilot_method:
        case PilotMethod.WCC:
            return pilot_wcc(data, s.pilot_size, rng, m)
        case PilotMethod.EXTERNAL:
            return pilot_external(s.true_theta, data, m)
    return pilot_uniform_mle(data, m, s.pilot_size, rng)


def _record_fit(fit: FitResult, theta_star: np.ndarray, fraction: float, seconds: float) -> _Record:
    if fit.wald_ci is None:
        return _Record(fit.theta_hat, None, None, fraction, seconds)
    covered = (fit.wald_ci[:, 0] <= theta_star) & (theta_star <= fit.wald_ci[:, 1])
    return _Record(fit.theta_hat, np.diag(fit.covariance).copy(), covered, fraction, seconds)


def replicate(
    s: Scenario, rep: int, estimators: tuple[str, ...], theta_star: np.ndarray
) -> dict[str, _Record] | None:
    """One replication; ``None`` when the pilot or any estimator failed."""
    try:
        return _replicate(s, rep, estimators, theta_star)
    except SurpriseError as exc:
        logger.warning("Replication %d of %s failed: %s", rep, s.id, exc)
        return None


def _replicate(s: Scenario, rep: int, estimators: tuple[str, ...], theta_star: np.ndarray) -> dict[str, _Record]:
    data = generate(s, rep)
    m = LossModel.for_dataset(s.family, s.q)
    n = data.n
    records: dict[str, _Record] = {}

    started = time.perf_counter()
    pilot = _pilot(s, data, m, rep)
    pilot_seconds = time.perf_counter() - started
    if "pilot" in estimators:
        records["pilot"] = _Record(pilot.theta_tilde, None, None, s.pilot_size / n, pilot_seconds)

    lcc_plan = lcc_sub = None
    matched_rate = s.rate is None and ("ht" in estimators or ("uniform" in estimators and not s.uniform_size))
    if {"lcc", "ht-lcc"} & set(estimators) or matched_rate:
        lcc_plan = build_plan(kernel(data, m, pilot, Objective(ObjectiveKind.LCC)), c=1.0)
        lcc_sub = draw(lcc_plan, _rng(s, rep, STREAM_LCC_DRAW))

    for name in estimators:
        started = time.perf_counter()
        match name:
            case "full":
                fit = full_fit(data, m, level=s.level)
                records[name] = _record_fit(fit, theta_star, 1.0, time.perf_counter() - started)
            case "uniform":
                size = s.uniform_size or s.pilot_size + round(n * (s.rate or lcc_plan.probs.mean()))
                fit = uniform_fit(data, m, size, _rng(s, rep, STREAM_UNIFORM), level=s.level)
                records[name] = _record_fit(fit, theta_star, size / n, time.perf_counter() - started)
            case "lcc":
                theta = lcc_adjusted_fit(data, lcc_sub, pilot)
                records[name] = _Record(theta, None, None, len(lcc_sub) / n, time.perf_counter() - started)
            case "ht-lcc":
                fit = fit_ht(data, m, lcc_sub, pilot.theta_tilde, level=s.level)
                records[name] = _record_fit(fit, theta_star, len(lcc_sub) / n, time.perf_counter() - started)
            case "ht":
                direction = None if s.direction is None else np.asarray(s.direction)
                kernels = kernel(data, m, pilot, Objective(s.objective, direction))
                rate = s.rate if s.rate is not None else float(lcc_plan.probs.mean())
                sub = draw(build_plan(kernels, rate), _rng(s, rep, STREAM_DRAW))
                fit = fit_ht(data, m, sub, pilot.theta_tilde, level=s.level)
                records[name] = _record_fit(fit, theta_star, len(sub) / n, time.perf_counter() - started)
    return records


def _summarise(name: str, records: list[_Record], failures: int, p: int, theta_star: np.ndarray) -> EstimatorSummary:
    thetas = np.vstack([r.theta for r in records])
    variance = thetas.var(axis=0, ddof=1) if len(records) > 1 else np.zeros(p)
    with_var = [r.variance for r in records if r.variance is not None]
    covered = [r.covered for r in records if r.covered is not None]
    return EstimatorSummary(
        name=name,
        bias2=(thetas.mean(axis=0) - theta_star) ** 2,
        variance=variance,
        var_estimate=np.mean(with_var, axis=0) if with_var else None,
        coverage=100.0 * np.mean(covered, axis=0) if covered else None,
        mean_fraction=float(np.mean([r.fraction for r in records])),
        successes=len(records),
        failures=failures,
        mean_seconds=float(np.mean([r.seconds for r in records])),
    )


def run(
    s: Scenario,
    estimators: tuple[str, ...] | list[str] | None = None,
    *,
    workers: int = 1,
    theta_star: np.ndarray | None = None,
) -> MonteCarloSummary:
    """Replicate ``s`` and aggregate bias, variance and coverage per estimator.

    Replications derive their streams from (seed, rep) only, so the summary
    does not depend on ``workers`` or on execution order.
    """
    estimators = tuple(estimators or s.estimators)
    validate(replace(s, estimators=estimators))
    started = time.perf_counter()
    if theta_star is None:
        theta_star = true_target(s, workers=workers)
    theta_star = np.asarray(theta_star, dtype=float)

    reps = range(s.replications)
    if workers > 1 and s.replications > 1:
        outcomes = Parallel(n_jobs=workers)(delayed(replicate)(s, rep, estimators, theta_star) for rep in reps)
    else:
        outcomes = [replicate(s, rep, estimators, theta_star) for rep in reps]

    ok = [o for o in outcomes if o is not None]
    failed = len(outcomes) - len(ok)
    if failed / s.replications > MAX_FAILURE_RATE:
        raise SimulationError(f"{failed} of {s.replications} replications of {s.id} failed.")
    if not ok:
        raise SimulationError(f"Every replication of {s.id} failed.")
    if len(ok) == 1:
        logger.warning("Only one successful replication of %s; variances are reported as zero", s.id)

    summaries = {name: _summarise(name, [o[name] for o in ok], failed, s.dim, theta_star) for name in estimators}
    wall = time.perf_counter() - started
    logger.info("Ran %d replications of %s in %.1fs (%d failed)", s.replications, s.id, wall, failed)
    return MonteCarloSummary(
        scenario=s,
        theta_star=theta_star,
        estimators=summaries,
        replications=s.replications,
        failed_replications=failed,
        wall_seconds=wall,
    )


def summary_coordinates(s: Scenario) -> tuple[int, ...]:
    """Coordinates reported in summaries: the slopes unless the scenario picks some."""
    return s.coordinates if s.coordinates is not None else tuple(range(1, s.dim))


def summary_frame(summary: MonteCarloSummary) -> pd.DataFrame:
    """One row per estimator: squared bias and variance summed over the reported coordinates."""
    coords = list(summary_coordinates(summary.scenario))
    rows = []
    for name, est in summary.estimators.items():
        rows.append(
            {
                "estimator": name,
                "bias2": float(est.bias2[coords].sum()),
                "variance": float(est.variance[coords].sum()),
                "var_estimate": math.nan if est.var_estimate is None else float(est.var_estimate[coords].sum()),
                "coverage": math.nan if est.coverage is None else float(est.coverage[coords].mean()),
                "mean_fraction": est.mean_fraction,
                "successes": est.successes,
                "failures": est.failures,
            }
        )
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
