"""Prediction error and efficiency comparisons on user data."""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from .config import DEFAULT_FOLDS, DEFAULT_PILOT_SIZE
from .data import Dataset, apply_standardization, standardize_columns
from .design import build_plan, draw, kernel
from .errors import ContractError, SurpriseError
from .estimator import fit_ht, full_fit, lcc_adjusted_fit, uniform_fit
from .losses import LossModel
from .models import Family, FitResult, Objective, ObjectiveKind
from .pilot import pilot_uniform_mle, pilot_wcc

logger = logging.getLogger(__name__)

STREAM_SPLIT, STREAM_PILOT, STREAM_DRAW, STREAM_UNIFORM = range(4)


def _rng(seed: int, rep: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, stream)))


def armse(train: Dataset, test: Dataset, fit: FitResult | np.ndarray, m: LossModel) -> float:
    """Test-set RMSE of the mean prediction; ``test`` gets ``train``'s standardization."""
    y = test.require_response()
    test = apply_standardization(test, train)
    theta = fit.theta_hat if isinstance(fit, FitResult) else np.asarray(fit, dtype=float)
    with np.errstate(over="ignore"):
        predicted = m.mean_response(test.design @ theta)
    return float(np.sqrt(np.mean((y - predicted) ** 2)))


def cross_validated_armse(
    data: Dataset,
    m: LossModel,
    *,
    folds: int = DEFAULT_FOLDS,
    subsample_size: int,
    pilot_size: int = DEFAULT_PILOT_SIZE,
    objective: Objective | None = None,
    standardize: bool = True,
    seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """Per-fold RMSE of the full-data fit, the HT surprise fit and a uniform fit.

    In each fold the training part gets a uniform pilot of ``pilot_size``
    rows, a surprise subsample of expected size ``subsample_size`` and, for
    comparison, a uniform subsample of ``pilot_size + subsample_size`` rows.
    """
    if not 2 <= folds <= data.n:
        raise ContractError(f"Fold count must lie in [2, {data.n}], got {folds}.")
    objective = objective or Objective(ObjectiveKind.LCC)
    order = _rng(seed, 0, STREAM_SPLIT).permutation(data.n)
    rows = []
    for fold, test_idx in enumerate(np.array_split(order, folds)):
        train = data.subset(np.sort(np.setdiff1d(order, test_idx)))
        test = data.subset(np.sort(test_idx))
        if standardize and not train.standardized:
            train = standardize_columns(train)
        rate = subsample_size / train.n
        if not 0.0 < rate <= 1.0:
            raise ContractError(f"Subsample size {subsample_size} exceeds the training size {train.n}.")

        full = full_fit(train, m, workers=workers)
        pilot = pilot_uniform_mle(train, m, pilot_size, _rng(seed, fold, STREAM_PILOT), workers=workers)
        plan = build_plan(kernel(train, m, pilot, objective, workers=workers), rate)
        sub = draw(plan, _rng(seed, fold, STREAM_DRAW), workers=workers)
        ht = fit_ht(train, m, sub, pilot.theta_tilde, workers=workers)
        uniform_size = min(pilot_size + subsample_size, train.n)
        uniform = uniform_fit(train, m, uniform_size, _rng(seed, fold, STREAM_UNIFORM), workers=workers)
        rows.append(
            {
                "fold": fold,
                "full": armse(train, test, full, m),
                "ht": armse(train, test, ht, m),
                "uniform": armse(train, test, uniform, m),
                "ht_size": len(sub),
            }
        )
        logger.debug("Fold %d: %s", fold, rows[-1])
    return pd.DataFrame(rows)


def relative_variance(
    data: Dataset,
    m: LossModel,
    *,
    replications: int,
    sample_size: int,
    pilot_size: int = DEFAULT_PILOT_SIZE,
    seed: int = 0,
    workers: int = 1,
) -> pd.DataFrame:
    """Per-coefficient variance of LCC and HT relative to the full-sample fit.

    Each replication takes a uniform sample of ``sample_size`` rows, builds a
    pilot on it (weighted case-control for logistic losses, a uniform pilot
    otherwise), draws one local case-control subsample and fits all
    estimators on that sample. The LCC column is only filled for logistic
    losses. Failed replications are skipped with a warning.
    """
    if replications < 2:
        raise ContractError("Relative variance needs at least two replications.")
    if not m.dim <= sample_size <= data.n:
        raise ContractError(f"Sample size must lie in [{m.dim}, {data.n}], got {sample_size}.")
    logistic = m.family is Family.LOGISTIC
    estimates: dict[str, list[np.ndarray]] = {"full": [], "ht": [], "lcc": []}
    for rep in range(replications):
        idx = np.sort(_rng(seed, rep, STREAM_SPLIT).choice(data.n, size=sample_size, replace=False))
        sample = data.subset(idx)
        pilot_rng = _rng(seed, rep, STREAM_PILOT)
        try:
            if logistic:
                pilot = pilot_wcc(sample, pilot_size, pilot_rng, m, workers=workers)
            else:
                pilot = pilot_uniform_mle(sample, m, pilot_size, pilot_rng, workers=workers)
            plan = build_plan(kernel(sample, m, pilot, Objective(ObjectiveKind.LCC), workers=workers), c=1.0)
            sub = draw(plan, _rng(seed, rep, STREAM_DRAW), workers=workers)
            full = full_fit(sample, m, workers=workers).theta_hat
            ht = fit_ht(sample, m, sub, pilot.theta_tilde, workers=workers).theta_hat
            lcc = lcc_adjusted_fit(sample, sub, pilot, workers=workers) if logistic else None
        except SurpriseError as exc:
            logger.warning("Relative-variance replication %d failed: %s", rep, exc)
            continue
        estimates["full"].append(full)
        estimates["ht"].append(ht)
        if lcc is not None:
            estimates["lcc"].append(lcc)
    if len(estimates["full"]) < 2:
        raise ContractError("Fewer than two replications succeeded.")

    full_var = np.var(estimates["full"], axis=0, ddof=1)
    frame = pd.DataFrame({"coordinate": data.coordinate_names, "full_variance": full_var})
    frame["ht"] = np.var(estimates["ht"], axis=0, ddof=1) / full_var
    frame["lcc"] = np.var(estimates["lcc"], axis=0, ddof=1) / full_var if logistic else np.nan
    return frame
