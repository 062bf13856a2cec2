"""Pilot estimates: the parameter guess and curvature that drive the sampling kernel.

Whatever route produced the pilot parameter, its curvature matrix is always
the full-data average Hessian of the target loss at that parameter.
"""

from __future__ import annotations

import logging

import numpy as np

from .data import Dataset
from .errors import ContractError, PilotError
from .estimator import EmpiricalRisk, minimize_risk, start_point
from .losses import LossModel
from .models import Family, PilotEstimate, PilotMethod

logger = logging.getLogger(__name__)


def full_curvature(data: Dataset, m: LossModel, theta: np.ndarray, *, workers: int = 1) -> np.ndarray:
    """``n^-1 sum_i G(d_i; theta)`` over every row."""
    return EmpiricalRisk(data, m, workers=workers).hessian(theta)


def _finish(
    data: Dataset, m: LossModel, theta: np.ndarray, method: PilotMethod, pilot_size: int, workers: int
) -> PilotEstimate:
    theta = np.asarray(theta, dtype=float).copy()
    if not np.all(np.isfinite(theta)):
        raise PilotError("Pilot parameter is not finite.")
    theta.setflags(write=False)
    a_tilde = full_curvature(data, m, theta, workers=workers)
    logger.debug("Pilot %s (size %d): theta=%s", method, pilot_size, np.array2string(theta, precision=4))
    return PilotEstimate(theta_tilde=theta, a_tilde=a_tilde, method=method, pilot_size=pilot_size)


def _uniform_indices(data: Dataset, pilot_size: int, rng: np.random.Generator) -> np.ndarray:
    if not 1 <= pilot_size <= data.n:
        raise ContractError(f"Pilot size must lie in [1, {data.n}], got {pilot_size}.")
    return np.sort(rng.choice(data.n, size=pilot_size, replace=False))


def _fit_uniform(
    data: Dataset, m: LossModel, pilot_size: int, rng: np.random.Generator, workers: int
) -> np.ndarray:
    indices = _uniform_indices(data, pilot_size, rng)
    risk = EmpiricalRisk(data, m, indices, normalizer=pilot_size, workers=workers)
    theta, report = minimize_risk(risk, start_point(m, risk.y), error=PilotError, what=f"{m.family} pilot fit")
    logger.debug("Uniform pilot converged in %d iterations", report.iterations)
    return theta


def pilot_uniform_mle(
    data: Dataset,
    m: LossModel,
    pilot_size: int,
    rng: np.random.Generator,
    *,
    workers: int = 1,
) -> PilotEstimate:
    """Fit the target model on a uniform pilot subsample drawn without replacement."""
    theta = _fit_uniform(data, m, pilot_size, rng, workers)
    return _finish(data, m, theta, PilotMethod.UNIFORM_MLE, pilot_size, workers)


def pilot_wcc(
    data: Dataset,
    pilot_size: int,
    rng: np.random.Generator,
    m: LossModel | None = None,
    *,
    workers: int = 1,
) -> PilotEstimate:
    """Weighted case-control pilot.

    Draws ``pilot_size / 2`` cases and as many controls uniformly without
    replacement (a smaller class is taken whole, with a warning) and fits a
    logistic regression weighting each sampled row by its class population
    count over its class sample count, so the weights add up to ``n``.
    """
    idx, w = case_control_sample(data.require_response(), pilot_size, rng)
    m = m or LossModel.for_dataset(Family.LOGISTIC, data.q)
    logistic = LossModel.for_dataset(Family.LOGISTIC, data.q)
    risk = EmpiricalRisk(data, logistic, idx, w, normalizer=data.n, workers=workers)
    theta, _ = minimize_risk(risk, np.zeros(risk.m.dim), error=PilotError, what="Case-control pilot fit")
    return _finish(data, m, theta, PilotMethod.WCC, int(idx.size), workers)


def case_control_sample(y: np.ndarray, pilot_size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sorted row indices of a 50/50 case-control draw and their class weights (summing to n)."""
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ContractError("Case-control pilot needs a binary 0/1 response.")
    if pilot_size < 2 or pilot_size % 2:
        raise ContractError(f"Case-control pilot size must be a positive even number, got {pilot_size}.")
    half = pilot_size // 2
    indices, weights = [], []
    for label in (1.0, 0.0):
        members = np.flatnonzero(y == label)
        if members.size == 0:
            raise ContractError(f"Case-control pilot needs both classes; no row has y={label:g}.")
        take = min(half, members.size)
        if take < half:
            logger.warning("Only %d rows have y=%g; using the whole class instead of %d", members.size, label, half)
        indices.append(rng.choice(members, size=take, replace=False))
        weights.append(np.full(take, members.size / take))
    idx = np.concatenate(indices)
    w = np.concatenate(weights)
    order = np.argsort(idx)
    return idx[order], w[order]


def pilot_external(
    theta: np.ndarray, data: Dataset, m: LossModel, *, workers: int = 1, pilot_size: int = 0
) -> PilotEstimate:
    """Wrap a supplied parameter; the curvature uses the target loss ``m``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != m.dim:
        raise ContractError(f"External pilot has {theta.size} coordinates, model expects {m.dim}.")
    if data.q + 1 != m.dim:
        raise ContractError(f"Dataset has {data.q} covariates, model expects {m.dim - 1}.")
    return _finish(data, m, theta, PilotMethod.EXTERNAL, pilot_size, workers)


def pilot_probit_uniform(
    data: Dataset,
    m: LossModel,
    pilot_size: int,
    rng: np.random.Generator,
    *,
    workers: int = 1,
) -> PilotEstimate:
    """Probit fit on a uniform pilot, handed unrescaled to the target loss ``m``.

    The coefficients stay on the probit scale, so under a logistic target the
    pilot is deliberately inconsistent.
    """
    probit = LossModel.for_dataset(Family.PROBIT, data.q)
    theta = _fit_uniform(data, probit, pilot_size, rng, workers)
    return pilot_external(theta, data, m, workers=workers, pilot_size=pilot_size)
