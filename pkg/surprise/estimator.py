"""Weighted empirical risk, Horvitz-Thompson fitting and plug-in inference."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from scipy.stats import norm

from .config import DEFAULT_CHUNK_SIZE, DEFAULT_LEVEL, DEFAULT_MAX_ITER, DEFAULT_SEPARATION_GUARD, DEFAULT_TOL
from .data import Dataset
from .errors import ContractError, FitError, InferenceError, NumericalError, PilotError, SeparationError
from .losses import LossModel
from .models import Family, FitResult, PilotEstimate, SolverReport, Subsample
from .numerics import newton_minimize, solve_spd, symmetrize
from .parallel import chunked_sum

logger = logging.getLogger(__name__)

_PROB_CLIP = 1e-6


class EmpiricalRisk:
    """``normalizer^-1 * sum_i w_i l(d_i; theta)`` over a fixed set of rows.

    The HT objective uses ``normalizer = n`` (the full-data size), so its
    gradient is the full-data estimating equation estimate and solver
    tolerances are on the per-point scale. Plain subsample fits use the
    subsample size instead.
    """

    def __init__(
        self,
        data: Dataset,
        m: LossModel,
        indices: Sequence[int] | np.ndarray | None = None,
        weights: Sequence[float] | np.ndarray | None = None,
        *,
        normalizer: float | None = None,
        workers: int = 1,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
    ) -> None:
        y = data.require_response()
        if data.q + 1 != m.dim:
            raise ContractError(f"Dataset has {data.q} covariates, model expects {m.dim - 1}.")
        if indices is None:
            self.z, self.y = data.design, y
        else:
            idx = np.asarray(indices, dtype=np.intp)
            self.z, self.y = data.design[idx], y[idx]
        size = self.y.size
        if size == 0:
            raise ContractError("Empirical risk needs at least one row.")
        self.w = np.ones(size) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
        if self.w.shape != (size,):
            raise ContractError(f"Got {self.w.size} weights for {size} rows.")
        if not np.all(np.isfinite(self.w)) or np.any(self.w < 0):
            raise ContractError("Weights must be finite and nonnegative.")
        self.m = m
        self.normalizer = float(data.n if normalizer is None else normalizer)
        self.workers = workers
        self.chunk_size = chunk_size

    @property
    def size(self) -> int:
        return int(self.y.size)

    def _sum(self, part):
        return chunked_sum(part, self.size, workers=self.workers, chunk_size=self.chunk_size)

    def value(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)

        def part(start: int, stop: int) -> float:
            t = self.z[start:stop] @ theta
            return float(self.w[start:stop] @ self.m.loss_terms(self.y[start:stop], t))

        with np.errstate(over="ignore", invalid="ignore"):
            return self._sum(part) / self.normalizer

    def derivatives(self, theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=float)

        def part(start: int, stop: int) -> tuple[float, np.ndarray, np.ndarray]:
            z, y, w = self.z[start:stop], self.y[start:stop], self.w[start:stop]
            t = z @ theta
            f = float(w @ self.m.loss_terms(y, t))
            g = -(w * self.m.score_terms(y, t)) @ z
            H = (z * (w * self.m.curvature_terms(y, t))[:, None]).T @ z
            return f, g, H

        with np.errstate(over="ignore", invalid="ignore"):
            f, g, H = self._sum(part)
        return f / self.normalizer, g / self.normalizer, symmetrize(H / self.normalizer)

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        return self.derivatives(theta)[2]

    def score_outer(self, theta: np.ndarray) -> np.ndarray:
        """``normalizer^-1 * sum_i w_i^2 g_i g_i'``."""
        theta = np.asarray(theta, dtype=float)

        def part(start: int, stop: int) -> np.ndarray:
            z = self.z[start:stop]
            ws = self.w[start:stop] * self.m.score_terms(self.y[start:stop], z @ theta)
            return (z * (ws * ws)[:, None]).T @ z

        return symmetrize(self._sum(part) / self.normalizer)

    def completely_separated(self, theta: np.ndarray) -> bool:
        """Every row classified correctly with a strict margin (binary families only)."""
        margin = (2.0 * self.y - 1.0) * (self.z @ np.asarray(theta, dtype=float))
        return bool(np.all(margin > 0))


def start_point(m: LossModel, y: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Intercept-only starting value reproducing the (weighted) mean response."""
    mu = float(np.average(y, weights=weights))
    if m.binary:
        mu = min(max(mu, _PROB_CLIP), 1.0 - _PROB_CLIP)
    elif m.family is Family.POISSON:
        mu = max(mu, _PROB_CLIP)
    theta = np.zeros(m.dim)
    theta[0] = m.link(mu)
    return theta


def minimize_risk(
    risk: EmpiricalRisk,
    theta0: np.ndarray,
    *,
    error: type[FitError] | type[PilotError] = FitError,
    what: str = "Fit",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, SolverReport]:
    """Run the Newton solver and convert every failure into ``error``."""
    binary = risk.m.binary
    report = None
    try:
        theta, report = newton_minimize(
            risk, theta0, tol=tol, max_iter=max_iter, norm_guard=DEFAULT_SEPARATION_GUARD if binary else None
        )
        if binary and risk.completely_separated(theta):
            raise SeparationError("Every row is classified correctly; the maximum likelihood estimate does not exist.")
    except NumericalError as exc:
        raise error(f"{what} failed: {exc}", report) from exc
    if not report.converged:
        raise error(
            f"{what} did not converge in {report.iterations} iterations "
            f"(gradient norm {report.final_gradient_norm:.3e}).",
            report,
        )
    return theta, report


def _inference(
    risk: EmpiricalRisk, theta: np.ndarray, level: float
) -> tuple[np.ndarray | None, np.ndarray | None, np.ndarray | None, str | None]:
    a_hat = risk.hessian(theta)
    try:
        a_inv = solve_spd(a_hat, np.eye(a_hat.shape[0]))
    except NumericalError as exc:
        logger.warning("Curvature estimate is singular, no covariance reported: %s", exc)
        return None, None, None, str(exc)
    covariance = symmetrize(a_inv @ risk.score_outer(theta) @ a_inv) / risk.normalizer
    std_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    quantile = norm.ppf(0.5 * (1.0 + level))
    ci = np.column_stack([theta - quantile * std_errors, theta + quantile * std_errors])
    return covariance, std_errors, ci, None


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise ContractError(f"Confidence level must lie in (0, 1), got {level}.")


def _fit_rows(
    risk: EmpiricalRisk,
    theta0: np.ndarray,
    *,
    level: float,
    tol: float,
    max_iter: int,
    what: str,
) -> FitResult:
    theta, report = minimize_risk(risk, theta0, what=what, tol=tol, max_iter=max_iter)
    covariance, std_errors, ci, problem = _inference(risk, theta, level)
    diagnostics = {
        "residual_norm": report.final_gradient_norm,
        "weight_sum": float(risk.w.sum()),
        "normalizer": risk.normalizer,
    }
    if problem is not None:
        diagnostics["inference_error"] = problem
    return FitResult(
        theta_hat=theta,
        covariance=covariance,
        std_errors=std_errors,
        wald_ci=ci,
        level=level,
        subsample_size=risk.size,
        solver=report,
        diagnostics=diagnostics,
    )


def fit_ht(
    data: Dataset,
    m: LossModel,
    sub: Subsample,
    theta0: np.ndarray | None = None,
    *,
    level: float = DEFAULT_LEVEL,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> FitResult:
    """Horvitz-Thompson weighted minimiser with its sandwich covariance.

    ``A = n^-1 sum w_i G_i`` and ``V = n^-1 sum w_i^2 g_i g_i'`` are both
    subsample sums at the estimate; the covariance is ``A^-1 V A^-1 / n``.
    A singular ``A`` still returns the estimate, without covariance, and
    records the problem under ``diagnostics["inference_error"]``.
    """
    _check_level(level)
    if len(sub) < m.dim:
        raise FitError(f"Subsample of size {len(sub)} cannot identify {m.dim} parameters.")
    if not np.all(np.isfinite(sub.weights)):
        raise ContractError("Subsample weights must be finite.")
    risk = EmpiricalRisk(data, m, sub.indices, sub.weights, normalizer=data.n, workers=workers, chunk_size=chunk_size)
    if theta0 is None:
        theta0 = start_point(m, risk.y, risk.w)
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (m.dim,):
        raise ContractError(f"Start point has length {theta0.size}, expected {m.dim}.")
    fit = _fit_rows(risk, theta0, level=level, tol=tol, max_iter=max_iter, what="HT fit")
    logger.debug(
        "HT fit on %d rows: %d iterations, objective %.6g", len(sub), fit.solver.iterations, fit.solver.objective
    )
    return fit


def wald_interval(fit: FitResult, coordinate: int, level: float | None = None) -> tuple[float, float]:
    if fit.std_errors is None:
        raise InferenceError("The fit has no covariance estimate.")
    level = fit.level if level is None else level
    _check_level(level)
    if not 0 <= coordinate < fit.theta_hat.size:
        raise ContractError(f"Coordinate {coordinate} is out of range for {fit.theta_hat.size} parameters.")
    half = norm.ppf(0.5 * (1.0 + level)) * fit.std_errors[coordinate]
    estimate = float(fit.theta_hat[coordinate])
    return estimate - half, estimate + half


def _require_binary(y: np.ndarray) -> None:
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ContractError("This estimator needs a binary 0/1 response.")


def lcc_adjusted_fit(
    data: Dataset,
    sub: Subsample,
    pilot: PilotEstimate,
    *,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> np.ndarray:
    """Unweighted logistic fit on an LCC subsample, shifted by the pilot."""
    m = LossModel.for_dataset(Family.LOGISTIC, data.q)
    _require_binary(data.require_response())
    if pilot.theta_tilde.shape != (m.dim,):
        raise ContractError(f"Pilot has length {pilot.theta_tilde.size}, expected {m.dim}.")
    if len(sub) < m.dim:
        raise FitError(f"Subsample of size {len(sub)} cannot identify {m.dim} parameters.")
    risk = EmpiricalRisk(data, m, sub.indices, normalizer=len(sub), workers=workers)
    theta_s, _ = minimize_risk(risk, np.zeros(m.dim), what="LCC subsample fit", tol=tol, max_iter=max_iter)
    return theta_s + pilot.theta_tilde


def full_fit(
    data: Dataset,
    m: LossModel,
    *,
    level: float = DEFAULT_LEVEL,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> FitResult:
    _check_level(level)
    risk = EmpiricalRisk(data, m, workers=workers)
    return _fit_rows(risk, start_point(m, risk.y), level=level, tol=tol, max_iter=max_iter, what="Full-data fit")


def uniform_fit(
    data: Dataset,
    m: LossModel,
    size: int,
    rng: np.random.Generator,
    *,
    level: float = DEFAULT_LEVEL,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> FitResult:
    """Unweighted fit on a uniform subsample of ``size`` rows drawn without replacement."""
    _check_level(level)
    if not m.dim <= size <= data.n:
        raise ContractError(f"Uniform subsample size must lie in [{m.dim}, {data.n}], got {size}.")
    indices = np.sort(rng.choice(data.n, size=size, replace=False))
    risk = EmpiricalRisk(data, m, indices, normalizer=size, workers=workers)
    return _fit_rows(risk, start_point(m, risk.y), level=level, tol=tol, max_iter=max_iter, what="Uniform subsample fit")
