"""Dense symmetric linear algebra and a damped Newton minimiser."""

from __future__ import annotations

import logging
from typing import Protocol

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, eigh
from scipy.linalg.lapack import dpotrf

from .config import ARMIJO, DEFAULT_EIGEN_FLOOR_RATIO, DEFAULT_MAX_ITER, DEFAULT_TOL, MIN_STEP
from .errors import ContractError, DecompositionError, NotPSDError, NumericalError, SeparationError, StallError
from .models import SolverReport

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
NEGATIVE_EIGEN_TOL = 1e-8
RIDGE_FACTOR = 1e-8
RIDGE_RETRIES = 8


class WeightedRisk(Protocol):
    """Objective contract used by :func:`newton_minimize`."""

    def value(self, theta: np.ndarray) -> float: ...

    def derivatives(self, theta: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]: ...


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _as_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractError(f"Expected a square matrix, got shape {M.shape}.")
    if not np.all(np.isfinite(M)):
        raise NumericalError("Matrix has non-finite entries.")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ContractError("Matrix is not symmetric.")
    return symmetrize(M)


def _floored_eigh(M: np.ndarray, eigen_floor: float | None) -> tuple[np.ndarray, np.ndarray]:
    M = _as_symmetric(M)
    try:
        lam, Q = eigh(M)
    except LinAlgError as exc:
        raise NumericalError(f"Eigendecomposition failed: {exc}")
    top = float(np.abs(lam).max(initial=0.0))
    if lam.min() < -NEGATIVE_EIGEN_TOL * top:
        raise NotPSDError(f"Matrix is not positive semidefinite (smallest eigenvalue {lam.min():.3e}).")
    if lam.max() <= 0:
        raise NumericalError("Matrix is singular (all eigenvalues are zero).")
    floor = DEFAULT_EIGEN_FLOOR_RATIO * float(lam.max()) if eigen_floor is None else eigen_floor
    if np.any(lam < floor):
        logger.debug("Raising %d eigenvalue(s) to the floor %.3e", int(np.sum(lam < floor)), floor)
    return np.maximum(lam, floor), Q


def inv_sqrt(M: np.ndarray, eigen_floor: float | None = None) -> np.ndarray:
    """Q diag(lambda^-1/2) Q' with eigenvalues raised to ``eigen_floor`` first.

    The default floor is 1e-10 times the largest eigenvalue.
    """
    lam, Q = _floored_eigh(M, eigen_floor)
    return symmetrize((Q * lam**-0.5) @ Q.T)


def inv_psd(M: np.ndarray, eigen_floor: float | None = None) -> np.ndarray:
    lam, Q = _floored_eigh(M, eigen_floor)
    return symmetrize((Q / lam) @ Q.T)


def cholesky(M: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; a failing pivot is reported 1-based."""
    M = _as_symmetric(M)
    factor, info = dpotrf(M, lower=1, clean=1)
    if info > 0:
        raise DecompositionError(f"Leading minor of order {info} is not positive definite.", pivot=int(info))
    if info < 0:
        raise NumericalError(f"LAPACK dpotrf rejected argument {-info}.")
    return factor


def solve_spd(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cho_solve((cholesky(M), True), np.asarray(b, dtype=float))


def _newton_step(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        return solve_spd(H, g)
    except DecompositionError as exc:
        p = H.shape[0]
        trace = float(np.trace(H))
        ridge = RIDGE_FACTOR * (trace / p if trace > 0 else 1.0)
        logger.debug("Hessian near-singular (%s); retrying with ridge %.3e", exc, ridge)
    for _ in range(RIDGE_RETRIES):
        try:
            return solve_spd(H + ridge * np.eye(H.shape[0]), g)
        except DecompositionError:
            ridge *= 10.0
    raise StallError("Hessian could not be regularised into a positive definite matrix.")


def _noise(f: float) -> float:
    return 16.0 * np.finfo(float).eps * (1.0 + abs(f))


def newton_minimize(
    objective: WeightedRisk,
    theta0: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    norm_guard: float | None = None,
) -> tuple[np.ndarray, SolverReport]:
    """Damped Newton with Armijo backtracking.

    Converges when the gradient sup-norm drops to ``tol``. Hitting
    ``max_iter`` returns the current (best) iterate with ``converged=False``;
    a line search that rejects every step size raises :class:`StallError`,
    and an iterate whose norm exceeds ``norm_guard`` raises
    :class:`SeparationError`.

    ``SolverReport.history`` is non-increasing up to rounding: when no step
    passes the Armijo test, the full step is still taken if it shrinks the
    gradient and raises the objective by at most ``16 * eps * (1 + |f|)``.
    """
    theta = np.array(theta0, dtype=float, copy=True)
    f, g, H = objective.derivatives(theta)
    if not np.isfinite(f):
        raise NumericalError("Objective is not finite at the starting point.")
    history = [float(f)]
    iterations = 0
    while True:
        gnorm = float(np.abs(g).max(initial=0.0))
        if gnorm <= tol:
            return theta, SolverReport(True, iterations, gnorm, float(f), tuple(history))
        if iterations >= max_iter:
            logger.warning("Newton stopped after %d iterations with gradient norm %.3e", iterations, gnorm)
            return theta, SolverReport(False, iterations, gnorm, float(f), tuple(history))

        direction = -_newton_step(H, g)
        slope = float(g @ direction)
        if not slope < 0:
            direction, slope = -g, -float(g @ g)

        alpha = 1.0
        accepted = False
        while alpha >= MIN_STEP:
            trial = theta + alpha * direction
            ft = objective.value(trial)
            if np.isfinite(ft) and ft <= f + ARMIJO * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if accepted:
            theta = trial
            f, g, H = objective.derivatives(theta)
        else:
            # rounding can hide an Armijo decrease this close to the optimum
            trial = theta + direction
            ft, gt, Ht = objective.derivatives(trial)
            if not (np.isfinite(ft) and ft <= f + _noise(f) and np.abs(gt).max() < gnorm):
                raise StallError(f"Line search rejected every step (gradient norm {gnorm:.3e}).")
            theta, f, g, H = trial, ft, gt, Ht

        iterations += 1
        history.append(float(f))
        if norm_guard is not None and float(np.linalg.norm(theta)) > norm_guard:
            raise SeparationError(
                f"Parameter norm exceeded {norm_guard:g} after {iterations} iterations; "
                "the classes look completely separated."
            )
