"""Data-generating constants for the built-in scenarios.

Only marginal targets are fixed for most schemes, so the intercept is solved
for with ``brentq`` against a deterministic Gauss-Hermite evaluation of the
marginal probability. The linear index is

    t = alpha + beta'x + gamma * x1^2,   x ~ N(0, s^2 I)

which depends on x only through x1 and R = sum_{j>=2} beta_j x_j, so a
two-dimensional quadrature is exact up to the node count whatever q is.

Bump ``CALIBRATION_VERSION`` whenever a value in ``SCHEMES`` changes; it is
part of the oracle cache key.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import brentq
from scipy.special import expit, ndtr

from .errors import ContractError
from .models import Family

CALIBRATION_VERSION = "2024.1"
QUADRATURE_NODES = 96

_BRACKETS = {
    Family.LOGISTIC: (-60.0, 60.0),
    Family.PROBIT: (-30.0, 30.0),
    Family.POISSON: (-40.0, 10.0),
    Family.GAUSSIAN: (-10.0, 10.0),
}


@dataclass(frozen=True)
class Scheme:
    """One data-generating scheme.

    ``quadratic`` is the x1^2 coefficient used when the scheme runs
    misspecified; ``intercept=None`` means it is calibrated to ``target``.
    ``target`` is P(Y=1) for binary families, P(Y<=1) for Poisson and
    P(-0.5 < Y < 0.5) for Gaussian responses.
    """

    family: Family
    q: int
    slopes: tuple[float, ...]
    quadratic: float
    target: float
    misspecified: bool = False
    intercept: float | None = None
    x_scale: float = 1.0
    noise_sd: float = 1.0


def half_ones(q: int) -> tuple[float, ...]:
    return (1.0,) * (q // 2) + (0.0,) * (q - q // 2)


SCHEMES: dict[str, Scheme] = {
    "sim1": Scheme(Family.LOGISTIC, 50, half_ones(50), 0.0, 0.10),
    "sim2": Scheme(Family.LOGISTIC, 5, (0.5,) * 5, 0.5, 0.01, misspecified=True),
    "sim5": Scheme(Family.POISSON, 2, (0.5, 0.5), 0.15, 0.93),
    "sim6": Scheme(Family.GAUSSIAN, 2, (1.0, 1.0), 1.0, 0.996, intercept=0.0, x_scale=0.1, noise_sd=0.1),
}
SCHEMES["sim3"] = SCHEMES["sim2"]
SCHEMES["sim4"] = SCHEMES["sim2"]


def _nodes() -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(QUADRATURE_NODES)
    return x, w / np.sqrt(2.0 * np.pi)


def marginal_rate(
    family: Family,
    intercept: float,
    slopes: tuple[float, ...],
    quadratic: float = 0.0,
    x_scale: float = 1.0,
    noise_sd: float = 1.0,
) -> float:
    """Marginal target probability of the scheme (see :class:`Scheme`)."""
    family = Family(family)
    beta = np.asarray(slopes, dtype=float)
    if beta.size < 1:
        raise ContractError("A scheme needs at least one covariate.")
    nodes, weights = _nodes()
    rest_sd = x_scale * float(np.linalg.norm(beta[1:]))
    x1 = x_scale * nodes[:, None]
    t = intercept + beta[0] * x1 + quadratic * x1**2 + rest_sd * nodes[None, :]
    match family:
        case Family.LOGISTIC:
            h = expit(t)
        case Family.PROBIT:
            h = ndtr(t)
        case Family.POISSON:
            with np.errstate(over="ignore"):
                mu = np.exp(t)
            h = np.exp(-mu) * (1.0 + mu)
        case Family.GAUSSIAN:
            h = ndtr((0.5 - t) / noise_sd) - ndtr((-0.5 - t) / noise_sd)
    return float(weights @ h @ weights)


@lru_cache(maxsize=64)
def calibrate_intercept(
    family: Family,
    slopes: tuple[float, ...],
    target: float,
    quadratic: float = 0.0,
    x_scale: float = 1.0,
    noise_sd: float = 1.0,
) -> float:
    family = Family(family)
    if family is Family.GAUSSIAN:
        raise ContractError("Gaussian schemes are not calibrated; give the intercept explicitly.")
    if not 0.0 < target < 1.0:
        raise ContractError(f"Calibration target must lie in (0, 1), got {target}.")
    lo, hi = _BRACKETS[family]

    def gap(alpha: float) -> float:
        return marginal_rate(family, alpha, slopes, quadratic, x_scale, noise_sd) - target

    return float(brentq(gap, lo, hi, xtol=1e-12))


def scheme_intercept(scheme: Scheme, misspecified: bool) -> float:
    if scheme.intercept is not None:
        return scheme.intercept
    gamma = scheme.quadratic if misspecified else 0.0
    return calibrate_intercept(scheme.family, scheme.slopes, scheme.target, gamma, scheme.x_scale, scheme.noise_sd)
