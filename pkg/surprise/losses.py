"""Loss families with analytic gradient and Hessian.

Every family is a GLM with linear index t = theta'z, so the per-point
derivatives factor as

    g(d; theta) = -S(y, t) z        G(d; theta) = w(y, t) z z'

and the vectorised ``*_terms`` methods only deal with the scalars S and w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_ndtr, ndtr
from scipy.stats import norm

from .data import augment
from .errors import ContractError
from .models import DataPoint, Family

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _mills(u: np.ndarray) -> np.ndarray:
    """phi(u) / Phi(u), evaluated in log space so both tails stay finite."""
    return np.exp(-0.5 * u * u - _LOG_SQRT_2PI - log_ndtr(u))


@dataclass(frozen=True)
class LossModel:
    family: Family
    dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if self.dim < 1:
            raise ContractError("Parameter dimension must be at least 1.")

    @classmethod
    def for_dataset(cls, family: Family | str, q: int) -> LossModel:
        return cls(Family(family), q + 1)

    @property
    def binary(self) -> bool:
        return self.family in (Family.LOGISTIC, Family.PROBIT)

    def loss_terms(self, y: np.ndarray, t: np.ndarray) -> np.ndarray:
        match self.family:
            case Family.LOGISTIC:
                return np.logaddexp(0.0, t) - y * t
            case Family.POISSON:
                return np.exp(t) - y * t
            case Family.GAUSSIAN:
                return (y - t) ** 2
            case Family.PROBIT:
                return -(y * log_ndtr(t) + (1.0 - y) * log_ndtr(-t))
        raise NotImplementedError(self.family)

    def score_terms(self, y: np.ndarray, t: np.ndarray) -> np.ndarray:
        match self.family:
            case Family.LOGISTIC:
                return y - expit(t)
            case Family.POISSON:
                return y - np.exp(t)
            case Family.GAUSSIAN:
                return 2.0 * (y - t)
            case Family.PROBIT:
                # phi(t)(y - Phi(t)) / [Phi(t)(1 - Phi(t))] written with Mills ratios
                return y * _mills(t) - (1.0 - y) * _mills(-t)
        raise NotImplementedError(self.family)

    def curvature_terms(self, y: np.ndarray, t: np.ndarray) -> np.ndarray:
        match self.family:
            case Family.LOGISTIC:
                return expit(t) * expit(-t)
            case Family.POISSON:
                return np.exp(t)
            case Family.GAUSSIAN:
                return np.full(np.broadcast(y, t).shape, 2.0)
            case Family.PROBIT:
                lam_pos, lam_neg = _mills(t), _mills(-t)
                return y * lam_pos * (t + lam_pos) + (1.0 - y) * lam_neg * (lam_neg - t)
        raise NotImplementedError(self.family)

    def variance_terms(self, t: np.ndarray) -> np.ndarray:
        """Var[S(Y, t) | z] under the model itself."""
        match self.family:
            case Family.LOGISTIC:
                return expit(t) * expit(-t)
            case Family.POISSON:
                return np.exp(t)
        raise NotImplementedError(f"Conditional score variance is not available for the {self.family} family.")

    def mean_response(self, t: np.ndarray) -> np.ndarray:
        match self.family:
            case Family.LOGISTIC:
                return expit(t)
            case Family.POISSON:
                return np.exp(t)
            case Family.GAUSSIAN:
                return np.asarray(t, dtype=float)
            case Family.PROBIT:
                return ndtr(t)
        raise NotImplementedError(self.family)

    def link(self, mu: float) -> float:
        """Linear index that reproduces a constant mean response."""
        match self.family:
            case Family.LOGISTIC:
                return float(np.log(mu / (1.0 - mu)))
            case Family.POISSON:
                return float(np.log(mu))
            case Family.GAUSSIAN:
                return float(mu)
            case Family.PROBIT:
                return float(norm.ppf(mu))
        raise NotImplementedError(self.family)


def _point(m: LossModel, d: DataPoint, theta: np.ndarray) -> tuple[np.ndarray, float, float]:
    if d.y is None:
        raise ContractError("Loss evaluation needs a response.")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (m.dim,):
        raise ContractError(f"theta has length {theta.size}, expected {m.dim}.")
    z = augment(d)
    if z.size != m.dim:
        raise ContractError(f"Data point has {z.size - 1} covariates, model expects {m.dim - 1}.")
    return z, float(d.y), float(z @ theta)


def loss(m: LossModel, d: DataPoint, theta: np.ndarray) -> float:
    _, y, t = _point(m, d, theta)
    return float(m.loss_terms(np.float64(y), np.float64(t)))


def grad(m: LossModel, d: DataPoint, theta: np.ndarray) -> np.ndarray:
    z, y, t = _point(m, d, theta)
    return -float(m.score_terms(np.float64(y), np.float64(t))) * z


def hessian(m: LossModel, d: DataPoint, theta: np.ndarray) -> np.ndarray:
    z, y, t = _point(m, d, theta)
    return float(m.curvature_terms(np.float64(y), np.float64(t))) * np.outer(z, z)


def score_residual(m: LossModel, d: DataPoint, theta: np.ndarray) -> float:
    _, y, t = _point(m, d, theta)
    return float(m.score_terms(np.float64(y), np.float64(t)))


def conditional_score_variance(m: LossModel, d: DataPoint, theta: np.ndarray) -> float:
    z = augment(d)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (m.dim,) or z.size != m.dim:
        raise ContractError(f"Dimension mismatch: model expects {m.dim} coordinates.")
    return float(m.variance_terms(np.float64(z @ theta)))
