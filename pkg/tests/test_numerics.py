# ruff: noqa: S101
import numpy as np
import pytest
from scipy.special import expit

from surprise.errors import ContractError, DecompositionError, NotPSDError, SeparationError, StallError
from surprise.numerics import cholesky, inv_psd, inv_sqrt, newton_minimize, solve_spd


class _Quadratic:
    def __init__(self, A: np.ndarray, b: np.ndarray) -> None:
        self.A, self.b = A, b

    def value(self, theta):
        return float(0.5 * theta @ self.A @ theta - self.b @ theta)

    def derivatives(self, theta):
        return self.value(theta), self.A @ theta - self.b, self.A


class _Linear:
    """Unbounded below; every iterate runs further out."""

    def value(self, theta):
        return float(-theta.sum())

    def derivatives(self, theta):
        return self.value(theta), -np.ones_like(theta), np.eye(theta.size)


class _Rising:
    """Reports a descent gradient for a function that only increases."""

    def value(self, theta):
        return float(np.abs(theta).sum()) + 10.0

    def derivatives(self, theta):
        return 0.0, np.ones_like(theta), np.eye(theta.size)


class _Logistic:
    def __init__(self, seed: int = 5) -> None:
        rng = np.random.default_rng(seed)
        self.X = rng.normal(size=(400, 3))
        self.y = (rng.random(400) < expit(self.X @ np.array([0.5, -1.0, 2.0]))).astype(float)

    def value(self, theta):
        t = self.X @ theta
        return float(np.sum(np.logaddexp(0.0, t) - self.y * t))

    def derivatives(self, theta):
        p = expit(self.X @ theta)
        H = self.X.T @ (self.X * (p * (1.0 - p))[:, None])
        return self.value(theta), self.X.T @ (p - self.y), H


def test_inv_sqrt_identity_and_diagonal():
    assert inv_sqrt(np.eye(3)) == pytest.approx(np.eye(3))
    assert inv_sqrt(np.diag([4.0, 9.0])) == pytest.approx(np.diag([0.5, 1.0 / 3.0]))


def test_inv_sqrt_squares_to_inverse():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(4, 4))
    M = B @ B.T + 0.5 * np.eye(4)
    R = inv_sqrt(M)
    assert R @ M @ R == pytest.approx(np.eye(4), abs=1e-10)
    assert inv_psd(M) @ M == pytest.approx(np.eye(4), abs=1e-10)


def test_inv_psd_floors_singular_direction():
    M = np.diag([1.0, 0.0])
    assert inv_psd(M, eigen_floor=1e-2) == pytest.approx(np.diag([1.0, 100.0]))


def test_inv_sqrt_rejects_indefinite():
    with pytest.raises(NotPSDError, match="positive semidefinite"):
        inv_sqrt(np.diag([1.0, -1.0]))


def test_rejects_asymmetric():
    with pytest.raises(ContractError, match="symmetric"):
        inv_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_solve_spd():
    b = np.array([3.0, -2.0])
    assert solve_spd(np.eye(2), b) == pytest.approx(b)
    assert solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 4.0])) == pytest.approx([1.0, 1.0])


def test_cholesky_reports_pivot():
    M = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    with pytest.raises(DecompositionError) as info:
        cholesky(M)
    assert info.value.pivot == 3


def test_cholesky_factor_is_lower():
    L = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
    assert L[0, 1] == 0.0
    assert L @ L.T == pytest.approx(np.array([[4.0, 2.0], [2.0, 3.0]]))


def test_newton_solves_quadratic_in_one_step():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    theta, report = newton_minimize(_Quadratic(A, b), np.zeros(2))
    assert report.converged
    assert report.iterations == 1
    assert theta == pytest.approx(np.linalg.solve(A, b))
    assert report.history[-1] <= report.history[0]


def test_newton_ridge_handles_singular_hessian():
    A = np.diag([1.0, 0.0])
    theta, report = newton_minimize(_Quadratic(A, np.array([1.0, 0.0])), np.zeros(2))
    assert report.converged
    assert theta[0] == pytest.approx(1.0)


def test_newton_max_iter_returns_unconverged():
    theta, report = newton_minimize(_Linear(), np.zeros(2), max_iter=3)
    assert not report.converged
    assert report.iterations == 3
    assert np.all(theta > 0)


def test_newton_norm_guard():
    with pytest.raises(SeparationError, match="exceeded"):
        newton_minimize(_Linear(), np.zeros(2), max_iter=1000, norm_guard=100.0)


def test_newton_stalls_when_every_step_fails():
    with pytest.raises(StallError, match="Line search"):
        newton_minimize(_Rising(), np.ones(2))


def test_newton_history_is_non_increasing():
    objective = _Logistic()
    theta, report = newton_minimize(objective, np.full(3, 8.0))
    assert report.converged
    assert report.iterations >= 3
    steps = np.diff(report.history)
    noise = 16.0 * np.finfo(float).eps * (1.0 + np.abs(np.asarray(report.history[:-1])))
    assert np.all(steps <= noise)
    assert report.history[-1] == pytest.approx(objective.value(theta))
