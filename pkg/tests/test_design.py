# ruff: noqa: S101
import math

import numpy as np
import pytest

from surprise.design import build_plan, draw, find_c, kernel, lcc_direction
from surprise.errors import ContractError, DegenerateDesignError
from surprise.losses import LossModel, grad
from surprise.models import Family, Objective, ObjectiveKind, PilotEstimate, PilotMethod
from surprise.pilot import pilot_external


def _capped_mass(k: np.ndarray, c: float) -> float:
    return float(np.minimum(c * k, 1.0).sum())


def _bisect_c(k: np.ndarray, r: float) -> float:
    """Monotone bisection on c over the capped mass, run to machine precision."""
    target = k.size * r
    lo, hi = 0.0, 1.0
    while _capped_mass(k, hi) <= target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _capped_mass(k, mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def _random_kernels(rng: np.random.Generator) -> np.ndarray:
    n = int(rng.integers(1, 201))
    match int(rng.integers(4)):
        case 0:
            k = rng.exponential(size=n)
        case 1:
            k = rng.lognormal(sigma=2.0, size=n)
        case 2:
            k = rng.integers(0, 4, size=n).astype(float)
        case _:
            k = rng.pareto(1.5, size=n)
    k[rng.random(n) < 0.2] = 0.0
    if not k.any():
        k[0] = 1.0
    return k


def test_find_c_uncapped_example():
    assert find_c(np.array([0.1, 0.2, 0.3, 0.4]), 0.25) == pytest.approx(1.0)


def test_find_c_capped_example():
    k = np.array([0.5, 1.0, 2.0])
    c = find_c(k, 2.0 / 3.0)
    assert c == pytest.approx(2.0 / 3.0)
    plan = build_plan(k, c=c)
    assert plan.probs == pytest.approx([1.0 / 3.0, 2.0 / 3.0, 1.0])


def test_find_c_equal_kernels_gives_uniform_rate():
    k = np.full(50, 0.7)
    plan = build_plan(k, 0.2)
    assert plan.c == pytest.approx(0.2 / 0.7)
    assert plan.probs == pytest.approx(np.full(50, 0.2))


def test_find_c_matches_bisection_oracle():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        k = _random_kernels(rng)
        r = float(rng.uniform(0.01, 1.0))
        if k.size * r >= np.count_nonzero(k):
            assert math.isinf(find_c(k, r))
            continue
        c = find_c(k, r)
        if k.size * r - np.count_nonzero(c * k >= 1.0) < 0.01:
            continue  # almost no uncapped mass; c is ill-conditioned
        assert c == pytest.approx(_bisect_c(k, r), rel=1e-10)
        assert _capped_mass(k, c) <= k.size * r * (1 + 1e-12)
        assert _capped_mass(k, c * (1 + 1e-6)) > k.size * r
        checked += 1
    assert checked > 500


def test_find_c_all_zero_kernels():
    with pytest.raises(DegenerateDesignError):
        find_c(np.zeros(5), 0.5)


def test_find_c_rate_too_large_for_positive_kernels(caplog):
    c = find_c(np.array([0.0, 0.0, 1.0, 2.0]), 0.5)
    assert math.isinf(c)
    assert "positive kernel" in caplog.text
    plan = build_plan(np.array([0.0, 0.0, 1.0, 2.0]), 0.5)
    assert plan.probs.tolist() == [0.0, 0.0, 1.0, 1.0]


def test_find_c_rejects_bad_input():
    with pytest.raises(ContractError, match="rate"):
        find_c(np.ones(3), 0.0)
    with pytest.raises(ContractError, match="nonnegative"):
        find_c(np.array([1.0, -1.0]), 0.5)


def test_build_plan_needs_exactly_one_of_rate_or_c():
    with pytest.raises(ContractError, match="exactly one"):
        build_plan(np.ones(3))
    with pytest.raises(ContractError, match="exactly one"):
        build_plan(np.ones(3), 0.5, c=1.0)


def test_build_plan_with_min_prob():
    k = np.array([0.0, 1.0, 1.0, 2.0])
    plan = build_plan(k, 0.5, min_prob=0.1)
    assert plan.probs.min() == pytest.approx(0.1)
    assert plan.expected_size <= 4 * 0.5 + 1e-12
    with pytest.raises(ContractError, match="no room"):
        build_plan(k, 0.1, min_prob=0.1)


def test_build_plan_fixed_c_caps_at_one():
    plan = build_plan(np.array([0.2, 0.9, 3.0]), c=1.0)
    assert plan.probs.tolist() == [0.2, 0.9, 1.0]
    assert plan.target_rate == pytest.approx(0.7)


def test_draw_everything_when_probabilities_are_one():
    plan = build_plan(np.ones(20), c=1.0)
    sub = draw(plan, np.random.default_rng(0))
    assert sub.indices.tolist() == list(range(20))
    assert np.all(sub.weights == 1.0)


def test_draw_count_concentrates():
    n = 100_000
    plan = build_plan(np.ones(n), 0.5)
    sub = draw(plan, np.random.default_rng(5))
    assert abs(len(sub) - n / 2) <= 4 * math.sqrt(n * 0.25)
    assert np.all(sub.weights == 2.0)


def test_draw_is_deterministic_across_workers():
    k = np.random.default_rng(3).exponential(size=50_000)
    plan = build_plan(k, 0.1)
    first = draw(plan, np.random.default_rng(42), workers=1, chunk_size=4096)
    again = draw(plan, np.random.default_rng(42), workers=4, chunk_size=4096)
    assert np.array_equal(first.indices, again.indices)
    assert np.array_equal(first.weights, again.weights)


def test_ht_weighted_mean_is_unbiased():
    rng = np.random.default_rng(9)
    n = 10_000
    stat = rng.uniform(-1.0, 1.0, size=n)
    plan = build_plan(rng.exponential(size=n) + 0.05, 0.1)
    estimates = np.array([(stat[s.indices] * s.weights).sum() / n for s in (draw(plan, rng) for _ in range(2000))])
    se = estimates.std(ddof=1) / math.sqrt(estimates.size)
    assert abs(estimates.mean() - stat.mean()) <= 3 * se


def test_lcc_kernel_hand_value(logistic_factory):
    data = logistic_factory(n=10)
    m = LossModel(Family.LOGISTIC, 3)
    pilot = pilot_external(np.zeros(3), data, m)
    k = kernel(data, m, pilot, Objective(ObjectiveKind.LCC))
    assert k == pytest.approx(np.full(10, 0.5))


def test_prediction_kernel_with_identity_curvature(logistic_factory):
    data = logistic_factory(n=50)
    m = LossModel(Family.LOGISTIC, 3)
    theta = np.array([0.3, -0.2, 0.1])
    pilot = PilotEstimate(theta, np.eye(3), PilotMethod.EXTERNAL, 0)
    k = kernel(data, m, pilot, Objective(ObjectiveKind.PREDICTION), workers=2, chunk_size=7)
    expected = [np.linalg.norm(grad(m, d, theta)) for d in data.rows]
    assert k == pytest.approx(expected, rel=1e-12)


def test_mse_and_direction_kernels(logistic_factory):
    data = logistic_factory(n=40)
    m = LossModel(Family.LOGISTIC, 3)
    theta = np.array([0.3, -0.2, 0.1])
    A = np.diag([2.0, 4.0, 0.5])
    v = np.array([0.0, 1.0, 0.0])
    pilot = PilotEstimate(theta, A, PilotMethod.EXTERNAL, 0)
    mse = kernel(data, m, pilot, Objective(ObjectiveKind.MSE))
    direction = kernel(data, m, pilot, Objective(ObjectiveKind.DIRECTION, v))
    grads = np.array([grad(m, d, theta) for d in data.rows])
    assert mse == pytest.approx(np.linalg.norm(grads / np.diag(A), axis=1))
    assert direction == pytest.approx(np.abs(grads[:, 1]) / 4.0)


def test_direction_kernel_with_lcc_vector_is_proportional_to_lcc(logistic_factory):
    data = logistic_factory(n=10_000, seed=4)
    m = LossModel(Family.LOGISTIC, 3)
    pilot = pilot_external(np.array([-0.8, 0.9, -0.4]), data, m)
    v = lcc_direction(data, m, pilot)
    direction = kernel(data, m, pilot, Objective(ObjectiveKind.DIRECTION, v))
    lcc = kernel(data, m, pilot, Objective(ObjectiveKind.LCC))
    ratio = direction / lcc
    assert ratio == pytest.approx(np.full(data.n, ratio.mean()), rel=1e-6)


def test_kernel_dimension_mismatch(logistic_factory):
    data = logistic_factory(n=10)
    pilot = PilotEstimate(np.zeros(2), np.eye(2), PilotMethod.EXTERNAL, 0)
    with pytest.raises(ContractError, match="dimension"):
        kernel(data, LossModel(Family.LOGISTIC, 3), pilot, Objective(ObjectiveKind.LCC))
