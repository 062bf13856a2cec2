# ruff: noqa: S101
"""Desk-scale Monte-Carlo checks of the estimator properties; run with ``pytest -m slow``."""

from dataclasses import replace

import numpy as np
import pytest
from joblib import Parallel, delayed

from surprise.simulation import custom_scenario, replicate, run, scenario, summary_frame, true_target, validate

pytestmark = [pytest.mark.slow, pytest.mark.usefixtures("tmp_cache_dir")]


def _frame(s, workers=4):
    return summary_frame(run(s, workers=workers)).set_index("estimator")


def _records(s, estimators, theta_star, workers=4):
    outcomes = Parallel(n_jobs=workers)(
        delayed(replicate)(s, rep, estimators, theta_star) for rep in range(s.replications)
    )
    return [o for o in outcomes if o is not None]


def test_ht_doubles_full_variance_and_matches_lcc():
    frame = _frame(scenario("sim1", n=100_000, q=20, replications=500, seed=1, pilot_size=2000))
    ratio_full = frame.loc["ht-lcc", "variance"] / frame.loc["full", "variance"]
    ratio_lcc = frame.loc["ht-lcc", "variance"] / frame.loc["lcc", "variance"]
    assert 1.7 <= ratio_full <= 2.4
    assert 0.8 <= ratio_lcc <= 1.25


def test_case_control_pilot_runs_through_sim1():
    frame = _frame(scenario("sim1", n=20_000, q=10, replications=20, seed=3, pilot_method="wcc"))
    assert frame["successes"].tolist() == [20, 20, 20]


def test_ht_survives_an_inconsistent_pilot():
    frame = _frame(scenario("sim3", n=100_000, replications=500, seed=3))
    assert frame.loc["ht-lcc", "bias2"] <= frame.loc["ht-lcc", "variance"] / 10
    assert frame.loc["lcc", "bias2"] >= frame.loc["lcc", "variance"] / 5


def test_direction_design_beats_lcc_for_its_coordinate():
    s = scenario("sim4", n=100_000, replications=500, seed=4)
    theta_star = true_target(s, workers=4)
    records = _records(s, ("lcc", "ht-lcc", "ht"), theta_star)
    slope = {name: np.array([r[name].theta[1] for r in records]) for name in ("lcc", "ht-lcc", "ht")}

    assert slope["lcc"].var(ddof=1) / slope["ht"].var(ddof=1) >= 2.0

    rng = np.random.default_rng(0)
    resamples = rng.integers(0, len(records), size=(2000, len(records)))
    gaps = slope["ht"][resamples].var(axis=1, ddof=1) - slope["ht-lcc"][resamples].var(axis=1, ddof=1)
    assert np.mean(gaps >= 0.0) < 0.05

    covered = np.mean([r["ht"].covered[1] for r in records])
    assert 0.91 <= covered <= 0.98


@pytest.mark.parametrize("scenario_id", ["sim5", "sim6"])
@pytest.mark.parametrize("misspecified", [False, True])
def test_surprise_beats_uniform_at_matched_budget(scenario_id, misspecified):
    frame = _frame(scenario(scenario_id, misspecified=misspecified, replications=500, seed=5))
    assert frame.loc["ht", "variance"] <= 0.6 * frame.loc["uniform", "variance"]
    assert 91.0 <= frame.loc["ht", "coverage"] <= 98.0


def _logistic_ladder(pilot_method):
    def make(n):
        return custom_scenario(
            {
                "family": "logistic",
                "n": n,
                "q": 2,
                "intercept": -0.5,
                "slopes": [1.0, -1.0],
                "rate": 0.1,
                "pilot_method": pilot_method,
                "pilot_size": 200,
            }
        )

    return make, (1_000, 10_000, 100_000)


def _probit_ladder():
    def make(n):
        return scenario("sim3", n=n, pilot_size=500)

    return make, (5_000, 50_000, 500_000)


LADDERS = {
    "uniform": lambda: _logistic_ladder("uniform-mle"),
    "case-control": lambda: _logistic_ladder("wcc"),
    "probit": _probit_ladder,
}


@pytest.mark.parametrize("pilot", sorted(LADDERS))
@pytest.mark.parametrize("objective", ["prediction", "direction", "mse", "lcc"])
def test_error_shrinks_with_sample_size(pilot, objective):
    make, sizes = LADDERS[pilot]()
    theta_star = None
    medians = []
    for n in sizes:
        base = make(n)
        direction = np.zeros(base.dim)
        direction[1] = 1.0
        s = replace(base, objective=objective, direction=direction, estimators=("ht",), replications=200, seed=12)
        validate(s)
        if theta_star is None:
            theta_star = true_target(s, workers=4)
        records = _records(s, ("ht",), theta_star)
        errors = [np.linalg.norm(r["ht"].theta - theta_star) for r in records]
        medians.append(np.median(errors))
    assert medians[0] > medians[1] > medians[2]
