from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np


class Family(StrEnum):
    LOGISTIC = "logistic"
    POISSON = "poisson"
    GAUSSIAN = "gaussian"
    PROBIT = "probit"


class PilotMethod(StrEnum):
    UNIFORM_MLE = "uniform-mle"
    WCC = "wcc"
    EXTERNAL = "external"


class ObjectiveKind(StrEnum):
    PREDICTION = "prediction"
    DIRECTION = "direction"
    MSE = "mse"
    LCC = "lcc"


class Command(StrEnum):
    SAMPLE = "sample"
    FIT = "fit"
    SIMULATE = "simulate"
    REPORT = "report"


@dataclass(frozen=True, eq=False)
class DataPoint:
    x: np.ndarray
    y: float | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("DataPoint covariates must be finite.")
        if self.y is not None and not math.isfinite(self.y):
            raise ValueError("DataPoint response must be finite.")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-column shift and scale applied at ingestion."""

    means: np.ndarray
    scales: np.ndarray


@dataclass(frozen=True)
class SolverReport:
    converged: bool
    iterations: int
    final_gradient_norm: float
    objective: float
    history: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class PilotEstimate:
    theta_tilde: np.ndarray
    a_tilde: np.ndarray
    method: PilotMethod
    pilot_size: int


@dataclass(frozen=True, eq=False)
class Objective:
    kind: ObjectiveKind
    direction: np.ndarray | None = None

    def __post_init__(self) -> None:
        kind = ObjectiveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is not ObjectiveKind.DIRECTION:
            return
        if self.direction is None:
            raise ValueError("A direction objective needs a direction vector.")
        v = np.asarray(self.direction, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)) or not np.any(v != 0):
            raise ValueError("Direction vector must be finite and nonzero.")
        object.__setattr__(self, "direction", v)


@dataclass(frozen=True, eq=False)
class SamplingPlan:
    kernels: np.ndarray
    c: float
    probs: np.ndarray
    target_rate: float

    @property
    def expected_size(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True, eq=False)
class Subsample:
    indices: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True, eq=False)
class FitResult:
    theta_hat: np.ndarray
    covariance: np.ndarray | None
    std_errors: np.ndarray | None
    wald_ci: np.ndarray | None
    level: float
    subsample_size: int
    solver: SolverReport
    diagnostics: dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    """A Monte-Carlo study: data-generating process, pipeline and repetition count.

    ``rate=None`` means the main design uses the local case-control rate
    constant c = 1; a direction/prediction/mse objective then matches the
    expected subsample size of that LCC plan.
    """

    id: str
    family: Family
    n: int
    q: int
    intercept: float
    slopes: tuple[float, ...]
    quadratic: float = 0.0
    x_scale: float = 1.0
    noise_sd: float = 1.0
    misspecified: bool = False
    pilot_method: PilotMethod = PilotMethod.UNIFORM_MLE
    pilot_family: Family | None = None
    pilot_size: int = 1000
    objective: ObjectiveKind = ObjectiveKind.LCC
    direction: tuple[float, ...] | None = None
    rate: float | None = None
    uniform_size: int | None = None
    estimators: tuple[str, ...] = ("lcc", "ht-lcc")
    coordinates: tuple[int, ...] | None = None
    replications: int = 500
    seed: int = 20240601
    level: float = 0.95
    oracle_size: int = 10_000_000

    def __post_init__(self) -> None:
        self.family = Family(self.family)
        self.pilot_method = PilotMethod(self.pilot_method)
        self.objective = ObjectiveKind(self.objective)
        if self.pilot_family is not None:
            self.pilot_family = Family(self.pilot_family)
        self.slopes = tuple(float(b) for b in self.slopes)
        if self.direction is not None:
            self.direction = tuple(float(v) for v in self.direction)
        if self.coordinates is not None:
            self.coordinates = tuple(int(j) for j in self.coordinates)
        self.estimators = tuple(self.estimators)

    @property
    def dim(self) -> int:
        return self.q + 1

    @property
    def true_theta(self) -> np.ndarray:
        return np.concatenate([[self.intercept], np.asarray(self.slopes, dtype=float)])


@dataclass(frozen=True, eq=False)
class EstimatorSummary:
    """Monte-Carlo metrics for one estimator, one entry per parameter coordinate."""

    name: str
    bias2: np.ndarray
    variance: np.ndarray
    var_estimate: np.ndarray | None
    coverage: np.ndarray | None
    mean_fraction: float
    successes: int
    failures: int
    mean_seconds: float


@dataclass(frozen=True, eq=False)
class MonteCarloSummary:
    scenario: Scenario
    theta_star: np.ndarray
    estimators: dict[str, EstimatorSummary]
    replications: int
    failed_replications: int
    wall_seconds: float


@dataclass
class RunConfig:
    """Resolved options of one CLI run.

    ``seed``, ``pilot`` and ``pilot_size`` stay ``None`` when neither a flag
    nor the config file sets them; ``simulate`` then keeps the scenario's own
    values and the other commands fall back to the package defaults.
    """

    command: Command | None = None
    data: str | None = None
    response: str | None = None
    loss: Family = Family.LOGISTIC
    objective: ObjectiveKind = ObjectiveKind.PREDICTION
    direction_vector: list[float] | None = None
    rate: float = 0.1
    pilot: PilotMethod | None = None
    pilot_size: int | None = None
    pilot_file: str | None = None
    pilot_theta: list[float] | None = None
    seed: int | None = None
    reps: int | None = None
    scenario: str | None = None
    n: int | None = None
    misspecified: bool | None = None
    out: str = "surprise_out"
    workers: int | None = None
    standardize: bool = False
    log_offset: float | None = None
    min_prob: float = 0.0
    level: float = 0.95
    metric: str = "armse"
    folds: int = 10


@dataclass
class RunManifest:
    config: dict[str, Any]
    version: str
    seed: int
    started: str
    finished: str
    wall_seconds: float
    outputs: dict[str, str] = field(default_factory=dict)
