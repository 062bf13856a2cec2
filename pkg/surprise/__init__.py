"""Surprise Sampler: objective-adaptive subsampling with Horvitz-Thompson estimation."""

from __future__ import annotations

import importlib
from typing import Any

from .errors import SurpriseError
from .models import (
    Family,
    FitResult,
    Objective,
    ObjectiveKind,
    PilotEstimate,
    PilotMethod,
    SamplingPlan,
    Scenario,
    Subsample,
)

__all__ = [
    "Dataset",
    "Family",
    "FitResult",
    "LossModel",
    "Objective",
    "ObjectiveKind",
    "PilotEstimate",
    "PilotMethod",
    "SamplingPlan",
    "Scenario",
    "Subsample",
    "SurpriseError",
    "build_plan",
    "draw",
    "find_c",
    "fit_ht",
    "kernel",
    "load_csv",
    "run",
    "scenario",
]

_LAZY_IMPORTS: dict[str, tuple[str, str]] = {
    "Dataset": ("surprise.data", "Dataset"),
    "load_csv": ("surprise.data", "load_csv"),
    "LossModel": ("surprise.losses", "LossModel"),
    "kernel": ("surprise.design", "kernel"),
    "find_c": ("surprise.design", "find_c"),
    "build_plan": ("surprise.design", "build_plan"),
    "draw": ("surprise.design", "draw"),
    "fit_ht": ("surprise.estimator", "fit_ht"),
    "run": ("surprise.simulation", "run"),
    "scenario": ("surprise.simulation", "scenario"),
}


def __getattr__(name: str) -> Any:
    if name in _LAZY_IMPORTS:
        module_name, attr = _LAZY_IMPORTS[name]
        module = importlib.import_module(module_name)
        value = getattr(module, attr)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__version__ = "0.1.0"
