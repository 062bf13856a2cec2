import json
import math
import re
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, ParseError
from .models import FitResult, MonteCarloSummary

_SEPARATORS = re.compile(r"[,\s;]+")


def parse_json_object(raw: str) -> dict:
    raw = raw.strip()
    if not raw:
        return {}
    parsed = json.loads(raw)
    if not isinstance(parsed, dict):
        raise ValueError("Expected a JSON object.")
    return parsed


def parse_vector(raw: str | list | tuple) -> np.ndarray:
    """Comma- or whitespace-separated numbers, or an already split sequence."""
    items = list(raw) if isinstance(raw, list | tuple) else [p for p in _SEPARATORS.split(raw.strip()) if p]
    if not items:
        raise ConfigError("Expected at least one number.")
    try:
        values = np.array([float(v) for v in items])
    except (TypeError, ValueError):
        raise ConfigError(f"Invalid number in vector {raw!r}.")
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"Vector {raw!r} has non-finite entries.")
    return values


def read_pilot_file(path: str | Path) -> np.ndarray:
    """One-column CSV of pilot coefficients, intercept first; a header line is optional."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError(f"Pilot file {path} is empty.")
    if frame.empty:
        raise ParseError(f"Pilot file {path} is empty.")
    cells = frame.iloc[:, 0].str.strip()
    values = pd.to_numeric(cells, errors="coerce").to_numpy(dtype=float)
    if not math.isfinite(values[0]):
        values, cells = values[1:], cells.iloc[1:]
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size or values.size == 0:
        row = int(bad[0]) if bad.size else None
        raise ParseError(f"Pilot file {path} has a non-numeric entry at row {row}.", row=row)
    return values


def fit_frame(fit: FitResult, names: list[str]) -> pd.DataFrame:
    """coordinate, estimate, se, ci_lo, ci_hi; inference columns are empty without a covariance."""
    nan = np.full(fit.theta_hat.size, np.nan)
    se = fit.std_errors if fit.std_errors is not None else nan
    ci = fit.wald_ci if fit.wald_ci is not None else np.column_stack([nan, nan])
    return pd.DataFrame(
        {"coordinate": names, "estimate": fit.theta_hat, "se": se, "ci_lo": ci[:, 0], "ci_hi": ci[:, 1]}
    )


def format_fit_report(fit: FitResult, names: list[str], extra: dict | None = None) -> str:
    lines = [
        f"level: {fit.level:g}",
        f"subsample_size: {fit.subsample_size}",
        f"converged: {str(fit.solver.converged).lower()}",
        f"iterations: {fit.solver.iterations}",
        f"final_gradient_norm: {fit.solver.final_gradient_norm:.6e}",
        f"objective: {fit.solver.objective:.12g}",
    ]
    for key, value in {**fit.diagnostics, **(extra or {})}.items():
        lines.append(f"{key}: {value:.12g}" if isinstance(value, float) else f"{key}: {value}")
    for j, name in enumerate(names):
        lines.append(f"estimate[{name}]: {fit.theta_hat[j]:.12g}")
        if fit.std_errors is not None:
            lines.append(f"se[{name}]: {fit.std_errors[j]:.12g}")
    return "\n".join(lines) + "\n"


def format_summary(summary: MonteCarloSummary, frame: pd.DataFrame) -> str:
    """Aligned text table with a short header describing the run."""
    s = summary.scenario
    star = ", ".join(f"{v:.6g}" for v in summary.theta_star)
    header = [
        f"scenario: {s.id} ({s.family}, n={s.n}, q={s.q}, misspecified={str(s.misspecified).lower()})",
        f"pilot: {s.pilot_family or s.pilot_method} size {s.pilot_size}; objective: {s.objective}",
        f"replications: {summary.replications} ({summary.failed_replications} failed)",
        f"theta*: ({star})",
        "",
    ]
    table = frame.to_string(index=False, float_format=lambda v: f"{v:.4e}", na_rep="-")
    return "\n".join(header) + table + "\n"


def format_report(frame: pd.DataFrame, title: str) -> str:
    return f"{title}\n" + frame.to_string(index=False, float_format=lambda v: f"{v:.6g}", na_rep="-") + "\n"
