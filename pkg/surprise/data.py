"""Dataset representation, augmented covariates and CSV ingestion."""

from __future__ import annotations

import logging
import re
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConstantColumnError, ContractError, EmptyDatasetError, ParseError
from .models import DataPoint, Standardization

logger = logging.getLogger(__name__)

_PANDAS_LINE = re.compile(r"line (\d+)")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x q covariate matrix with an optional response vector."""

    x: np.ndarray
    y: np.ndarray | None
    column_names: tuple[str, ...]
    response_name: str | None = None
    standardization: Standardization | None = None
    log_offset: float | None = None

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float, copy=True)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] < 1:
            raise EmptyDatasetError("A dataset needs at least one row.")
        if len(self.column_names) != x.shape[1]:
            raise ContractError(f"Expected {x.shape[1]} column names, got {len(self.column_names)}.")
        if not np.all(np.isfinite(x)):
            raise ContractError("Covariates must be finite.")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if self.y is not None:
            y = np.array(self.y, dtype=float, copy=True).reshape(-1)
            if y.size != x.shape[0]:
                raise ContractError("Response length does not match the number of rows.")
            if not np.all(np.isfinite(y)):
                raise ContractError("Responses must be finite.")
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def q(self) -> int:
        return int(self.x.shape[1])

    @property
    def standardized(self) -> bool:
        return self.standardization is not None

    @property
    def has_response(self) -> bool:
        return self.y is not None

    @cached_property
    def design(self) -> np.ndarray:
        """Augmented covariates, one row z_i = (1, x_i) per data point."""
        z = np.empty((self.n, self.q + 1))
        z[:, 0] = 1.0
        z[:, 1:] = self.x
        z.setflags(write=False)
        return z

    @property
    def coordinate_names(self) -> list[str]:
        return ["(intercept)", *self.column_names]

    def row(self, i: int) -> DataPoint:
        return DataPoint(x=self.x[i], y=None if self.y is None else float(self.y[i]))

    @property
    def rows(self) -> Iterator[DataPoint]:
        return (self.row(i) for i in range(self.n))

    def require_response(self) -> np.ndarray:
        if self.y is None:
            raise ContractError("This operation needs a response column.")
        return self.y

    def subset(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(indices, dtype=np.intp)
        return replace(self, x=self.x[idx], y=None if self.y is None else self.y[idx])

    @classmethod
    def from_arrays(
        cls, x: np.ndarray, y: np.ndarray | None = None, column_names: Sequence[str] | None = None
    ) -> Dataset:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        names = tuple(column_names) if column_names is not None else tuple(f"x{j + 1}" for j in range(x.shape[1]))
        return cls(x=x, y=y, column_names=names, response_name=None if y is None else "y")


def augment(point: DataPoint) -> np.ndarray:
    z = np.empty(point.x.size + 1)
    z[0] = 1.0
    z[1:] = point.x
    return z


def standardize_columns(data: Dataset) -> Dataset:
    """Shift every covariate column to mean 0 and sample standard deviation 1."""
    means = data.x.mean(axis=0)
    scales = data.x.std(axis=0, ddof=1) if data.n > 1 else np.zeros(data.q)
    constant = [name for name, s in zip(data.column_names, scales) if not s > 0]
    if constant:
        raise ConstantColumnError(f"Cannot standardize constant column(s): {', '.join(constant)}")
    x = (data.x - means) / scales
    return replace(data, x=x, standardization=Standardization(means=means, scales=scales))


def destandardize(data: Dataset) -> Dataset:
    if data.standardization is None:
        return data
    st = data.standardization
    return replace(data, x=data.x * st.scales + st.means, standardization=None)


def apply_standardization(data: Dataset, reference: Dataset) -> Dataset:
    """Transform ``data`` with the shift/scale recorded on ``reference``."""
    if reference.standardization is None or data.standardized:
        return data
    st = reference.standardization
    return replace(data, x=(data.x - st.means) / st.scales, standardization=st)


def log_transform(data: Dataset, offset: float) -> Dataset:
    shifted = data.x + offset
    if np.any(shifted <= 0):
        raise ContractError(f"log(x + {offset}) is undefined for some covariate values.")
    return replace(data, x=np.log(shifted), log_offset=offset)


def undo_log_transform(data: Dataset) -> Dataset:
    if data.log_offset is None:
        return data
    return replace(data, x=np.exp(data.x) - data.log_offset, log_offset=None)


def load_csv(
    path: str | Path,
    response_column: str | None = None,
    standardize: bool = False,
    log_offset: float | None = None,
) -> Dataset:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError(f"{path} is empty.")
    except pd.errors.ParserError as exc:
        match = _PANDAS_LINE.search(str(exc))
        row = int(match.group(1)) - 2 if match else None
        raise ParseError(f"Malformed row {row} in {path}: {exc}", row=row)
    if frame.empty:
        raise EmptyDatasetError(f"{path} has a header but no data rows.")
    if response_column is not None and response_column not in frame.columns:
        raise ParseError(f"Response column {response_column!r} not found in {path}.", column=response_column)

    numeric = pd.DataFrame({name: _numeric_column(frame[name], name) for name in frame.columns})
    covariates = [c for c in numeric.columns if c != response_column]
    y = numeric[response_column].to_numpy(dtype=float) if response_column is not None else None
    data = Dataset(
        x=numeric[covariates].to_numpy(dtype=float),
        y=y,
        column_names=tuple(covariates),
        response_name=response_column,
    )
    logger.debug("Loaded %s: n=%d q=%d response=%s", path, data.n, data.q, response_column)
    if log_offset is not None:
        data = log_transform(data, log_offset)
    if standardize:
        data = standardize_columns(data)
    return data


def _numeric_column(values: pd.Series, name: str) -> np.ndarray:
    parsed = pd.to_numeric(values.str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(parsed))
    if bad.size:
        row = int(bad[0])
        raise ParseError(
            f"Non-numeric or non-finite value {values.iloc[row]!r} in column {name!r} at row {row}.",
            row=row,
            column=name,
        )
    return parsed


def write_csv(data: Dataset, path: str | Path, extra: dict[str, np.ndarray] | None = None) -> Path:
    """Write the dataset in its original units: standardization and the log transform are undone."""
    path = Path(path)
    plain = undo_log_transform(destandardize(data))
    columns: dict[str, np.ndarray] = {}
    if plain.y is not None:
        columns[plain.response_name or "y"] = plain.y
    for j, name in enumerate(plain.column_names):
        columns[name] = plain.x[:, j]
    for name, values in (extra or {}).items():
        columns[name] = values
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path
