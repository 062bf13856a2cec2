"""Surprise-sampling kernels, the rate constant and the Bernoulli draw."""

from __future__ import annotations

import logging
import math

import numpy as np

from .config import DEFAULT_CHUNK_SIZE
from .data import Dataset
from .errors import ContractError, DegenerateDesignError
from .losses import LossModel
from .models import Objective, ObjectiveKind, PilotEstimate, SamplingPlan, Subsample
from .numerics import inv_psd, inv_sqrt
from .parallel import chunk_bounds, chunked_concat, chunked_map, chunked_sum

logger = logging.getLogger(__name__)


def kernel(
    data: Dataset,
    m: LossModel,
    pilot: PilotEstimate,
    obj: Objective,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> np.ndarray:
    """Per-row kernel for ``obj`` with g_i evaluated at the pilot parameter.

    prediction  ||A^-1/2 g_i||
    direction   |v' A^-1 g_i|
    mse         ||A^-1 g_i||
    lcc         |S(y_i, theta' z_i)|
    """
    y = data.require_response()
    theta = pilot.theta_tilde
    if theta.shape != (m.dim,) or data.q + 1 != m.dim:
        raise ContractError(f"Pilot, data and model disagree on the parameter dimension {m.dim}.")
    z_all = data.design

    match obj.kind:
        case ObjectiveKind.PREDICTION:
            transform = inv_sqrt(pilot.a_tilde)
        case ObjectiveKind.MSE:
            transform = inv_psd(pilot.a_tilde)
        case ObjectiveKind.DIRECTION:
            if obj.direction.size != m.dim:
                raise ContractError(f"Direction vector has length {obj.direction.size}, expected {m.dim}.")
            transform = inv_psd(pilot.a_tilde) @ obj.direction
        case _:
            transform = None

    def part(start: int, stop: int) -> np.ndarray:
        z = z_all[start:stop]
        s = np.abs(m.score_terms(y[start:stop], z @ theta))
        if transform is None:
            return s
        if transform.ndim == 1:
            return s * np.abs(z @ transform)
        return s * np.linalg.norm(z @ transform, axis=1)

    return chunked_concat(part, data.n, workers=workers, chunk_size=chunk_size)


def find_c(kernels: np.ndarray, r: float) -> float:
    """Largest c with ``sum_i min(c k_i, 1) <= n r``.

    Returns ``inf`` when even capping every positive kernel at 1 stays
    within the rate.
    """
    k = np.asarray(kernels, dtype=float).reshape(-1)
    if k.size == 0 or not np.all(np.isfinite(k)) or np.any(k < 0):
        raise ContractError("Kernels must be a nonempty vector of finite nonnegative values.")
    if not 0.0 < r <= 1.0:
        raise ContractError(f"Sampling rate must lie in (0, 1], got {r}.")
    total = float(k.sum())
    if total <= 0:
        raise DegenerateDesignError("Every kernel is zero; no point can be sampled.")
    n = k.size
    target = n * r
    positive = int(np.count_nonzero(k))
    if target >= positive:
        logger.warning(
            "Rate %.4g allows %.1f points but only %d have a positive kernel; sampling all of them", r, target, positive
        )
        return math.inf

    s = np.sort(k)
    c0 = target / total
    if c0 * s[-1] <= 1.0:
        return c0

    cum = np.concatenate([[0.0], np.cumsum(s)])

    def capped_mass(j: int) -> float:
        # sum_i min(k_i / s_j, 1): rows from j upward sit at the cap
        return cum[j] / s[j] + (n - j)

    lo, hi = n - positive, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if capped_mass(mid) <= target:
            hi = mid
        else:
            lo = mid
    return (target - (n - hi)) / cum[hi]


def _capped(kernels: np.ndarray, c: float) -> np.ndarray:
    if math.isinf(c):
        return (kernels > 0).astype(float)
    return np.minimum(c * kernels, 1.0)


def build_plan(
    kernels: np.ndarray,
    rate: float | None = None,
    *,
    c: float | None = None,
    min_prob: float = 0.0,
) -> SamplingPlan:
    """Turn kernels into inclusion probabilities, from a target rate or a fixed c.

    With ``min_prob > 0`` the rate constant is solved for ``rate - min_prob``
    and every probability is then raised to at least ``min_prob``.
    """
    if (rate is None) == (c is None):
        raise ContractError("Give exactly one of a sampling rate or a rate constant.")
    k = np.asarray(kernels, dtype=float).reshape(-1)
    if not 0.0 <= min_prob < 1.0:
        raise ContractError(f"min_prob must lie in [0, 1), got {min_prob}.")
    if rate is not None:
        if min_prob >= rate:
            raise ContractError(f"min_prob {min_prob} leaves no room under the rate {rate}.")
        c = find_c(k, rate - min_prob)
    elif not c > 0:
        raise ContractError(f"Rate constant must be positive, got {c}.")
    elif np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ContractError("Kernels must be finite and nonnegative.")
    probs = _capped(k, c)
    if min_prob > 0:
        probs = np.maximum(probs, min_prob)
    target = float(probs.mean()) if rate is None else float(rate)
    logger.debug("Plan: c=%.6g expected size %.1f of %d", c, probs.sum(), k.size)
    return SamplingPlan(kernels=k, c=float(c), probs=probs, target_rate=target)


def draw(
    plan: SamplingPlan,
    rng: np.random.Generator,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Subsample:
    """Independent Bernoulli(pi_i) inclusion for every row.

    Each chunk of rows gets its own stream spawned from one draw of ``rng``,
    so the result depends on the seed and chunk size only.
    """
    probs = plan.probs
    n = probs.size
    streams = np.random.SeedSequence(int(rng.integers(2**63))).spawn(len(chunk_bounds(n, chunk_size)))

    def part(start: int, stop: int) -> np.ndarray:
        u = np.random.default_rng(streams[start // chunk_size]).random(stop - start)
        return np.flatnonzero(u < probs[start:stop]) + start

    indices = np.concatenate(chunked_map(part, n, workers=workers, chunk_size=chunk_size)).astype(np.intp)
    return Subsample(indices=indices, weights=1.0 / probs[indices])


def lcc_direction(
    data: Dataset, m: LossModel, pilot: PilotEstimate, *, workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> np.ndarray:
    """``n^-1 sum_i Var[S | z_i] z_i`` at the pilot; its direction kernel equals the LCC kernel."""
    z_all, theta = data.design, pilot.theta_tilde

    def part(start: int, stop: int) -> np.ndarray:
        z = z_all[start:stop]
        return m.variance_terms(z @ theta) @ z

    return chunked_sum(part, data.n, workers=workers, chunk_size=chunk_size) / data.n
