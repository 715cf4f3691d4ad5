"""Closed-form activation thresholds and service price.

Servers need at least ``k_min`` jobs to earn their reward threshold, users
tolerate at most ``k_max`` jobs per server before the deadline-miss
probability exceeds ``beta``.  The planner derives both, the matching
server counts ``c_min = K_T / k_max`` and ``c_max = K_T / k_min``, and the
price ``e_p*`` at which the two coincide.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

from .params import SystemParams
from .stats import DelayMoments, erf_inv, theta_moments

__all__ = [
    "CLT_MIN_JOBS",
    "ApproximationWarning",
    "InfeasiblePlanError",
    "EconomicParams",
    "PlanResult",
    "reward",
    "k_min",
    "k_max",
    "c_bounds",
    "price_for",
    "derive",
    "plan",
    "beta_sweep",
]

# below this many jobs the normal approximation of the workload is doubtful
CLT_MIN_JOBS = 30


class InfeasiblePlanError(ValueError):
    """No admissible cut-off exists for the given parameters."""


class ApproximationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EconomicParams:
    r_th: float
    e_f: float
    e_j: float
    e_p: float | None = None

    def __post_init__(self) -> None:
        if self.e_p is not None and not self.e_p > self.e_j:
            raise ValueError(f"price e_p={self.e_p} must exceed per-job cost e_j={self.e_j}")


@dataclass(frozen=True)
class PlanResult:
    """Derived plan.

    ``c_th`` is ``floor(c_th_real)``.  The game runs with ``c_th_ceil``:
    only that cut-off guarantees ``K_T / c <= k_max`` whenever at least
    ``c_th`` servers are active.
    """

    beta: float
    mu_theta: float
    var_theta: float
    k_max: float
    k_min: float
    c_min: float
    c_max: float
    c_th_real: float
    c_th: int
    c_th_ceil: int
    e_p_star: float

    @property
    def game_cut_off(self) -> int:
        return self.c_th_ceil

    @property
    def delay_moments(self) -> DelayMoments:
        return DelayMoments(self.mu_theta, self.var_theta)

    def as_row(self) -> dict[str, float | int]:
        return asdict(self)


def reward(k: float, econ: EconomicParams) -> float:
    """Per-slot reward ``k (e_p - e_j) - e_f`` of an active server."""
    if econ.e_p is None:
        raise ValueError("reward needs a price e_p")
    return k * (econ.e_p - econ.e_j) - econ.e_f


def k_min(econ: EconomicParams) -> float:
    if econ.e_p is None or not econ.e_p > econ.e_j:
        raise ValueError(f"k_min needs e_p > e_j, got e_p={econ.e_p}, e_j={econ.e_j}")
    numerator = econ.r_th + econ.e_f
    if numerator == 0:
        warnings.warn("R_th + e_f = 0: every job count meets the reward threshold", stacklevel=2)
    return numerator / (econ.e_p - econ.e_j)


def k_max(dm: DelayMoments, deadline: float, beta: float) -> float:
    """Largest job count whose deadline-miss probability stays at ``beta``.

    Positive root in ``sqrt(k)`` of
    ``k mu_theta + sqrt(2 k) sigma_theta erfinv(1 - 2 beta) - deadline = 0``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not dm.mean_theta > 0:
        raise ValueError(f"mean single-job delay must be > 0, got {dm.mean_theta}")
    if not deadline > 0:
        raise ValueError(f"deadline must be > 0, got {deadline}")
    q = erf_inv(1.0 - 2.0 * beta)
    lin = math.sqrt(2.0) * dm.std_theta * q
    disc = 2.0 * dm.var_theta * q * q + 4.0 * dm.mean_theta * deadline
    # (-lin + sqrt(disc)) / (2 mu_theta), rationalised against cancellation
    root = 2.0 * deadline / (lin + math.sqrt(disc))
    k = root * root
    if not k > 0:
        raise InfeasiblePlanError(f"k_max = {k} is not positive")
    return k


def c_bounds(K_T: float, kmin: float, kmax: float) -> tuple[float, float]:
    """``(c_min, c_max) = (K_T / k_max, K_T / k_min)``."""
    if not (kmin > 0 and kmax > 0):
        raise ValueError("k_min and k_max must be positive")
    return K_T / kmax, K_T / kmin


def price_for(econ: EconomicParams, kmax: float) -> float:
    """Price at which ``k_min`` equals ``kmax``."""
    return (econ.r_th + econ.e_f) / kmax + econ.e_j


def derive(params: SystemParams, beta: float | None = None) -> PlanResult:
    """All plan quantities, without the feasibility check of :func:`plan`."""
    beta = params.beta if beta is None else beta
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta must lie in (0, 0.5), got {beta}")
    dm = theta_moments(params.delay)
    kmax = k_max(dm, params.deadline, beta)
    if kmax < CLT_MIN_JOBS:
        warnings.warn(
            f"k_max = {kmax:.4g} < {CLT_MIN_JOBS}: normal approximation of the workload is rough",
            ApproximationWarning,
            stacklevel=2,
        )
    econ = EconomicParams(params.R_th, params.e_f, params.e_j)
    e_p_star = price_for(econ, kmax)
    charged = EconomicParams(
        params.R_th, params.e_f, params.e_j, e_p_star if params.e_p is None else params.e_p
    )
    kmin = k_min(charged)
    c_min, c_max = c_bounds(params.K_T, kmin, kmax)
    c_real = params.K_T / kmax
    return PlanResult(
        beta=beta,
        mu_theta=dm.mean_theta,
        var_theta=dm.var_theta,
        k_max=kmax,
        k_min=kmin,
        c_min=c_min,
        c_max=c_max,
        c_th_real=c_real,
        c_th=math.floor(c_real),
        c_th_ceil=math.ceil(c_real),
        e_p_star=e_p_star,
    )


def check_feasible(result: PlanResult, M: int) -> None:
    if not 1 <= result.c_th_ceil <= M:
        raise InfeasiblePlanError(
            f"cut-off ceil(K_T/k_max) = {result.c_th_ceil} (K_T/k_max = {result.c_th_real:.6g}) "
            f"is outside [1, M={M}]"
        )


def plan(params: SystemParams) -> PlanResult:
    """Derive the plan and reject cut-offs the server pool cannot meet."""
    result = derive(params)
    check_feasible(result, params.M)
    return result


@dataclass(frozen=True)
class SweepRow:
    result: PlanResult | None
    beta: float
    status: str = "ok"

    @property
    def feasible(self) -> bool:
        return self.status == "ok"


def beta_sweep(params: SystemParams, betas: Sequence[float]) -> list[SweepRow]:
    """One row per ``beta``; per-row failures are recorded in ``status``."""
    rows = []
    for beta in betas:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ApproximationWarning)
                result = derive(params, beta)
        except ValueError as exc:
            rows.append(SweepRow(None, beta, f"error: {exc}"))
            continue
        try:
            check_feasible(result, params.M)
        except InfeasiblePlanError as exc:
            rows.append(SweepRow(result, beta, f"infeasible: {exc}"))
            continue
        rows.append(SweepRow(result, beta))
    return rows
