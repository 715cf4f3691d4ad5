"""Numeric kernels for the offloading-delay model.

A single offloaded job takes ``theta = t_c + t_0`` time units, where the
processing time ``t_c`` is a normal(mu, sigma^2) truncated to (0, t_upper)
and the round-trip transmission delay is ``t_0 = 2 (a h + b)`` with the
channel gain ``h ~ Exponential(nu)``.  The total workload of a server
holding ``k`` jobs is approximated as normal with mean ``k * mean_theta``
and variance ``k * var_theta``.

Truncated-normal quantities are evaluated in a tail-stable form (scaled
complementary error function and log-space CDFs) because the reference
parameterisation puts the truncation window almost five standard
deviations below the mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtri, ndtri_exp

__all__ = [
    "DegenerateTruncationError",
    "DelayParams",
    "DelayMoments",
    "std_normal_pdf",
    "std_normal_cdf",
    "erf_inv",
    "trunc_normal_moments",
    "theta_moments",
    "tau_tail_prob",
    "sample_theta",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DegenerateTruncationError(ValueError):
    """The truncation window carries no representable probability mass."""


@dataclass(frozen=True)
class DelayParams:
    """Parameters of the single-job delay ``theta = t_c + 2 (a h + b)``.

    ``mu``/``sigma`` describe the untruncated processing time, which is
    truncated to ``(0, t_upper)``; ``nu`` is the rate of the exponential
    channel gain; ``a`` (slope, negative in the reference model) and ``b``
    (offset) map the gain to a one-way transmission delay.
    """

    mu: float
    sigma: float
    t_upper: float
    nu: float
    a: float
    b: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not self.t_upper > 0:
            raise ValueError(f"t_upper must be > 0, got {self.t_upper}")


@dataclass(frozen=True)
class DelayMoments:
    mean_theta: float
    var_theta: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean_theta):
            raise ValueError("mean_theta must be finite")
        if not self.var_theta > 0:
            raise ValueError(f"var_theta must be > 0, got {self.var_theta}")

    @property
    def std_theta(self) -> float:
        return math.sqrt(self.var_theta)


def std_normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, ``(1 + erf(x / sqrt 2)) / 2``.

    Evaluated through ``erfc`` so the lower tail keeps full relative
    precision.
    """
    return 0.5 * math.erfc(-x / _SQRT2)


# Giles' single-precision erfinv polynomial, used as the starting point for
# Halley refinement against math.erf / math.erfc.
_CENTRAL = (
    2.81022636e-08, 3.43273939e-07, -3.5233877e-06, -4.39150654e-06,
    0.00021858087, -0.00125372503, -0.00417768164, 0.246640727, 1.50140941,
)
_TAIL = (
    -0.000200214257, 0.000100950558, 0.00134934322, -0.00367342844,
    0.00573950773, -0.0076224613, 0.00943887047, 1.00167406, 2.83297682,
)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _horner(coeffs: tuple[float, ...], w: float) -> float:
    p = 0.0
    for c in coeffs:
        p = p * w + c
    return p


def erf_inv(y: float) -> float:
    """Inverse error function on (-1, 1).

    Raises
    ------
    ValueError
        If ``|y| >= 1`` or ``y`` is NaN.
    """
    if not -1.0 < y < 1.0:
        raise ValueError(f"erf_inv is defined on (-1, 1), got {y}")
    if y == 0.0:
        return 0.0
    sign = 1.0 if y > 0 else -1.0
    ay = abs(y)
    w = -math.log((1.0 - ay) * (1.0 + ay))
    if w < 5.0:
        x = _horner(_CENTRAL, w - 2.5) * ay
    else:
        x = _horner(_TAIL, math.sqrt(w) - 3.0) * ay
    # the polynomial is rough for w > 16, so iterate to convergence
    for _ in range(12):
        # residual erf(x) - y; near 1 use the exact complement 1 - y
        if ay <= 0.5:
            f = math.erf(x) - ay
        else:
            f = (1.0 - ay) - math.erfc(x)
        fp = _TWO_OVER_SQRT_PI * math.exp(-x * x)
        if f == 0.0 or fp == 0.0:
            break
        step = f / (fp + x * f)
        x -= step
        if abs(step) <= 1e-16 * abs(x):
            break
    return sign * x


def _right_tail_ratios(alpha: float, beta: float) -> tuple[float, float]:
    """``(phi(a)-phi(b))/Z`` and ``(a phi(a) - b phi(b))/Z`` for ``0 <= a < b``.

    Written via the inverse Mills ratio ``phi(x)/Q(x) = sqrt(2/pi)/erfcx(x/sqrt 2)``
    and ``r = Q(b)/Q(a)`` so nothing underflows far in the tail.
    """
    lam_a = _SQRT_2_OVER_PI / float(erfcx(alpha / _SQRT2))
    if math.isinf(beta):
        return lam_a, alpha * lam_a
    ex_b = float(erfcx(beta / _SQRT2))
    lam_b = _SQRT_2_OVER_PI / ex_b
    log_r = (
        math.log(ex_b)
        - math.log(float(erfcx(alpha / _SQRT2)))
        - 0.5 * (beta - alpha) * (beta + alpha)
    )
    r = math.exp(log_r)
    one_minus_r = -math.expm1(log_r)
    if one_minus_r <= 0.0:
        raise DegenerateTruncationError(
            f"truncation window ({alpha}, {beta}) (standardised) has zero mass"
        )
    ratio_b = (lam_a - lam_b * r) / one_minus_r
    ratio_a = (alpha * lam_a - beta * lam_b * r) / one_minus_r
    return ratio_b, ratio_a


def _standard_ratios(alpha: float, beta: float) -> tuple[float, float]:
    if alpha >= 0.0:
        return _right_tail_ratios(alpha, beta)
    if beta <= 0.0:
        # mirror into the right tail: the first ratio is odd, the second even
        rb, ra = _right_tail_ratios(-beta, -alpha)
        return -rb, ra
    z = 0.5 * (math.erf(beta / _SQRT2) - math.erf(alpha / _SQRT2))
    if z <= 0.0:
        raise DegenerateTruncationError(
            f"truncation window ({alpha}, {beta}) (standardised) has zero mass"
        )
    pa = std_normal_pdf(alpha) if math.isfinite(alpha) else 0.0
    pb = std_normal_pdf(beta) if math.isfinite(beta) else 0.0
    apa = alpha * pa if pa else 0.0
    bpb = beta * pb if pb else 0.0
    return (pa - pb) / z, (apa - bpb) / z


def trunc_normal_moments(
    mu: float, sigma: float, lo: float, hi: float
) -> tuple[float, float]:
    """Mean and variance of normal(mu, sigma^2) truncated to (lo, hi).

    Infinite bounds are accepted.

    Raises
    ------
    ValueError
        If ``sigma <= 0`` or ``lo >= hi``.
    DegenerateTruncationError
        If the window has no representable mass or the variance is lost to
        cancellation.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    alpha = (lo - mu) / sigma
    beta = (hi - mu) / sigma
    b_ratio, a_ratio = _standard_ratios(alpha, beta)
    mean = mu + sigma * b_ratio
    var = sigma * sigma * (1.0 + a_ratio - b_ratio * b_ratio)
    if not var > 0.0:
        raise DegenerateTruncationError(
            f"variance of normal({mu}, {sigma}^2) on ({lo}, {hi}) is not representable"
        )
    return mean, var


def theta_moments(p: DelayParams) -> DelayMoments:
    """Mean and variance of the single-job offloading delay."""
    t_mean, t_var = trunc_normal_moments(p.mu, p.sigma, 0.0, p.t_upper)
    return DelayMoments(
        mean_theta=t_mean + 2.0 * (p.a + p.b * p.nu) / p.nu,
        var_theta=t_var + 4.0 * p.a * p.a / (p.nu * p.nu),
    )


def tau_tail_prob(k: float, dm: DelayMoments, deadline: float) -> float:
    """Normal approximation of ``Pr[tau > deadline]`` for ``k`` queued jobs."""
    if not k > 0:
        raise ValueError(f"k must be > 0, got {k}")
    z = (deadline - k * dm.mean_theta) / (math.sqrt(k) * dm.std_theta)
    return 0.5 * math.erfc(z / _SQRT2)


def _std_trunc_ppf_right(alpha: float, beta: float, u: np.ndarray) -> np.ndarray:
    # Q(x) = Q(alpha) * (1 - u (1 - r)), solved in log space; 0 <= alpha < beta
    log_qa = float(log_ndtr(-alpha))
    log_qb = float(log_ndtr(-beta)) if math.isfinite(beta) else -math.inf
    one_minus_r = -math.expm1(log_qb - log_qa)
    log_s = log_qa + np.log1p(-u * one_minus_r)
    return -ndtri_exp(log_s)


def _std_trunc_ppf(alpha: float, beta: float, u: np.ndarray) -> np.ndarray:
    if alpha >= 0.0:
        x = _std_trunc_ppf_right(alpha, beta, u)
    elif beta <= 0.0:
        x = -_std_trunc_ppf_right(-beta, -alpha, u)
    else:
        pa = 0.5 * math.erfc(-alpha / _SQRT2)
        pb = 0.5 * math.erfc(-beta / _SQRT2)
        x = ndtri(pa + u * (pb - pa))
    return np.clip(x, alpha, beta)


def sample_theta(
    p: DelayParams,
    rng: np.random.Generator,
    size: int | None = None,
    *,
    clamp_t0_nonneg: bool = False,
) -> float | np.ndarray:
    """Draw single-job delays ``t_c + 2 (a h + b)``.

    ``t_c`` is drawn by inverse CDF on the truncation window (rejection
    sampling would almost never accept under the reference parameters).
    With ``clamp_t0_nonneg`` the transmission delay is floored at zero;
    this departs from the analytic moments and is meant for exploration
    only.
    """
    n = 1 if size is None else int(size)
    u = rng.random(n)
    h = rng.exponential(1.0 / p.nu, n)
    alpha = -p.mu / p.sigma
    beta = (p.t_upper - p.mu) / p.sigma
    t_c = p.mu + p.sigma * _std_trunc_ppf(alpha, beta, u)
    t_0 = 2.0 * (p.a * h + p.b)
    if clamp_t0_nonneg:
        t_0 = np.maximum(t_0, 0.0)
    theta = t_c + t_0
    return float(theta[0]) if size is None else theta
