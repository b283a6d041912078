"""Trimming schedules and sample-side estimators.

The trimmed mean T_n = (1/n) sum_{i=k+1}^{n-m} X_{i:n}, Winsorized plug-in
moments, and the normalized/studentized statistics.  Population centering
quantities (mu(alpha, 1-beta), sigma_W) are injected from :mod:`.dist`,
never estimated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dist
from .errors import DegenerateScaleError, DomainError, ScheduleError, TrimError

__all__ = [
    "TrimSchedule",
    "SortedSample",
    "TrimmedStatistics",
    "sorted_sample",
    "schedule_eval",
    "trimmed_sum",
    "plugin_moments",
    "statistics",
]


@dataclass(frozen=True)
class TrimSchedule:
    """One of three rules producing (k_n, m_n) from n.

    rule "explicit": params (k, m); "power": params (c_k, s_k, c_m, s_m)
    giving k = ceil(c_k n^{s_k}) clamped to [1, floor(n/2)-1], same for m;
    "fractions": params (alpha, beta) giving k = ceil(alpha n), m = ceil(beta n).
    """

    rule: str
    params: tuple

    @classmethod
    def explicit(cls, k: int, m: int) -> "TrimSchedule":
        if k < 1 or m < 1:
            raise ScheduleError(f"need k, m >= 1, got k={k}, m={m}")
        return cls("explicit", (int(k), int(m)))

    @classmethod
    def power(cls, c_k: float = 1.0, s_k: float = 0.6,
              c_m: float = 1.0, s_m: float = 0.6) -> "TrimSchedule":
        if not (c_k > 0 and c_m > 0 and 0.0 < s_k < 1.0 and 0.0 < s_m < 1.0):
            raise ScheduleError(
                f"power rule needs c > 0 and 0 < s < 1, got "
                f"({c_k}, {s_k}, {c_m}, {s_m})"
            )
        return cls("power", (float(c_k), float(s_k), float(c_m), float(s_m)))

    @classmethod
    def fractions(cls, alpha: float, beta: float) -> "TrimSchedule":
        if not (0.0 < alpha and 0.0 < beta and alpha + beta < 1.0):
            raise ScheduleError(
                f"fractions need alpha, beta > 0 and alpha + beta < 1, got "
                f"({alpha}, {beta})"
            )
        return cls("fractions", (float(alpha), float(beta)))


@dataclass(frozen=True)
class SortedSample:
    """Nondecreasing observations; build with :func:`sorted_sample`."""

    values: np.ndarray
    n: int

    def __post_init__(self):
        if self.n < 1 or self.values.shape != (self.n,):
            raise DomainError(f"need n >= 1 values, got shape {self.values.shape}")
        if np.any(np.isnan(self.values)):
            raise DomainError("sample contains NaN")
        if np.any(np.diff(self.values) < 0.0):
            raise DomainError("sample values must be nondecreasing")


@dataclass(frozen=True)
class TrimmedStatistics:
    t_n: float
    plug_mean: float
    plug_var: float
    normalized: float
    studentized: float


def sorted_sample(values) -> SortedSample:
    """Sort raw observations once (stable; ties need no tie-break)."""
    arr = np.sort(np.asarray(values, dtype=float), kind="stable")
    return SortedSample(values=arr, n=arr.shape[0])


def schedule_eval(schedule: TrimSchedule, n: int) -> tuple[int, int, float, float]:
    """Evaluate a schedule at sample size n, returning (k, m, alpha, beta)."""
    if n < 4:
        raise ScheduleError(f"schedules need n >= 4, got n={n}")
    if schedule.rule == "explicit":
        k, m = schedule.params
    elif schedule.rule == "power":
        c_k, s_k, c_m, s_m = schedule.params
        cap = n // 2 - 1
        k = min(max(math.ceil(c_k * n**s_k), 1), cap)
        m = min(max(math.ceil(c_m * n**s_m), 1), cap)
    elif schedule.rule == "fractions":
        alpha, beta = schedule.params
        k = max(math.ceil(alpha * n), 1)
        m = max(math.ceil(beta * n), 1)
    else:
        raise ScheduleError(f"unknown schedule rule {schedule.rule!r}")
    if not (1 <= k < n - m <= n - 1):
        raise ScheduleError(
            f"infeasible trimming at n={n}: k={k}, m={m} (need 1 <= k < n-m)"
        )
    return k, m, k / n, m / n


def _check_window(n: int, k: int, m: int, lo: int):
    if not (lo <= k < n - m <= n):
        raise TrimError(f"need {lo} <= k < n-m <= n, got n={n}, k={k}, m={m}")


def trimmed_sum(sample: SortedSample, k: int, m: int) -> float:
    """T_n = (1/n) sum_{i=k+1}^{n-m} X_{i:n}."""
    _check_window(sample.n, k, m, lo=0)
    return math.fsum(sample.values[k:sample.n - m]) / sample.n


def plugin_moments(sample: SortedSample, k: int, m: int) -> tuple[float, float]:
    """Plug-in Winsorized mean and variance (mu_hat_W, sigma2_hat_W).

    The k lowest observations are replaced by X_{k:n} and the m highest by
    X_{n-m:n}; the variance is computed in centered form, algebraically
    equal to the raw-moment expression but nonnegative in floating point.
    """
    n = sample.n
    if not (1 <= k < n - m <= n - 1):
        raise TrimError(f"need 1 <= k < n-m <= n-1, got n={n}, k={k}, m={m}")
    x = sample.values
    lo = float(x[k - 1])
    hi = float(x[n - m - 1])
    if lo == hi:
        raise DegenerateScaleError(f"degenerate window: X_(k) = X_(n-m) = {lo:g}")
    mid = x[k:n - m]
    mu = (k * lo + math.fsum(mid) + m * hi) / n
    var = (k * (lo - mu) ** 2 + math.fsum((mid - mu) ** 2) + m * (hi - mu) ** 2) / n
    return mu, var


def statistics(sample: SortedSample, schedule: TrimSchedule,
               model: dist.DistributionModel) -> TrimmedStatistics:
    """Normalized and Studentized trimmed sums for one sample.

    normalized = sqrt(n) (T_n - mu(alpha, 1-beta)) / sigma_W with the
    population scale; studentized replaces sigma_W by the plug-in.
    """
    n = sample.n
    k, m, alpha, beta = schedule_eval(schedule, n)
    t_n = trimmed_sum(sample, k, m)
    plug_mean, plug_var = plugin_moments(sample, k, m)
    w = dist.winsorized_moments(model, alpha, beta)
    sigma_w = math.sqrt(w.winsor_var)
    root_n = math.sqrt(n)
    normalized = root_n * (t_n - w.trunc_mean) / sigma_w
    if plug_var <= 0.0:
        raise DegenerateScaleError(
            f"plug-in variance {plug_var:g} is not positive; replication flagged"
        )
    studentized = root_n * (t_n - w.trunc_mean) / math.sqrt(plug_var)
    return TrimmedStatistics(
        t_n=t_n,
        plug_mean=plug_mean,
        plug_var=plug_var,
        normalized=normalized,
        studentized=studentized,
    )
