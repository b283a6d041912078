"""Linearization residuals of sample quantiles, and the conditional tail law.

A transformed order statistic G(X_{k:n}) deviates from G(xi_alpha) by
-(F_n(xi_alpha) - alpha) (g/f)(xi_alpha) up to a residual whose scale is
n^{-3/4} times log factors; the empirical integral of G - G(xi_alpha)
between X_{k:n} and xi_alpha admits the squared analogue at scale close
to 1/n.  Both residuals are computed exactly here, together with their
envelopes.  The module also draws the lower order statistics of a
uniform sample conditioned on the number of points below alpha, which
is simply the order statistics of that many uniforms on (0, alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import conditions, dist, trim
from .errors import ConditionError, ConfigError, DomainError, NumericalError
from .ustat import _check_constants

__all__ = [
    "GFunction",
    "BkRemainder",
    "bk_point",
    "bk_integral",
    "conditional_orderstat_sample",
]

_LOG_SCALES = ("k", "n")
_COND_STREAM_TAG = 1


@dataclass(frozen=True)
class GFunction:
    """Monotone differentiable transform with its derivative supplied.

    The envelope needs g = G' exactly at and around the quantile; a
    numeric derivative would contaminate the residual being measured,
    so custom transforms must bring their own.  Both callables must
    accept numpy arrays.
    """

    tag: str
    func: Callable
    deriv: Callable


_BUILTINS = {
    "identity": GFunction("identity", lambda x: x, lambda x: np.ones_like(np.asarray(x, dtype=float))),
    "square": GFunction("square", lambda x: np.asarray(x, dtype=float) ** 2,
                        lambda x: 2.0 * np.asarray(x, dtype=float)),
}


@dataclass(frozen=True)
class BkRemainder:
    """Residual of one linearization, with its reported envelope.

    remainder = observed - leading exactly; bound carries the (A, B)
    convention and the chosen log scale; g_kind names the transform.
    """

    remainder: float
    bound: float
    leading: float
    g_kind: str
    observed: float
    constants: tuple[float, float]


def _resolve_g(g_kind) -> GFunction:
    if isinstance(g_kind, GFunction):
        return g_kind
    try:
        return _BUILTINS[g_kind]
    except (KeyError, TypeError):
        raise ConfigError(
            f"g_kind must be 'identity', 'square', or a GFunction, got {g_kind!r}"
        ) from None


@dataclass(frozen=True)
class _Frame:
    n: int
    k: int
    alpha: float
    xi: float
    f_xi: float
    g_xi: float
    count: int
    f_n: float
    log_factor: float
    psi: float
    constants: tuple[float, float]


def _frame(sample: trim.SortedSample, model: dist.DistributionModel,
           schedule: trim.TrimSchedule, g: GFunction,
           constants, log_scale: str) -> _Frame:
    if log_scale not in _LOG_SCALES:
        raise ConfigError(f"log_scale must be one of {_LOG_SCALES}, got {log_scale!r}")
    a_const, b_const = _check_constants(constants)
    n = sample.n
    k, _, alpha, _ = trim.schedule_eval(schedule, n)
    xi = dist.model_eval(model, "quantile", alpha)
    f_xi = dist.model_eval(model, "pdf", xi)
    if not (math.isfinite(f_xi) and f_xi > 0.0):
        raise ConditionError(
            f"density {f_xi:g} at the lower trim quantile leaves g/f undefined")
    g_xi = float(np.asarray(g.deriv(xi), dtype=float))
    if not math.isfinite(g_xi):
        raise DomainError(f"derivative of {g.tag!r} is {g_xi} at the quantile")
    count = int(np.searchsorted(sample.values, xi, side="right"))
    log_factor = math.log(k) if log_scale == "k" else math.log(n)
    spread = math.sqrt(alpha * log_factor / n)

    def ratio(u):
        x = np.asarray(model.quantile(np.asarray(u, dtype=float)), dtype=float)
        dens = np.asarray(model.pdf(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(dens > 0.0, np.asarray(g.deriv(x), dtype=float) / dens,
                            np.inf)

    psi = conditions._windowed_sup(ratio, alpha, spread, b_const,
                                   f"n={n}, side=lower")
    if not math.isfinite(psi):
        raise NumericalError(
            "windowed sup of g/f is not finite; density vanishes inside the window")
    return _Frame(n=n, k=k, alpha=alpha, xi=xi, f_xi=f_xi, g_xi=g_xi,
                  count=count, f_n=count / n, log_factor=log_factor, psi=psi,
                  constants=(a_const, b_const))


def _check_bound(bound: float, fr: _Frame) -> float:
    if not (math.isfinite(bound) and bound > 0.0):
        # log k vanishes at k = 1, collapsing the envelope
        raise DomainError(
            f"residual envelope is {bound:g} at k={fr.k}; need k >= 2")
    return bound


def bk_point(sample: trim.SortedSample, model: dist.DistributionModel,
             schedule: trim.TrimSchedule, g_kind="identity",
             constants=(1.0, 2.0), log_scale: str = "k") -> BkRemainder:
    """Residual of the one-term expansion of G(X_{k:n}) around G(xi_alpha).

    observed = G(X_{k:n}) - G(xi_alpha); leading =
    -(F_n(xi_alpha) - alpha) (g/f)(xi_alpha); the envelope is
    A alpha [(|g|/f)(xi) (L/k)^{3/4} + Psi(B) (L/k)^{1/2}] with
    L = ln k, or ln n under log_scale="n" (which also widens the
    window Psi is taken over).
    """
    g = _resolve_g(g_kind)
    fr = _frame(sample, model, schedule, g, constants, log_scale)
    x_k = float(sample.values[fr.k - 1])
    observed = float(np.asarray(g.func(x_k), dtype=float)
                     - np.asarray(g.func(fr.xi), dtype=float))
    leading = -(fr.f_n - fr.alpha) * (fr.g_xi / fr.f_xi)
    a_const, _ = fr.constants
    ratio = fr.log_factor / fr.k
    bound = a_const * fr.alpha * (
        abs(fr.g_xi) / fr.f_xi * ratio ** 0.75 + fr.psi * ratio ** 0.5)
    return BkRemainder(
        remainder=observed - leading, bound=_check_bound(bound, fr),
        leading=leading, g_kind=g.tag, observed=observed, constants=fr.constants,
    )


def bk_integral(sample: trim.SortedSample, model: dist.DistributionModel,
                schedule: trim.TrimSchedule, g_kind="identity",
                constants=(1.0, 2.0), log_scale: str = "k") -> BkRemainder:
    """Residual of the quadratic expansion of the empirical integral.

    observed = integral of G - G(xi_alpha) over the empirical measure
    between X_{k:n} and xi_alpha, evaluated exactly as the signed sum
    (sgn(N-k)/n) sum_{i=min+1}^{max} (G(X_{i:n}) - G(xi_alpha)) over
    order-statistic indices; leading =
    -(1/2)(F_n(xi_alpha) - alpha)^2 (g/f)(xi_alpha); the envelope is
    A (alpha L/n) [(|g|/f)(xi) (L/k)^{1/4} + Psi(B)].
    """
    g = _resolve_g(g_kind)
    fr = _frame(sample, model, schedule, g, constants, log_scale)
    lo, hi = min(fr.k, fr.count), max(fr.k, fr.count)
    sign = 0.0 if fr.count == fr.k else math.copysign(1.0, fr.count - fr.k)
    between = np.asarray(g.func(sample.values[lo:hi]), dtype=float)
    g_at_xi = float(np.asarray(g.func(fr.xi), dtype=float))
    observed = sign / fr.n * math.fsum(between - g_at_xi)
    leading = -0.5 * (fr.f_n - fr.alpha) ** 2 * (fr.g_xi / fr.f_xi)
    a_const, _ = fr.constants
    bound = a_const * (fr.alpha * fr.log_factor / fr.n) * (
        abs(fr.g_xi) / fr.f_xi * (fr.log_factor / fr.k) ** 0.25 + fr.psi)
    return BkRemainder(
        remainder=observed - leading, bound=_check_bound(bound, fr),
        leading=leading, g_kind=g.tag, observed=observed, constants=fr.constants,
    )


def conditional_orderstat_sample(alpha: float, n: int, conditioned_count: int,
                                 how_many: int, seed: int) -> np.ndarray:
    """Order statistics below alpha, given that exactly that many fall there.

    Conditionally on #{U_i <= alpha} = k, the k lowest order statistics
    of a uniform(0,1) n-sample are distributed as the order statistics
    of k independent uniforms on (0, alpha); rows of the returned
    (how_many, k) array are independent such vectors, sorted.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise DomainError(f"sample size must be >= 1, got {n}")
    if not (0 <= conditioned_count <= n):
        raise DomainError(
            f"conditioned count must lie in [0, {n}], got {conditioned_count}")
    if how_many < 1:
        raise DomainError(f"need at least one draw, got {how_many}")
    rng = dist._philox(seed, _COND_STREAM_TAG)
    u = alpha * rng.random((how_many, conditioned_count))
    u.sort(axis=1)
    return u
