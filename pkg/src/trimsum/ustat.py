"""Two-term projection of the centered trimmed sum.

sqrt(n)(T_n - mu(alpha, 1-beta)) is approximated by L_n + U_n + b_n: a
linear part built from the Winsorized observations, a degree-two part
driven by the tail indicator counts, and the deterministic centering
shift.  This module computes the three pieces for one sample, the exact
residual of the approximation together with its high-probability
envelope, the variance-ratio correction V_n for the Studentized
statistic, and closed forms for the second and third moments of
(L_n + U_n)/sigma_W.

The degree-two part is a sum over all pairs, but the kernel factorizes
over tail indicators, so it collapses to counts: with S = sum over i of
(indicator_i - level) and Q the same sum of squares, the pair sum equals
(S^2 - Q)/2.  Everything here is O(n) per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import conditions, dist, edgeworth, trim
from ._backend import kernel
from .errors import DomainError, EmptyBatchError, TrimsumError

__all__ = [
    "UStatDecomposition",
    "VnTerms",
    "RemainderSummary",
    "AnalyticMoments",
    "components",
    "vn_terms",
    "decomposition_remainder",
    "analytic_moments",
]

_CONSTANTS_DEFAULT = (1.0, 2.0)


@dataclass(frozen=True)
class UStatDecomposition:
    """One sample's split into linear, degree-two, and shift terms.

    remainder is the defining identity target - (l_n + u_n + b_n), kept
    exactly; delta_n is the envelope the residual is judged against,
    computed with the reported (A, B) convention; counts are the exact
    numbers of observations at or below the lower and upper trim
    quantiles.
    """

    l_n: float
    u_n: float
    b_n: float
    target: float
    remainder: float
    delta_n: float
    counts: tuple[int, int]
    constants: tuple[float, float]


@dataclass(frozen=True)
class VnTerms:
    """Leading correction to the plug-in variance ratio.

    v_n1 collects the quantile-estimation part (linear in the centered
    tail counts), v_n2 the centered second-moment average; the plug-in
    Winsorized variance over sigma_W^2 is predicted by 1 + v_n/sigma_W^2.
    """

    v_n1: float
    v_n2: float
    v_n: float
    predicted_ratio: float


@dataclass(frozen=True)
class RemainderSummary:
    """Batch view of the decomposition residual.

    abs_remainder and ratio hold the (50th, 95th, 99th) percentiles of
    |remainder| and |remainder|/delta_n; correlation is the empirical
    correlation between the target and its three-term approximation.
    """

    n: int
    reps: int
    flagged: int
    abs_remainder: tuple[float, float, float]
    ratio: tuple[float, float, float]
    correlation: float
    delta_n: float
    constants: tuple[float, float]


@dataclass(frozen=True)
class AnalyticMoments:
    """Closed-form moments of (L_n + U_n)/sigma_W.

    second = 1 + epsilon_n with 0 < epsilon_n <= q_alpha^2 + q_beta^2
    (epsilon_bound); third is the leading term (lambda1 + 3*lambda2)/
    sqrt(n); pair_second is the second moment of the normalized pair
    kernel n^{3/2} U_{(1,2)}.
    """

    second: float
    epsilon_n: float
    epsilon_bound: float
    third: float
    pair_second: float


@dataclass(frozen=True)
class _Context:
    """Per-(model, n, schedule) quantities shared across replications."""

    n: int
    k: int
    m: int
    alpha: float
    beta: float
    xi_lo: float
    xi_hi: float
    f_lo: float
    f_hi: float
    mu_w: float
    sigma2_w: float
    mu_trunc: float
    b_n: float
    delta_n: float | None
    constants: tuple[float, float] | None


def _check_constants(constants) -> tuple[float, float]:
    try:
        a, b = (float(constants[0]), float(constants[1]))
    except (TypeError, IndexError, ValueError):
        raise DomainError(f"constants must be a pair (A, B), got {constants!r}") from None
    if not (math.isfinite(a) and a > 0.0 and math.isfinite(b) and b > 0.0):
        raise DomainError(f"constants (A, B) must be finite and positive, got {(a, b)}")
    return a, b


def _make_context(model: dist.DistributionModel, n: int, schedule: trim.TrimSchedule,
                  constants) -> _Context:
    terms = edgeworth.expansion_terms(model, n, schedule)
    k, m, alpha, beta = terms.trim
    xi_lo = dist.model_eval(model, "quantile", alpha)
    xi_hi = dist.model_eval(model, "quantile", 1.0 - beta)
    f_lo = dist.model_eval(model, "pdf", xi_lo)
    f_hi = dist.model_eval(model, "pdf", xi_hi)
    w = dist.winsorized_moments(model, alpha, beta)
    delta_n = None
    pair = None
    if constants is not None:
        a_const, b_const = _check_constants(constants)
        pair = (a_const, b_const)
        psi_lo = conditions.psi_sup(model, n, schedule, "lower", "1/f", b_const)
        psi_hi = conditions.psi_sup(model, n, schedule, "upper", "1/f", b_const)
        root_n = math.sqrt(n)
        d_lo = alpha * (math.log(k) / root_n) * (
            (math.log(k) / k) ** 0.25 / f_lo + psi_lo)
        d_hi = beta * (math.log(m) / root_n) * (
            (math.log(m) / m) ** 0.25 / f_hi + psi_hi)
        delta_n = a_const * (d_lo + d_hi)
        if not (math.isfinite(delta_n) and delta_n > 0.0):
            # log k vanishes at k = 1, collapsing the envelope
            raise DomainError(
                f"residual envelope is {delta_n:g} at (k, m) = ({k}, {m}); "
                "need k, m >= 2 and finite window suprema"
            )
    return _Context(
        n=n, k=k, m=m, alpha=alpha, beta=beta,
        xi_lo=xi_lo, xi_hi=xi_hi, f_lo=f_lo, f_hi=f_hi,
        mu_w=w.winsor_mean, sigma2_w=w.winsor_var,
        mu_trunc=terms.mu_trunc, b_n=terms.b_n,
        delta_n=delta_n, constants=pair,
    )


def _pair_term(ctx: _Context, n_lo: int, n_hi: int) -> float:
    """Degree-two part from exact tail counts via the (S^2 - Q)/2 identity."""
    n = ctx.n
    s_lo = n_lo - n * ctx.alpha
    q_lo = n_lo * (1.0 - ctx.alpha) ** 2 + (n - n_lo) * ctx.alpha ** 2
    level = 1.0 - ctx.beta
    s_hi = n_hi - n * level
    q_hi = n_hi * ctx.beta ** 2 + (n - n_hi) * level ** 2
    return (-(s_lo * s_lo - q_lo) / (2.0 * ctx.f_lo)
            + (s_hi * s_hi - q_hi) / (2.0 * ctx.f_hi)) / (n * math.sqrt(n))


def _decompose(sample: trim.SortedSample, ctx: _Context) -> UStatDecomposition:
    s1, _, n_lo, n_hi = kernel.winsor_stats(
        sample.values, ctx.xi_lo, ctx.xi_hi, ctx.mu_w)
    root_n = math.sqrt(ctx.n)
    l_n = s1 / root_n
    u_n = _pair_term(ctx, n_lo, n_hi)
    t_n = trim.trimmed_sum(sample, ctx.k, ctx.m)
    target = root_n * (t_n - ctx.mu_trunc)
    return UStatDecomposition(
        l_n=l_n, u_n=u_n, b_n=ctx.b_n, target=target,
        remainder=target - l_n - u_n - ctx.b_n,
        delta_n=ctx.delta_n, counts=(n_lo, n_hi), constants=ctx.constants,
    )


def components(sample: trim.SortedSample, model: dist.DistributionModel,
               n: int, schedule: trim.TrimSchedule,
               constants=_CONSTANTS_DEFAULT) -> UStatDecomposition:
    """Split one sample's centered trimmed sum into its three terms.

    L_n = (1/sqrt(n)) sum of (W_i(n) - mu_W); U_n aggregates the pair
    kernel in O(n) through the tail counts; b_n, the target
    sqrt(n)(T_n - mu(alpha, 1-beta)), and the exact residual come along
    with the residual envelope delta_n computed under the (A, B)
    convention (defaults (1, 2); reported, never asserted).
    """
    if sample.n != n:
        raise DomainError(f"sample has n={sample.n} but n={n} was requested")
    ctx = _make_context(model, n, schedule, constants)
    return _decompose(sample, ctx)


def vn_terms(sample: trim.SortedSample, model: dist.DistributionModel,
             n: int, schedule: trim.TrimSchedule) -> VnTerms:
    """Predict the plug-in variance ratio from one sample's tail counts."""
    if sample.n != n:
        raise DomainError(f"sample has n={sample.n} but n={n} was requested")
    ctx = _make_context(model, n, schedule, None)
    _, s2, n_lo, n_hi = kernel.winsor_stats(
        sample.values, ctx.xi_lo, ctx.xi_hi, ctx.mu_w)
    v_n1 = (2.0 * (ctx.alpha / ctx.f_lo) * ((n_lo - ctx.alpha * n) / n)
            * (ctx.mu_w - ctx.xi_lo)
            + 2.0 * (ctx.beta / ctx.f_hi) * ((n_hi - (1.0 - ctx.beta) * n) / n)
            * (ctx.mu_w - ctx.xi_hi))
    v_n2 = s2 / n - ctx.sigma2_w
    v_n = v_n1 + v_n2
    return VnTerms(v_n1=v_n1, v_n2=v_n2, v_n=v_n,
                   predicted_ratio=1.0 + v_n / ctx.sigma2_w)


def decomposition_remainder(samples, model: dist.DistributionModel,
                            schedule: trim.TrimSchedule,
                            constants=_CONSTANTS_DEFAULT) -> RemainderSummary:
    """Summarize the decomposition residual over a batch of samples.

    All samples must share one n.  Replications whose per-sample
    computation fails are counted as flagged and excluded; an empty
    batch, or one with every replication flagged, is an error.
    """
    samples = list(samples)
    if not samples:
        raise EmptyBatchError("batch of size 0 has no remainder distribution")
    n = samples[0].n
    for s in samples:
        if s.n != n:
            raise DomainError(
                f"batch mixes sample sizes {n} and {s.n}; need a common n")
    ctx = _make_context(model, n, schedule, constants)
    targets: list[float] = []
    approx: list[float] = []
    flagged = 0
    for s in samples:
        try:
            d = _decompose(s, ctx)
        except TrimsumError:
            flagged += 1
            continue
        targets.append(d.target)
        approx.append(d.l_n + d.u_n + d.b_n)
    if not targets:
        raise EmptyBatchError(f"all {flagged} replications in the batch were flagged")
    t_arr = np.asarray(targets)
    a_arr = np.asarray(approx)
    abs_r = np.abs(t_arr - a_arr)
    q_abs = np.quantile(abs_r, [0.5, 0.95, 0.99])
    q_ratio = np.quantile(abs_r / ctx.delta_n, [0.5, 0.95, 0.99])
    if t_arr.size >= 2 and t_arr.std() > 0.0 and a_arr.std() > 0.0:
        correlation = float(np.corrcoef(t_arr, a_arr)[0, 1])
    else:
        correlation = float("nan")
    return RemainderSummary(
        n=n, reps=len(targets), flagged=flagged,
        abs_remainder=tuple(float(v) for v in q_abs),
        ratio=tuple(float(v) for v in q_ratio),
        correlation=correlation, delta_n=ctx.delta_n, constants=ctx.constants,
    )


def analytic_moments(model: dist.DistributionModel, n: int,
                     schedule: trim.TrimSchedule) -> AnalyticMoments:
    """Closed-form second and third moments of (L_n + U_n)/sigma_W.

    The pair kernel's second moment reduces to indicator variances and
    the covariance Cov(1{X <= xi_lo}, 1{X <= xi_hi}) = alpha*beta, giving
    epsilon_n = ((n-1)/(2 n^2)) E(n^{3/2} U_{(1,2)})^2 / sigma_W^2; the
    third moment's leading term is (lambda1 + 3*lambda2)/sqrt(n).
    """
    terms = edgeworth.expansion_terms(model, n, schedule)
    _, _, alpha, beta = terms.trim
    xi_lo = dist.model_eval(model, "quantile", alpha)
    xi_hi = dist.model_eval(model, "quantile", 1.0 - beta)
    f_lo = dist.model_eval(model, "pdf", xi_lo)
    f_hi = dist.model_eval(model, "pdf", xi_hi)
    pair_second = ((alpha * (1.0 - alpha) / f_lo) ** 2
                   + ((1.0 - beta) * beta / f_hi) ** 2
                   - 2.0 * (alpha * beta) ** 2 / (f_lo * f_hi))
    sigma2 = terms.sigma_w ** 2
    epsilon_n = (n - 1) / (2.0 * n * n) * pair_second / sigma2
    return AnalyticMoments(
        second=1.0 + epsilon_n,
        epsilon_n=epsilon_n,
        epsilon_bound=terms.q_alpha ** 2 + terms.q_beta ** 2,
        third=(terms.lambda1 + 3.0 * terms.lambda2) / math.sqrt(n),
        pair_second=pair_second,
    )
