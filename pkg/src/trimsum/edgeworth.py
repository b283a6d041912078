"""One-term Edgeworth-type expansions for trimmed sums.

Ingredients (lambda_1, lambda_2, b_n, q-sequences) from the population
Winsorized moments, the expansions G_n (normalized) and H_n (Studentized),
term-magnitude diagnostics, and numerical inversion for confidence limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, ndtri

from . import dist, trim
from .errors import ConditionError, DomainError, InversionError

__all__ = [
    "ExpansionTerms",
    "TermMagnitudes",
    "InversionResult",
    "normal_cdf",
    "normal_pdf",
    "expansion_terms",
    "gn_eval",
    "hn_eval",
    "term_magnitudes",
    "invert_expansion",
]


def normal_cdf(x):
    """Phi via the complementary error function (abs err ~ 1e-16)."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ExpansionTerms:
    """Population ingredients of the expansions at one (model, n, schedule).

    lambda1 = gamma_{3,W}/sigma_W^3 corrects for skewness of the Winsorized
    variable, lambda2 for the trimming covariance defect, b_n is the bias.
    """

    lambda1: float
    lambda2: float
    delta2w: float
    b_n: float
    sigma_w: float
    mu_trunc: float
    q_alpha: float
    q_beta: float
    n: int
    trim: tuple[int, int, float, float]


@dataclass(frozen=True)
class TermMagnitudes:
    """Rows (n, t1, t2, t3, dominant) plus fitted log-log decay vs k_n."""

    rows: list[tuple[int, float, float, float, str]]
    exponents: dict[str, float | None]


@dataclass(frozen=True)
class InversionResult:
    x: float
    used_fallback: bool


def expansion_terms(model: dist.DistributionModel, n: int,
                    schedule: trim.TrimSchedule) -> ExpansionTerms:
    """Compute lambda_1, lambda_2, b_n and the q-sequences.

    lambda2 = delta_{2,W}/sigma_W^3 with
    delta_{2,W} = -alpha^2 (mu_W - xi_alpha)^2 / f(xi_alpha)
                  + beta^2 (mu_W - xi_{1-beta})^2 / f(xi_{1-beta});
    b_n = (1/(2 sqrt n)) (-alpha(1-alpha)/f(xi_alpha)
                          + beta(1-beta)/f(xi_{1-beta})).
    """
    k, m, alpha, beta = trim.schedule_eval(schedule, n)
    w = dist.winsorized_moments(model, alpha, beta)
    xi_lo, xi_hi = w.quantile_pair
    f_lo = float(model.pdf(xi_lo))
    f_hi = float(model.pdf(xi_hi))
    if not (f_lo > 0.0 and f_hi > 0.0 and math.isfinite(f_lo) and math.isfinite(f_hi)):
        raise ConditionError(
            f"density must be positive and finite at the trimming quantiles, "
            f"got f({xi_lo:g})={f_lo:g}, f({xi_hi:g})={f_hi:g}"
        )
    sigma_w = math.sqrt(w.winsor_var)
    sig3 = sigma_w**3
    mu_w = w.winsor_mean
    lambda1 = w.winsor_third / sig3
    delta2w = (-(alpha**2) * (mu_w - xi_lo) ** 2 / f_lo
               + beta**2 * (mu_w - xi_hi) ** 2 / f_hi)
    lambda2 = delta2w / sig3
    root_n = math.sqrt(n)
    b_n = 0.5 / root_n * (-alpha * (1.0 - alpha) / f_lo + beta * (1.0 - beta) / f_hi)
    q_alpha = alpha / (root_n * sigma_w * f_lo)
    q_beta = beta / (root_n * sigma_w * f_hi)
    return ExpansionTerms(
        lambda1=lambda1,
        lambda2=lambda2,
        delta2w=delta2w,
        b_n=b_n,
        sigma_w=sigma_w,
        mu_trunc=w.trunc_mean,
        q_alpha=q_alpha,
        q_beta=q_beta,
        n=n,
        trim=(k, m, alpha, beta),
    )


def gn_eval(terms: ExpansionTerms, x):
    """G_n(x), the expansion for the normalized trimmed sum.

    Values are not clamped to [0, 1]; an Edgeworth expansion is not an
    exact df and excursions are information, not errors.
    """
    x = np.asarray(x, dtype=float)
    root_n = math.sqrt(terms.n)
    bracket = ((terms.lambda1 + 3.0 * terms.lambda2) * (x * x - 1.0)
               + 6.0 * root_n * terms.b_n / terms.sigma_w)
    out = normal_cdf(x) - normal_pdf(x) / (6.0 * root_n) * bracket
    return float(out) if out.ndim == 0 else out


def hn_eval(terms: ExpansionTerms, x):
    """H_n(x), the expansion for the Studentized trimmed sum."""
    x = np.asarray(x, dtype=float)
    root_n = math.sqrt(terms.n)
    bracket = ((2.0 * x * x + 1.0) * terms.lambda1
               + 3.0 * (x * x + 1.0) * terms.lambda2
               - 6.0 * root_n * terms.b_n / terms.sigma_w)
    out = normal_cdf(x) + normal_pdf(x) / (6.0 * root_n) * bracket
    return float(out) if out.ndim == 0 else out


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def term_magnitudes(model: dist.DistributionModel, schedule: trim.TrimSchedule,
                    n_grid) -> TermMagnitudes:
    """t1 = lambda1/sqrt(n), t2 = lambda2/sqrt(n), t3 = b_n/sigma_W per n.

    Fits each term's log-log decay against k_n over the grid; a term that
    vanishes identically gets exponent None.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 2 or any(a >= b for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError(f"need an increasing n grid of length >= 2, got {n_grid}")
    if model.tail_index is None and not all(map(math.isfinite, model.support)):
        raise DomainError(
            f"term magnitudes need a power-law tail index or bounded support; "
            f"{model.id} has neither"
        )
    rows = []
    ks = []
    # Below this a term is a numerical zero (symmetric cancellation residue),
    # not a magnitude worth ranking or regressing.
    floor = 1e-12
    for n in n_grid:
        t = expansion_terms(model, n, schedule)
        root_n = math.sqrt(n)
        t1 = t.lambda1 / root_n
        t2 = t.lambda2 / root_n
        t3 = t.b_n / t.sigma_w
        mags = {"t1": abs(t1), "t2": abs(t2), "t3": abs(t3)}
        dominant = max(mags, key=mags.get) if max(mags.values()) > floor else "none"
        rows.append((n, t1, t2, t3, dominant))
        ks.append(t.trim[0])
    ks = np.asarray(ks, dtype=float)
    exponents = {}
    for j, name in enumerate(("t1", "t2", "t3")):
        vals = np.abs([r[1 + j] for r in rows])
        exponents[name] = _loglog_slope(ks, vals) if np.all(vals > floor) else None
    return TermMagnitudes(rows=rows, exponents=exponents)


def invert_expansion(terms: ExpansionTerms, q: float) -> InversionResult:
    """Solve H_n(x) = q by bisection on [-10, 10].

    Large corrections can make H_n locally non-monotone; if that happens
    around the root the standard normal quantile is returned instead, with
    the fallback flagged.
    """
    if not (0.0 < q < 1.0):
        raise DomainError(f"need 0 < q < 1, got {q}")
    lo, hi = -10.0, 10.0
    g_lo = hn_eval(terms, lo) - q
    g_hi = hn_eval(terms, hi) - q
    if g_lo == 0.0:
        return InversionResult(x=lo, used_fallback=False)
    if g_hi == 0.0:
        return InversionResult(x=hi, used_fallback=False)
    if g_lo * g_hi > 0.0:
        raise InversionError(
            f"H_n - {q:g} has no sign change on [-10, 10] "
            f"(endpoints {g_lo:g}, {g_hi:g})"
        )
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        g_mid = hn_eval(terms, mid) - q
        if g_mid == 0.0:
            lo = hi = mid
        elif g_mid * g_lo < 0.0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    root = 0.5 * (lo + hi)
    probe = hn_eval(terms, np.linspace(max(root - 0.5, -10.0),
                                       min(root + 0.5, 10.0), 101))
    if np.any(np.diff(probe) < -1e-15):
        return InversionResult(x=float(ndtri(q)), used_fallback=True)
    return InversionResult(x=root, used_fallback=False)
