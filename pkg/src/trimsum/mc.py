"""Monte Carlo engine for the trimmed-sum limit theory.

Generates replications of the normalized or Studentized trimmed statistic,
collects them into empirical distribution functions, measures sup-distances
against the normal and corrected targets, and fits convergence-rate
exponents by least squares on log-log points.

Replication r at grid point g is drawn from the counter-based stream keyed
by (seed, g, r), so results are independent of worker count and chunking:
the two indices are packed into the second 64-bit key word as
(g << 32) | r.  Degenerate replications (the plug-in scale collapses) are
dropped and counted, never imputed; more than 1% of them aborts the run.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.special import ndtri

from . import dist, edgeworth, trim
from ._backend import kernel
from .errors import ConfigError, DomainError, NumericalError, SimulationError

_STATISTICS = ("normalized", "studentized")
_TARGETS = ("normal", "gn", "hn")
# Replications per work unit.  Fixed, so the task list does not depend on
# the worker count.
_CHUNK = 2048


@dataclass(frozen=True)
class SimulationPlan:
    """Full description of one reproducible simulation run."""

    model_id: str
    model_params: dict
    schedule: trim.TrimSchedule
    n_grid: tuple[int, ...]
    replications: int
    statistic: str
    targets: tuple[str, ...]
    seed: int


@dataclass(frozen=True)
class EmpiricalCdf:
    """Sorted replication values; evaluation is a right-continuous step."""

    values: np.ndarray
    count: int


@dataclass(frozen=True)
class GridResult:
    """Outcome at one sample size: ECDF, sup-distances, dropped count."""

    n: int
    ecdf: EmpiricalCdf
    distances: dict
    flagged: int


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (ln scale, ln distance) points."""

    slope: float
    intercept: float
    r_squared: float
    stderr: float


def make_plan(model_id: str, model_params: dict, schedule: trim.TrimSchedule,
              n_grid, replications: int, statistic: str, targets,
              seed: int) -> SimulationPlan:
    """Validate and freeze a simulation plan.

    Raises ConfigError for structural problems (unknown statistic or
    target, too few replications, a grid that is not strictly increasing,
    a seed outside 64 bits).  The model is constructed once here so that
    misspelled families or bad parameters fail before any sampling.
    """
    dist.make_model(model_id, **model_params)
    grid = tuple(int(n) for n in n_grid)
    if not grid:
        raise ConfigError("n_grid must contain at least one sample size")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"n_grid must be strictly increasing, got {grid}")
    replications = int(replications)
    if replications < 100:
        raise ConfigError(
            f"need at least 100 replications for a usable ECDF, got {replications}"
        )
    if statistic not in _STATISTICS:
        raise ConfigError(
            f"statistic must be one of {_STATISTICS}, got {statistic!r}"
        )
    chosen = tuple(dict.fromkeys(targets))
    if not chosen or any(t not in _TARGETS for t in chosen):
        raise ConfigError(
            f"targets must be a nonempty subset of {_TARGETS}, got {tuple(targets)}"
        )
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must fit in 64 bits, got {seed}")
    for n in grid:
        trim.schedule_eval(schedule, n)
    return SimulationPlan(
        model_id=model_id,
        model_params=dict(model_params),
        schedule=schedule,
        n_grid=grid,
        replications=replications,
        statistic=statistic,
        targets=chosen,
        seed=seed,
    )


def empirical_cdf(values) -> EmpiricalCdf:
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("need a non-empty one-dimensional value array")
    if not np.all(np.isfinite(arr)):
        raise DomainError("ECDF values must be finite")
    return EmpiricalCdf(values=arr, count=int(arr.size))


def ecdf_eval(ecdf: EmpiricalCdf, x):
    """Right-continuous evaluation F_hat(x), vectorized in x."""
    pos = np.searchsorted(ecdf.values, np.asarray(x, dtype=float), side="right")
    out = pos / ecdf.count
    return float(out) if np.ndim(x) == 0 else out


def ks_distance(ecdf: EmpiricalCdf, target) -> float:
    """sup_x |F_hat(x) - target(x)| for a continuous target df.

    The sup of a step function against a monotone continuous df is
    attained at a jump point, approached from one side or the other, so
    the exact value is the max over jumps of the two one-sided gaps.
    """
    t = np.asarray(target(ecdf.values), dtype=float)
    if not np.all(np.isfinite(t)):
        raise NumericalError("target df returned non-finite values")
    steps = np.arange(1, ecdf.count + 1) / ecdf.count
    upper = np.abs(steps - t)
    lower = np.abs(steps - 1.0 / ecdf.count - t)
    return float(np.maximum(upper, lower).max())


def fit_rate(points) -> RateFit:
    """OLS of ln(distance) on ln(scale) over (scale, distance) pairs."""
    pts = [(float(k), float(d)) for k, d in points]
    if len(pts) < 3:
        raise DomainError(f"need at least 3 points to fit a rate, got {len(pts)}")
    if any(k <= 0.0 or d <= 0.0 for k, d in pts):
        raise DomainError("rate fitting needs strictly positive scales and distances")
    lx = np.log([k for k, _ in pts])
    ly = np.log([d for _, d in pts])
    dx = lx - lx.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DomainError("scales must not all coincide")
    slope = float(dx @ (ly - ly.mean())) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    # Constant distances: the flat line is an exact fit.
    r_squared = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    stderr = math.sqrt(ss_res / ((len(pts) - 2) * sxx))
    return RateFit(slope=slope, intercept=intercept, r_squared=r_squared,
                   stderr=stderr)


def calibration_values(count: int, seed: int) -> np.ndarray:
    """Exact standard-normal draws from the counter-based stream.

    Quantile transform of the (seed, 0, 0) stream; used to check the
    engine's distance machinery against the known Kolmogorov scale
    E[D_n] ~ 0.87/sqrt(n) without any trimming in the loop.
    """
    if count < 1:
        raise DomainError(f"need at least one draw, got {count}")
    u = dist._philox(seed).random(int(count))
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    return np.asarray(ndtri(u), dtype=float)


def _worker_count(requested) -> int:
    """Effective worker count; TRIMSUM_THREADS acts as a cap (0 = auto)."""
    raw = os.environ.get("TRIMSUM_THREADS", "").strip()
    cap = None
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"TRIMSUM_THREADS must be an integer, got {raw!r}")
        if cap < 0:
            raise ConfigError(f"TRIMSUM_THREADS must be >= 0, got {cap}")
        if cap == 0:
            cap = os.cpu_count() or 1
    if requested is None:
        return cap if cap is not None else 1
    requested = int(requested)
    if requested < 1:
        raise DomainError(f"worker count must be >= 1, got {requested}")
    return min(requested, cap) if cap is not None else requested


def _replicate_chunk(task) -> tuple[int, np.ndarray]:
    """Compute statistic values for replications [lo, hi) at one grid point.

    Runs in worker processes; the model is rebuilt from its id so nothing
    unpicklable crosses the process boundary.  Flagged replications come
    back as NaN and are separated from the values during assembly.
    """
    (model_id, model_params, n, k, m, statistic, mu_trunc, sigma_w,
     seed, g, lo, hi) = task
    model = dist.make_model(model_id, **model_params)
    root_n = math.sqrt(n)
    out = np.empty(hi - lo)
    for r in range(lo, hi):
        u = dist._philox(seed, (g << 32) | r).random(n)
        u[u == 0.0] = np.nextafter(0.0, 1.0)
        x = np.asarray(model.quantile(u), dtype=float)
        part = np.partition(x, (k - 1, n - m - 1))
        lo_hat = float(part[k - 1])
        hi_hat = float(part[n - m - 1])
        if lo_hat == hi_hat:
            out[r - lo] = np.nan
            continue
        s1, _, _, _ = kernel.winsor_stats(x, lo_hat, hi_hat, 0.0)
        t_n = (s1 - k * lo_hat - m * hi_hat) / n
        if statistic == "normalized":
            value = root_n * (t_n - mu_trunc) / sigma_w
        else:
            plug_mean = s1 / n
            _, s2, _, _ = kernel.winsor_stats(x, lo_hat, hi_hat, plug_mean)
            plug_var = s2 / n
            if plug_var <= 0.0:
                out[r - lo] = np.nan
                continue
            value = root_n * (t_n - mu_trunc) / math.sqrt(plug_var)
        out[r - lo] = value if math.isfinite(value) else np.nan
    return lo, out


def _grid_point_values(plan: SimulationPlan, g: int, n: int, mu_trunc: float,
                       sigma_w: float, workers: int) -> tuple[np.ndarray, int]:
    k, m, _, _ = trim.schedule_eval(plan.schedule, n)
    reps = plan.replications
    tasks = [
        (plan.model_id, plan.model_params, n, k, m, plan.statistic,
         mu_trunc, sigma_w, plan.seed, g, lo, min(lo + _CHUNK, reps))
        for lo in range(0, reps, _CHUNK)
    ]
    full = np.empty(reps)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for lo, chunk in pool.map(_replicate_chunk, tasks):
                full[lo:lo + chunk.size] = chunk
    else:
        for task in tasks:
            lo, chunk = _replicate_chunk(task)
            full[lo:lo + chunk.size] = chunk
    keep = np.isfinite(full)
    return full[keep], reps - int(np.count_nonzero(keep))


def _target_functions(plan: SimulationPlan, model, n: int) -> dict:
    fns = {}
    if "gn" in plan.targets or "hn" in plan.targets:
        terms = edgeworth.expansion_terms(model, n, plan.schedule)
    for name in plan.targets:
        if name == "normal":
            fns[name] = edgeworth.normal_cdf
        elif name == "gn":
            fns[name] = partial(edgeworth.gn_eval, terms)
        else:
            fns[name] = partial(edgeworth.hn_eval, terms)
    return fns


def run_simulation(plan: SimulationPlan, workers=None) -> tuple[GridResult, ...]:
    """Execute the plan and return one GridResult per sample size.

    Deterministic for a fixed plan: every replication owns its own keyed
    stream, so neither the worker count nor the chunk schedule can change
    a single value.  Raises SimulationError when more than 1% of the
    replications at any grid point are flagged.
    """
    effective = _worker_count(workers)
    model = dist.make_model(plan.model_id, **plan.model_params)
    results = []
    for g, n in enumerate(plan.n_grid):
        _, _, alpha, beta = trim.schedule_eval(plan.schedule, n)
        w = dist.winsorized_moments(model, alpha, beta)
        sigma_w = math.sqrt(w.winsor_var)
        values, flagged = _grid_point_values(
            plan, g, n, w.trunc_mean, sigma_w, effective)
        if flagged > 0.01 * plan.replications:
            raise SimulationError(
                f"{flagged} of {plan.replications} replications flagged at "
                f"n={n}; the schedule leaves too little spread to studentize"
            )
        ecdf = empirical_cdf(values)
        fns = _target_functions(plan, model, n)
        distances = {name: ks_distance(ecdf, fn) for name, fn in fns.items()}
        results.append(GridResult(n=n, ecdf=ecdf, distances=distances,
                                  flagged=flagged))
    return tuple(results)
