"""Monte Carlo engine tests.

Distance oracles are computed by hand (the three-point value is the
largest of six one-sided gaps, 1/3 - Phi(-1)) or delegated to
scipy.stats.kstest, which implements the same step-vs-continuous
geometry independently.  Engine runs are checked against the slow
per-sample statistics path only through public seeding conventions.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtri
from scipy.stats import kstest

from trimsum import dist, edgeworth, mc, trim
from trimsum.errors import (ConfigError, DomainError, NumericalError,
                            SimulationError, TrimsumError)

POWER = trim.TrimSchedule.power(1.0, 0.6, 2.0, 0.6)
TENTH = trim.TrimSchedule.fractions(0.1, 0.1)


def test_ks_three_point_hand_value():
    e = mc.empirical_cdf([-1.0, 0.0, 1.0])
    d = mc.ks_distance(e, edgeworth.normal_cdf)
    assert d == pytest.approx(1.0 / 3.0 - float(edgeworth.normal_cdf(-1.0)), rel=1e-13)
    assert d == pytest.approx(0.17467807940187624, abs=1e-12)


def test_ks_single_point_is_half():
    e = mc.empirical_cdf([0.0])
    assert mc.ks_distance(e, edgeworth.normal_cdf) == 0.5


@pytest.mark.parametrize("count", [250, 1000])
def test_ks_quantile_grid_construction(count):
    # Values at Phi^{-1}((i-1/2)/R) leave equal one-sided gaps of 1/(2R).
    vals = ndtri((np.arange(1, count + 1) - 0.5) / count)
    d = mc.ks_distance(mc.empirical_cdf(vals), edgeworth.normal_cdf)
    assert abs(d - 0.5 / count) < 1e-13


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_ks_agrees_with_scipy_kstest(seed):
    vals = mc.calibration_values(400, seed)
    mine = mc.ks_distance(mc.empirical_cdf(vals), edgeworth.normal_cdf)
    ref = kstest(vals, "norm").statistic
    assert mine == pytest.approx(ref, rel=1e-12)


def test_ks_agrees_with_scipy_on_shifted_target():
    vals = mc.calibration_values(300, 11)
    target = lambda x: edgeworth.normal_cdf(np.asarray(x) - 0.3)
    mine = mc.ks_distance(mc.empirical_cdf(vals), target)
    ref = kstest(vals, target).statistic
    assert mine == pytest.approx(ref, rel=1e-12)


def test_ks_rejects_non_finite_target():
    e = mc.empirical_cdf([0.0, 1.0])
    with pytest.raises(NumericalError):
        mc.ks_distance(e, lambda x: np.full_like(np.asarray(x, float), np.nan))


def test_ecdf_eval_right_continuous():
    e = mc.empirical_cdf([2.0, 1.0, 1.0])
    assert list(e.values) == [1.0, 1.0, 2.0]
    assert mc.ecdf_eval(e, 0.99) == 0.0
    assert mc.ecdf_eval(e, 1.0) == pytest.approx(2.0 / 3.0)
    assert mc.ecdf_eval(e, 1.99) == pytest.approx(2.0 / 3.0)
    assert mc.ecdf_eval(e, 2.0) == 1.0
    vec = mc.ecdf_eval(e, [0.0, 1.5, 3.0])
    assert isinstance(mc.ecdf_eval(e, 0.0), float)
    assert np.allclose(vec, [0.0, 2.0 / 3.0, 1.0])


def test_ecdf_validation():
    with pytest.raises(DomainError):
        mc.empirical_cdf([])
    with pytest.raises(DomainError):
        mc.empirical_cdf([1.0, np.nan])
    with pytest.raises(DomainError):
        mc.empirical_cdf([[1.0, 2.0]])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60))
def test_ecdf_and_distance_invariants(xs):
    e = mc.empirical_cdf(xs)
    assert e.count == len(xs)
    assert np.all(np.diff(e.values) >= 0)
    assert mc.ecdf_eval(e, float(e.values[-1])) == 1.0
    assert mc.ecdf_eval(e, float(e.values[0]) - 1.0) == 0.0
    d = mc.ks_distance(e, edgeworth.normal_cdf)
    assert 0.0 <= d <= 1.0


def test_fit_rate_half_power_exact():
    fit = mc.fit_rate([(100, 0.1), (400, 0.05), (1600, 0.025)])
    assert abs(fit.slope + 0.5) < 1e-13
    # d = k^{-1/2} here, so the intercept ln c vanishes.
    assert abs(fit.intercept) < 1e-12
    assert fit.r_squared >= 1.0 - 1e-12
    assert fit.stderr < 1e-12


def test_fit_rate_three_quarters_power():
    pts = [(k, 3.7 * k ** -0.75) for k in (10, 40, 90, 160, 250)]
    fit = mc.fit_rate(pts)
    assert abs(fit.slope + 0.75) < 1e-12
    assert abs(fit.intercept - math.log(3.7)) < 1e-11
    # Noiseless input: every residual at the fitted line is numerical dust.
    for k, d in pts:
        assert abs(math.log(d) - (fit.intercept + fit.slope * math.log(k))) < 1e-12


def test_fit_rate_constant_distances():
    fit = mc.fit_rate([(10, 0.2), (20, 0.2), (40, 0.2)])
    assert fit.slope == 0.0
    assert fit.r_squared == 1.0
    assert fit.stderr == 0.0


def test_fit_rate_noisy_input():
    rng = np.random.default_rng(5)
    pts = [(k, k ** -0.5 * math.exp(0.05 * rng.standard_normal()))
           for k in (10, 30, 90, 270, 810)]
    fit = mc.fit_rate(pts)
    assert -0.7 < fit.slope < -0.3
    assert 0.0 <= fit.r_squared < 1.0
    assert fit.stderr > 0.0


def test_fit_rate_validation():
    with pytest.raises(DomainError):
        mc.fit_rate([(10, 0.1), (20, 0.05)])
    with pytest.raises(DomainError):
        mc.fit_rate([(10, 0.1), (20, -0.05), (40, 0.02)])
    with pytest.raises(DomainError):
        mc.fit_rate([(0.0, 0.1), (20, 0.05), (40, 0.02)])
    with pytest.raises(DomainError):
        mc.fit_rate([(10, 0.1), (10, 0.05), (10, 0.02)])


def test_make_plan_validation():
    good = dict(model_id="lomax", model_params={"gamma": 1.0}, schedule=POWER,
                n_grid=[200, 400], replications=100, statistic="normalized",
                targets=("normal",), seed=7)
    mc.make_plan(**good)
    for field, value in [
        ("statistic", "raw"),
        ("targets", ()),
        ("targets", ("phi",)),
        ("replications", 99),
        ("n_grid", []),
        ("n_grid", [400, 400]),
        ("n_grid", [400, 200]),
        ("seed", -1),
        ("seed", 2 ** 64),
        ("model_id", "gumbel"),
    ]:
        with pytest.raises(ConfigError):
            mc.make_plan(**{**good, field: value})
    # Seed exactly at the 64-bit ceiling is still representable.
    mc.make_plan(**{**good, "seed": 2 ** 64 - 1})


def test_make_plan_checks_schedule_on_every_n():
    with pytest.raises(TrimsumError):
        mc.make_plan("lomax", {"gamma": 1.0}, trim.TrimSchedule.explicit(30, 30),
                     [50], 100, "normalized", ("normal",), 7)


def test_make_plan_normalizes_fields():
    params = {"gamma": 1.0}
    plan = mc.make_plan("lomax", params, POWER, (200,), 100, "normalized",
                        ("normal", "normal", "gn"), 7)
    assert plan.targets == ("normal", "gn")
    assert plan.n_grid == (200,)
    params["gamma"] = 3.0
    assert plan.model_params == {"gamma": 1.0}


def test_determinism_across_workers_and_chunks(monkeypatch):
    """Chunk size and worker count must not move a single bit."""
    plan = mc.make_plan("lomax", {"gamma": 1.0}, POWER, [300], 400,
                        "studentized", ("normal",), 99)
    base = mc.run_simulation(plan, workers=1)
    monkeypatch.setattr(mc, "_CHUNK", 37)
    rechunked = mc.run_simulation(plan, workers=1)
    pooled = mc.run_simulation(plan, workers=3)
    for other in (rechunked, pooled):
        assert np.array_equal(base[0].ecdf.values, other[0].ecdf.values)
        assert other[0].distances == base[0].distances
        assert other[0].flagged == base[0].flagged


def test_engine_matches_slow_statistics_oracle():
    """Per-replication values agree with the sort-everything reference."""
    model = dist.make_model("lomax", gamma=1.0)
    n, reps, seed = 250, 120, 31415
    for statistic in ("normalized", "studentized"):
        plan = mc.make_plan("lomax", {"gamma": 1.0}, POWER, [n], reps,
                            statistic, ("normal",), seed)
        got = mc.run_simulation(plan, workers=1)[0].ecdf.values
        slow = []
        for r in range(reps):
            u = dist._philox(seed, r).random(n)
            u[u == 0.0] = np.nextafter(0.0, 1.0)
            sample = trim.sorted_sample(np.asarray(model.quantile(u), float))
            st_ = trim.statistics(sample, POWER, model)
            slow.append(getattr(st_, statistic))
        assert np.allclose(got, np.sort(slow), rtol=1e-12, atol=1e-12)


def test_distances_follow_target_order():
    plan = mc.make_plan("lomax", {"gamma": 1.0}, POWER, [200], 100,
                        "normalized", ("hn", "normal", "gn"), 5)
    res = mc.run_simulation(plan, workers=1)
    assert list(res[0].distances) == ["hn", "normal", "gn"]
    assert res[0].n == 200


def test_symmetric_trim_makes_gn_match_normal():
    # With all correction terms at zero the two targets are one function.
    plan = mc.make_plan("cauchy", {}, TENTH, [400], 200, "normalized",
                        ("normal", "gn"), 17)
    res = mc.run_simulation(plan, workers=1)[0]
    assert res.distances["gn"] == res.distances["normal"]


def test_calibration_scale():
    # Kolmogorov statistic of an exact normal sample: E[D] ~ 0.87/sqrt(R).
    reps = 10 ** 4
    dists = []
    for seed in range(5):
        vals = mc.calibration_values(reps, seed)
        dists.append(mc.ks_distance(mc.empirical_cdf(vals), edgeworth.normal_cdf))
    mean = sum(dists) / len(dists)
    assert 0.5 * 0.87 / math.sqrt(reps) < mean < 2.0 * 0.87 / math.sqrt(reps)


def test_calibration_values_deterministic():
    a = mc.calibration_values(100, 7)
    b = mc.calibration_values(100, 7)
    c = mc.calibration_values(100, 8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(DomainError):
        mc.calibration_values(0, 7)


def _twopoint(p0):
    """Two atoms at 0 and 1 with P(0) = p0; degenerate windows at will."""
    arr = lambda x: np.asarray(x, dtype=float)
    return dist.DistributionModel(
        id=f"twopoint({p0})",
        cdf=lambda x: np.where(arr(x) < 0.0, 0.0, np.where(arr(x) < 1.0, p0, 1.0)),
        pdf=lambda x: np.zeros_like(arr(x)),
        quantile=lambda u: (arr(u) > p0).astype(float),
        tail_index=None,
        symmetric=False,
        support=(0.0, 1.0),
    )


def test_flagged_replications_dropped_and_counted(monkeypatch):
    monkeypatch.setitem(dist._FAMILIES, "twopoint", (_twopoint, ("p0",)))
    plan = mc.make_plan("twopoint", {"p0": 0.72}, TENTH, [40], 400,
                        "studentized", ("normal",), 53)
    res = mc.run_simulation(plan, workers=1)[0]
    assert res.flagged == 1
    assert res.ecdf.count == 399


def test_flood_of_degenerate_windows_aborts(monkeypatch):
    monkeypatch.setitem(dist._FAMILIES, "twopoint", (_twopoint, ("p0",)))
    plan = mc.make_plan("twopoint", {"p0": 0.88}, TENTH, [40], 200,
                        "studentized", ("normal",), 7)
    with pytest.raises(SimulationError, match="flagged"):
        mc.run_simulation(plan, workers=1)


def test_worker_count_resolution(monkeypatch):
    monkeypatch.delenv("TRIMSUM_THREADS", raising=False)
    assert mc._worker_count(None) == 1
    assert mc._worker_count(5) == 5
    monkeypatch.setenv("TRIMSUM_THREADS", "2")
    assert mc._worker_count(16) == 2
    assert mc._worker_count(1) == 1
    assert mc._worker_count(None) == 2
    monkeypatch.setenv("TRIMSUM_THREADS", "0")
    assert mc._worker_count(None) >= 1
    monkeypatch.setenv("TRIMSUM_THREADS", "many")
    with pytest.raises(ConfigError):
        mc._worker_count(None)
    monkeypatch.setenv("TRIMSUM_THREADS", "-2")
    with pytest.raises(ConfigError):
        mc._worker_count(None)
    monkeypatch.delenv("TRIMSUM_THREADS")
    with pytest.raises(DomainError):
        mc._worker_count(0)
