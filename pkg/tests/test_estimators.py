"""Empirical estimator semantics: hand-computed counts, invariances, errors."""

import math

import numpy as np
import pytest

from extremogrid.estimators import (
    AndEvent,
    EmptyEvent,
    NoExceedancesError,
    PairEvent,
    SingleEvent,
    empirical_extremogram,
    event_sets,
    mu_hat,
    tau_hat,
    threshold,
)
from extremogrid.fields import GridField, derive_seed, simulate_iid_frechet, simulate_mma
from extremogrid.lattice import Grid, LagSet
from extremogrid.models import MmaModel
from extremogrid.theory import Interval, mma_theta

INF = float("inf")
RAY = Interval(1.0, INF)


def make_field(values, model_tag="iid", seed=0):
    values = np.asarray(values, dtype=float)
    grid = Grid(n=values.shape[0], d=values.ndim)
    return GridField(grid=grid, values=values, model_tag=model_tag, seed=seed)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


def test_threshold_analytic():
    f = make_field(np.ones((10, 10)) * 2.0)
    assert threshold(f, 10).value == 100.0
    f1 = make_field(np.ones(8) * 2.0)
    assert threshold(f1, 2).value == 2.0
    with pytest.raises(ValueError):
        threshold(f1, 1)


def test_threshold_empirical_near_frechet_quantile():
    f = simulate_iid_frechet(Grid(n=1000, d=2), 17)
    m = 30
    t = threshold(f, m, mode="empirical")
    exact = -1.0 / math.log1p(-1.0 / m**2)
    assert abs(t.value / exact - 1.0) < 0.05


def test_threshold_empirical_beyond_sample():
    f = make_field(np.ones(16) * 2.0)
    with pytest.raises(ValueError):
        threshold(f, 17, mode="empirical")
    with pytest.raises(ValueError):
        threshold(f, 4, mode="oracle")


def test_threshold_analytic_requires_frechet_tag():
    f = make_field(np.ones(16) * 2.0, model_tag="gaussian-import")
    with pytest.raises(ValueError):
        threshold(f, 4)
    assert threshold(f, 4, mode="empirical").value == 2.0


# ---------------------------------------------------------------------------
# the empirical extremogram on constructed fields
# ---------------------------------------------------------------------------


def test_extremogram_hand_computed():
    # exceedances at sites 1, 2, 4; one neighbouring pair
    f = make_field([2.0, 2.0, 0.5, 2.0, 0.5, 0.5])
    series = empirical_extremogram(f, LagSet(((1,),), gamma=1.0), RAY, RAY, 1.0)
    assert series.values[0] == pytest.approx((1 / 5) / (3 / 6))


def test_extremogram_all_exceed_is_one():
    f = make_field(np.full((5, 5), 9.0))
    ls = LagSet(((1, 0), (1, 1)), gamma=1.0)
    series = empirical_extremogram(f, ls, RAY, RAY, 1.0)
    assert np.allclose(series.values, 1.0)


def test_extremogram_no_exceedances_error():
    f = make_field([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(NoExceedancesError) as err:
        empirical_extremogram(f, LagSet(((1,),), gamma=1.0), RAY, RAY, 1.0)
    assert err.value.count == 0


def test_extremogram_scale_invariance_bitwise():
    f = simulate_iid_frechet(Grid(n=400, d=1), 3)
    ls = LagSet(((1,), (2,)), gamma=2.0)
    base = empirical_extremogram(f, ls, RAY, RAY, 4.0).values
    scaled_field = GridField(
        grid=f.grid, values=f.values * 4.0, model_tag=f.model_tag, seed=f.seed
    )
    scaled = empirical_extremogram(scaled_field, ls, RAY, RAY, 16.0).values
    assert np.array_equal(base, scaled)


def test_extremogram_denominator_monotone_in_a():
    f = simulate_iid_frechet(Grid(n=500, d=1), 9)
    a_m = 5.0
    counts = [
        int(np.count_nonzero(Interval(a1, INF).contains(f.values / a_m)))
        for a1 in (2.0, 1.0, 0.5, 0.25)
    ]
    assert counts == sorted(counts)


def test_extremogram_dimension_mismatch():
    f = make_field(np.full((4, 4), 2.0))
    with pytest.raises(ValueError):
        empirical_extremogram(f, LagSet(((1,),), gamma=1.0), RAY, RAY, 1.0)


def test_series_rows_carry_metadata():
    f = make_field(np.full((4, 4), 9.0), model_tag="toy", seed=5)
    ls = LagSet(((1, 0),), gamma=1.0)
    rows = empirical_extremogram(f, ls, RAY, RAY, 1.0, meta={"m": 2}).rows()
    assert rows[0]["lag"] == (1, 0)
    assert rows[0]["kind"] == "empirical"
    assert rows[0]["m"] == 2
    assert rows[0]["model_tag"] == "toy"


# ---------------------------------------------------------------------------
# scaled frequencies
# ---------------------------------------------------------------------------


def test_mu_hat_hand_computed():
    f = make_field([9.0, 0.5, 9.0, 0.5, 0.5, 0.5])
    # two exceedances on six sites at threshold index m=2 (a_m = 2)
    assert mu_hat(f, SingleEvent(Interval(1.0, INF)), 2) == pytest.approx(2 * 2 / 6)


def test_mu_hat_empty_event():
    f = make_field([2.0, 2.0, 2.0])
    assert mu_hat(f, EmptyEvent(), 2) == 0.0
    assert tau_hat(f, EmptyEvent(), SingleEvent(RAY), (1,), 2) == 0.0


def test_mu_hat_disjoint_intervals_zero():
    f = simulate_iid_frechet(Grid(n=200, d=1), 1)
    ev = AndEvent(SingleEvent(Interval(1.0, 2.0)), SingleEvent(Interval(2.0, 3.0)))
    assert mu_hat(f, ev, 3) == 0.0


def test_mu_hat_single_field_near_limit():
    # limit mass of (1, inf) is 1; a single field estimate sits within
    # three of its own standard errors
    f = simulate_iid_frechet(Grid(n=500, d=1), 12)
    m = round(500**0.4)
    est = mu_hat(f, SingleEvent(RAY), m)
    p = 1.0 - math.exp(-1.0 / m)
    se = m * math.sqrt(p * (1 - p) / 500)
    assert abs(est - 1.0) < 3 * se


def test_mu_hat_matches_finite_level_expectation():
    # replicate average against the exact finite-m expectation
    m = 12
    ests_ray, ests_box = [], []
    for rep in range(40):
        f = simulate_iid_frechet(Grid(n=500, d=1), derive_seed(100, rep))
        ests_ray.append(mu_hat(f, SingleEvent(RAY), m))
        ests_box.append(mu_hat(f, SingleEvent(Interval(1.0, 2.0)), m))
    ray_exp = m * (1.0 - math.exp(-1.0 / m))
    box_exp = m * (math.exp(-1.0 / (2 * m)) - math.exp(-1.0 / m))
    for ests, expect in [(ests_ray, ray_exp), (ests_box, box_exp)]:
        arr = np.asarray(ests)
        se = arr.std(ddof=1) / math.sqrt(len(arr))
        assert abs(arr.mean() - expect) < 3 * se
    # and the limits those expectations approach
    assert abs(ray_exp - 1.0) < 0.05
    assert abs(box_exp - 0.5) < 0.04


def test_mu_hat_boundary_policy():
    # lone exceedance at the very first site: visible without a ball
    # constraint, dropped when the radius-2 neighbourhood must fit
    values = np.full(10, 0.5)
    values[0] = 9.0
    f = make_field(values)
    assert mu_hat(f, SingleEvent(RAY), 2) > 0.0
    assert mu_hat(f, SingleEvent(RAY), 2, gamma=2.0) == 0.0


def test_mu_hat_offset_outside_ball_rejected():
    f = make_field(np.full(10, 2.0))
    with pytest.raises(ValueError):
        mu_hat(f, PairEvent(RAY, RAY, (3,)), 2, gamma=1.0)


def test_ratio_representation_matches_extremogram():
    model = MmaModel(phi=0.5, d=2, trunc_radius=10)
    f = simulate_mma(model, Grid(n=60, d=2), 8)
    ls = LagSet(((1, 0), (1, 1)), gamma=1.0)
    m = 4
    series = empirical_extremogram(f, ls, RAY, RAY, float(m) ** 2)
    den = mu_hat(f, SingleEvent(RAY), m)
    for i, h in enumerate(ls.lags):
        num = mu_hat(f, PairEvent(RAY, RAY, h), m)
        assert num / den == pytest.approx(series.values[i], rel=1e-13)


def test_tau_hat_iid_independent_levels():
    m = 10
    taus = []
    for rep in range(40):
        f = simulate_iid_frechet(Grid(n=2000, d=1), derive_seed(200, rep))
        taus.append(tau_hat(f, SingleEvent(RAY), SingleEvent(RAY), (3,), m))
    arr = np.asarray(taus)
    expect = m * (1.0 - math.exp(-1.0 / m)) ** 2
    se = arr.std(ddof=1) / math.sqrt(len(arr))
    assert abs(arr.mean() - expect) < 3 * se


def test_tau_hat_mma_joint_closed_form():
    model = MmaModel(phi=0.5, d=1)
    m = 8
    taus = []
    for rep in range(40):
        f = simulate_mma(model, Grid(n=4000, d=1), derive_seed(300, rep))
        taus.append(tau_hat(f, SingleEvent(RAY), SingleEvent(RAY), (1,), m))
    arr = np.asarray(taus)
    theta = mma_theta(model, (1,))
    expect = m * (1.0 - 2.0 * math.exp(-1.0 / m) + math.exp(-theta / m))
    se = arr.std(ddof=1) / math.sqrt(len(arr))
    assert abs(arr.mean() - expect) < 3 * se


def test_tau_hat_zero_lag_rejected():
    f = make_field(np.full(6, 2.0))
    with pytest.raises(ValueError):
        tau_hat(f, SingleEvent(RAY), SingleEvent(RAY), (0,), 2)


def test_event_sets_layout():
    ls = LagSet(((1, 0), (0, 1)), gamma=1.0)
    events = event_sets(ls, RAY, Interval(1.0, 2.0))
    assert len(events) == 3
    assert isinstance(events[0], PairEvent) and events[0].h == (1, 0)
    assert isinstance(events[-1], SingleEvent)


def test_and_event_with_superset_is_identity():
    # a pair event already implies the single-site event
    f = simulate_iid_frechet(Grid(n=300, d=1), 77)
    pair = PairEvent(RAY, RAY, (1,))
    both = AndEvent(pair, SingleEvent(RAY))
    assert mu_hat(f, both, 3) == mu_hat(f, pair, 3)
