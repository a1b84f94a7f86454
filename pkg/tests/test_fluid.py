import math

import numpy as np
import pytest
from scipy import integrate

from hubsat.fluid import (
    FluidCurve,
    FluidParams,
    difference_quotients,
    fluid_curve,
    hub_fluid,
    hub_fluid_mean,
    partition_expansion,
    partition_expansion_sum,
    satellite_fluid,
)

FP = FluidParams(lam=1.0, p_k=0.5, mu_k=0.25)
FP1 = FluidParams(lam=1.0, p_k=1.0, mu_k=0.5)  # single-satellite normalization


def test_bottleneck_condition_enforced():
    with pytest.raises(ValueError, match="bottleneck condition"):
        FluidParams(lam=1.0, p_k=0.5, mu_k=0.5)
    with pytest.raises(ValueError, match="bottleneck condition"):
        FluidParams(lam=1.0, p_k=0.5, mu_k=0.7)


def test_hub_starts_full():
    assert hub_fluid(FP, 0.0) == pytest.approx(1.0)


def test_hub_long_run_floor():
    assert hub_fluid(FP, 1e6) == pytest.approx(FP.floor, abs=1e-12)
    assert FP.floor == pytest.approx(0.5)


def test_hub_direct_evaluation_oracle():
    expected = 1.0 - 0.5 * (1.0 - math.exp(-1.0))
    assert hub_fluid(FP, 2.0) == pytest.approx(expected, abs=1e-15)
    assert hub_fluid(FP, 2.0) == pytest.approx(0.683940, abs=1e-6)


def test_satellite_starts_empty():
    assert satellite_fluid(FP, 0.0) == 0.0


def test_single_station_long_run_level():
    assert satellite_fluid(FP1, 1e6) == pytest.approx(0.5, abs=1e-12)


def test_complement_identity_random_draws():
    rng = np.random.default_rng(7)
    for _ in range(100):
        lam = rng.uniform(0.5, 3.0)
        p = rng.uniform(0.2, 1.0)
        mu = lam * p * rng.uniform(0.1, 0.95)
        fp = FluidParams(lam=lam, p_k=p, mu_k=mu)
        t = rng.uniform(0.0, 10.0)
        assert hub_fluid(fp, t) + satellite_fluid(fp, t) == pytest.approx(1.0, abs=1e-12)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        hub_fluid(FP, -0.1)
    with pytest.raises(ValueError):
        satellite_fluid(FP, -0.1)


def test_vectorized_evaluation():
    ts = np.array([0.0, 1.0, 2.0])
    vals = hub_fluid(FP, ts)
    assert vals.shape == (3,)
    assert vals[0] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# partition expansion
# ---------------------------------------------------------------------------


def test_partition_first_step():
    # one step of width delta drains drift * delta
    for delta in (0.1, 0.01):
        assert partition_expansion(FP1, delta, 1) == pytest.approx(1.0 - 0.5 * delta, abs=1e-15)


def test_partition_direct_oracle():
    expected = 1.0 - 0.5 * (1.0 - 0.9**10)
    assert partition_expansion(FP1, 0.1, 10) == pytest.approx(expected, abs=1e-15)
    assert partition_expansion(FP1, 0.1, 10) == pytest.approx(0.674339, abs=1e-6)


@pytest.mark.parametrize("fp", [FP, FP1, FluidParams(2.0, 0.7, 0.9)])
@pytest.mark.parametrize("delta", [0.05, 0.01])
def test_closed_form_equals_binomial_sum(fp, delta):
    for i in range(1, 31):
        closed = partition_expansion(fp, delta, i)
        summed = partition_expansion_sum(fp, delta, i)
        assert abs(closed - summed) <= 1e-10


def test_partition_refines_to_fluid_curve():
    t, delta = 2.0, 1e-4
    u = partition_expansion(FP1, delta, int(t / delta))
    assert abs(u - hub_fluid(FP1, t)) <= 1e-3


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_partition_error_halves_with_delta(t):
    deltas = [0.002, 0.001, 0.0005, 0.00025]  # all divide t exactly
    errors = [
        abs(partition_expansion(FP1, d, round(t / d)) - hub_fluid(FP1, t)) for d in deltas
    ]
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert all(1.7 <= r <= 2.3 for r in ratios)


def test_partition_domain_errors():
    with pytest.raises(ValueError):
        partition_expansion(FP1, 0.0, 1)
    with pytest.raises(ValueError):
        partition_expansion(FP1, 0.1, 0)
    with pytest.raises(ValueError, match="below 1"):
        partition_expansion(FP1, 1.5, 1)
    with pytest.raises(ValueError, match="below 1"):
        partition_expansion_sum(FP1, 1.5, 1)


# ---------------------------------------------------------------------------
# difference quotients
# ---------------------------------------------------------------------------


def test_difference_quotients_taylor_limits():
    # limits are drift, lam p drift, (lam p)^2 drift = 0.5, 0.5, 0.5 here
    d1, d2, d3 = difference_quotients(FP1, 1e-4)
    assert d1 == pytest.approx(0.5, abs=1e-4)
    assert d2 == pytest.approx(0.5, abs=1e-3)
    assert d3 == pytest.approx(0.5, abs=1e-2)


def test_difference_quotients_general_params():
    # delta much below 1e-4 is useless: the third difference of a curve with
    # values near 1 cancels to the rounding floor
    fp = FP
    b = fp.lam * fp.p_k
    expected = (fp.drift, b * fp.drift, b**2 * fp.drift)
    d = difference_quotients(fp, 1e-4)
    for got, want in zip(d, expected):
        assert got == pytest.approx(want, rel=1e-3)


def test_difference_quotients_first_order_convergence():
    limits = (0.5, 0.5, 0.5)
    deltas = [2e-3, 1e-3, 5e-4, 2.5e-4]
    errs = np.array([[abs(v - l) for v, l in zip(difference_quotients(FP1, d), limits)]
                     for d in deltas])
    ratios = errs[:-1] / errs[1:]
    assert np.all((1.7 <= ratios) & (ratios <= 2.3))


def test_difference_quotients_reject_bad_delta():
    with pytest.raises(ValueError):
        difference_quotients(FP1, 0.0)


# ---------------------------------------------------------------------------
# curve container
# ---------------------------------------------------------------------------


def test_hub_fluid_mean_matches_quadrature():
    oracle, _ = integrate.quad(lambda t: hub_fluid(FP, t), 2.0, 4.0)
    assert hub_fluid_mean(FP, 2.0, 4.0) == pytest.approx(oracle / 2.0, abs=1e-10)
    with pytest.raises(ValueError):
        hub_fluid_mean(FP, 2.0, 2.0)


def test_fluid_curve_construction_and_validation():
    curve = fluid_curve(FP, [4.0, 0.5, 1.0, 2.0])
    assert curve.times == (0.5, 1.0, 2.0, 4.0)
    assert all(a >= b for a, b in zip(curve.hub, curve.hub[1:]))
    assert all(h + q == pytest.approx(1.0) for h, q in zip(curve.hub, curve.bottleneck))
    with pytest.raises(ValueError, match="nonincreasing"):
        FluidCurve(times=(0.0, 1.0), hub=(0.5, 0.9), bottleneck=(0.5, 0.1))
    with pytest.raises(ValueError, match="equal length"):
        FluidCurve(times=(0.0,), hub=(1.0, 0.9), bottleneck=(0.0,))
