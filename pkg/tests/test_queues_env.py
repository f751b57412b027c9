import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from noma_offload.env import (PATHLOSS_COEF, DeviceProfile, RngStream, draw_profiles, gain_order,
                              sample_arrivals, sample_channel_gains)
from noma_offload.queues import ServiceOutcome, SystemState, advance_queues, power_draw, service_rates


def _outcome(n, mu_loc=0.0, mu_bs=0.0, p_tot=0.0):
    return ServiceOutcome(np.full(n, mu_loc), mu_bs, np.zeros(n), np.full(n, p_tot))


def test_queue_update_example():
    s = SystemState(np.array([5.0]), np.array([3.0]), np.array([0.2]), 1.0)
    new = advance_queues(s, [1], [4.0], [2.0], _outcome(1, mu_loc=2.0, mu_bs=0.5, p_tot=0.4), p_ave=0.25)
    assert new.q_loc[0] == 3.0
    assert new.q_off[0] == 5.0
    assert new.q_bs == pytest.approx(2.5)
    assert new.q_p[0] == pytest.approx(0.4)
    assert new.slot == 1


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(
    *[hnp.arrays(float, n, elements=st.floats(0, 1e5))] * 4, hnp.arrays(int, n, elements=st.integers(0, 1)))))
def test_queue_update_conserves_nonnegativity(arrs):
    q_loc, q_off, arr, rate, rho = arrs
    n = q_loc.size
    s = SystemState(q_loc, q_off, np.zeros(n), 0.0)
    new = advance_queues(s, rho, arr, rate, _outcome(n, mu_loc=10.0, mu_bs=5.0), p_ave=0.25)
    new.check()
    # arrivals go to exactly one queue
    np.testing.assert_allclose(new.q_loc + new.q_off,
                               np.maximum(q_loc - 10.0, 0) + np.maximum(q_off - rate, 0) + arr)


def test_service_rates_bs_sums_devices():
    mu_loc, mu_bs = service_rates(np.array([6400.0, 0.0]), 1e4, np.array([6400.0, 3200.0]), 1.0)
    np.testing.assert_allclose(mu_loc, [1.0, 0.0])
    assert mu_bs == pytest.approx(1e4 / 6400 + 1e4 / 3200)


def test_power_draw_uses_indicators():
    s = SystemState(np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.zeros(2))
    _, p_tot, x_loc, x_off = power_draw([1e8, 1e8], [0.3, 0.3], s, 1e-26)
    np.testing.assert_allclose(p_tot, [1e-26 * 1e24, 0.3])


def test_state_check_rejects_negative():
    with pytest.raises(ValueError):
        SystemState(np.array([-1.0]), np.zeros(1), np.zeros(1)).check()


def test_rng_stream_is_pure():
    a = RngStream(5, "channel").generator(17).random(4)
    b = RngStream(5, "channel").generator(17).random(4)
    c = RngStream(5, "arrival").generator(17).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        RngStream(5, "nope")


def test_slots_can_be_drawn_out_of_order():
    prof = draw_profiles(6, 3)
    rng = RngStream(3, "channel")
    forward = [sample_channel_gains(prof, t, rng).gains for t in range(5)]
    backward = [sample_channel_gains(prof, t, rng).gains for t in reversed(range(5))][::-1]
    np.testing.assert_array_equal(np.array(forward), np.array(backward))


def test_pathloss_only_gains():
    prof = [DeviceProfile(0, 10.0, 1.0), DeviceProfile(1, 20.0, 1.0)]
    g = sample_channel_gains(prof, 0, RngStream(0, "channel"), fading="none")
    np.testing.assert_allclose(g.gains, [PATHLOSS_COEF / 100, PATHLOSS_COEF / 400])
    assert g.order.tolist() == [0, 1]


def test_gain_order_ties_by_id():
    assert gain_order(np.array([1.0, 2.0, 1.0, 2.0])).tolist() == [1, 3, 0, 2]


def test_rayleigh_mean_gain():
    prof = [DeviceProfile(0, 50.0, 1.0)]
    rng = RngStream(11, "channel")
    g = np.array([sample_channel_gains(prof, t, rng).gains[0] for t in range(4000)])
    assert g.mean() / prof[0].mean_gain == pytest.approx(1.0, abs=0.06)


def test_arrivals_bounded():
    prof = draw_profiles(20, 1)
    a = sample_arrivals(prof, 4, RngStream(1, "arrival"), 1e4, 1.0).bits
    assert np.all((a >= 0) & (a <= 1e4))
    assert np.all(sample_arrivals(prof, 4, RngStream(1, "arrival"), 0.0, 1.0).bits == 0)


def test_profiles_ranges_and_overrides():
    prof = draw_profiles(200, 9)
    d = np.array([p.distance_m for p in prof])
    w = np.array([p.weight for p in prof])
    assert d.min() >= 10 and d.max() <= 100
    assert set(np.unique(w)) <= set(range(11))
    fixed = draw_profiles(2, 9, distances=[15.0, 30.0], weights=[1.0, 2.0])
    assert [p.distance_m for p in fixed] == [15.0, 30.0]
    with pytest.raises(ValueError):
        draw_profiles(3, 9, distances=[1.0])
    with pytest.raises(ValueError):
        DeviceProfile(0, -1.0, 1.0)
