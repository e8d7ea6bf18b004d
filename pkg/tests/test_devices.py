import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_device, residence_rk4, rk4, device_arrays
from tclfreq.devices import (
    AC, EWH, AcParams, ContractError, DeviceRecord, EwhParams, StateCorruptionError, cycle_times,
    equilibria, hysteresis, step_device, time_to_switch_off, time_to_switch_on, to_generic,
    window_on_off_durations,
)


def ac(temp=72.0, on=True, **kw):
    params = dict(power_rating=6.0, thermal_resistance=2.0, thermal_capacitance=3.6,
                  efficiency=2.5, setpoint=72.0, deadband=2.0, ambient=90.0)
    params.update(kw)
    return DeviceRecord(1, AC, AcParams(**params), temp, on)


def ewh(temp=120.0, on=True, **kw):
    params = dict(power_rating=4.5, tank_capacitance=0.12, flow_rate=20.0,
                  specific_heat=2.9307107e-4, loss_coeff=0.003, inlet_temp=55.0,
                  ambient=70.0, setpoint=120.0, deadband=6.0)
    params.update(kw)
    return DeviceRecord(2, EWH, EwhParams(**params), temp, on)


def test_ac_on_to_off_matches_log_formula():
    d = ac(temp=72.0, on=True)
    cr = 3.6 * 2.0
    drop = 2.5 * 6.0 * 2.0
    expected = cr * math.log((72.0 - 90.0 + drop) / (71.0 - 90.0 + drop)) * 3600
    assert time_to_switch_off(d) == pytest.approx(expected, rel=1e-12)


def test_ac_off_to_on_matches_log_formula():
    d = ac(temp=72.0, on=False)
    expected = 7.2 * math.log((72.0 - 90.0) / (73.0 - 90.0)) * 3600
    assert time_to_switch_on(d) == pytest.approx(expected, rel=1e-12)


def test_past_edge_gives_zero():
    assert time_to_switch_off(ac(temp=70.5, on=True)) == 0.0
    assert time_to_switch_on(ac(temp=73.5, on=False)) == 0.0
    assert time_to_switch_off(ewh(temp=124.0, on=True)) == 0.0
    assert time_to_switch_on(ewh(temp=116.0, on=False)) == 0.0


def test_unreachable_edge_gives_inf():
    # too small a unit to pull the room below the low edge
    weak = ac(temp=72.0, on=True, power_rating=0.5, efficiency=1.0)
    assert math.isinf(time_to_switch_off(weak))
    # so much cold water that the element cannot reach the top edge
    flooded = ewh(temp=120.0, on=True, flow_rate=5000.0)
    assert math.isinf(time_to_switch_off(flooded))


def test_wrong_state_is_a_contract_error():
    with pytest.raises(ContractError):
        time_to_switch_off(ac(on=False))
    with pytest.raises(ContractError):
        time_to_switch_on(ewh(on=True))


def test_param_validation():
    with pytest.raises(ValueError):
        ac(power_rating=0.0)
    with pytest.raises(ValueError):
        ac(ambient=70.0)
    with pytest.raises(ValueError):
        ewh(inlet_temp=130.0)
    with pytest.raises(ValueError):
        ewh(flow_rate=-1.0)
    with pytest.raises(ValueError):
        DeviceRecord(0, "FRIDGE", ac().params, 72.0, True)
    with pytest.raises(TypeError):
        DeviceRecord(0, EWH, ac().params, 72.0, True)


def test_closed_forms_match_rk4_bisection():
    rng = np.random.default_rng(11)
    devs = [random_device(rng, i) for i in range(60)]
    for state, fn in ((True, time_to_switch_off), (False, time_to_switch_on)):
        group = [d for d in devs if d.on is state]
        ref = residence_rk4(group, state)
        got = np.array([fn(d) for d in group])
        assert np.array_equal(np.isinf(ref), np.isinf(got))
        fin = np.isfinite(got)
        np.testing.assert_allclose(got[fin], ref[fin], atol=0.1)


def test_step_matches_fine_rk4():
    for dev in (ac(temp=71.5, on=True), ac(temp=72.5, on=False), ewh(temp=119.0, on=True),
                ewh(temp=121.0, on=False)):
        a = device_arrays([dev])
        x = np.array([dev.temp])
        h = 1e-3
        for _ in range(int(round(5.0 / h))):
            x = rk4(x, 1.0 if dev.on else 0.0, a, h)
        assert step_device(dev, 5.0).temp == pytest.approx(x[0], abs=1e-9)


def test_sub_steps_chain_exactly():
    dev = ewh(temp=118.0, on=True)
    one = step_device(dev, 60.0)
    many = dev
    for _ in range(60):
        many = step_device(many, 1.0)
    assert many.temp == pytest.approx(one.temp, abs=1e-9)


def test_ac_hysteresis_switches_at_edges():
    d = ac(temp=71.001, on=True)
    t_off = time_to_switch_off(d)
    after = step_device(d, t_off + 1.0)
    assert not after.on and after.temp <= 71.0
    d = ac(temp=72.999, on=False)
    after = step_device(d, time_to_switch_on(d) + 1.0)
    assert after.on and after.temp >= 73.0


def test_ewh_hysteresis_switches_at_edges():
    d = ewh(temp=122.9, on=True)
    after = step_device(d, time_to_switch_off(d) + 1.0)
    assert not after.on
    d = ewh(temp=117.05, on=False)
    after = step_device(d, time_to_switch_on(d) + 1.0)
    assert after.on


def test_hysteresis_holds_inside_band():
    temps = np.array([71.5, 72.0, 72.5])
    for state in (True, False):
        out = hysteresis(True, temps, np.full(3, state), 71.0, 73.0)
        assert np.all(out == state)


def test_non_finite_temperature_is_rejected():
    with pytest.raises(StateCorruptionError):
        step_device(replace(ac(), temp=float("nan")), 1.0)


def test_power_is_zero_or_rating():
    assert ac(on=True).power == 6.0
    assert ac(on=False).power == 0.0


def test_generic_form_reproduces_dynamics():
    for dev in (ac(temp=72.3, on=True), ewh(temp=121.0, on=False)):
        g = to_generic(dev)
        x = dev.temp
        p = g.power_rating if dev.on else 0.0
        rate, t_off, t_on = equilibria(dev)
        t_eq = t_on if dev.on else t_off
        assert g.a * x + g.b + g.c * p == pytest.approx(-rate * (x - t_eq), rel=1e-12)


def test_generic_switching_condition_matches_thermostat():
    for dev in (ac(), ewh()):
        g = to_generic(dev)
        off_edge = dev.low_edge if dev.kind == AC else dev.high_edge
        on_edge = dev.high_edge if dev.kind == AC else dev.low_edge
        assert g.h1 * off_edge + g.h2 == pytest.approx(g.delta / 2)
        assert g.h1 * on_edge + g.h2 == pytest.approx(-g.delta / 2)


def test_window_durations_sum_to_window():
    d = ac(temp=71.2, on=True)
    t_on, t_off = window_on_off_durations(d, 300.0)
    assert t_on + t_off == 300.0
    assert t_on == pytest.approx(min(300.0, time_to_switch_off(d)))


def test_cycle_times_are_positive():
    t_on, t_off = cycle_times(ac())
    assert 0 < t_on < math.inf and 0 < t_off < math.inf


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dt=st.floats(0.1, 120.0))
def test_step_stays_finite_and_power_binary(seed, dt):
    dev = random_device(np.random.default_rng(seed), 0)
    out = step_device(dev, dt)
    assert math.isfinite(out.temp)
    assert out.power in (0.0, dev.params.power_rating)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.0, 1.0))
def test_residence_time_is_monotone_in_distance_to_edge(seed, frac):
    dev = random_device(np.random.default_rng(seed), 0)
    lo, hi = dev.low_edge, dev.high_edge
    a = replace(dev, temp=lo + frac * (hi - lo))
    b = replace(dev, temp=lo + 0.5 * frac * (hi - lo))
    fn = time_to_switch_off if dev.on else time_to_switch_on
    # for an on AC or off EWH the exit edge is low; otherwise high
    exit_low = (dev.kind == AC) == dev.on
    near, far = (b, a) if exit_low else (a, b)
    assert fn(near) <= fn(far) + 1e-9
