"""Switching thermostatic load models.

Two device kinds are supported, both first-order linear thermal models with a
hysteresis deadband around the setpoint:

* ``AC``  - residential air-conditioner (room temperature, cools when on)
* ``EWH`` - electric water-heater, one-mass tank model (heats when on)

Units: temperatures in degF, power in kW, thermal capacitance in kWh/degF,
thermal resistance in degF/kW, water flow in lb/h.  Model time constants are
therefore in hours; every public function takes and returns seconds.

Exogenous inputs (ambient, inlet temperature, water draw) are held constant
over a step and over a control window, so every trajectory between two
switching events is an exact exponential relaxation toward an equilibrium
temperature.  This is used both for stepping and for the closed-form residence
times.

Both kinds map onto the generic switched linear form

    dx/dt = a x + b + c p,     p -> 0 if h1 x + h2 >= delta/2,
                               p -> P if h1 x + h2 <= -delta/2

with ``h1 = -1, h2 = T_set`` for an AC and ``h1 = +1, h2 = -T_set`` for an
EWH (see :func:`to_generic`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

AC = "AC"
EWH = "EWH"
KINDS = (AC, EWH)

SECONDS_PER_HOUR = 3600.0

# 1 BTU/(lb degF) expressed in kWh/(lb degF)
WATER_SPECIFIC_HEAT = 2.9307107e-4


class StateCorruptionError(ValueError):
    """Raised when a device state becomes non-finite."""


class ContractError(ValueError):
    """Raised when an operation is called on a device in the wrong state."""


@dataclass(frozen=True)
class AcParams:
    power_rating: float  # kW
    thermal_resistance: float  # degF/kW
    thermal_capacitance: float  # kWh/degF
    efficiency: float
    setpoint: float  # degF
    deadband: float  # degF
    ambient: float  # degF

    def __post_init__(self):
        for name in ("power_rating", "thermal_resistance", "thermal_capacitance",
                     "efficiency", "deadband"):
            if not getattr(self, name) > 0:
                raise ValueError(f"AcParams.{name} must be > 0")
        if not self.setpoint + self.deadband / 2 < self.ambient:
            raise ValueError("AC ambient must lie above the deadband (cooling regime)")


@dataclass(frozen=True)
class EwhParams:
    power_rating: float  # kW
    tank_capacitance: float  # kWh/degF
    flow_rate: float  # lb/h
    specific_heat: float  # kWh/(lb degF)
    loss_coeff: float  # kW/degF
    inlet_temp: float  # degF
    ambient: float  # degF
    setpoint: float  # degF
    deadband: float  # degF

    def __post_init__(self):
        for name in ("power_rating", "tank_capacitance", "specific_heat",
                     "loss_coeff", "deadband"):
            if not getattr(self, name) > 0:
                raise ValueError(f"EwhParams.{name} must be > 0")
        if self.flow_rate < 0:
            raise ValueError("EwhParams.flow_rate must be >= 0")
        if not self.inlet_temp < self.setpoint - self.deadband / 2:
            raise ValueError("EWH inlet water must be colder than the deadband")

    @property
    def a(self) -> float:
        """Relaxation rate ``(mdot Cp + W) / Cw`` in 1/h."""
        return (self.flow_rate * self.specific_heat + self.loss_coeff) / self.tank_capacitance

    def b(self, s: int) -> float:
        """Drive term ``(s P + mdot Cp T_in + W T_a) / Cw`` in degF/h."""
        return (s * self.power_rating + self.flow_rate * self.specific_heat * self.inlet_temp
                + self.loss_coeff * self.ambient) / self.tank_capacitance


DeviceParams = Union[AcParams, EwhParams]


@dataclass(frozen=True)
class GenericDeviceParams:
    """Generic switched-linear form of a device, rates per second."""
    a: float
    b: float
    c: float
    h1: float
    h2: float
    delta: float
    power_rating: float


@dataclass(frozen=True)
class DeviceRecord:
    id: int
    kind: str
    params: DeviceParams
    temp: float
    on: bool
    threshold: Optional[float] = None
    responded: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown device kind {self.kind!r}")
        expected = AcParams if self.kind == AC else EwhParams
        if not isinstance(self.params, expected):
            raise TypeError(f"{self.kind} device needs {expected.__name__}")

    @property
    def power(self) -> float:
        return self.params.power_rating if self.on else 0.0

    @property
    def low_edge(self) -> float:
        return self.params.setpoint - self.params.deadband / 2

    @property
    def high_edge(self) -> float:
        return self.params.setpoint + self.params.deadband / 2


def to_generic(dev: DeviceRecord) -> GenericDeviceParams:
    """Express a device in the generic ``a x + b + c p`` form (per-second rates)."""
    p = dev.params
    h = SECONDS_PER_HOUR
    if dev.kind == AC:
        cr = p.thermal_capacitance * p.thermal_resistance
        return GenericDeviceParams(a=-1.0 / cr / h, b=p.ambient / cr / h,
                                   c=-p.efficiency / p.thermal_capacitance / h,
                                   h1=-1.0, h2=p.setpoint, delta=p.deadband,
                                   power_rating=p.power_rating)
    return GenericDeviceParams(a=-p.a / h, b=p.b(0) / h, c=1.0 / p.tank_capacitance / h,
                               h1=1.0, h2=-p.setpoint, delta=p.deadband,
                               power_rating=p.power_rating)


def equilibria(dev: DeviceRecord) -> tuple[float, float, float]:
    """Return ``(rate [1/s], T_eq off, T_eq on)`` of the device's two modes."""
    p = dev.params
    if dev.kind == AC:
        rate = 1.0 / (p.thermal_capacitance * p.thermal_resistance * SECONDS_PER_HOUR)
        return rate, p.ambient, p.ambient - p.efficiency * p.power_rating * p.thermal_resistance
    a = p.a
    return a / SECONDS_PER_HOUR, p.b(0) / a, p.b(1) / a


def hysteresis(cooling, temp, on, low, high):
    """Thermostat switching rule, vectorised over numpy arrays.

    Cooling devices (AC): on at ``T >= high``, off at ``T <= low``.
    Heating devices (EWH): on at ``T <= low``, off at ``T >= high``.
    """
    turn_on = np.where(cooling, temp >= high, temp <= low)
    turn_off = np.where(cooling, temp <= low, temp >= high)
    return np.where(turn_on, True, np.where(turn_off, False, on))


def step_device(dev: DeviceRecord, dt: float, now: float = 0.0) -> DeviceRecord:
    """Advance a device by ``dt`` seconds using the exact exponential solution.

    Exogenous inputs are constant over ``[now, now + dt]``.  Thermostat
    switching is only evaluated at the end of the step.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not math.isfinite(dev.temp):
        raise StateCorruptionError(f"device {dev.id}: non-finite temperature {dev.temp}")
    rate, t_off, t_on = equilibria(dev)
    t_eq = t_on if dev.on else t_off
    temp = t_eq + (dev.temp - t_eq) * math.exp(-rate * dt)
    if not math.isfinite(temp):
        raise StateCorruptionError(f"device {dev.id}: non-finite temperature after step")
    on = bool(hysteresis(dev.kind == AC, temp, dev.on, dev.low_edge, dev.high_edge))
    return replace(dev, temp=temp, on=on)


# --- closed-form residence times -------------------------------------------
# Array-friendly so that fitness evaluation of a whole population is a single
# call; all return seconds, +inf when the boundary is never reached.

def ac_time_on_to_off(temp, ambient, resistance, capacitance, efficiency, power, setpoint, deadband):
    temp, ambient = np.asarray(temp, float), np.asarray(ambient, float)
    drop = efficiency * power * resistance
    low = setpoint - deadband / 2
    num = temp - ambient + drop
    den = low - ambient + drop
    with np.errstate(divide="ignore", invalid="ignore"):
        t = capacitance * resistance * np.log(num / den) * SECONDS_PER_HOUR
    t = np.where(den > 0, t, np.inf)
    return np.where(temp <= low, 0.0, t)


def ac_time_off_to_on(temp, ambient, resistance, capacitance, setpoint, deadband):
    temp, ambient = np.asarray(temp, float), np.asarray(ambient, float)
    high = setpoint + deadband / 2
    num = temp - ambient
    den = high - ambient
    with np.errstate(divide="ignore", invalid="ignore"):
        t = capacitance * resistance * np.log(num / den) * SECONDS_PER_HOUR
    t = np.where(den < 0, t, np.inf)
    return np.where(temp >= high, 0.0, t)


def ewh_time_on_to_off(temp, a, b_on, setpoint, deadband):
    temp = np.asarray(temp, float)
    high = setpoint + deadband / 2
    num = -a * temp + b_on
    den = -a * high + b_on
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.log(num / den) / a * SECONDS_PER_HOUR
    t = np.where(den > 0, t, np.inf)
    return np.where(temp >= high, 0.0, t)


def ewh_time_off_to_on(temp, a, b_off, setpoint, deadband):
    temp = np.asarray(temp, float)
    low = setpoint - deadband / 2
    num = -a * temp + b_off
    den = -a * low + b_off
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.log(num / den) / a * SECONDS_PER_HOUR
    t = np.where(den < 0, t, np.inf)
    return np.where(temp <= low, 0.0, t)


def time_to_switch_off(dev: DeviceRecord) -> float:
    """Time an ``on`` device stays on before its thermostat turns it off."""
    if not dev.on:
        raise ContractError(f"device {dev.id} is off")
    p = dev.params
    if dev.kind == AC:
        t = ac_time_on_to_off(dev.temp, p.ambient, p.thermal_resistance, p.thermal_capacitance,
                              p.efficiency, p.power_rating, p.setpoint, p.deadband)
    else:
        t = ewh_time_on_to_off(dev.temp, p.a, p.b(1), p.setpoint, p.deadband)
    return float(t)


def time_to_switch_on(dev: DeviceRecord) -> float:
    """Time an ``off`` device stays off before its thermostat turns it on."""
    if dev.on:
        raise ContractError(f"device {dev.id} is on")
    p = dev.params
    if dev.kind == AC:
        t = ac_time_off_to_on(dev.temp, p.ambient, p.thermal_resistance, p.thermal_capacitance,
                              p.setpoint, p.deadband)
    else:
        t = ewh_time_off_to_on(dev.temp, p.a, p.b(0), p.setpoint, p.deadband)
    return float(t)


def on_off_split(on, t_on_off, t_off_on, window):
    """Split a window into on/off time given the residence times (arrays ok)."""
    on = np.asarray(on, dtype=bool)
    t_on = np.where(on, np.minimum(window, t_on_off), np.maximum(0.0, window - t_off_on))
    return t_on, window - t_on


def window_on_off_durations(dev: DeviceRecord, window: float) -> tuple[float, float]:
    """Time spent on and off during ``[t0, t0 + window]`` (single-switch horizon)."""
    if not window > 0:
        raise ValueError("window must be > 0")
    if dev.on:
        t_on = min(window, time_to_switch_off(dev))
    else:
        t_on = max(0.0, window - time_to_switch_on(dev))
    return t_on, window - t_on


def cycle_times(dev: DeviceRecord) -> tuple[float, float]:
    """Full on and off dwell times of a steadily cycling device."""
    on_from_top = replace(dev, temp=dev.high_edge if dev.kind == AC else dev.low_edge, on=True)
    off_from_bottom = replace(dev, temp=dev.low_edge if dev.kind == AC else dev.high_edge, on=False)
    return time_to_switch_off(on_from_top), time_to_switch_on(off_from_bottom)
