"""Fixed-step simulation of an ensemble responding to a frequency trace.

Every controller tick ``t_k = k dt`` each committed device samples the grid
frequency.  A device whose threshold is crossed switches at the *next* tick
(one-tick actuation delay) and only if its own thermostat does not demand the
opposite state; the thermostat always wins.  Uncommitted devices, and a
shadow copy of the whole population that never sees the grid, follow pure
thermostat logic.  The achieved response is the difference between the
shadow (baseline) consumption and the actual consumption.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .allocation import ThresholdAssignment
from .devices import StateCorruptionError, hysteresis
from .events import FrequencyTrace
from .fitness import Service
from .population import Population

THERMOSTAT = "thermostat"
GRID = "grid"


class ResponseMode(str, Enum):
    TRACKING = "tracking"
    LATCHING = "latching"


class RmvtMode(str, Enum):
    AT_NADIR = "at_nadir"
    TIME_AVERAGED = "time_averaged"


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    trace: FrequencyTrace
    dt: float = 1.0
    window: float = 300.0
    response_mode: ResponseMode = ResponseMode.TRACKING

    def __post_init__(self):
        object.__setattr__(self, "response_mode", ResponseMode(self.response_mode))
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        ticks = self.window / self.dt
        if not self.window > 0 or abs(ticks - round(ticks)) > 1e-9 * max(1.0, ticks):
            raise ValueError("window must be a positive multiple of dt")

    @property
    def n_ticks(self) -> int:
        return int(round(self.window / self.dt))


@dataclass(frozen=True)
class Excursion:
    """A maximal run of samples with non-zero requested response."""
    start: int
    stop: int  # exclusive
    nadir: int
    requested: float
    provided: float

    @property
    def rmvt(self) -> float:
        return abs(1.0 - self.provided / self.requested)


@dataclass
class SimulationResult:
    direction: Service
    height: float
    max_rating: float
    t: np.ndarray
    freq: np.ndarray
    p_sigma: np.ndarray
    p_baseline: np.ndarray
    target: np.ndarray
    achieved: np.ndarray
    switch_t: np.ndarray
    switch_id: np.ndarray
    switch_cause: np.ndarray
    total_power: float
    events: list[Excursion] = field(default_factory=list)
    rmvt: float = math.nan

    def summary(self) -> dict:
        return {
            "rmvt": self.rmvt,
            "requested_kw": [e.requested for e in self.events],
            "provided_kw": [e.provided for e in self.events],
            "event_count": len(self.events),
            "committed_kw": self.height,
        }

    def write_timeseries(self, fh) -> None:
        fh.write("t,freq,p_sigma,target,achieved\n")
        for row in zip(self.t, self.freq, self.p_sigma, self.target, self.achieved):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")

    def write_switch_log(self, fh) -> None:
        fh.write("t,device_id,cause\n")
        for t, i, c in zip(self.switch_t, self.switch_id, self.switch_cause):
            fh.write(f"{float(t)!r},{int(i)},{c}\n")

    def write_summary(self, fh) -> None:
        fh.write(json.dumps(self.summary(), sort_keys=True) + "\n")


def _needs_on(cooling, temp, low, high):
    return np.where(cooling, temp >= high, temp <= low)


def _needs_off(cooling, temp, low, high):
    return np.where(cooling, temp <= low, temp >= high)


def run(population: Population, assignment: ThresholdAssignment, config: SimConfig) -> SimulationResult:
    trace = config.trace
    if trace.duration + 1e-9 < config.window:
        raise SimulationError(f"trace covers {trace.duration} s, window is {config.window} s")
    try:
        idx = population.index_of(assignment.ordered_devices)
    except KeyError as exc:
        raise SimulationError(f"assignment references a device not in the population: {exc}") from None
    n_dev = len(population)
    committed = np.zeros(n_dev, dtype=bool)
    committed[idx] = True
    thr = np.full(n_dev, np.nan)
    thr[idx] = assignment.thresholds
    under = assignment.spec.direction is Service.UNDER
    tracking = config.response_mode is ResponseMode.TRACKING

    n = config.n_ticks
    dt = config.dt
    times = trace.start + dt * np.arange(n + 1)
    omega = trace.at(times)

    cool = population.is_ac
    low, high, power = population.low, population.high, population.power
    temp = population.temp.copy()
    on = population.on.copy()
    b_temp = temp.copy()
    b_on = on.copy()
    forced = np.zeros(n_dev, dtype=bool)

    p_sigma = np.empty(n + 1)
    p_base = np.empty(n + 1)
    log_t, log_id, log_cause = [], [], []

    with np.errstate(invalid="ignore"):
        for k in range(n + 1):
            p_sigma[k] = power @ on
            p_base[k] = power @ b_on
            if k == n:
                break
            w = omega[k]
            request = committed & ((w <= thr) if under else (w >= thr))

            temp = population.step_temps(temp, on, dt)
            b_temp = population.step_temps(b_temp, b_on, dt)
            if not np.all(np.isfinite(temp)):
                raise StateCorruptionError(f"non-finite temperature at t={times[k + 1]}")
            b_on = hysteresis(cool, b_temp, b_on, low, high)

            new_on = hysteresis(cool, temp, on, low, high)
            forced &= new_on == on  # thermostat override releases the device
            if under:
                act = request & new_on & ~forced & ~_needs_on(cool, temp, low, high)
            else:
                act = request & ~new_on & ~forced & ~_needs_off(cool, temp, low, high)
            grid = act.copy()
            new_on[act] = not under
            forced |= act
            if tracking:
                release = forced & ~request
                new_on[release] = under
                forced &= ~release
                grid |= release

            changed = np.flatnonzero(new_on != on)
            if changed.size:
                log_t.append(np.full(changed.size, times[k + 1]))
                log_id.append(population.ids[changed])
                log_cause.append(np.where(grid[changed], GRID, THERMOSTAT))
            on = new_on

    height = assignment.committed_capacity
    target = assignment.spec.target(omega, height)
    achieved = (p_base - p_sigma) if under else (p_sigma - p_base)
    cat = (lambda xs, dtype: np.concatenate(xs) if xs else np.array([], dtype=dtype))
    result = SimulationResult(
        direction=assignment.spec.direction, height=height, max_rating=max(assignment.ratings),
        t=times, freq=omega, p_sigma=p_sigma, p_baseline=p_base, target=target,
        achieved=achieved, switch_t=cat(log_t, float), switch_id=cat(log_id, np.int64),
        switch_cause=cat(log_cause, object), total_power=float(power.sum()),
    )
    result.events = excursions(result)
    result.rmvt = compute_rmvt(result)
    return result


def excursions(result: SimulationResult) -> list[Excursion]:
    """Split the run into excursions and pair request and response at each nadir.

    The nadir of an excursion is its extreme-frequency sample, which is also
    a sample of maximum requested response.
    """
    active = result.target > 0
    edges = np.flatnonzero(np.diff(np.concatenate(([0], active.astype(np.int8), [0]))))
    out = []
    for start, stop in zip(edges[::2], edges[1::2]):
        seg = result.freq[start:stop]
        nadir = start + int(np.argmin(seg) if result.direction is Service.UNDER else np.argmax(seg))
        out.append(Excursion(int(start), int(stop), nadir, float(result.target[nadir]),
                             float(result.achieved[nadir])))
    return out


def compute_rmvt(result: SimulationResult, mode: RmvtMode = RmvtMode.AT_NADIR) -> float:
    """``|1 - provided / requested|``; NaN when nothing was ever requested."""
    mode = RmvtMode(mode)
    if mode is RmvtMode.AT_NADIR:
        events = result.events or excursions(result)
        if not events:
            return math.nan
        return float(np.mean([e.rmvt for e in events]))
    mask = result.target > 0.01 * result.height
    if not mask.any():
        return math.nan
    return float(abs(1.0 - np.mean(result.achieved[mask] / result.target[mask])))


def static_droop_sweep(assignment: ThresholdAssignment, available: Optional[Mapping[int, bool]] = None,
                       n_points: int = 2001, omegas: Optional[Sequence[float]] = None):
    """Quasi-static shed power over the band, next to the ideal droop line.

    Returns ``(omega, shed, target)``.  Devices marked unavailable never shed.
    """
    spec = assignment.spec
    if omegas is None:
        omegas = np.linspace(spec.omega_l, spec.omega_u, n_points)
    omegas = np.asarray(omegas, dtype=float)
    thr = np.asarray(assignment.thresholds)
    ratings = np.asarray(assignment.ratings)
    if available is not None:
        ratings = ratings * np.array([bool(available.get(i, True)) for i in assignment.ordered_devices])
    if spec.direction is Service.UNDER:
        hit = thr[None, :] >= omegas[:, None]
    else:
        hit = thr[None, :] <= omegas[:, None]
    shed = hit.astype(float) @ ratings
    return omegas, shed, spec.target(omegas, assignment.committed_capacity)


def band_entry_rocof(trace: FrequencyTrace, assignment: ThresholdAssignment) -> float:
    """Finite-difference |ROCOF| where the trace first enters the response band."""
    spec = assignment.spec
    f = trace.freqs
    inside = (f < spec.omega_u) if spec.direction is Service.UNDER else (f > spec.omega_l)
    hits = np.flatnonzero(inside)
    if hits.size == 0 or hits[0] == 0:
        return 0.0
    k = hits[0]
    return float(abs(f[k] - f[k - 1]) / trace.sample_period)


def evaluate_sampling_error(population: Population, assignment: ThresholdAssignment,
                            trace: FrequencyTrace, dts: Iterable[float],
                            window: Optional[float] = None) -> list[dict]:
    """Peak tracking error per controller period, with the linear estimate.

    The measured error is ``max_k (target - achieved) / height`` over the
    controller ticks; the estimate is ``dt |dw/dt| / (w_u - w_l)`` with the
    ROCOF taken at band entry.
    """
    rocof = band_entry_rocof(trace, assignment)
    rows = []
    for dt in dts:
        span = window if window is not None else math.floor(trace.duration / dt + 1e-9) * dt
        res = run(population, assignment, SimConfig(trace=trace, dt=dt, window=span))
        err = float(np.max((res.target - res.achieved) / res.height))
        rows.append({"dt": float(dt), "peak_error": err,
                     "estimate": dt * rocof / assignment.spec.width, "rocof": rocof})
    return rows
