"""Frequency traces: ingestion and parametric event synthesis.

A synthetic event is a deviation ``d(u)`` from nominal, ``u`` seconds after
the event start:

* fall, ``0 <= u <= t_n``: ``d = D (1 - (1 - u/t_n)^2)`` with ``t_n = 2 D / r``,
  so the deviation starts with slope ``r`` (the initial ROCOF), reaches the
  nadir ``D`` with zero slope and the ROCOF decays linearly on the way down;
* recovery, ``u > t_n``: a critically damped return toward the settling
  offset ``s``: ``d = s + (D - s) (1 + v/tau) exp(-v/tau)``, ``v = u - t_n``.

The two pieces join with matching value and slope.  Cascades superpose
several such deviations.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .fitness import Service

NOMINAL_HZ = 60.0
SANITY_BAND = (55.0, 65.0)


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyTrace:
    times: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.freqs, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or t.size < 2:
            raise TraceError("trace needs at least two (time, freq) samples")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(f)):
            raise TraceError("trace contains non-finite values")
        steps = np.diff(t)
        if np.any(steps <= 0):
            raise TraceError("trace times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9):
            raise TraceError("trace sample period must be uniform")
        if f.min() < SANITY_BAND[0] or f.max() > SANITY_BAND[1]:
            raise TraceError(f"trace frequency outside {SANITY_BAND} Hz")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "freqs", f)

    @property
    def sample_period(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.end - self.start

    def at(self, t):
        """Linearly interpolated frequency at time(s) ``t``."""
        return np.interp(t, self.times, self.freqs)

    def resample(self, dt: float) -> "FrequencyTrace":
        n = int(math.floor(self.duration / dt + 1e-9))
        t = self.start + dt * np.arange(n + 1)
        return FrequencyTrace(t, self.at(t))


@dataclass(frozen=True)
class EventSpec:
    """One frequency dip (under) or rise (over).

    ``nadir_deviation`` in Hz, ``initial_rocof`` in Hz/s, times in seconds.
    """
    kind: Service = Service.UNDER
    start_time: float = 0.0
    nadir_deviation: float = 0.3
    initial_rocof: float = 0.1
    recovery_time_constant: float = 10.0
    settle_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Service(self.kind))
        if self.nadir_deviation < 0:
            raise ValueError("nadir_deviation must be >= 0")
        if not self.initial_rocof > 0 or not self.recovery_time_constant > 0:
            raise ValueError("initial_rocof and recovery_time_constant must be > 0")
        if not 0 <= self.settle_offset <= self.nadir_deviation:
            raise ValueError("settle_offset must lie in [0, nadir_deviation]")
        recovery_peak_rate = (self.nadir_deviation - self.settle_offset) / (
            math.e * self.recovery_time_constant)
        if recovery_peak_rate > self.initial_rocof:
            raise ValueError("recovery would be faster than the initial ROCOF; "
                             "increase recovery_time_constant")

    @property
    def time_to_nadir(self) -> float:
        return 2.0 * self.nadir_deviation / self.initial_rocof

    @property
    def nadir_time(self) -> float:
        return self.start_time + self.time_to_nadir

    def deviation(self, t):
        """Unsigned deviation from nominal at absolute time(s) ``t``."""
        u = np.asarray(t, dtype=float) - self.start_time
        big_d, s, tau = self.nadir_deviation, self.settle_offset, self.recovery_time_constant
        if big_d == 0:
            return np.zeros_like(u)
        tn = self.time_to_nadir
        fall = big_d * (1.0 - (1.0 - np.clip(u, 0.0, tn) / tn) ** 2)
        v = np.maximum(u - tn, 0.0) / tau
        recovery = s + (big_d - s) * (1.0 + v) * np.exp(-v)
        return np.where(u <= 0, 0.0, np.where(u <= tn, fall, recovery))

    def shifted(self, dt: float) -> "EventSpec":
        return EventSpec(self.kind, self.start_time + dt, self.nadir_deviation,
                         self.initial_rocof, self.recovery_time_constant, self.settle_offset)


Events = Union[EventSpec, Sequence[EventSpec]]


def synthesize(events: Events, duration: float, dt: float,
               nominal: float = NOMINAL_HZ, check_horizon: bool = True) -> FrequencyTrace:
    """Sample one event, or a cascade of superposed events, on ``[0, duration]``."""
    events = [events] if isinstance(events, EventSpec) else list(events)
    if not events:
        raise ValueError("need at least one event")
    if not dt > 0 or not duration > 0:
        raise ValueError("duration and dt must be > 0")
    kinds = {e.kind for e in events}
    if len(kinds) > 1:
        raise ValueError("a cascade must keep one direction")
    if check_horizon:
        last = max(e.nadir_time + 5 * e.recovery_time_constant for e in events)
        if duration < last:
            raise ValueError(f"duration {duration} s does not cover the recovery (needs {last:.1f} s)")
    n = int(math.floor(duration / dt + 1e-9))
    t = dt * np.arange(n + 1)
    dev = sum(e.deviation(t) for e in events)
    sign = -1.0 if events[0].kind is Service.UNDER else 1.0
    return FrequencyTrace(t, nominal + sign * dev)


def cascade(start_time: float = 0.0, kind: Service = Service.UNDER) -> list[EventSpec]:
    """Two-stage contingency: a first dip followed 10 s later by a deeper one."""
    return [
        EventSpec(kind, start_time, nadir_deviation=0.20, initial_rocof=0.10,
                  recovery_time_constant=10.0, settle_offset=0.12),
        EventSpec(kind, start_time + 10.0, nadir_deviation=0.25, initial_rocof=0.10,
                  recovery_time_constant=20.0, settle_offset=0.10),
    ]


def constant_trace(duration: float, dt: float, value: float = NOMINAL_HZ) -> FrequencyTrace:
    n = int(math.floor(duration / dt + 1e-9))
    t = dt * np.arange(n + 1)
    return FrequencyTrace(t, np.full(t.shape, value))


def ingest(path, dt: float | None = None) -> FrequencyTrace:
    """Read a ``time_s,freq_hz`` file (one header line).

    Non-uniform sampling is linearly resampled onto a uniform grid with step
    ``dt`` (default: the smallest input step).
    """
    times, freqs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for line, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                times.append(float(row[0]))
                freqs.append(float(row[1]))
            except (IndexError, ValueError):
                raise TraceError(f"{path}:{line}: expected 'time_s,freq_hz'") from None
    t = np.array(times)
    f = np.array(freqs)
    if t.size < 2:
        raise TraceError(f"{path}: need at least two samples")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise TraceError(f"{path}: time column is not strictly increasing")
    if f.min() < SANITY_BAND[0] or f.max() > SANITY_BAND[1]:
        raise TraceError(f"{path}: frequency outside {SANITY_BAND} Hz")
    uniform = np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9)
    if dt is None and uniform:
        return FrequencyTrace(t, f)
    dt = float(steps.min()) if dt is None else dt
    n = int(math.floor((t[-1] - t[0]) / dt + 1e-9))
    grid = t[0] + dt * np.arange(n + 1)
    return FrequencyTrace(grid, np.interp(grid, t, f))


def write_trace(trace: FrequencyTrace, path_or_file) -> None:
    def emit(fh):
        w = csv.writer(fh)
        w.writerow(("time_s", "freq_hz"))
        for t, f in zip(trace.times, trace.freqs):
            w.writerow((repr(float(t)), repr(float(f))))

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
