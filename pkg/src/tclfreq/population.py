"""Device populations: vectorised state, random generation and CSV files.

Population file columns (one device per line, header required)::

    id,kind,power_rating,setpoint,deadband,ambient,
    thermal_resistance,thermal_capacitance,efficiency,
    tank_capacitance,flow_rate,specific_heat,loss_coeff,inlet_temp,
    temp,on

AC rows leave the tank columns empty and EWH rows leave the room columns
empty.  ``on`` is 0 or 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .devices import (
    AC, EWH, SECONDS_PER_HOUR, WATER_SPECIFIC_HEAT, AcParams, DeviceRecord, EwhParams,
    ac_time_off_to_on, ac_time_on_to_off, ewh_time_off_to_on, ewh_time_on_to_off,
)

POPULATION_COLUMNS = (
    "id", "kind", "power_rating", "setpoint", "deadband", "ambient",
    "thermal_resistance", "thermal_capacitance", "efficiency",
    "tank_capacitance", "flow_rate", "specific_heat", "loss_coeff", "inlet_temp",
    "temp", "on",
)
_AC_FIELDS = ("thermal_resistance", "thermal_capacitance", "efficiency")
_EWH_FIELDS = ("tank_capacitance", "flow_rate", "specific_heat", "loss_coeff", "inlet_temp")


class Population:
    """Struct-of-arrays view of a list of :class:`DeviceRecord`.

    Parameters are fixed at construction; ``temp`` and ``on`` are the
    window-start state and can be swapped with :meth:`with_state`.
    """

    def __init__(self, records: Sequence[DeviceRecord]):
        self.records = list(records)
        ids = [d.id for d in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate device ids in population")
        n = len(self.records)
        self.ids = np.array(ids, dtype=np.int64)
        self.is_ac = np.array([d.kind == AC for d in self.records], dtype=bool)
        self.power = np.array([d.params.power_rating for d in self.records], dtype=float)
        self.low = np.array([d.low_edge for d in self.records], dtype=float)
        self.high = np.array([d.high_edge for d in self.records], dtype=float)
        self.temp = np.array([d.temp for d in self.records], dtype=float)
        self.on = np.array([d.on for d in self.records], dtype=bool)

        self.rate = np.empty(n)
        self.teq_off = np.empty(n)
        self.teq_on = np.empty(n)
        for i, d in enumerate(self.records):
            p = d.params
            if d.kind == AC:
                self.rate[i] = 1.0 / (p.thermal_capacitance * p.thermal_resistance * SECONDS_PER_HOUR)
                self.teq_off[i] = p.ambient
                self.teq_on[i] = p.ambient - p.efficiency * p.power_rating * p.thermal_resistance
            else:
                a = p.a
                self.rate[i] = a / SECONDS_PER_HOUR
                self.teq_off[i] = p.b(0) / a
                self.teq_on[i] = p.b(1) / a
        self._index = {int(i): k for k, i in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.records)

    def index_of(self, device_ids) -> np.ndarray:
        try:
            return np.array([self._index[int(i)] for i in device_ids], dtype=np.int64)
        except KeyError as exc:
            raise KeyError(f"unknown device id {exc.args[0]}") from None

    def with_state(self, temp, on) -> "Population":
        temp = np.asarray(temp, dtype=float)
        on = np.asarray(on, dtype=bool)
        records = [replace(d, temp=float(t), on=bool(o)) for d, t, o in zip(self.records, temp, on)]
        new = object.__new__(Population)
        new.__dict__.update(self.__dict__)
        new.records = records
        new.temp = temp.copy()
        new.on = on.copy()
        return new

    def step_temps(self, temp, on, dt):
        """Exact temperature update over ``dt`` seconds (no switching)."""
        teq = np.where(on, self.teq_on, self.teq_off)
        return teq + (temp - teq) * np.exp(-self.rate * dt)

    def residence_times(self, temp=None):
        """Closed-form ``(t_on->off, t_off->on)`` in seconds for every device."""
        temp = self.temp if temp is None else np.asarray(temp, dtype=float)
        n = len(self)
        t_off = np.full(n, np.inf)
        t_on = np.full(n, np.inf)
        ac = np.flatnonzero(self.is_ac)
        ewh = np.flatnonzero(~self.is_ac)
        if ac.size:
            g = _gather(self.records, ac, ("ambient", "thermal_resistance", "thermal_capacitance",
                                           "efficiency", "power_rating", "setpoint", "deadband"))
            t_off[ac] = ac_time_on_to_off(temp[ac], g["ambient"], g["thermal_resistance"],
                                          g["thermal_capacitance"], g["efficiency"],
                                          g["power_rating"], g["setpoint"], g["deadband"])
            t_on[ac] = ac_time_off_to_on(temp[ac], g["ambient"], g["thermal_resistance"],
                                         g["thermal_capacitance"], g["setpoint"], g["deadband"])
        if ewh.size:
            g = _gather(self.records, ewh, ("setpoint", "deadband"))
            a = np.array([self.records[i].params.a for i in ewh])
            b0 = np.array([self.records[i].params.b(0) for i in ewh])
            b1 = np.array([self.records[i].params.b(1) for i in ewh])
            t_off[ewh] = ewh_time_on_to_off(temp[ewh], a, b1, g["setpoint"], g["deadband"])
            t_on[ewh] = ewh_time_off_to_on(temp[ewh], a, b0, g["setpoint"], g["deadband"])
        return t_off, t_on

    def cycle_times(self):
        """Full on and off dwell times of each device when cycling steadily."""
        on_start = np.where(self.is_ac, self.high, self.low)
        off_start = np.where(self.is_ac, self.low, self.high)
        t_on_cycle, _ = self.residence_times(on_start)
        _, t_off_cycle = self.residence_times(off_start)
        return t_on_cycle, t_off_cycle


def _gather(records, idx, names):
    return {name: np.array([getattr(records[i].params, name) for i in idx], dtype=float)
            for name in names}


# --- generation -------------------------------------------------------------

DEFAULT_AC_RANGES = {
    "power_rating": (5.5, 6.5),
    "thermal_resistance": (2.0, 2.4),
    "thermal_capacitance": (3.24, 3.96),
    "setpoint": (70.0, 74.0),
    "ambient": (80.0, 95.0),
    "efficiency": (2.5, 2.5),
    "deadband": (2.0, 2.0),
}

# Water-heater defaults are engineering values for a 50 gal, 4.5 kW class
# tank; they are not taken from a published parameter table.
DEFAULT_EWH_RANGES = {
    "power_rating": (4.0, 5.0),
    "tank_capacitance": (0.10, 0.14),
    "flow_rate": (0.0, 40.0),
    "specific_heat": (WATER_SPECIFIC_HEAT, WATER_SPECIFIC_HEAT),
    "loss_coeff": (0.002, 0.004),
    "inlet_temp": (50.0, 60.0),
    "ambient": (65.0, 75.0),
    "setpoint": (118.0, 124.0),
    "deadband": (4.0, 8.0),
}


@dataclass
class PopulationSpec:
    n_ac: int = 200
    n_ewh: int = 200
    ac_ranges: dict = field(default_factory=lambda: dict(DEFAULT_AC_RANGES))
    ewh_ranges: dict = field(default_factory=lambda: dict(DEFAULT_EWH_RANGES))

    def __post_init__(self):
        if self.n_ac < 0 or self.n_ewh < 0:
            raise ValueError("device counts must be >= 0")
        for table, defaults in ((self.ac_ranges, DEFAULT_AC_RANGES),
                                (self.ewh_ranges, DEFAULT_EWH_RANGES)):
            unknown = set(table) - set(defaults)
            if unknown:
                raise ValueError(f"unknown parameter ranges: {sorted(unknown)}")
            for name, default in defaults.items():
                lo, hi = table.setdefault(name, default)
                table[name] = (float(lo), float(hi))
                if lo > hi:
                    raise ValueError(f"empty range for {name}: [{lo}, {hi}]")


def _draw(rng, ranges, n):
    return {name: rng.uniform(lo, hi, n) for name, (lo, hi) in sorted(ranges.items())}


def generate_population(spec: PopulationSpec, seed) -> Population:
    """Draw device parameters uniformly from the configured ranges.

    Initial states are drawn by :func:`draw_initial_state` from the same
    generator, so one seed fixes the whole population.
    """
    rng = np.random.default_rng(seed)
    records = []
    ac = _draw(rng, spec.ac_ranges, spec.n_ac)
    for i in range(spec.n_ac):
        params = AcParams(**{k: float(v[i]) for k, v in ac.items()})
        records.append(DeviceRecord(id=len(records), kind=AC, params=params,
                                    temp=params.setpoint, on=False))
    ewh = _draw(rng, spec.ewh_ranges, spec.n_ewh)
    for i in range(spec.n_ewh):
        params = EwhParams(**{k: float(v[i]) for k, v in ewh.items()})
        records.append(DeviceRecord(id=len(records), kind=EWH, params=params,
                                    temp=params.setpoint, on=False))
    pop = Population(records)
    temp, on = draw_initial_state(pop, rng)
    return pop.with_state(temp, on)


def draw_initial_state(pop: Population, rng) -> tuple[np.ndarray, np.ndarray]:
    """Temperatures uniform in each deadband, on with the steady duty cycle."""
    n = len(pop)
    temp = pop.low + (pop.high - pop.low) * rng.uniform(0.0, 1.0, n)
    t_on, t_off = pop.cycle_times()
    with np.errstate(invalid="ignore"):
        duty = np.where(np.isinf(t_on), 1.0, np.where(np.isinf(t_off), 0.0, t_on / (t_on + t_off)))
    on = rng.uniform(0.0, 1.0, n) < duty
    return temp, on


# --- files ------------------------------------------------------------------

def write_population(pop: Population | Sequence[DeviceRecord], path_or_file) -> None:
    records = pop.records if isinstance(pop, Population) else list(pop)

    def emit(fh):
        w = csv.writer(fh)
        w.writerow(POPULATION_COLUMNS)
        for d in records:
            p = d.params
            row = {"id": d.id, "kind": d.kind, "temp": repr(d.temp), "on": int(d.on)}
            for name in ("power_rating", "setpoint", "deadband", "ambient",
                         *(_AC_FIELDS if d.kind == AC else _EWH_FIELDS)):
                row[name] = repr(float(getattr(p, name)))
            w.writerow([row.get(c, "") for c in POPULATION_COLUMNS])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def read_population(path) -> Population:
    records = []
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(POPULATION_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"population file missing columns: {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            kind = row["kind"].strip().upper()
            if kind not in (AC, EWH):
                raise ValueError(f"{path}:{line}: unknown device kind {row['kind']!r}")
            names = ("power_rating", "setpoint", "deadband", "ambient",
                     *(_AC_FIELDS if kind == AC else _EWH_FIELDS))
            try:
                values = {n: float(row[n]) for n in names}
                params = AcParams(**values) if kind == AC else EwhParams(**values)
                records.append(DeviceRecord(id=int(row["id"]), kind=kind, params=params,
                                            temp=float(row["temp"]), on=bool(int(row["on"]))))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
    return Population(records)
