"""Scenario configuration, the end-to-end pipeline, and Monte Carlo drivers.

One scenario run: draw the window-start state of a fixed population, score
every device, commit ``commitment * [guaranteed capacity]`` in priority (or
shuffled) order, assign thresholds, and simulate the window against the
frequency trace.

Seeding: the master ``seed`` fixes the device parameters.  Run ``r`` of a
table cell draws its initial state, event time and shuffle from
``SeedSequence(seed, spawn_key=(cell..., r))``, so results do not depend on
execution order or worker count, and both allocation modes see the same
initial conditions.
"""
from __future__ import annotations

import dataclasses
import functools
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import yaml

from . import events as ev
from .allocation import (OVER_BAND, UNDER_BAND, ResponseCurveSpec, ThresholdAssignment, allocate,
                         max_guaranteed_capacity, prioritize)
from .fitness import FitnessReport, Service, population_fitness
from .population import Population, PopulationSpec, draw_initial_state, generate_population
from .simulate import ResponseMode, SimConfig, SimulationResult, run

PLACEMENTS = {"start": 0.05, "middle": 0.50, "end": 0.90}
MODES = ("priority", "shuffled")
TABLE_WINDOWS = (300.0, 900.0)
SWEEP_LEVELS = (0.05, 0.10, 0.20, 0.40, 0.60, 0.80, 1.00, 1.10, 1.20)


@dataclass(frozen=True)
class EventShape:
    """One stage of a synthetic event, timed relative to the event start."""
    offset: float = 0.0
    nadir_deviation: float = 0.3
    initial_rocof: float = 0.1
    recovery_time_constant: float = 10.0
    settle_offset: float = 0.0

    def at(self, start: float, kind: Service, severity: float = 1.0) -> ev.EventSpec:
        """Concrete event; ``severity`` scales depth, ROCOF and settling offset."""
        return ev.EventSpec(kind, start + self.offset, severity * self.nadir_deviation,
                            severity * self.initial_rocof, self.recovery_time_constant,
                            severity * self.settle_offset)


CASCADE = (
    EventShape(0.0, 0.20, 0.10, 10.0, 0.12),
    EventShape(10.0, 0.25, 0.10, 20.0, 0.10),
)
# Single dip for the commitment sweep.  With severity drawn from [1, 2] about
# half the nadirs land inside the band and half saturate it.
SWEEP_DIP = (EventShape(0.0, 0.20, 0.06, 30.0, 0.10),)
SWEEP_SEVERITY = (1.0, 2.0)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    population: PopulationSpec = field(default_factory=PopulationSpec)
    direction: Service = Service.UNDER
    under_band: tuple[float, float] = UNDER_BAND
    over_band: tuple[float, float] = OVER_BAND
    commitment: float = 0.6
    window: float = 300.0
    placement: str = "start"
    allocation: str = "priority"
    dt: float = 1.0
    trace_dt: float = 0.1
    events: tuple[EventShape, ...] = CASCADE
    severity: tuple[float, float] = (1.0, 1.0)
    trace_file: Optional[str] = None
    eps_p: Optional[float] = None
    response_mode: ResponseMode = ResponseMode.TRACKING
    runs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "direction", Service(self.direction))
        object.__setattr__(self, "response_mode", ResponseMode(self.response_mode))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "under_band", tuple(float(x) for x in self.under_band))
        object.__setattr__(self, "over_band", tuple(float(x) for x in self.over_band))
        object.__setattr__(self, "severity", tuple(float(x) for x in self.severity))
        if not 0 < self.severity[0] <= self.severity[1]:
            raise ValueError("severity range must satisfy 0 < lo <= hi")
        if not self.commitment > 0:
            raise ValueError("commitment level must be > 0")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.placement not in PLACEMENTS and self.placement != "random":
            raise ValueError(f"placement must be one of {sorted(PLACEMENTS)} or 'random'")
        if self.allocation not in MODES:
            raise ValueError(f"allocation must be one of {MODES}")
        if not self.events and self.trace_file is None:
            raise ValueError("need synthetic events or a trace file")

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    @property
    def band(self) -> tuple[float, float]:
        return self.under_band if self.direction is Service.UNDER else self.over_band


# --- config files -----------------------------------------------------------

def config_to_dict(cfg: ScenarioConfig) -> dict:
    d = {
        "seed": cfg.seed,
        "population": {
            "n_ac": cfg.population.n_ac,
            "n_ewh": cfg.population.n_ewh,
            "ac_ranges": {k: list(v) for k, v in cfg.population.ac_ranges.items()},
            "ewh_ranges": {k: list(v) for k, v in cfg.population.ewh_ranges.items()},
        },
        "direction": cfg.direction.value,
        "under_band": list(cfg.under_band),
        "over_band": list(cfg.over_band),
        "commitment": cfg.commitment,
        "window": cfg.window,
        "placement": cfg.placement,
        "allocation": cfg.allocation,
        "dt": cfg.dt,
        "trace_dt": cfg.trace_dt,
        "events": [dataclasses.asdict(e) for e in cfg.events],
        "severity": list(cfg.severity),
        "trace_file": cfg.trace_file,
        "eps_p": cfg.eps_p,
        "response_mode": cfg.response_mode.value,
        "runs": cfg.runs,
    }
    return d


def config_from_dict(d: dict) -> ScenarioConfig:
    d = dict(d)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "seed" not in d:
        raise ValueError("config needs a seed")
    if "population" in d:
        p = dict(d["population"])
        for key in ("ac_ranges", "ewh_ranges"):
            if key in p:
                p[key] = {k: tuple(v) for k, v in p[key].items()}
        d["population"] = PopulationSpec(**p)
    if "events" in d:
        d["events"] = tuple(EventShape(**e) for e in d["events"])
    for key in ("under_band", "over_band", "severity"):
        if key in d:
            d[key] = tuple(d[key])
    return ScenarioConfig(**d)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def load_config(text: str) -> ScenarioConfig:
    return config_from_dict(yaml.safe_load(text) or {})


# --- pipeline ---------------------------------------------------------------

@dataclass
class ScenarioOutcome:
    result: SimulationResult
    reports: list[FitnessReport]
    assignment: ThresholdAssignment
    guaranteed_capacity: float
    event_start: float


@functools.lru_cache(maxsize=8)
def _population(seed: int, spec_yaml: str) -> Population:
    spec = PopulationSpec(**_spec_from_yaml(spec_yaml))
    return generate_population(spec, seed)


def _spec_from_yaml(text: str) -> dict:
    p = yaml.safe_load(text)
    for key in ("ac_ranges", "ewh_ranges"):
        p[key] = {k: tuple(v) for k, v in p[key].items()}
    return p


def base_population(cfg: ScenarioConfig) -> Population:
    """The fixed population (parameters and default state) of a config."""
    spec = config_to_dict(cfg)["population"]
    return _population(cfg.seed, yaml.safe_dump(spec, sort_keys=True))


def build_trace(cfg: ScenarioConfig, event_start: float, severity: float = 1.0) -> ev.FrequencyTrace:
    if cfg.trace_file is not None:
        return ev.ingest(cfg.trace_file)
    specs = [shape.at(event_start, cfg.direction, severity) for shape in cfg.events]
    return ev.synthesize(specs, cfg.window, cfg.trace_dt, check_horizon=False)


def event_start_time(cfg: ScenarioConfig, rng) -> float:
    """Event onset; random onsets keep every nadir inside the window."""
    if cfg.placement == "random":
        last_nadir = max((s.offset + 2.0 * s.nadir_deviation / s.initial_rocof for s in cfg.events),
                         default=0.0)
        hi = cfg.window - last_nadir - 2.0 * cfg.dt
        if hi <= 0:
            raise ValueError("window too short to contain the event nadir")
        return float(rng.uniform(0.0, hi))
    return PLACEMENTS[cfg.placement] * cfg.window


def responsive_now(pop: Population, direction: Service) -> np.ndarray:
    return pop.on if direction is Service.UNDER else ~pop.on


def shuffled_order(reports: Sequence[FitnessReport], pop: Population, direction: Service, rng):
    """Random order among devices in the responsive state now, then the rest.

    This is the baseline an aggregator without any forward-looking fitness
    information would use.
    """
    ready = responsive_now(pop, direction)
    first = rng.permutation(np.flatnonzero(ready))
    rest = rng.permutation(np.flatnonzero(~ready))
    return [reports[i] for i in np.concatenate((first, rest))]


def run_pipeline(cfg: ScenarioConfig, pop: Population, event_start: float, severity: float = 1.0,
                 rng=None) -> ScenarioOutcome:
    """Score, commit, assign and simulate ``pop`` in its current state."""
    trace = build_trace(cfg, event_start, severity)
    reports = population_fitness(pop, cfg.direction, cfg.window)
    cap = max_guaranteed_capacity(reports)
    if cap <= 0:
        raise ValueError("no device is fit for the whole window; guaranteed capacity is zero")
    lo, hi = cfg.band
    spec = ResponseCurveSpec(cfg.direction, lo, hi, cfg.commitment * cap)
    if cfg.allocation == "priority":
        order = prioritize(reports)
    else:
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        order = shuffled_order(reports, pop, cfg.direction, rng)
    assignment = allocate(reports, spec, cfg.eps_p, order=order)
    sim = SimConfig(trace=trace, dt=cfg.dt, window=cfg.window, response_mode=cfg.response_mode)
    return ScenarioOutcome(run(pop, assignment, sim), reports, assignment, cap, event_start)


def run_scenario(cfg: ScenarioConfig, run_index: int = 0, cell: tuple[int, ...] = (),
                 population: Optional[Population] = None) -> ScenarioOutcome:
    """One Monte Carlo run: fresh initial state, event time and severity."""
    base = base_population(cfg) if population is None else population
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(*cell, run_index)))
    temp, on = draw_initial_state(base, rng)
    pop = base.with_state(temp, on)
    start = event_start_time(cfg, rng)
    severity = float(rng.uniform(*cfg.severity))
    return run_pipeline(cfg, pop, start, severity, rng)


def _rmvt_task(args) -> float:
    cfg, run_index, cell = args
    return run_scenario(cfg, run_index, cell).result.rmvt


def _map(tasks, workers: int):
    if workers <= 1:
        return [_rmvt_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_rmvt_task, tasks, chunksize=8))


def montecarlo(cfg: ScenarioConfig, n_runs: Optional[int] = None, workers: int = 1,
               windows: Sequence[float] = TABLE_WINDOWS,
               placements: Sequence[str] = tuple(PLACEMENTS), modes: Sequence[str] = MODES) -> list[dict]:
    """Mean RMVT per (window, event placement, allocation mode)."""
    n_runs = cfg.runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    cells, tasks = [], []
    for wi, window in enumerate(windows):
        for pi, place in enumerate(placements):
            for mode in modes:
                c = cfg.replace(window=float(window), placement=place, allocation=mode)
                cells.append((window, place, mode))
                tasks.extend((c, r, (1, wi, pi)) for r in range(n_runs))
    values = np.array(_map(tasks, workers)).reshape(len(cells), n_runs)
    rows = []
    for (window, place, mode), v in zip(cells, values):
        rows.append({"window_min": window / 60.0, "event": place, "mode": mode, "runs": n_runs,
                     "mean_rmvt_pct": 100 * float(np.nanmean(v)), "std_rmvt_pct": 100 * float(np.nanstd(v))})
    return rows


def commitment_sweep(cfg: ScenarioConfig, levels: Sequence[float] = SWEEP_LEVELS,
                     n_runs: Optional[int] = None, workers: int = 1) -> list[dict]:
    """Mean RMVT per commitment level (fraction of guaranteed capacity)."""
    n_runs = cfg.runs if n_runs is None else n_runs
    for lvl in levels:
        if not 0 < lvl <= 1.3:
            raise ValueError("commitment levels must lie in (0, 1.3]")
    tasks = [(cfg.replace(commitment=float(lvl)), r, (2,)) for lvl in levels for r in range(n_runs)]
    values = np.array(_map(tasks, workers)).reshape(len(levels), n_runs)
    return [{"level_pct": 100 * float(lvl), "runs": n_runs, "mean_rmvt_pct": 100 * float(np.nanmean(v)),
             "std_rmvt_pct": 100 * float(np.nanstd(v))} for lvl, v in zip(levels, values)]


def sweep_config(seed: int, **overrides) -> ScenarioConfig:
    """Defaults for the commitment sweep: 1000 + 1000 devices, random onset and severity."""
    base = dict(seed=seed, population=PopulationSpec(1000, 1000), events=SWEEP_DIP,
                severity=SWEEP_SEVERITY, placement="random", runs=20)
    base.update(overrides)
    return ScenarioConfig(**base)


def format_table(rows: Sequence[dict]) -> str:
    """Comma-separated table with a header line; floats to 6 decimals."""
    if not rows:
        return ""
    buf = io.StringIO()
    cols = list(rows[0])
    buf.write(",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(f"{row[c]:.6f}" if isinstance(row[c], float) else str(row[c]) for c in cols) + "\n")
    return buf.getvalue()
