"""Command line interface: ``tclfreq <command> --seed N [--config FILE] [overrides]``.

Every scenario field can come from a YAML config file and be overridden by a
flag.  All tables are written as comma-separated text with a header line.
"""
from __future__ import annotations

import sys

import click
import numpy as np

from . import scenario as sc
from .allocation import ResponseCurveSpec, allocate, max_guaranteed_capacity, prioritize, write_assignment
from .fitness import population_fitness, write_reports
from .population import read_population, write_population


def _event(text: str) -> dict:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 5:
        raise click.BadParameter("expected OFFSET,DEPTH,ROCOF,TAU,SETTLE")
    keys = ("offset", "nadir_deviation", "initial_rocof", "recovery_time_constant", "settle_offset")
    return dict(zip(keys, parts))


_OPTIONS = [
    click.option("--seed", type=int, required=True, help="Master seed (mandatory)."),
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 help="YAML scenario file; flags override its values."),
    click.option("--n-ac", type=int, help="Number of air conditioners."),
    click.option("--n-ewh", type=int, help="Number of water heaters."),
    click.option("--ac-range", multiple=True, type=(str, float, float), metavar="NAME LO HI",
                 help="Override one AC parameter range (repeatable)."),
    click.option("--ewh-range", multiple=True, type=(str, float, float), metavar="NAME LO HI",
                 help="Override one water-heater parameter range (repeatable)."),
    click.option("--direction", type=click.Choice(["under", "over"])),
    click.option("--under-band", type=(float, float), metavar="LO HI"),
    click.option("--over-band", type=(float, float), metavar="LO HI"),
    click.option("--commitment", type=float, help="Fraction of the guaranteed capacity."),
    click.option("--window", type=float, help="Control window [s]."),
    click.option("--placement", type=click.Choice([*sc.PLACEMENTS, "random"])),
    click.option("--allocation", type=click.Choice(sc.MODES)),
    click.option("--dt", type=float, help="Controller sampling period [s]."),
    click.option("--trace-dt", type=float, help="Synthetic trace resolution [s]."),
    click.option("--event", "events", multiple=True, metavar="OFFSET,DEPTH,ROCOF,TAU,SETTLE",
                 help="Synthetic event stage (repeatable, replaces the configured events)."),
    click.option("--severity", type=(float, float), metavar="LO HI",
                 help="Per-run severity factor range."),
    click.option("--trace-file", type=click.Path(exists=True, dir_okay=False),
                 help="Frequency trace file (time_s,freq_hz) instead of synthetic events."),
    click.option("--eps-p", type=float, help="Commitment tolerance [kW]."),
    click.option("--response-mode", type=click.Choice(["tracking", "latching"])),
    click.option("--runs", type=int, help="Monte Carlo runs per cell."),
]


def scenario_options(fn):
    for opt in reversed(_OPTIONS):
        fn = opt(fn)
    return fn


_SCALAR_KEYS = ("direction", "commitment", "window", "placement", "allocation", "dt", "trace_dt",
                "trace_file", "eps_p", "response_mode", "runs")


def build_config(opts: dict, base: sc.ScenarioConfig) -> sc.ScenarioConfig:
    """Defaults, then the config file, then command-line flags."""
    d = sc.config_to_dict(base)
    if opts.get("config_path"):
        with open(opts["config_path"]) as fh:
            loaded = sc.config_to_dict(sc.load_config(fh.read()))
        d.update(loaded)
    d["seed"] = opts["seed"]
    pop = d["population"]
    for key in ("n_ac", "n_ewh"):
        if opts.get(key) is not None:
            pop[key] = opts[key]
    for key, table in (("ac_range", "ac_ranges"), ("ewh_range", "ewh_ranges")):
        for name, lo, hi in opts.get(key) or ():
            pop[table][name] = [lo, hi]
    for key in ("under_band", "over_band", "severity"):
        if opts.get(key) is not None:
            d[key] = list(opts[key])
    for key in _SCALAR_KEYS:
        if opts.get(key) is not None:
            d[key] = opts[key]
    if opts.get("events"):
        d["events"] = [_event(e) for e in opts["events"]]
    if opts.get("trace_file"):
        d["events"] = d.get("events") or []
    try:
        return sc.config_from_dict(d)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(str(exc)) from None


def _population(cfg, path):
    return read_population(path) if path else sc.base_population(cfg)


def _guard(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Frequency response from thermostatic loads: populations, allocation, simulation."""


@main.command()
@scenario_options
@click.option("-o", "--output", default="-", type=click.Path(dir_okay=False, allow_dash=True))
@click.option("--dump-config", type=click.Path(dir_okay=False), help="Also write the resolved config.")
def generate(output, dump_config, **opts):
    """Write a random population file."""
    cfg = build_config(opts, sc.ScenarioConfig(seed=opts["seed"]))
    pop = _guard(sc.base_population, cfg)
    with click.open_file(output, "w") as fh:
        write_population(pop, fh)
    if dump_config:
        with open(dump_config, "w") as fh:
            fh.write(sc.dump_config(cfg))


@main.command()
@scenario_options
@click.option("--population", "pop_path", type=click.Path(exists=True, dir_okay=False),
              help="Population file (default: generate from the config).")
@click.option("-o", "--output", default="-", type=click.Path(dir_okay=False, allow_dash=True))
def fitness(pop_path, output, **opts):
    """Availability, quality and fitness of every device for one window."""
    cfg = build_config(opts, sc.ScenarioConfig(seed=opts["seed"]))
    pop = _guard(_population, cfg, pop_path)
    reports = population_fitness(pop, cfg.direction, cfg.window)
    with click.open_file(output, "w") as fh:
        write_reports(reports, fh)


@main.command("allocate")
@scenario_options
@click.option("--population", "pop_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--capacity", type=float, help="Requested capacity [kW] (default: commitment x guaranteed).")
@click.option("-o", "--output", default="-", type=click.Path(dir_okay=False, allow_dash=True))
def allocate_cmd(pop_path, capacity, output, **opts):
    """Prioritise devices and assign frequency thresholds."""
    cfg = build_config(opts, sc.ScenarioConfig(seed=opts["seed"]))
    pop = _guard(_population, cfg, pop_path)
    reports = population_fitness(pop, cfg.direction, cfg.window)
    if capacity is None:
        capacity = cfg.commitment * max_guaranteed_capacity(reports)
    lo, hi = cfg.band
    spec = _guard(ResponseCurveSpec, cfg.direction, lo, hi, capacity)
    assignment = _guard(allocate, reports, spec, cfg.eps_p, order=prioritize(reports))
    with click.open_file(output, "w") as fh:
        write_assignment(assignment, fh)
    click.echo(f"committed {assignment.m} devices, {assignment.committed_capacity:.3f} kW "
               f"(requested {capacity:.3f} kW); P[all succeed]={assignment.success_prob:.6g}",
               err=True)


@main.command()
@scenario_options
@click.option("--population", "pop_path", type=click.Path(exists=True, dir_okay=False),
              help="Use this population and its stored state instead of a random draw.")
@click.option("--run-index", type=int, default=0, show_default=True)
@click.option("-o", "--output", default="-", type=click.Path(dir_okay=False, allow_dash=True),
              help="Time series table.")
@click.option("--switch-log", type=click.Path(dir_okay=False))
@click.option("--summary", type=click.Path(dir_okay=False, allow_dash=True))
@click.option("--assignment", "assignment_path", type=click.Path(dir_okay=False))
def simulate(pop_path, run_index, output, switch_log, summary, assignment_path, **opts):
    """Run one scenario and write its time series."""
    cfg = build_config(opts, sc.ScenarioConfig(seed=opts["seed"]))
    if pop_path:
        pop = _guard(read_population, pop_path)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(run_index,)))
        start = _guard(sc.event_start_time, cfg, rng)
        severity = float(rng.uniform(*cfg.severity))
        outcome = _guard(sc.run_pipeline, cfg, pop, start, severity, rng)
    else:
        outcome = _guard(sc.run_scenario, cfg, run_index)
    res = outcome.result
    with click.open_file(output, "w") as fh:
        res.write_timeseries(fh)
    if switch_log:
        with open(switch_log, "w") as fh:
            res.write_switch_log(fh)
    if summary:
        with click.open_file(summary, "w") as fh:
            res.write_summary(fh)
    if assignment_path:
        write_assignment(outcome.assignment, assignment_path)
    click.echo(f"rmvt={res.rmvt:.6g} events={len(res.events)} committed={res.height:.3f} kW", err=True)


def _levels(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated fractions") from None


@main.command()
@scenario_options
@click.option("--levels", default=",".join(str(x) for x in sc.SWEEP_LEVELS), show_default=True,
              help="Commitment levels as fractions of the guaranteed capacity.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-o", "--output", default="-", type=click.Path(dir_okay=False, allow_dash=True))
def sweep(levels, workers, output, **opts):
    """Mean RMVT against commitment level."""
    cfg = build_config(opts, sc.sweep_config(opts["seed"]))
    rows = _guard(sc.commitment_sweep, cfg, _levels(levels), workers=workers)
    with click.open_file(output, "w") as fh:
        fh.write(sc.format_table(rows))


@main.command()
@scenario_options
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("-o", "--output", default="-", type=click.Path(dir_okay=False, allow_dash=True))
def montecarlo(workers, output, **opts):
    """Mean RMVT per window length, event time and allocation mode."""
    cfg = build_config(opts, sc.ScenarioConfig(seed=opts["seed"], runs=50))
    rows = _guard(sc.montecarlo, cfg, workers=workers)
    with click.open_file(output, "w") as fh:
        fh.write(sc.format_table(rows))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
