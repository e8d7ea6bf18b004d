import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_device, state_samples
from tclfreq.fitness import (
    QualityParams, Service, availability_over, availability_under, fitness,
    population_availability, population_fitness, quality, write_reports,
)
from tclfreq.population import Population, PopulationSpec, generate_population


def test_quality_examples():
    assert quality(QualityParams(0.1, 0.0)) == 1.0
    assert quality(QualityParams(0.1, 10.0)) == pytest.approx(math.exp(-1.0))
    assert quality(QualityParams(0.1, math.inf)) == 0.0
    with pytest.raises(ValueError):
        QualityParams(beta=0.0)
    with pytest.raises(ValueError):
        QualityParams(delay_estimate=-1.0)


def test_availability_matches_event_time_oracle():
    rng = np.random.default_rng(3)
    devs = [random_device(rng, i) for i in range(30)]
    window = 300.0
    times = rng.uniform(0.0, window, 10_000)
    states = state_samples(devs, window, times)
    oracle = states.mean(axis=0)
    got = np.array([availability_under(d, window) for d in devs])
    np.testing.assert_allclose(got, oracle, atol=0.02)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), window=st.floats(1.0, 3600.0))
def test_under_plus_over_is_one(seed, window):
    d = random_device(np.random.default_rng(seed), 0)
    assert availability_under(d, window) + availability_over(d, window) == 1.0
    assert 0.0 <= availability_under(d, window) <= 1.0


def test_fitness_is_product():
    d = random_device(np.random.default_rng(1), 7)
    r = fitness(d, Service.UNDER, 300.0, QualityParams(0.1, 2.0), t0=50.0)
    assert r.fitness == pytest.approx(r.availability * r.quality)
    assert r.window == (50.0, 350.0)
    assert r.device_id == 7 and r.service is Service.UNDER


def test_default_quality_is_one():
    d = random_device(np.random.default_rng(1), 0)
    r = fitness(d, "over", 300.0)
    assert r.quality == 1.0 and r.fitness == r.availability


def test_population_vectorised_matches_scalar():
    pop = generate_population(PopulationSpec(25, 25), 6)
    for service in Service:
        vec = population_availability(pop, service, 300.0)
        fn = availability_under if service is Service.UNDER else availability_over
        scalar = [fn(d, 300.0) for d in pop.records]
        np.testing.assert_allclose(vec, scalar, rtol=1e-12, atol=1e-15)


def test_population_fitness_with_delays():
    pop = generate_population(PopulationSpec(2, 1), 6)
    reports = population_fitness(pop, Service.UNDER, 300.0, delays=[0.0, 10.0, math.inf])
    assert reports[1].quality == pytest.approx(math.exp(-1.0))
    assert reports[2].fitness == 0.0


def test_on_device_far_from_edge_is_fully_available():
    pop = generate_population(PopulationSpec(50, 50), 2)
    t_off, t_on = pop.residence_times()
    avail = population_availability(pop, Service.UNDER, 300.0)
    assert np.all(avail[pop.on & (t_off >= 300.0)] == 1.0)
    assert np.all(avail[~pop.on & (t_on >= 300.0)] == 0.0)


def test_empty_population_scores_nothing():
    assert population_fitness(Population([]), Service.UNDER, 300.0) == []


def test_report_table_header():
    import io
    pop = generate_population(PopulationSpec(1, 1), 6)
    buf = io.StringIO()
    write_reports(population_fitness(pop, Service.OVER, 300.0), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "device_id,service,availability,quality,fitness"
    assert len(lines) == 3 and lines[1].split(",")[1] == "over"
