import io

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tclfreq.events import (
    EventSpec, FrequencyTrace, TraceError, cascade, constant_trace, ingest, synthesize, write_trace,
)
from tclfreq.fitness import Service


def test_zero_depth_is_flat():
    tr = synthesize(EventSpec(nadir_deviation=0.0, start_time=5.0), 100.0, 0.1)
    assert np.all(tr.freqs == 60.0)


def test_nadir_reaches_band_edge():
    ev = EventSpec(Service.UNDER, 10.0, nadir_deviation=0.3, initial_rocof=0.1, recovery_time_constant=10.0)
    tr = synthesize(ev, 120.0, 0.01)
    assert tr.freqs.min() == pytest.approx(59.7, abs=1e-6)
    assert tr.times[np.argmin(tr.freqs)] == pytest.approx(ev.nadir_time, abs=0.01)


def test_over_frequency_rises():
    ev = EventSpec(Service.OVER, 0.0, nadir_deviation=0.25, initial_rocof=0.05, recovery_time_constant=20.0)
    tr = synthesize(ev, 200.0, 0.01)
    assert tr.freqs.max() == pytest.approx(60.25, abs=1e-6)
    assert tr.freqs.min() == 60.0


def test_flat_before_start():
    tr = synthesize(EventSpec(start_time=30.0), 120.0, 0.1)
    assert np.all(tr.freqs[tr.times <= 30.0] == 60.0)


def test_initial_rocof_by_finite_difference():
    ev = EventSpec(start_time=2.0, nadir_deviation=0.3, initial_rocof=0.1, recovery_time_constant=10.0)
    dt = 0.001
    tr = synthesize(ev, 100.0, dt)
    k = int(round(2.0 / dt))
    slope = (tr.freqs[k] - tr.freqs[k + 1]) / dt
    assert slope == pytest.approx(0.1, abs=1e-3)


def test_rocof_larger_at_band_entry_than_near_nadir():
    ev = EventSpec(start_time=0.0, nadir_deviation=0.3, initial_rocof=0.1, recovery_time_constant=10.0)
    tr = synthesize(ev, 100.0, 0.01)
    rocof = np.abs(np.diff(tr.freqs)) / 0.01
    entry = int(np.flatnonzero(tr.freqs < 59.995)[0])
    near_nadir = int(round((ev.nadir_time - 0.5) / 0.01))
    assert rocof[entry - 1] > rocof[near_nadir]


def test_inconsistent_parameters_rejected():
    with pytest.raises(ValueError):
        EventSpec(nadir_deviation=0.5, initial_rocof=0.01, recovery_time_constant=1.0)
    with pytest.raises(ValueError):
        EventSpec(nadir_deviation=0.2, settle_offset=0.3)
    with pytest.raises(ValueError):
        EventSpec(initial_rocof=0.0)
    with pytest.raises(ValueError):
        EventSpec(nadir_deviation=-0.1)


def test_horizon_check():
    with pytest.raises(ValueError, match="recovery"):
        synthesize(EventSpec(start_time=10.0), 30.0, 0.1)
    synthesize(EventSpec(start_time=10.0), 30.0, 0.1, check_horizon=False)


def test_cascade_has_two_dips():
    tr = synthesize(cascade(5.0), 300.0, 0.1)
    f = tr.freqs
    minima = np.flatnonzero((f[1:-1] < f[:-2]) & (f[1:-1] <= f[2:])) + 1
    assert len(minima) == 2
    assert f[minima[1]] < f[minima[0]]


def test_mixed_direction_cascade_rejected():
    with pytest.raises(ValueError):
        synthesize([EventSpec(Service.UNDER), EventSpec(Service.OVER)], 200.0, 0.1)


@settings(max_examples=80, deadline=None)
@given(depth=st.floats(0.01, 0.5), rocof=st.floats(0.01, 0.5), tau=st.floats(1.0, 60.0),
       settle=st.floats(0.0, 1.0), dt=st.sampled_from([0.01, 0.1, 0.5]))
def test_synthesized_trace_is_continuous(depth, rocof, tau, settle, dt):
    assume((depth - settle * depth) / (np.e * tau) <= rocof)
    ev = EventSpec(Service.UNDER, 1.0, depth, rocof, tau, settle * depth)
    tr = synthesize(ev, 1.0 + ev.time_to_nadir + 5 * tau, dt)
    assert np.max(np.abs(np.diff(tr.freqs))) <= rocof * dt * (1 + 1e-9)
    assert tr.freqs.min() >= 60.0 - depth - 1e-12


def test_trace_validation():
    with pytest.raises(TraceError):
        FrequencyTrace(np.array([0.0]), np.array([60.0]))
    with pytest.raises(TraceError):
        FrequencyTrace(np.array([0.0, 1.0, 0.5]), np.array([60.0, 60.0, 60.0]))
    with pytest.raises(TraceError):
        FrequencyTrace(np.array([0.0, 1.0, 3.0]), np.array([60.0, 60.0, 60.0]))
    with pytest.raises(TraceError):
        FrequencyTrace(np.array([0.0, 1.0]), np.array([60.0, 70.0]))
    with pytest.raises(TraceError):
        FrequencyTrace(np.array([0.0, 1.0]), np.array([60.0, np.nan]))


def test_ingest_two_samples(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("time_s,freq_hz\n0,60\n1,60\n")
    tr = ingest(p)
    assert tr.duration == 1.0 and np.all(tr.freqs == 60.0)


def test_ingest_rejects_bad_files(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("time_s,freq_hz\n0,60\n2,60\n1,60\n")
    with pytest.raises(TraceError, match="increasing"):
        ingest(p)
    p.write_text("time_s,freq_hz\n0,60\n1,66\n")
    with pytest.raises(TraceError):
        ingest(p)
    p.write_text("time_s,freq_hz\n0,60\n1,abc\n")
    with pytest.raises(TraceError):
        ingest(p)


def test_ingest_resamples_non_uniform(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("time_s,freq_hz\n0,60\n0.5,59.9\n2,59.8\n")
    tr = ingest(p)
    assert tr.sample_period == 0.5
    np.testing.assert_allclose(tr.freqs, [60.0, 59.9, 59.8666666666667, 59.8333333333333, 59.8])


def test_resample_matches_linear_interpolation(tmp_path):
    tr = synthesize(EventSpec(start_time=3.0), 120.0, 0.1)
    p = tmp_path / "t.csv"
    write_trace(tr, p)
    back = ingest(p, dt=1.0)
    for t, f in zip(back.times, back.freqs):
        k = int(np.floor(t / 0.1 + 1e-9))
        k = min(k, len(tr.times) - 2)
        t0, t1 = tr.times[k], tr.times[k + 1]
        ref = tr.freqs[k] + (tr.freqs[k + 1] - tr.freqs[k]) * (t - t0) / (t1 - t0)
        assert f == pytest.approx(ref, abs=1e-9)


def test_write_trace_round_trip():
    tr = constant_trace(10.0, 1.0, 59.99)
    buf = io.StringIO()
    write_trace(tr, buf)
    assert buf.getvalue().splitlines()[0] == "time_s,freq_hz"
    assert len(buf.getvalue().splitlines()) == 12
