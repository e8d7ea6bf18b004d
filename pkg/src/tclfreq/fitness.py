"""Per-device availability, quality and fitness for frequency response.

Under-frequency response needs a device that is *on* when the event hits
(it sheds load by turning off); over-frequency response needs one that is
*off*.  With the event time uniform over the control window the availability
is simply the fraction of the window spent in the useful state.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .devices import DeviceRecord, on_off_split, window_on_off_durations
from .population import Population


class Service(str, Enum):
    UNDER = "under"
    OVER = "over"


DEFAULT_BETA = 0.1  # 1/s


@dataclass(frozen=True)
class QualityParams:
    beta: float = DEFAULT_BETA
    delay_estimate: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.delay_estimate >= 0:
            raise ValueError("delay_estimate must be >= 0")


@dataclass(frozen=True)
class FitnessReport:
    device_id: int
    service: Service
    availability: float
    quality: float
    fitness: float
    window: tuple[float, float]
    power_rating: float = 0.0


def availability_under(dev: DeviceRecord, window: float) -> float:
    t_on, _ = window_on_off_durations(dev, window)
    return t_on / window


def availability_over(dev: DeviceRecord, window: float) -> float:
    # complement form keeps under + over == 1 exactly in floating point
    return 1.0 - availability_under(dev, window)


def quality(q: QualityParams) -> float:
    """Delay-degraded success probability ``exp(-beta t_d)``."""
    if math.isinf(q.delay_estimate):
        return 0.0
    return math.exp(-q.beta * q.delay_estimate)


def fitness(dev: DeviceRecord, service: Service, window: float,
            q: Optional[QualityParams] = None, t0: float = 0.0) -> FitnessReport:
    service = Service(service)
    avail = availability_under(dev, window) if service is Service.UNDER else availability_over(dev, window)
    qual = quality(q or QualityParams())
    return FitnessReport(dev.id, service, avail, qual, avail * qual, (t0, t0 + window),
                         dev.params.power_rating)


def population_availability(pop: Population, service: Service, window: float) -> np.ndarray:
    """Vectorised availability of every device for the window starting now."""
    if not window > 0:
        raise ValueError("window must be > 0")
    t_on_off, t_off_on = pop.residence_times()
    t_on, _ = on_off_split(pop.on, t_on_off, t_off_on, window)
    under = t_on / window
    return under if Service(service) is Service.UNDER else 1.0 - under


def population_fitness(pop: Population, service: Service, window: float,
                       delays: Optional[Sequence[float]] = None, beta: float = DEFAULT_BETA,
                       t0: float = 0.0) -> list[FitnessReport]:
    service = Service(service)
    avail = population_availability(pop, service, window)
    if delays is None:
        qual = np.ones(len(pop))
    else:
        qual = np.array([quality(QualityParams(beta, d)) for d in delays])
    fit = avail * qual
    return [FitnessReport(int(i), service, float(a), float(q), float(f), (t0, t0 + window), float(p))
            for i, a, q, f, p in zip(pop.ids, avail, qual, fit, pop.power)]


REPORT_COLUMNS = ("device_id", "service", "availability", "quality", "fitness")


def write_reports(reports: Iterable[FitnessReport], path_or_file) -> None:
    def emit(fh):
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.device_id, r.service.value, repr(r.availability), repr(r.quality),
                        repr(r.fitness)])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
