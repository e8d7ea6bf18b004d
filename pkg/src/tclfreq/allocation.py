"""Fitness-prioritised device commitment and frequency threshold assignment."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .fitness import FitnessReport, Service

NOMINAL_HZ = 60.0
UNDER_BAND = (59.7, 59.995)
OVER_BAND = (60.005, 60.3)
FIT_TOL = 1e-12


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class ResponseCurveSpec:
    direction: Service
    omega_l: float
    omega_u: float
    capacity: float
    omega_0: float = NOMINAL_HZ

    def __post_init__(self):
        object.__setattr__(self, "direction", Service(self.direction))
        if not self.omega_l < self.omega_u:
            raise ValueError("band needs omega_l < omega_u")
        if self.direction is Service.UNDER and not self.omega_u <= self.omega_0:
            raise ValueError("under-frequency band must lie below nominal")
        if self.direction is Service.OVER and not self.omega_0 <= self.omega_l:
            raise ValueError("over-frequency band must lie above nominal")
        if not self.capacity > 0:
            raise ValueError("capacity must be > 0")

    @property
    def width(self) -> float:
        return self.omega_u - self.omega_l

    @classmethod
    def default(cls, direction: Service, capacity: float) -> "ResponseCurveSpec":
        lo, hi = UNDER_BAND if Service(direction) is Service.UNDER else OVER_BAND
        return cls(direction, lo, hi, capacity)

    def target(self, omega, height: Optional[float] = None):
        """Droop-line response at frequency ``omega``, clamped to ``[0, height]``."""
        height = self.capacity if height is None else height
        omega = np.asarray(omega, dtype=float)
        if self.direction is Service.UNDER:
            frac = (self.omega_u - omega) / self.width
        else:
            frac = (omega - self.omega_l) / self.width
        return height * np.clip(frac, 0.0, 1.0)


@dataclass(frozen=True)
class ThresholdAssignment:
    spec: ResponseCurveSpec
    ordered_devices: tuple[int, ...]
    ratings: tuple[float, ...]
    fitness: tuple[float, ...]
    thresholds: tuple[float, ...]
    requested_capacity: float
    committed_capacity: float
    capacity_error: float
    success_prob: float
    failure_lb: float

    @property
    def m(self) -> int:
        return len(self.ordered_devices)

    def threshold_map(self) -> dict[int, float]:
        return dict(zip(self.ordered_devices, self.thresholds))


def prioritize(reports: Sequence[FitnessReport]) -> list[FitnessReport]:
    """Order by fitness (desc), then power rating (desc), then device id (asc)."""
    ids = [r.device_id for r in reports]
    if len(set(ids)) != len(ids):
        raise AllocationError("duplicate device ids in fitness reports")
    return sorted(reports, key=lambda r: (-r.fitness, -r.power_rating, r.device_id))


def select_committed(order: Sequence[FitnessReport], capacity: float,
                     eps_p: Optional[float] = None) -> tuple[int, list[FitnessReport]]:
    """Smallest prefix whose rating sum is within ``eps_p`` of ``capacity``.

    Without ``eps_p`` (or if no prefix qualifies) the prefix with the smallest
    residual is returned; the residual is carried by the resulting
    assignment's ``capacity_error``.
    """
    if not order:
        raise AllocationError("no devices to commit")
    if not capacity > 0:
        raise AllocationError("capacity must be > 0")
    if eps_p is not None and eps_p < 0:
        raise AllocationError("eps_p must be >= 0")
    ratings = np.array([r.power_rating for r in order], dtype=float)
    residual = np.abs(capacity - np.cumsum(ratings))
    ok = np.flatnonzero(residual <= eps_p) if eps_p is not None else np.array([], dtype=int)
    m = int(ok[0]) + 1 if ok.size else int(np.argmin(residual)) + 1
    return m, list(order[:m])


def assign_thresholds(committed: Sequence[FitnessReport], spec: ResponseCurveSpec,
                      requested: Optional[float] = None) -> ThresholdAssignment:
    """Spread the committed devices along the droop band in priority order.

    The droop height is the committed rating sum, so the last device lands
    exactly on the far band edge.  The fittest device gets the threshold
    closest to nominal.
    """
    if not committed:
        raise AllocationError("empty commitment")
    ratings = np.array([r.power_rating for r in committed], dtype=float)
    if np.any(ratings <= 0):
        raise AllocationError("power ratings must be > 0")
    cum = np.cumsum(ratings)
    total = float(cum[-1])
    step = spec.width / total
    if spec.direction is Service.UNDER:
        thr = spec.omega_u - step * cum
        thr[-1] = spec.omega_l
        ordered_ok = np.all(np.diff(thr) < 0)
    else:
        thr = spec.omega_l + step * cum
        thr[-1] = spec.omega_u
        ordered_ok = np.all(np.diff(thr) > 0)
    if not ordered_ok or thr.min() < spec.omega_l or thr.max() > spec.omega_u:
        raise AllocationError("threshold assignment left the band or lost ordering")
    fit = np.array([r.fitness for r in committed], dtype=float)
    requested = spec.capacity if requested is None else requested
    return ThresholdAssignment(
        spec=spec,
        ordered_devices=tuple(int(r.device_id) for r in committed),
        ratings=tuple(float(x) for x in ratings),
        fitness=tuple(float(x) for x in fit),
        thresholds=tuple(float(x) for x in thr),
        requested_capacity=float(requested),
        committed_capacity=total,
        capacity_error=abs(float(requested) - total),
        success_prob=float(np.prod(fit)),
        failure_lb=float(1.0 - fit.min()),
    )


def success_probability(assignment: ThresholdAssignment) -> tuple[float, float]:
    """``(P[all succeed], lower bound on P[at least one fails])``."""
    fit = np.asarray(assignment.fitness, dtype=float)
    return float(np.prod(fit)), float(1.0 - fit.min())


def max_guaranteed_capacity(reports: Iterable[FitnessReport]) -> float:
    """Sum of ratings of devices whose fitness is 1."""
    return float(sum(r.power_rating for r in reports if r.fitness >= 1.0 - FIT_TOL))


def discrete_error_bound(assignment: ThresholdAssignment) -> float:
    """Worst relative droop error from discrete loads: ``max P / sum P``."""
    ratings = np.asarray(assignment.ratings)
    return float(ratings.max() / ratings.sum())


def required_capacity(max_rating: float, eps: float) -> float:
    """Smallest droop height that keeps the discrete error below ``eps``."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return max_rating / eps


def allocate(reports: Sequence[FitnessReport], spec: ResponseCurveSpec,
             eps_p: Optional[float] = None, order: Optional[Sequence[FitnessReport]] = None
             ) -> ThresholdAssignment:
    """Prioritise, commit ``spec.capacity`` and assign thresholds.

    ``order`` overrides the fitness ranking (used by the shuffled baseline).
    """
    order = prioritize(reports) if order is None else list(order)
    _, committed = select_committed(order, spec.capacity, eps_p)
    return assign_thresholds(committed, spec, requested=spec.capacity)


ASSIGNMENT_COLUMNS = ("rank", "device_id", "power_rating", "fitness", "threshold_hz")


def write_assignment(assignment: ThresholdAssignment, path_or_file) -> None:
    def emit(fh):
        w = csv.writer(fh)
        w.writerow(ASSIGNMENT_COLUMNS)
        rows = zip(assignment.ordered_devices, assignment.ratings, assignment.fitness,
                   assignment.thresholds)
        for rank, (i, p, f, thr) in enumerate(rows, start=1):
            w.writerow([rank, i, repr(p), repr(f), repr(thr)])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
