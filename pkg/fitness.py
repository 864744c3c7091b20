"""Fitness functions (absolute, relative, hits) and roulette-wheel selection with simple elitism."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

FITNESS_MODES = ("absolute", "relative", "hits")


@dataclass(frozen=True)
class FitnessCase:
    inputs: Mapping[str, Any]
    target: Any


@dataclass(frozen=True)
class FitnessSpec:
    mode: str = "absolute"
    selection_range: float = 100.0
    precision: float = 0.0

    def __post_init__(self):
        if self.mode not in FITNESS_MODES:
            raise ValueError(f"Fitness mode must be one of {FITNESS_MODES}, got {self.mode!r}")
        if self.selection_range <= 0:
            raise ValueError("Selection range must be positive")
        if self.precision < 0:
            raise ValueError("Precision must not be negative")

    def max_fitness(self, num_cases):
        if self.mode == "hits":
            return float(num_cases)
        return num_cases * self.selection_range

    def score(self, outputs, cases):
        if self.mode == "absolute":
            return fitness_absolute(outputs, cases, self.selection_range, self.precision)
        if self.mode == "relative":
            return fitness_relative(outputs, cases, self.selection_range, self.precision)
        return fitness_hits(outputs, cases)


def targets_of(cases):
    """Targets as an array, from FitnessCase objects or plain values."""
    cases = list(cases) if not isinstance(cases, np.ndarray) else cases
    if len(cases) and isinstance(cases[0], FitnessCase):
        return np.asarray([case.target for case in cases])
    return np.asarray(cases)


def _outputs(outputs, count, dtype=float):
    return np.broadcast_to(np.asarray(outputs, dtype=dtype), (count,))


def _selection_sum(errors, selection_range, precision):
    errors = np.where(errors <= precision, 0.0, errors)
    return float(np.sum(np.clip(selection_range - errors, 0.0, None)))


# -------------------- FITNESS FUNCTIONS --------------------
def fitness_absolute(outputs, cases, selection_range, precision):
    targets = targets_of(cases).astype(float)
    outputs = _outputs(outputs, len(targets))
    if not np.all(np.isfinite(outputs)):
        return 0.0
    return _selection_sum(np.abs(outputs - targets), selection_range, precision)


def fitness_relative(outputs, cases, selection_range, precision):
    """Percent relative error against each target; zero targets are rejected."""
    targets = targets_of(cases).astype(float)
    if np.any(targets == 0):
        raise ValueError("Relative error is undefined for a zero target")
    outputs = _outputs(outputs, len(targets))
    if not np.all(np.isfinite(outputs)):
        return 0.0
    with np.errstate(all="ignore"):
        errors = np.abs((outputs - targets) / targets * 100.0)
    if not np.all(np.isfinite(errors)):
        return 0.0
    return _selection_sum(errors, selection_range, precision)


def fitness_hits(outputs, cases):
    targets = targets_of(cases).astype(bool)
    outputs = _outputs(outputs, len(targets), dtype=bool)
    hits = int(np.sum(outputs == targets))
    return float(hits) if 2 * hits >= len(targets) else 1.0


# -------------------- SELECTION --------------------
def spin_wheel(fitnesses, spins, rng):
    """Indices drawn with probability proportional to fitness (uniform when all are zero)."""
    fitnesses = np.asarray(fitnesses, dtype=float)
    if np.any(fitnesses < 0):
        raise ValueError("Roulette-wheel selection needs non-negative fitness")
    total = fitnesses.sum()
    if total <= 0:
        return rng.integers(0, len(fitnesses), size=spins)
    return rng.choice(len(fitnesses), size=spins, p=fitnesses / total)


def best_index(fitnesses):
    """Maximal fitness, ties to the lowest index."""
    return int(np.argmax(np.asarray(fitnesses, dtype=float)))


def roulette_select(population, fitnesses, rng):
    population = list(population)
    if len(population) != len(fitnesses):
        raise ValueError("One fitness value per individual is required")
    chosen = [population[i] for i in spin_wheel(fitnesses, len(population), rng)]
    chosen[0] = population[best_index(fitnesses)]
    return chosen
