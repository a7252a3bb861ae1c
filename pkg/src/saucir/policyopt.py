"""Genetic search for migration schedules that minimize confirmed cases.

The decision variable is a (T, M, M) non-negative weight tensor. For every
ordered node pair, the weights' temporal profile is normalized to shares and
scaled by that pair's fixed aggregate in/out rate totals, so every candidate
schedule reproduces the aggregates exactly and the population-balance
constraint is preserved by construction. Fitness is the negated sum of
cumulative confirmed cases over the target nodes at the horizon.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .mobility import AggregateRates, MobilitySchedule, aggregate, check_balance
from .model import EpidemicParams, NetworkState, SimulationBlowUp, simulate


class DegenerateIndividual(ValueError):
    """A pair with positive aggregate rate has an all-zero temporal profile."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        super().__init__(f"all-zero temporal weight column for pairs {self.pairs}")


@dataclass
class Individual:
    """Redistribution weights, diagonal forced to zero."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 3 or self.weights.shape[1] != self.weights.shape[2]:
            raise ValueError(f"weights must be (T, M, M), got {self.weights.shape}")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite and non-negative")
        m = self.weights.shape[1]
        self.weights[:, np.arange(m), np.arange(m)] = 0.0


@dataclass
class GAConfig:
    horizon: int
    population_size: int = 50
    generations: int = 200
    crossover_rate: float = 0.8
    mutation_rate: float = 0.02
    elitism_count: int = 2
    seed: int = 0
    target_nodes: list[str] | None = None  # None means every node

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.target_nodes is not None and not self.target_nodes:
            raise ValueError("target_nodes must be a non-empty subset when given")


@dataclass
class OptimizationResult:
    best_schedule: MobilitySchedule
    best_objective: float  # sum of confirmed cases over targets at the horizon
    fitness_history: list[float] = field(default_factory=list)  # best-so-far objective per generation
    constraint_residual: float = 0.0


def random_individual(rng: np.random.Generator, horizon: int, n_nodes: int) -> Individual:
    """Entries drawn uniformly from (0, 1]; never zero off the diagonal."""
    return Individual(1.0 - rng.random((horizon, n_nodes, n_nodes)))


def normalize_individual(ind: Individual, agg: AggregateRates) -> MobilitySchedule:
    """Scale per-pair temporal shares to the fixed aggregate totals."""
    w = ind.weights
    if w.shape[1] != agg.c_in.shape[0]:
        raise ValueError(f"individual has {w.shape[1]} nodes, aggregates {agg.c_in.shape[0]}")
    sums = w.sum(axis=0)
    active = (agg.c_in > 0) | (agg.c_out > 0)
    dead = active & (sums <= 0)
    if np.any(dead):
        raise DegenerateIndividual([(int(i), int(j)) for i, j in zip(*np.nonzero(dead))])
    safe = np.where(sums > 0, sums, 1.0)
    shares = w / safe[None, :, :]
    return MobilitySchedule(shares * agg.c_in[None, :, :], shares * agg.c_out[None, :, :])


def get_fitness(ind: Individual, agg: AggregateRates, initial: NetworkState,
                params: EpidemicParams, populations, target_idx, horizon: int) -> float:
    """Negated confirmed-case total over the targets at day `horizon`."""
    schedule = normalize_individual(ind, agg)
    try:
        trace = simulate(initial, params, populations, schedule, horizon)
    except SimulationBlowUp:
        return float("-inf")
    return -float(trace.states[-1].d[list(target_idx)].sum())


def selection(population: list[Individual], fitnesses, config: GAConfig,
              rng: np.random.Generator) -> list[Individual]:
    """Elites pass through unchanged; the rest come from size-2 tournaments."""
    fitnesses = np.asarray(fitnesses, dtype=float)
    n = len(population)
    order = np.argsort(-fitnesses, kind="stable")
    selected = [Individual(population[i].weights.copy()) for i in order[:config.elitism_count]]
    while len(selected) < n:
        i, j = rng.integers(0, n, size=2)
        winner = i if fitnesses[i] >= fitnesses[j] else j
        selected.append(Individual(population[winner].weights.copy()))
    return selected


def crossover(population: list[Individual], config: GAConfig,
              rng: np.random.Generator) -> list[Individual]:
    """Swap time-axis blocks at a random cut day between consecutive pairs.

    Elites (the first elitism_count individuals) are left untouched.
    """
    out = list(population)
    t = population[0].weights.shape[0] if population else 0
    k = config.elitism_count
    while k + 1 < len(out):
        a, b = out[k], out[k + 1]
        if rng.random() < config.crossover_rate:
            cut = int(rng.integers(0, t + 1))
            wa = np.concatenate([a.weights[:cut], b.weights[cut:]])
            wb = np.concatenate([b.weights[:cut], a.weights[cut:]])
            out[k], out[k + 1] = Individual(wa), Individual(wb)
        k += 2
    return out


def mutation(population: list[Individual], config: GAConfig,
             rng: np.random.Generator) -> list[Individual]:
    """Multiply a random subset of entries by factors uniform on [0.5, 2]."""
    out = []
    for idx, ind in enumerate(population):
        if idx < config.elitism_count:
            out.append(ind)
            continue
        shape = ind.weights.shape
        mask = rng.random(shape) < config.mutation_rate
        factors = rng.uniform(0.5, 2.0, size=shape)
        out.append(Individual(ind.weights * np.where(mask, factors, 1.0)))
    return out


def _repair(ind: Individual, agg: AggregateRates, rng: np.random.Generator,
            budget: int = 10) -> MobilitySchedule:
    """Re-randomize degenerate temporal columns until normalization succeeds."""
    for _ in range(budget):
        try:
            return normalize_individual(ind, agg)
        except DegenerateIndividual as exc:
            t = ind.weights.shape[0]
            for i, j in exc.pairs:
                ind.weights[:, i, j] = 1.0 - rng.random(t)
    raise RuntimeError(f"individual still degenerate after {budget} repairs")


def optimize(agg: AggregateRates, initial: NetworkState, params: EpidemicParams,
             populations, config: GAConfig, node_ids: list[str] | None = None,
             on_generation=None) -> OptimizationResult:
    """Generational loop: evaluate, record best, select, cross, mutate.

    ``on_generation(done, best_objective)`` is invoked after each generation,
    for progress reporting.
    """
    populations = np.asarray(populations, dtype=float)
    violations = check_balance(agg, populations)
    if violations:
        v = violations[0]
        raise ValueError(f"aggregates violate the population balance at pair "
                         f"({v.destination}, {v.origin}): {v.lhs} vs {v.rhs}")
    m = len(populations)
    if config.target_nodes is None:
        target_idx = list(range(m))
    else:
        if node_ids is None:
            raise ValueError("node_ids required to resolve target_nodes")
        missing = [t for t in config.target_nodes if t not in node_ids]
        if missing:
            raise ValueError(f"unknown target nodes {missing}")
        target_idx = [node_ids.index(t) for t in config.target_nodes]

    rng = np.random.default_rng(config.seed)
    population = [random_individual(rng, config.horizon, m)
                  for _ in range(config.population_size)]
    best_ind: Individual | None = None
    best_objective = float("inf")
    history: list[float] = []

    for gen in range(config.generations):
        fitnesses = []
        for idx, ind in enumerate(population):
            repair_rng = np.random.default_rng([config.seed, gen, idx])
            _repair(ind, agg, repair_rng)
            fitnesses.append(get_fitness(ind, agg, initial, params, populations,
                                         target_idx, config.horizon))
        gen_best = int(np.argmax(fitnesses))
        gen_objective = -fitnesses[gen_best]
        if gen_objective < best_objective:
            best_objective = gen_objective
            best_ind = Individual(population[gen_best].weights.copy())
        history.append(best_objective)
        if on_generation is not None:
            on_generation(gen + 1, best_objective)
        population = selection(population, fitnesses, config, rng)
        population = crossover(population, config, rng)
        population = mutation(population, config, rng)

    if best_ind is None or not np.isfinite(best_objective):
        raise RuntimeError("no finite-fitness individual found")
    best_schedule = normalize_individual(best_ind, agg)
    out_agg = aggregate(best_schedule)
    lhs = out_agg.c_in * populations[:, None]
    rhs = out_agg.c_out * populations[None, :]
    off_diag = ~np.eye(m, dtype=bool)
    residual = float(np.abs(lhs - rhs)[off_diag].max()) if m > 1 else 0.0
    return OptimizationResult(best_schedule, best_objective, history, residual)


def schedule_to_csv(schedule: MobilitySchedule, node_ids: list[str]) -> str:
    """Export as day,origin,destination,gp_in,gp_out (nonzero pairs only)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day", "origin", "destination", "gp_in", "gp_out"])
    for t in range(schedule.horizon):
        for n, dest in enumerate(node_ids):
            for m_, origin in enumerate(node_ids):
                gin = schedule.gp_in[t, n, m_]
                gout = schedule.gp_out[t, n, m_]
                if gin != 0 or gout != 0:
                    writer.writerow([t, origin, dest, repr(float(gin)), repr(float(gout))])
    return buf.getvalue()


def result_to_dict(result: OptimizationResult) -> dict:
    return {
        "best_objective": result.best_objective,
        "fitness_history": [float(x) for x in result.fitness_history],
        "constraint_residual": result.constraint_residual,
        "horizon": result.best_schedule.horizon,
    }
