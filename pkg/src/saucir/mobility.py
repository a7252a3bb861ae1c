"""Mobility rates derived from absolute migration flows.

For a single day with flow matrix F (destination x origin) and populations N:

* in-rate      gamma_in[n]  = sum_m F[n, m] / N[n]
* out-rate     gamma_out[n] = sum_m F[m, n] / N[n]
* composition  p_in[n, m]   = F[n, m] / row-sum, p_out[m, n] = F[m, n] / column-sum

The simulator only ever consumes the products gamma*P, which simplify to
F[n, m] / N[n] (inbound, scaled by the destination) and F[m, n] / N[n]
(outbound, scaled by the origin). Schedules store the products directly,
which avoids 0/0 on days where a node has no traffic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FlowTensor


@dataclass(frozen=True)
class MobilityRates:
    """Decomposed per-day rates: fractions gamma and share matrices P."""

    gamma_in: np.ndarray
    gamma_out: np.ndarray
    p_in: np.ndarray
    p_out: np.ndarray


@dataclass
class MobilitySchedule:
    """Per-day combined rate tensors, both indexed (day, destination, origin)."""

    gp_in: np.ndarray
    gp_out: np.ndarray

    def __post_init__(self):
        self.gp_in = np.asarray(self.gp_in, dtype=float)
        self.gp_out = np.asarray(self.gp_out, dtype=float)
        if self.gp_in.shape != self.gp_out.shape or self.gp_in.ndim != 3:
            raise ValueError(f"schedule tensors must share a (T, M, M) shape, "
                             f"got {self.gp_in.shape} and {self.gp_out.shape}")
        for name, tensor in (("gp_in", self.gp_in), ("gp_out", self.gp_out)):
            if not np.all(np.isfinite(tensor)) or np.any(tensor < 0):
                raise ValueError(f"{name} entries must be finite and non-negative")
            m = tensor.shape[1]
            if np.any(tensor[:, np.arange(m), np.arange(m)] != 0):
                raise ValueError(f"{name} has nonzero diagonal entries")

    @property
    def horizon(self) -> int:
        return self.gp_in.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.gp_in.shape[1]


@dataclass(frozen=True)
class AggregateRates:
    """Per-pair rate totals over a horizon; the budget the optimizer must respect."""

    c_in: np.ndarray
    c_out: np.ndarray
    horizon: int


@dataclass(frozen=True)
class BalanceViolation:
    destination: int
    origin: int
    lhs: float   # c_in[n, m] * N[n]
    rhs: float   # c_out[n, m] * N[m]


def _check_day_inputs(flows_day: np.ndarray, populations: np.ndarray):
    if np.any(flows_day < 0):
        raise ValueError("negative flow")
    if np.any(np.diag(flows_day) != 0):
        raise ValueError("nonzero diagonal (self-flow)")
    if np.any(populations <= 0):
        raise ValueError("populations must be positive")


def rates_from_flows(flows_day: np.ndarray, populations: np.ndarray) -> MobilityRates:
    """Decompose one day's flow matrix into gamma rates and share matrices."""
    flows_day = np.asarray(flows_day, dtype=float)
    populations = np.asarray(populations, dtype=float)
    _check_day_inputs(flows_day, populations)
    inflow = flows_day.sum(axis=1)   # arrivals per destination
    outflow = flows_day.sum(axis=0)  # departures per origin
    gamma_in = inflow / populations
    gamma_out = outflow / populations
    with np.errstate(invalid="ignore", divide="ignore"):
        p_in = np.where(inflow[:, None] > 0, flows_day / np.where(inflow[:, None] > 0, inflow[:, None], 1.0), 0.0)
        p_out = np.where(outflow[None, :] > 0, flows_day / np.where(outflow[None, :] > 0, outflow[None, :], 1.0), 0.0)
    return MobilityRates(gamma_in, gamma_out, p_in, p_out)


def schedule_from_flows(flows: FlowTensor, populations: np.ndarray) -> MobilitySchedule:
    """Build the combined-rate schedule; entries are F/N of the scaled node."""
    populations = np.asarray(populations, dtype=float)
    if np.any(populations <= 0):
        raise ValueError("populations must be positive")
    for t in range(flows.flows.shape[0]):
        _check_day_inputs(flows.flows[t], populations)
    gp_in = flows.flows / populations[None, :, None]   # divide row n by N[n]
    gp_out = flows.flows / populations[None, None, :]  # divide column n by N[n]
    return MobilitySchedule(gp_in, gp_out)


def zero_schedule(horizon: int, n_nodes: int) -> MobilitySchedule:
    shape = (horizon, n_nodes, n_nodes)
    return MobilitySchedule(np.zeros(shape), np.zeros(shape))


def aggregate(schedule: MobilitySchedule) -> AggregateRates:
    """Sum the per-day rates over the horizon (the C matrices of the budget)."""
    return AggregateRates(schedule.gp_in.sum(axis=0), schedule.gp_out.sum(axis=0), schedule.horizon)


def check_balance(agg: AggregateRates, populations: np.ndarray, tol: float | None = None) -> list[BalanceViolation]:
    """Report pairs where aggregate-in times N[n] differs from aggregate-out times N[m].

    Both sides equal the total person-count moved from m to n over the horizon,
    so any schedule derived from a single flow tensor passes exactly.
    """
    populations = np.asarray(populations, dtype=float)
    if tol is None:
        tol = 1e-9 * populations.max()
    if tol <= 0:
        raise ValueError("tol must be positive")
    lhs = agg.c_in * populations[:, None]
    rhs = agg.c_out * populations[None, :]
    bad = np.abs(lhs - rhs) > tol
    np.fill_diagonal(bad, False)
    return [BalanceViolation(int(n), int(m), float(lhs[n, m]), float(rhs[n, m]))
            for n, m in zip(*np.nonzero(bad))]


def scale_schedule(schedule: MobilitySchedule, multiplier: float) -> MobilitySchedule:
    """Uniformly rescale all mobility; 0 is a full lockdown."""
    if multiplier < 0:
        raise ValueError("multiplier must be non-negative")
    return MobilitySchedule(schedule.gp_in * multiplier, schedule.gp_out * multiplier)


def extend_schedule(schedule: MobilitySchedule, extra_days: int, mode: str = "repeat-last") -> MobilitySchedule:
    """Lengthen a schedule past its data horizon, repeating the last day or adding zeros."""
    if extra_days < 0:
        raise ValueError("extra_days must be non-negative")
    if extra_days == 0:
        return schedule
    if mode == "repeat-last":
        tail_in = np.repeat(schedule.gp_in[-1:], extra_days, axis=0)
        tail_out = np.repeat(schedule.gp_out[-1:], extra_days, axis=0)
    elif mode == "zeros":
        shape = (extra_days, schedule.n_nodes, schedule.n_nodes)
        tail_in = np.zeros(shape)
        tail_out = np.zeros(shape)
    else:
        raise ValueError(f"unknown extension mode {mode!r}")
    return MobilitySchedule(np.concatenate([schedule.gp_in, tail_in]),
                            np.concatenate([schedule.gp_out, tail_out]))


def slice_schedule(schedule: MobilitySchedule, start: int, days: int) -> MobilitySchedule:
    """Take `days` consecutive days starting at index `start`, extending if short."""
    if start < 0 or days < 0:
        raise ValueError("start and days must be non-negative")
    end = start + days
    if end > schedule.horizon:
        if schedule.horizon == 0:
            raise ValueError("cannot extend an empty schedule")
        schedule = extend_schedule(schedule, end - schedule.horizon)
    return MobilitySchedule(schedule.gp_in[start:end].copy(), schedule.gp_out[start:end].copy())
