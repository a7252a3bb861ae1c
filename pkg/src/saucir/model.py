"""Daily-stepped network epidemic model with a segmented infectious compartment.

Each node of the mobility network carries six compartments:

    S   susceptible
    U   symptomatic, pathologically infected but not yet confirmed
    A   asymptomatic carriers (transmit, never confirmed)
    C   confirmed and under therapy (isolated, no longer transmitting)
    D   cumulative confirmed (C plus everyone already removed from C)
    R2  recovered from the asymptomatic branch

New infections split theta : (1 - theta) between A and U. U converts to
confirmed after a fixed incubation lag (5 days by default); A self-resolves
after the communicable period (21 days). Both delayed drains read the
compartment's value lag days before the day the increment lands on, which is
what the per-node history rings store. A quarantine rate l discounts every
new-infection term by (1 - l), and the local transmission rate decays as
alpha(t) = alpha0 * exp(-tau * t) while migration conservatively keeps
alpha0.

Cross-node coupling uses the combined mobility rates of
:mod:`saucir.mobility`: people (and in-transit infections) move between
nodes each day according to the schedule's gp_in / gp_out tensors.

Updates are explicit daily Euler steps on the calendar grid of the data.
Compartments are clamped at zero (and S at N) after each step; clamp events
are counted on the trace rather than silently ignored.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .mobility import MobilitySchedule, zero_schedule

COMPARTMENTS = ("s", "u", "a", "c", "d", "r2")


class SimulationBlowUp(RuntimeError):
    """A step produced a non-finite value; parameters are numerically unstable."""


def _per_node(value, n_nodes: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_nodes, float(arr))
    if arr.shape != (n_nodes,):
        raise ValueError(f"{name} must be scalar or length {n_nodes}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class EpidemicParams:
    """Per-node rate parameters plus the global asymptomatic probability.

    ``incubation_lag`` and ``asymptomatic_lag`` accept 0 as a degenerate test
    configuration in which the delayed read collapses to the current value;
    otherwise they are confined to [3, 7] and [6, 21], warning outside the
    validated [3, 5] / [9, 21] ranges.
    """

    alpha0: np.ndarray
    tau: np.ndarray
    zeta: np.ndarray
    beta: np.ndarray
    quarantine: np.ndarray
    theta: float
    incubation_lag: int = 5
    asymptomatic_lag: int = 21
    migration_uses_decay: bool = False  # use alpha(t) instead of alpha(0) in transit

    def __post_init__(self):
        n = len(np.atleast_1d(np.asarray(self.alpha0, dtype=float)))
        for name in ("alpha0", "tau", "zeta", "beta", "quarantine"):
            object.__setattr__(self, name, _per_node(getattr(self, name), n, name))
        if np.any(self.alpha0 < 0) or np.any(self.tau < 0):
            raise ValueError("alpha0 and tau must be non-negative")
        for name, arr in (("zeta", self.zeta), ("beta", self.beta), ("quarantine", self.quarantine)):
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.theta < 1:
            raise ValueError(f"theta must lie in [0, 1), got {self.theta}")
        if self.incubation_lag != 0 and not 3 <= self.incubation_lag <= 7:
            raise ValueError(f"incubation_lag must be 0 or in [3, 7], got {self.incubation_lag}")
        if self.asymptomatic_lag != 0 and not 6 <= self.asymptomatic_lag <= 21:
            raise ValueError(f"asymptomatic_lag must be 0 or in [6, 21], got {self.asymptomatic_lag}")
        if self.incubation_lag != 0 and not 3 <= self.incubation_lag <= 5:
            warnings.warn(f"incubation_lag {self.incubation_lag} is outside the validated [3, 5] range")
        if self.asymptomatic_lag != 0 and not 9 <= self.asymptomatic_lag <= 21:
            warnings.warn(f"asymptomatic_lag {self.asymptomatic_lag} is outside the validated [9, 21] range")

    @property
    def n_nodes(self) -> int:
        return len(self.alpha0)


@dataclass(frozen=True)
class NodeState:
    """Compartment sizes of a single node (persons)."""

    s: float
    u: float
    a: float
    c: float
    d: float
    r2: float

    def __post_init__(self):
        for name in COMPARTMENTS:
            if getattr(self, name) < 0:
                raise ValueError(f"compartment {name} is negative")
        if self.d < self.c - 1e-9:
            raise ValueError("cumulative confirmed d must be >= active confirmed c")


@dataclass
class NetworkState:
    """All compartments plus the delay history rings, at one day index."""

    day: int
    s: np.ndarray
    u: np.ndarray
    a: np.ndarray
    c: np.ndarray
    d: np.ndarray
    r2: np.ndarray
    u_history: np.ndarray  # (incubation_lag, M), oldest first
    a_history: np.ndarray  # (asymptomatic_lag, M), oldest first

    def __post_init__(self):
        m = len(self.s)
        for name in COMPARTMENTS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (m,):
                raise ValueError(f"{name} must have shape ({m},)")
            setattr(self, name, arr)
        for name in ("u_history", "a_history"):
            ring = np.asarray(getattr(self, name), dtype=float)
            if ring.ndim != 2 or ring.shape[1] != m:
                raise ValueError(f"{name} must have shape (lag, {m})")
            if np.any(ring < 0):
                raise ValueError(f"{name} entries must be non-negative")
            setattr(self, name, ring)

    @property
    def n_nodes(self) -> int:
        return len(self.s)

    def node_state(self, i: int) -> NodeState:
        return NodeState(*(float(getattr(self, name)[i]) for name in COMPARTMENTS))

    def copy(self) -> "NetworkState":
        return NetworkState(self.day, *(getattr(self, n).copy() for n in COMPARTMENTS),
                            self.u_history.copy(), self.a_history.copy())

    @classmethod
    def infection_free(cls, populations, incubation_lag: int = 5, asymptomatic_lag: int = 21,
                       day: int = 0) -> "NetworkState":
        populations = np.asarray(populations, dtype=float)
        m = len(populations)
        zeros = lambda: np.zeros(m)
        return cls(day, populations.copy(), zeros(), zeros(), zeros(), zeros(), zeros(),
                   np.zeros((incubation_lag, m)), np.zeros((asymptomatic_lag, m)))


@dataclass
class SimulationTrace:
    """Daily snapshots from day 0 through the horizon, plus run diagnostics."""

    states: list[NetworkState]
    params_used: EpidemicParams
    schedule_used: MobilitySchedule
    clamp_events: int = 0
    conservation_residual: float = 0.0

    def compartment(self, name: str) -> np.ndarray:
        """Trajectory of one compartment, shaped (days + 1, nodes)."""
        return np.stack([getattr(st, name) for st in self.states])

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


def transmission_rate(alpha0, tau, t):
    """Exponentially decaying local transmission rate alpha0 * exp(-tau * t)."""
    return alpha0 * np.exp(-np.asarray(tau, dtype=float) * t)


def local_deltas(s, u, a, c, population, alpha_t, zeta, beta, quarantine, theta,
                 delayed_u, delayed_a):
    """Single-day local increments for one node (broadcasts over arrays).

    Returns (ds, du, da, dc, dd, dr2). New infections are discounted by the
    quarantine factor; the delayed drains and the recovery of C are not.
    """
    pressure = (1.0 - quarantine) * alpha_t * (u + a) * s / population
    confirmed_now = zeta * delayed_u
    ds = -pressure
    du = pressure * (1.0 - theta) - confirmed_now
    da = pressure * theta - delayed_a
    dc = confirmed_now - beta * c
    dd = confirmed_now
    dr2 = delayed_a
    return ds, du, da, dc, dd, dr2


def migration_deltas(s, u, a, populations, alpha_migration, theta, quarantine,
                     gp_in_day, gp_out_day):
    """Cross-node increments for S, U, A from one day's mobility matrices.

    ``alpha_migration`` is the per-origin transmission rate applied to travel
    (the undecayed alpha0 by default). Arrivals of U and A, and infections in
    transit, are discounted by the destination's quarantine factor.
    """
    s = np.asarray(s, dtype=float)
    populations = np.asarray(populations, dtype=float)
    infect = alpha_migration * (u + a) * s / populations  # new infections at each origin
    keep = 1.0 - quarantine
    departure = gp_out_day.sum(axis=0)  # total out-rate per origin
    ds = gp_in_day @ s - keep * (gp_in_day @ infect) - departure * s
    du = keep * (gp_in_day @ u) + keep * (1.0 - theta) * (gp_in_day @ infect) - keep * departure * u
    da = keep * (gp_in_day @ a) + keep * theta * (gp_in_day @ infect) - keep * departure * a
    return ds, du, da


class _ClampCounter:
    def __init__(self):
        self.events = 0

    def floor(self, arr):
        below = arr < 0
        self.events += int(np.count_nonzero(below))
        return np.where(below, 0.0, arr)


def step(state: NetworkState, params: EpidemicParams, populations,
         gp_in_day, gp_out_day, _clamps: _ClampCounter | None = None) -> NetworkState:
    """Advance the network by one day.

    The history rings are rotated with the pre-update U and A appended, and the
    delayed reads come from the rotated ring's head, so the increment landing
    on day t+1 uses the compartment value of day t+1-lag.
    """
    populations = np.asarray(populations, dtype=float)
    t = state.day

    if params.incubation_lag > 0:
        u_history = np.vstack([state.u_history[1:], state.u[None, :]])
        delayed_u = u_history[0]
    else:
        u_history = state.u_history
        delayed_u = state.u
    if params.asymptomatic_lag > 0:
        a_history = np.vstack([state.a_history[1:], state.a[None, :]])
        delayed_a = a_history[0]
    else:
        a_history = state.a_history
        delayed_a = state.a

    # overflow here surfaces as SimulationBlowUp below, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        alpha_t = transmission_rate(params.alpha0, params.tau, t)
        ds, du, da, dc, dd, dr2 = local_deltas(
            state.s, state.u, state.a, state.c, populations, alpha_t,
            params.zeta, params.beta, params.quarantine, params.theta, delayed_u, delayed_a)

        alpha_mig = alpha_t if params.migration_uses_decay else params.alpha0
        mds, mdu, mda = migration_deltas(
            state.s, state.u, state.a, populations, alpha_mig, params.theta,
            params.quarantine, np.asarray(gp_in_day, dtype=float), np.asarray(gp_out_day, dtype=float))

        clamps = _clamps if _clamps is not None else _ClampCounter()
        s = np.minimum(clamps.floor(state.s + ds + mds), populations)
        u = clamps.floor(state.u + du + mdu)
        a = clamps.floor(state.a + da + mda)
        c = clamps.floor(state.c + dc)
        d = state.d + dd
        r2 = state.r2 + dr2

    for name, arr in zip(COMPARTMENTS, (s, u, a, c, d, r2)):
        if not np.all(np.isfinite(arr)):
            node = int(np.nonzero(~np.isfinite(arr))[0][0])
            raise SimulationBlowUp(f"non-finite {name.upper()} at node index {node}, day {t + 1}")
    return NetworkState(t + 1, s, u, a, c, d, r2, u_history, a_history)


def simulate(initial: NetworkState, params: EpidemicParams, populations,
             schedule: MobilitySchedule, horizon: int) -> SimulationTrace:
    """Run the coupled model for `horizon` days, snapshotting every day."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if horizon > schedule.horizon:
        raise ValueError(f"horizon {horizon} exceeds schedule horizon {schedule.horizon}")
    populations = np.asarray(populations, dtype=float)
    clamps = _ClampCounter()
    states = [initial.copy()]
    current = states[0]
    for k in range(horizon):
        current = step(current, params, populations, schedule.gp_in[k], schedule.gp_out[k], clamps)
        states.append(current)
    totals = np.stack([st.s + st.u + st.a + st.d + st.r2 for st in states])
    residual = float(np.abs(totals - populations[None, :]).max()) if states else 0.0
    return SimulationTrace(states, params, schedule, clamps.events, residual)


def simulate_saucir_minus_m(initial: NetworkState, params: EpidemicParams,
                            populations, horizon: int) -> SimulationTrace:
    """The same local dynamics with all mobility removed (zero schedule)."""
    return simulate(initial, params, populations,
                    zero_schedule(horizon, initial.n_nodes), horizon)


def sir_mobility_deltas(x, gamma: float, p_in: np.ndarray, p_out: np.ndarray):
    """Uniform-rate mobility increment gamma * (P_in @ x - colsum(P_out) * x)."""
    x = np.asarray(x, dtype=float)
    return gamma * (p_in @ x - p_out.sum(axis=0) * x)


def simulate_sir(s0, i0, alpha: float, beta0: float, populations, horizon: int,
                 cumulative0=None) -> dict[str, np.ndarray]:
    """Uncoupled per-node SIR baseline, daily Euler steps.

    Returns trajectories for s, i, and cumulative infections (incidence
    accumulated from ``cumulative0``, which defaults to N - s0).
    """
    return simulate_sir_m(s0, i0, alpha, beta0, populations, 0.0, None, None,
                          horizon, cumulative0)


def simulate_sir_m(s0, i0, alpha: float, beta0: float, populations, gamma: float,
                   p_in, p_out, horizon: int, cumulative0=None) -> dict[str, np.ndarray]:
    """SIR baseline plus symmetric mobility coupling with one uniform rate.

    With gamma = 0 this is bit-identical to :func:`simulate_sir` (the mobility
    increment is exactly zero).
    """
    if alpha < 0 or beta0 < 0 or gamma < 0:
        raise ValueError("alpha, beta0, and gamma must be non-negative")
    populations = np.asarray(populations, dtype=float)
    m = len(populations)
    s = np.asarray(s0, dtype=float).copy()
    i = np.asarray(i0, dtype=float).copy()
    k = populations - s if cumulative0 is None else np.asarray(cumulative0, dtype=float).copy()
    if gamma > 0:
        p_in = np.asarray(p_in, dtype=float)
        p_out = np.asarray(p_out, dtype=float)
    else:
        p_in = np.zeros((m, m))
        p_out = np.zeros((m, m))

    out = {"s": [s.copy()], "i": [i.copy()], "cumulative": [k.copy()]}
    for _ in range(horizon):
        incidence = alpha * i * s / populations
        ds = -incidence + sir_mobility_deltas(s, gamma, p_in, p_out)
        di = incidence - beta0 * i + sir_mobility_deltas(i, gamma, p_in, p_out)
        s = np.minimum(np.maximum(s + ds, 0.0), populations)
        i = np.maximum(i + di, 0.0)
        k = k + incidence
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(i))):
            raise SimulationBlowUp("non-finite SIR state")
        out["s"].append(s.copy())
        out["i"].append(i.copy())
        out["cumulative"].append(k.copy())
    return {key: np.stack(val) for key, val in out.items()}


def trace_to_csv(trace: SimulationTrace, node_ids: list[str]) -> str:
    """Export a trace as day,node,S,U,A,C,D,R2 rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["day", "node", "S", "U", "A", "C", "D", "R2"])
    for st in trace.states:
        for k, node in enumerate(node_ids):
            writer.writerow([st.day, node] + [repr(float(getattr(st, c)[k])) for c in COMPARTMENTS])
    return buf.getvalue()


def trace_to_dict(trace: SimulationTrace, node_ids: list[str]) -> dict:
    """JSON-ready mirror of the trace (per-node daily series plus diagnostics)."""
    series = {
        node: {c.upper(): [float(getattr(st, c)[k]) for st in trace.states] for c in COMPARTMENTS}
        for k, node in enumerate(node_ids)
    }
    return {
        "days": [st.day for st in trace.states],
        "nodes": node_ids,
        "series": series,
        "clamp_events": trace.clamp_events,
        "conservation_residual": trace.conservation_residual,
    }
