"""Shared synthetic fixtures.

The self-consistent dataset builder is the workhorse: it iterates
"observe the simulated D, rebuild the initial state from those observations,
re-simulate" to a fixed point, so the six-day initialization rule reconstructs
the generating state exactly. On such a dataset the generating parameters
reproduce the observations with zero loss, which is what makes the
noiseless round-trip calibration checks meaningful.
"""

from datetime import date, timedelta

import numpy as np
import pytest

from saucir.calibration import FitConfig, fit_parameters, initial_state
from saucir.data import Dataset, EpidemicSeries, FlowTensor, NodeMeta, validate_dataset
from saucir.mobility import schedule_from_flows
from saucir.model import EpidemicParams, simulate

START = date(2020, 1, 24)


def daterange(start, n):
    return [start + timedelta(days=k) for k in range(n)]


def build_flow_tensor(rng, node_ids, n_days, populations, frac=0.01, start=START):
    """Asymmetric daily flows around `frac` of the origin population."""
    m = len(node_ids)
    base = rng.uniform(0.3, 1.0, (m, m)) * np.asarray(populations)[None, :] * frac
    np.fill_diagonal(base, 0.0)
    wiggle = 1.0 + 0.2 * np.sin(np.arange(n_days))[:, None, None]
    return FlowTensor(daterange(start, n_days), list(node_ids), base[None, :, :] * wiggle)


def build_selfconsistent_dataset(params: EpidemicParams, nodes, flows: FlowTensor,
                                 d_start, ramp=8.0, max_iter=300, tol=1e-9) -> Dataset:
    """Fixed-point iteration: dataset -> initial state -> simulate -> dataset."""
    node_ids = [n.id for n in nodes]
    populations = np.array([n.population for n in nodes], dtype=float)
    n_days = len(flows.dates)
    m = len(node_ids)
    schedule = schedule_from_flows(flows, populations)

    observed = np.asarray(d_start, dtype=float)[None, :] + ramp * np.arange(n_days)[:, None]

    def as_dataset(obs):
        series = [
            EpidemicSeries(node_ids[k], flows.dates, obs[:, k],
                           quarantine_labeled=obs[:, k] * params.quarantine[k])
            for k in range(m)
        ]
        return validate_dataset(series, flows, nodes)

    for _ in range(max_iter):
        dataset = as_dataset(observed)
        init = initial_state(dataset, flows.dates[0], params.theta,
                             params.incubation_lag, params.asymptomatic_lag, zeta=params.zeta)
        trace = simulate(init, params, populations, schedule, n_days - 1)
        simulated = trace.compartment("d")
        delta = float(np.max(np.abs(simulated - observed)))
        observed = simulated
        if delta < tol:
            return as_dataset(observed)
    raise RuntimeError(f"dataset fixed point did not converge (last delta {delta:.3g})")


TRUE_PARAMS = EpidemicParams(
    alpha0=np.array([0.55, 0.42, 0.35]),
    tau=np.array([0.06, 0.05, 0.04]),
    zeta=np.array([0.25, 0.30, 0.20]),
    beta=np.array([0.08, 0.08, 0.08]),
    quarantine=np.array([0.50, 0.45, 0.55]),
    theta=0.25,
)

NODES3 = [
    NodeMeta("north", "North Province", 2_000_000),
    NodeMeta("center", "Center Province", 1_500_000),
    NodeMeta("south", "South Province", 1_000_000),
]


@pytest.fixture(scope="session")
def synthetic_dataset() -> Dataset:
    """26-day, 3-node dataset generated by the model itself (23 train + 3 holdout)."""
    rng = np.random.default_rng(2020)
    flows = build_flow_tensor(rng, [n.id for n in NODES3], 26,
                              [n.population for n in NODES3], frac=0.012)
    return build_selfconsistent_dataset(TRUE_PARAMS, NODES3, flows,
                                        d_start=[80.0, 60.0, 40.0])


@pytest.fixture(scope="session")
def true_params() -> EpidemicParams:
    return TRUE_PARAMS


@pytest.fixture(scope="session")
def fit_config(synthetic_dataset) -> FitConfig:
    return FitConfig(train_start=synthetic_dataset.dates[0],
                     train_end=synthetic_dataset.dates[22])


@pytest.fixture(scope="session")
def fitted_result(synthetic_dataset, fit_config):
    schedule = schedule_from_flows(synthetic_dataset.flows, synthetic_dataset.populations)
    return fit_parameters(synthetic_dataset, fit_config, schedule)


@pytest.fixture(scope="session")
def cli_data_dir(tmp_path_factory, synthetic_dataset):
    """The synthetic dataset written out as the CSV file formats the CLI reads."""
    from saucir.data import epidemic_to_csv, flow_tensor_to_edge_csv, nodes_to_csv

    out = tmp_path_factory.mktemp("clidata")
    series = [synthetic_dataset.series[i] for i in synthetic_dataset.node_ids]
    (out / "epidemic.csv").write_text(epidemic_to_csv(series))
    (out / "flows.csv").write_text(flow_tensor_to_edge_csv(synthetic_dataset.flows))
    (out / "nodes.csv").write_text(nodes_to_csv(synthetic_dataset.nodes))
    return out


def write_hub_export_fixture(out):
    """Large infected hub feeding two small susceptible nodes; used for the
    migration-scale monotonicity runs (confirmed cases grow with scale)."""
    from saucir.data import EpidemicSeries, FlowTensor, epidemic_to_csv, flow_tensor_to_edge_csv, nodes_to_csv

    n_days = 26
    dates = daterange(START, n_days)
    nodes = [NodeMeta("hub", "Hub", 3_000_000),
             NodeMeta("east", "East", 500_000),
             NodeMeta("west", "West", 400_000)]
    hub_d = 2000.0 + 1000.0 * np.arange(n_days)
    series = [
        EpidemicSeries("hub", dates, hub_d),
        EpidemicSeries("east", dates, np.full(n_days, 10.0)),
        EpidemicSeries("west", dates, np.full(n_days, 10.0)),
    ]
    flows = np.zeros((n_days, 3, 3))
    flows[:, 1, 0] = 12000.0
    flows[:, 2, 0] = 9000.0
    flows[:, 0, 1] = 1500.0
    flows[:, 0, 2] = 1200.0
    flows[:, 2, 1] = 800.0
    flows[:, 1, 2] = 700.0
    tensor = FlowTensor(dates, ["hub", "east", "west"], flows)
    (out / "epidemic.csv").write_text(epidemic_to_csv(series))
    (out / "flows.csv").write_text(flow_tensor_to_edge_csv(tensor))
    (out / "nodes.csv").write_text(nodes_to_csv(nodes))
    fit_doc = {
        "nodes": {
            "hub": {"alpha0": 0.30, "tau": 0.0, "zeta": 0.25, "beta": 0.1, "quarantine": 0.0},
            "east": {"alpha0": 0.25, "tau": 0.0, "zeta": 0.25, "beta": 0.1, "quarantine": 0.0},
            "west": {"alpha0": 0.25, "tau": 0.0, "zeta": 0.25, "beta": 0.1, "quarantine": 0.0},
        },
        "theta": 0.25,
        "incubation_lag": 5,
        "asymptomatic_lag": 21,
        "train_loss": 0.0,
        "evals_used": 0,
        "converged": True,
        "train_start": dates[0].isoformat(),
        "train_end": dates[22].isoformat(),
    }
    import json
    (out / "fit.json").write_text(json.dumps(fit_doc, indent=2, sort_keys=True))
    return out


@pytest.fixture(scope="session")
def hub_fixture_dir(tmp_path_factory):
    return write_hub_export_fixture(tmp_path_factory.mktemp("hubdata"))
