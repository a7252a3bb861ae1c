"""Write the demo fixture (nodes/epidemic/flows CSVs plus a fit document)
into the directory given as argv[1], for the live end-to-end run."""

import json
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from saucir.data import EpidemicSeries, FlowTensor, NodeMeta, epidemic_to_csv, flow_tensor_to_edge_csv, nodes_to_csv

out = Path(sys.argv[1])
out.mkdir(parents=True, exist_ok=True)

n_days = 26
start = date(2020, 1, 24)
dates = [start + timedelta(days=k) for k in range(n_days)]
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
tensor = FlowTensor(dates, [n.id for n in nodes], flows)

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
(out / "fit.json").write_text(json.dumps(fit_doc, indent=2, sort_keys=True))
print(f"fixture written to {out}")
