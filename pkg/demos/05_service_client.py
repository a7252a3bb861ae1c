"""Drive the HTTP what-if API end to end: scenarios, forecasts, an async job.

Starts the service in-process against a synthetic fitted model, then acts as
an analyst: check health, compare a lockdown scenario against the baseline,
pull a forecast, and launch a small schedule optimization and poll it home.
"""

import threading
import time
from datetime import date, timedelta

import numpy as np
import requests
import uvicorn

from saucir.calibration import FitConfig, fit_parameters, initial_state
from saucir.data import EpidemicSeries, FlowTensor, NodeMeta, validate_dataset
from saucir.mobility import schedule_from_flows
from saucir.model import EpidemicParams, simulate
from saucir.service import LoadedFit, ServiceState, create_app

# ---- build a small fitted model to serve -------------------------------
rng = np.random.default_rng(8)
start = date(2020, 1, 24)
dates = [start + timedelta(days=k) for k in range(26)]
nodes = [NodeMeta("north", "North", 2_000_000),
         NodeMeta("center", "Center", 1_500_000),
         NodeMeta("south", "South", 1_000_000)]
populations = np.array([n.population for n in nodes], dtype=float)
truth = EpidemicParams(alpha0=np.array([0.55, 0.42, 0.35]), tau=np.array([0.06, 0.05, 0.04]),
                       zeta=np.array([0.25, 0.3, 0.2]), beta=np.full(3, 0.08),
                       quarantine=np.array([0.5, 0.45, 0.55]), theta=0.25)
flow_base = rng.uniform(5_000, 20_000, (3, 3))
np.fill_diagonal(flow_base, 0.0)
flows = FlowTensor(dates, [n.id for n in nodes], np.tile(flow_base, (26, 1, 1)))
schedule = schedule_from_flows(flows, populations)
observed = np.array([[80.0, 60.0, 40.0]]) + 8.0 * np.arange(26)[:, None]
for _ in range(200):
    series = [EpidemicSeries(n.id, dates, observed[:, k],
                             quarantine_labeled=observed[:, k] * truth.quarantine[k])
              for k, n in enumerate(nodes)]
    dataset = validate_dataset(series, flows, nodes)
    init = initial_state(dataset, start, truth.theta, zeta=truth.zeta)
    simulated = simulate(init, truth, populations, schedule, 25).compartment("d")
    if np.max(np.abs(simulated - observed)) < 1e-9:
        break
    observed = simulated

config = FitConfig(train_start=dates[0], train_end=dates[22])
fit = fit_parameters(dataset, config, schedule)
state = ServiceState(dataset=dataset,
                     fits={"demo": LoadedFit(fit, config.train_start, config.train_end)})

# ---- run uvicorn in a background thread --------------------------------
PORT = 8765
server = uvicorn.Server(uvicorn.Config(create_app(state), host="127.0.0.1",
                                       port=PORT, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
base_url = f"http://127.0.0.1:{PORT}"
for _ in range(100):
    try:
        requests.get(base_url + "/health", timeout=0.2)
        break
    except requests.ConnectionError:
        time.sleep(0.05)

print("health:", requests.get(base_url + "/health").json())
print("nodes:", [n["id"] for n in requests.get(base_url + "/nodes").json()])

baseline = requests.post(base_url + "/simulate",
                         json={"base_fit": "demo", "horizon": 21}).json()
lockdown = requests.post(base_url + "/simulate",
                         json={"base_fit": "demo", "horizon": 21,
                               "mobility_multiplier": 0.0}).json()
print(f"\n21-day scenario totals: baseline {baseline['total_confirmed']:,.0f}, "
      f"full lockdown {lockdown['total_confirmed']:,.0f}")

forecast = requests.post(base_url + "/forecast", json={"fit": "demo", "horizon": 3}).json()
worst = max(r["mape"] for r in forecast["reports"].values())
print(f"3-day forecast, worst per-node MAPE: {worst:.4f}")

job = requests.post(base_url + "/optimize",
                    json={"base_fit": "demo", "horizon": 10, "population_size": 12,
                          "generations": 5, "seed": 1}).json()
print(f"\noptimization job {job['id']} accepted; polling...")
while True:
    doc = requests.get(f"{base_url}/jobs/{job['id']}").json()
    print(f"  state={doc['state']} progress={doc['progress']['done']}/{doc['progress']['total']}")
    if doc["state"] in ("done", "failed"):
        break
    time.sleep(0.3)
print(f"job finished: best objective {doc['result']['best_objective']:,.1f}")

server.should_exit = True
thread.join(timeout=5)
