import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from saucir.data import EpidemicSeries, FlowTensor, NodeMeta, validate_dataset
from saucir.service import JobRegistry, LoadedFit, ServiceState, create_app

from conftest import daterange


@pytest.fixture(scope="module")
def service_state(synthetic_dataset, fitted_result, fit_config):
    fit = LoadedFit(fitted_result, fit_config.train_start, fit_config.train_end)
    return ServiceState(dataset=synthetic_dataset, fits={"base": fit})


@pytest.fixture()
def client(service_state):
    # fresh job registry per test so capacity checks do not interfere
    service_state.jobs = JobRegistry(capacity=2)
    return TestClient(create_app(service_state))


class TestHealthAndNodes:
    def test_health(self, client, synthetic_dataset):
        doc = client.get("/health").json()
        assert doc["status"] == "ok"
        assert doc["nodes"] == len(synthetic_dataset.nodes)
        assert doc["fits"] == ["base"]

    def test_health_without_dataset(self):
        empty = TestClient(create_app(ServiceState()))
        doc = empty.get("/health").json()
        assert doc["status"] == "ok" and doc["nodes"] == 0

    def test_unknown_path_404(self, client):
        assert client.get("/definitely-not-here").status_code == 404

    def test_nodes_echo_metadata(self, client, synthetic_dataset):
        entries = client.get("/nodes").json()
        assert len(entries) == 3
        by_id = {e["id"]: e for e in entries}
        for node in synthetic_dataset.nodes:
            assert by_id[node.id]["population"] == node.population
            assert by_id[node.id]["name"] == node.name
            last = synthetic_dataset.series[node.id].cumulative_confirmed[-1]
            assert by_id[node.id]["latest_confirmed"] == pytest.approx(last)


class TestSimulate:
    def test_lockdown_monotonicity(self, client):
        locked = client.post("/simulate", json={"base_fit": "base", "horizon": 14,
                                                "mobility_multiplier": 0.0}).json()
        open_ = client.post("/simulate", json={"base_fit": "base", "horizon": 14,
                                               "mobility_multiplier": 1.0}).json()
        assert locked["total_confirmed"] <= open_["total_confirmed"]

    def test_response_shape(self, client, synthetic_dataset):
        doc = client.post("/simulate", json={"base_fit": "base", "horizon": 5}).json()
        assert doc["days"] == list(range(6))
        for node_id in synthetic_dataset.node_ids:
            for comp in ("D", "C", "U", "A"):
                assert len(doc["series"][node_id][comp]) == 6
        totals = doc["total_confirmed_by_day"]
        assert doc["total_confirmed"] == pytest.approx(totals[-1])

    def test_infection_free_fit_constant_series(self):
        nodes = [NodeMeta("q", "Quiet", 10000)]
        dates = daterange(__import__("datetime").date(2020, 3, 1), 20)
        series = [EpidemicSeries("q", dates, np.full(20, 7.0))]
        flows = FlowTensor(dates, ["q"], np.zeros((20, 1, 1)))
        ds = validate_dataset(series, flows, nodes)
        from saucir.calibration import FitConfig, fit_parameters
        cfg = FitConfig(train_start=dates[0], train_end=dates[14], max_evals=200)
        fit = fit_parameters(ds, cfg, None)
        state = ServiceState(dataset=ds, fits={"base": LoadedFit(fit, dates[0], dates[14])})
        c = TestClient(create_app(state))
        doc = c.post("/simulate", json={"base_fit": "base", "horizon": 1}).json()
        assert doc["series"]["q"]["D"] == [7.0, 7.0]

    def test_theta_override_validation_boundary(self, client):
        ok = client.post("/simulate", json={"base_fit": "base", "horizon": 3, "theta": 0.99})
        assert ok.status_code == 200
        bad = client.post("/simulate", json={"base_fit": "base", "horizon": 3, "theta": 1.0})
        assert bad.status_code == 422
        assert bad.json()["code"] == "out_of_range"

    def test_invalid_body_is_400_with_fields(self, client):
        r = client.post("/simulate", json={"horizon": "soon"})
        assert r.status_code == 400
        doc = r.json()
        assert doc["code"] == "invalid_body"
        fields = {d["field"] for d in doc["details"]}
        assert any("base_fit" in f for f in fields)

    def test_unknown_fit_404(self, client):
        r = client.post("/simulate", json={"base_fit": "nope", "horizon": 3})
        assert r.status_code == 404

    def test_per_node_quarantine_override(self, client):
        r = client.post("/simulate", json={"base_fit": "base", "horizon": 5,
                                           "quarantine": {"north": 0.9}})
        assert r.status_code == 200
        r2 = client.post("/simulate", json={"base_fit": "base", "horizon": 5,
                                            "quarantine": {"nowhere": 0.9}})
        assert r2.status_code == 422

    def test_matrix_multiplier_shape_checked(self, client):
        r = client.post("/simulate", json={"base_fit": "base", "horizon": 3,
                                           "mobility_multiplier": [[1.0, 0.5], [0.5, 1.0]]})
        assert r.status_code == 422

    def test_blowup_returns_500_with_detail(self, client):
        r = client.post("/simulate", json={"base_fit": "base", "horizon": 180,
                                           "alpha0_multiplier": 1e308})
        assert r.status_code == 500
        doc = r.json()
        assert doc["code"] == "simulation_blow_up"
        assert "node" in doc["message"]

    def test_concurrent_requests_match_serial_baselines(self, client):
        payloads = [{"base_fit": "base", "horizon": 8, "mobility_multiplier": m}
                    for m in (0.0, 0.5, 1.0, 2.0)]
        baselines = [client.post("/simulate", json=p).json()["total_confirmed"]
                     for p in payloads]
        results = [None] * len(payloads)

        def hit(i):
            results[i] = client.post("/simulate", json=payloads[i]).json()["total_confirmed"]

        threads = [threading.Thread(target=hit, args=(i,)) for i in range(len(payloads))]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results == baselines


class TestForecast:
    def test_shape_and_metrics(self, client, synthetic_dataset):
        doc = client.post("/forecast", json={"fit": "base", "horizon": 3}).json()
        assert set(doc["reports"]) == set(synthetic_dataset.node_ids)
        for report in doc["reports"].values():
            assert len(report["predicted"]) == 3
            assert report["mape"] is not None

    def test_unknown_fit(self, client):
        assert client.post("/forecast", json={"fit": "ghost", "horizon": 3}).status_code == 404

    def test_mape_equals_recomputed_max_pe(self, client):
        doc = client.post("/forecast", json={"fit": "base", "horizon": 3}).json()
        for report in doc["reports"].values():
            recomputed = max(abs(p - o) / o
                             for p, o in zip(report["predicted"], report["observed"]))
            assert report["mape"] == pytest.approx(recomputed, rel=1e-12)


class TestOptimizeJobs:
    def _submit(self, client, **overrides):
        body = {"base_fit": "base", "horizon": 6, "population_size": 6,
                "generations": 3, "seed": 1}
        body.update(overrides)
        return client.post("/optimize", json=body)

    def _wait(self, client, job_id, timeout=30.0):
        deadline = time.time() + timeout
        states = []
        while time.time() < deadline:
            doc = client.get(f"/jobs/{job_id}").json()
            states.append(doc["state"])
            if doc["state"] in ("done", "failed"):
                return doc, states
            time.sleep(0.05)
        raise AssertionError(f"job {job_id} did not finish; states {states}")

    def test_tiny_job_completes(self, client):
        r = self._submit(client)
        assert r.status_code == 202
        doc, states = self._wait(client, r.json()["id"])
        assert doc["state"] == "done"
        assert len(doc["result"]["fitness_history"]) == 3
        order = {"pending": 0, "running": 1, "done": 2, "failed": 2}
        ranks = [order[s] for s in states]
        assert ranks == sorted(ranks)  # transitions never regress

    def test_progress_monotone_and_complete(self, client):
        r = self._submit(client, generations=5)
        doc, _ = self._wait(client, r.json()["id"])
        assert doc["progress"] == {"done": 5, "total": 5}

    def test_same_seed_same_result(self, client):
        r1 = self._submit(client, seed=7)
        d1, _ = self._wait(client, r1.json()["id"])
        r2 = self._submit(client, seed=7)
        d2, _ = self._wait(client, r2.json()["id"])
        assert d1["result"]["best_objective"] == d2["result"]["best_objective"]
        assert d1["result"]["fitness_history"] == d2["result"]["fitness_history"]
        assert d1["result"]["schedule_csv"] == d2["result"]["schedule_csv"]

    def test_capacity_409(self, client):
        slow = {"generations": 80, "population_size": 10}
        a = self._submit(client, **slow)
        b = self._submit(client, **slow)
        assert a.status_code == 202 and b.status_code == 202
        c = self._submit(client)
        assert c.status_code == 409
        assert c.json()["code"] == "capacity"
        self._wait(client, a.json()["id"], timeout=60)
        self._wait(client, b.json()["id"], timeout=60)

    def test_invalid_config_400(self, client):
        r = self._submit(client, population_size=1)
        assert r.status_code == 400
        assert r.json()["code"] == "invalid_config"
        r2 = self._submit(client, target_nodes=["atlantis"])
        assert r2.status_code == 400

    def test_unknown_job_404(self, client):
        assert client.get("/jobs/deadbeef").status_code == 404
