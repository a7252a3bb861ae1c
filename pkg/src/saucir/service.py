"""HTTP/JSON what-if API over the fitted model.

Synchronous endpoints (/simulate, /forecast) call straight into the engine;
optimization runs as asynchronous in-memory jobs with monotone
pending -> running -> done|failed transitions. Loaded datasets and fits are
immutable after startup; the job registry is the only shared mutable state.

Errors are always ``{"code", "message", "details": [...]}``: 400 for bodies
that do not parse against the schema, 422 for well-formed bodies violating a
model invariant, 404 for unknown ids, 409 at job capacity, 500 for numerical
blow-ups.
"""

from __future__ import annotations

import dataclasses
import threading
import uuid
from dataclasses import dataclass, field
from datetime import date

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .calibration import FitConfig, FitResult, initial_state
from .data import Dataset
from .evaluate import forecast_fit, report_to_dict
from .mobility import MobilitySchedule, aggregate, scale_schedule, schedule_from_flows, slice_schedule
from .model import SimulationBlowUp, simulate
from .policyopt import GAConfig, optimize, result_to_dict, schedule_to_csv

MAX_SYNC_HORIZON = 366


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: list | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.details = details or []
        super().__init__(message)


@dataclass
class LoadedFit:
    result: FitResult
    train_start: date
    train_end: date


@dataclass
class JobRecord:
    id: str
    state: str = "pending"  # pending -> running -> done | failed
    done_generations: int = 0
    total_generations: int = 0
    result: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "progress": {"done": self.done_generations, "total": self.total_generations},
            "result": self.result,
            "error": self.error,
        }


class JobRegistry:
    def __init__(self, capacity: int = 2):
        self.capacity = capacity
        self._jobs: dict[str, JobRecord] = {}
        self._lock = threading.Lock()

    def submit(self, runner) -> JobRecord:
        with self._lock:
            active = sum(1 for j in self._jobs.values() if j.state in ("pending", "running"))
            if active >= self.capacity:
                raise ApiError(409, "capacity", f"server already runs {active} jobs")
            record = JobRecord(id=uuid.uuid4().hex)
            self._jobs[record.id] = record
        thread = threading.Thread(target=runner, args=(record,), daemon=True)
        thread.start()
        return record

    def update(self, job_id: str, **fields):
        with self._lock:
            job = self._jobs[job_id]
            for name, value in fields.items():
                setattr(job, name, value)

    def get(self, job_id: str) -> JobRecord:
        with self._lock:
            if job_id not in self._jobs:
                raise ApiError(404, "unknown_job", f"no job {job_id!r}")
            return self._jobs[job_id]


@dataclass
class ServiceState:
    dataset: Dataset | None = None
    fits: dict[str, LoadedFit] = field(default_factory=dict)
    jobs: JobRegistry = field(default_factory=JobRegistry)

    @property
    def base_schedule(self) -> MobilitySchedule:
        return schedule_from_flows(self.dataset.flows, self.dataset.populations)

    def require_dataset(self) -> Dataset:
        if self.dataset is None:
            raise ApiError(404, "no_dataset", "no dataset loaded")
        return self.dataset


class ScenarioRequest(BaseModel):
    base_fit: str
    horizon: int
    mobility_multiplier: float | list[list[float]] = 1.0
    theta: float | None = None
    quarantine: float | dict[str, float] | None = None
    alpha0_multiplier: float | dict[str, float] | None = None
    target_nodes: list[str] | None = None


class ForecastRequest(BaseModel):
    fit: str
    horizon: int = 3


class OptimizeRequest(BaseModel):
    base_fit: str
    horizon: int
    population_size: int = 50
    generations: int = 200
    crossover_rate: float = 0.8
    mutation_rate: float = 0.02
    elitism_count: int = 2
    seed: int = 0
    target_nodes: list[str] | None = None
    mobility_scale: float = 1.0


def _resolve_fit(state: ServiceState, fit_id: str) -> LoadedFit:
    if fit_id not in state.fits:
        raise ApiError(404, "unknown_fit", f"no fit {fit_id!r} loaded")
    return state.fits[fit_id]


def _per_node(value, node_ids, name, lo=None, hi=None):
    if isinstance(value, dict):
        unknown = sorted(set(value) - set(node_ids))
        if unknown:
            raise ApiError(422, "unknown_node", f"{name} names unknown nodes {unknown}")
        out = np.array([float(value.get(i, np.nan)) for i in node_ids])
    else:
        out = np.full(len(node_ids), float(value))
    filled = out[~np.isnan(out)]
    if lo is not None and np.any(filled < lo):
        raise ApiError(422, "out_of_range", f"{name} must be >= {lo}")
    if hi is not None and np.any(filled > hi):
        raise ApiError(422, "out_of_range", f"{name} must be <= {hi}")
    return out


def _scenario_params(state: ServiceState, req: ScenarioRequest, fit: LoadedFit):
    p = fit.result.params
    updates = {}
    if req.theta is not None:
        if not 0 <= req.theta < 1:
            raise ApiError(422, "out_of_range", "theta must lie in [0, 1)")
        updates["theta"] = req.theta
    if req.quarantine is not None:
        override = _per_node(req.quarantine, state.dataset.node_ids, "quarantine", 0.0, 1.0)
        updates["quarantine"] = np.where(np.isnan(override), p.quarantine, override)
    if req.alpha0_multiplier is not None:
        mult = _per_node(req.alpha0_multiplier, state.dataset.node_ids, "alpha0_multiplier", 0.0)
        updates["alpha0"] = p.alpha0 * np.where(np.isnan(mult), 1.0, mult)
    return dataclasses.replace(p, **updates) if updates else p


def _scenario_schedule(state: ServiceState, req: ScenarioRequest, fit: LoadedFit) -> MobilitySchedule:
    t0 = state.dataset.date_index(fit.train_start)
    sched = slice_schedule(state.base_schedule, t0, req.horizon)
    mult = req.mobility_multiplier
    if isinstance(mult, (int, float)):
        if mult < 0:
            raise ApiError(422, "out_of_range", "mobility_multiplier must be >= 0")
        return scale_schedule(sched, float(mult))
    matrix = np.asarray(mult, dtype=float)
    m = len(state.dataset.node_ids)
    if matrix.shape != (m, m):
        raise ApiError(422, "bad_shape", f"mobility_multiplier matrix must be {m}x{m}")
    if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
        raise ApiError(422, "out_of_range", "mobility_multiplier entries must be >= 0 and finite")
    return MobilitySchedule(sched.gp_in * matrix[None, :, :], sched.gp_out * matrix[None, :, :])


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="saucir", version=__version__)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(ApiError)
    async def on_api_error(_: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message,
                                     "details": exc.details})

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_: Request, exc: RequestValidationError):
        details = [{"field": ".".join(str(p) for p in e["loc"]), "message": e["msg"]}
                   for e in exc.errors()]
        return JSONResponse(status_code=400,
                            content={"code": "invalid_body",
                                     "message": "request body failed validation",
                                     "details": details})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__,
                "nodes": 0 if state.dataset is None else len(state.dataset.nodes),
                "fits": sorted(state.fits)}

    @app.get("/nodes")
    def nodes():
        if state.dataset is None:
            return []
        out = []
        for node in state.dataset.nodes:
            series = state.dataset.series[node.id]
            out.append({"id": node.id, "name": node.name, "population": node.population,
                        "latest_confirmed": float(series.cumulative_confirmed[-1])})
        return out

    @app.post("/simulate")
    def run_scenario(req: ScenarioRequest):
        state.require_dataset()
        if req.horizon < 1 or req.horizon > MAX_SYNC_HORIZON:
            raise ApiError(422, "out_of_range",
                           f"horizon must lie in [1, {MAX_SYNC_HORIZON}]")
        fit = _resolve_fit(state, req.base_fit)
        targets = req.target_nodes or state.dataset.node_ids
        unknown = sorted(set(targets) - set(state.dataset.node_ids))
        if unknown:
            raise ApiError(422, "unknown_node", f"target_nodes names unknown nodes {unknown}")
        params = _scenario_params(state, req, fit)
        schedule = _scenario_schedule(state, req, fit)
        init = initial_state(state.dataset, fit.train_start, params.theta,
                             params.incubation_lag, params.asymptomatic_lag, zeta=params.zeta)
        try:
            trace = simulate(init, params, state.dataset.populations, schedule, req.horizon)
        except SimulationBlowUp as exc:
            raise ApiError(500, "simulation_blow_up", str(exc))
        ids = state.dataset.node_ids
        target_idx = [ids.index(t) for t in targets]
        d = trace.compartment("d")
        series = {
            node_id: {c: [float(x) for x in trace.compartment(c.lower())[:, k]]
                      for c in ("D", "C", "U", "A")}
            for k, node_id in enumerate(ids)
        }
        return {
            "days": [st.day for st in trace.states],
            "nodes": ids,
            "series": series,
            "target_nodes": targets,
            "total_confirmed_by_day": [float(x) for x in d[:, target_idx].sum(axis=1)],
            "total_confirmed": float(d[-1, target_idx].sum()),
            "clamp_events": trace.clamp_events,
        }

    @app.post("/forecast")
    def forecast(req: ForecastRequest):
        state.require_dataset()
        fit = _resolve_fit(state, req.fit)
        if req.horizon < 0 or req.horizon > MAX_SYNC_HORIZON:
            raise ApiError(422, "out_of_range", "horizon out of range")
        config = FitConfig(train_start=fit.train_start, train_end=fit.train_end,
                           theta=fit.result.params.theta)
        reports = forecast_fit(state.dataset, fit.result, config, req.horizon)
        return {"fit": req.fit, "horizon": req.horizon,
                "reports": {nid: report_to_dict(r) for nid, r in reports.items()}}

    @app.post("/optimize", status_code=202)
    def launch(req: OptimizeRequest):
        state.require_dataset()
        fit = _resolve_fit(state, req.base_fit)
        if req.mobility_scale < 0:
            raise ApiError(400, "invalid_config", "mobility_scale must be >= 0")
        try:
            config = GAConfig(horizon=req.horizon, population_size=req.population_size,
                              generations=req.generations, crossover_rate=req.crossover_rate,
                              mutation_rate=req.mutation_rate, elitism_count=req.elitism_count,
                              seed=req.seed, target_nodes=req.target_nodes)
        except ValueError as exc:
            raise ApiError(400, "invalid_config", str(exc))
        if config.target_nodes:
            unknown = sorted(set(config.target_nodes) - set(state.dataset.node_ids))
            if unknown:
                raise ApiError(400, "invalid_config", f"unknown target nodes {unknown}")

        params = fit.result.params
        t0 = state.dataset.date_index(fit.train_start)
        sched = scale_schedule(slice_schedule(state.base_schedule, t0, req.horizon),
                               req.mobility_scale)
        agg = aggregate(sched)
        init = initial_state(state.dataset, fit.train_start, params.theta,
                             params.incubation_lag, params.asymptomatic_lag, zeta=params.zeta)

        def runner(record: JobRecord):
            state.jobs.update(record.id, state="running", total_generations=config.generations)

            def on_generation(done, best):
                state.jobs.update(record.id, done_generations=done)

            try:
                result = optimize(agg, init, params, state.dataset.populations, config,
                                  node_ids=state.dataset.node_ids, on_generation=on_generation)
            except Exception as exc:  # surfaced through the job record
                state.jobs.update(record.id, state="failed", error=str(exc))
                return
            doc = result_to_dict(result)
            doc["schedule_csv"] = schedule_to_csv(result.best_schedule, state.dataset.node_ids)
            state.jobs.update(record.id, state="done", result=doc,
                              done_generations=config.generations)

        record = state.jobs.submit(runner)
        record.total_generations = config.generations
        return record.to_dict()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return state.jobs.get(job_id).to_dict()

    return app
