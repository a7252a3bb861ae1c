"""Forecast accuracy metrics and the four-model comparison harness.

MAPE here is the *maximum* daily absolute percentage error over the forecast
window, and RMSE divides the summed squared error by (t0 - 1) where t0 is the
number of forecast days; both follow the reporting convention of the tables
this package reproduces, not the textbook variants.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .calibration import FitConfig, FitResult, fit_parameters, initial_state, _Budget, _grid, _search
from .data import Dataset
from .mobility import schedule_from_flows, slice_schedule, zero_schedule
from .model import simulate, simulate_sir_m

METHODS = ("SIR", "SIR+M", "SaucIR-M", "SaucIR")


def percentage_error(pred: float, obs: float) -> float:
    """Signed relative error (pred - obs) / obs; observations must be positive."""
    if obs <= 0:
        raise ValueError(f"percentage error needs a positive observation, got {obs}")
    return (pred - obs) / obs


def mape(pred, obs) -> float:
    """Maximum absolute percentage error over the window."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape or pred.ndim != 1 or len(pred) < 1:
        raise ValueError(f"series shapes differ or are empty: {pred.shape} vs {obs.shape}")
    if np.any(obs <= 0):
        raise ValueError("observations must be positive")
    return float(np.max(np.abs(pred - obs) / obs))


def rmse(pred, obs) -> float:
    """sqrt(sum of squared errors / (t0 - 1)); needs at least two points."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape or pred.ndim != 1:
        raise ValueError(f"series shapes differ: {pred.shape} vs {obs.shape}")
    if len(pred) < 2:
        raise ValueError("rmse needs at least 2 points")
    return float(np.sqrt(np.sum((pred - obs) ** 2) / (len(pred) - 1)))


@dataclass
class ForecastReport:
    node: str
    dates: list[date]
    predicted: np.ndarray
    observed: np.ndarray | None
    pe: np.ndarray | None
    mape: float | None
    rmse: float | None


def build_report(node: str, dates: list[date], predicted, observed=None) -> ForecastReport:
    """Assemble a report; metrics are present only when observations are."""
    predicted = np.asarray(predicted, dtype=float)
    if observed is None:
        return ForecastReport(node, dates, predicted, None, None, None, None)
    observed = np.asarray(observed, dtype=float)
    pe = np.array([percentage_error(p, o) for p, o in zip(predicted, observed)])
    return ForecastReport(
        node, dates, predicted, observed, pe,
        mape=float(np.max(np.abs(pe))) if len(pe) else None,
        rmse=rmse(predicted, observed) if len(predicted) >= 2 else None,
    )


def forecast_fit(dataset: Dataset, fit: FitResult, config: FitConfig,
                 horizon: int) -> dict[str, ForecastReport]:
    """Forecast `horizon` days past the training window with a fitted model."""
    d_pred, t0, t1 = fitted_values(dataset, fit, config, horizon)
    return _reports_from_predictions(dataset, d_pred, t0, t1, horizon)


def fitted_values(dataset: Dataset, fit: FitResult, config: FitConfig,
                  horizon: int = 0):
    """Simulated cumulative confirmed over the train window plus `horizon` days.

    Returns (matrix shaped (train_days + horizon + 1, nodes), t0, t1).
    """
    t0 = dataset.date_index(config.train_start)
    t1 = dataset.date_index(config.train_end)
    days = (t1 - t0) + horizon
    schedule = slice_schedule(schedule_from_flows(dataset.flows, dataset.populations), t0, days)
    p = fit.params
    init = initial_state(dataset, config.train_start, p.theta,
                         p.incubation_lag, p.asymptomatic_lag, zeta=p.zeta)
    trace = simulate(init, p, dataset.populations, schedule, days)
    return trace.compartment("d"), t0, t1


def _reports_from_predictions(dataset: Dataset, predicted: np.ndarray,
                              t0: int, t1: int, horizon: int) -> dict[str, ForecastReport]:
    reports = {}
    n_days = len(dataset.dates)
    for k, node_id in enumerate(dataset.node_ids):
        rows = []
        obs = []
        dates = []
        for h in range(1, horizon + 1):
            rows.append(predicted[(t1 - t0) + h, k])
            idx = t1 + h
            dates.append(dataset.dates[t1] + timedelta(days=h))
            obs.append(dataset.series[node_id].cumulative_confirmed[idx] if idx < n_days else None)
        have_obs = all(o is not None for o in obs)
        reports[node_id] = build_report(node_id, dates, rows, obs if have_obs else None)
    return reports


def _sir_initial(dataset: Dataset, t0: int):
    confirmed = dataset.confirmed_matrix()
    i0 = confirmed[t0 + 6] - confirmed[t0]
    s0 = dataset.populations - i0
    k0 = confirmed[t0]
    return s0, i0, k0


def _fit_sir_family(dataset: Dataset, config: FitConfig, gamma: float,
                    p_in, p_out, max_evals: int):
    """Shared two-phase fit for the SIR baselines (per-node, then joint polish)."""
    t0 = dataset.date_index(config.train_start)
    t1 = dataset.date_index(config.train_end)
    days = t1 - t0
    s0, i0, k0 = _sir_initial(dataset, t0)
    observed = dataset.confirmed_matrix()[t0:t1 + 1]
    populations = dataset.populations
    m = len(populations)
    lo = np.array([0.0, 0.0])
    hi = np.array([2.0, 1.0])
    budget = _Budget(max_evals)

    def node_loss(x, k):
        out = simulate_sir_m(s0[k:k + 1], i0[k:k + 1], x[0], x[1], populations[k:k + 1],
                             0.0, None, None, days, k0[k:k + 1])
        return float(np.sum((out["cumulative"][:, 0] - observed[:, k]) ** 2))

    fitted = np.zeros((m, 2))
    for k in range(m):
        grid_pts = [np.array([a, b]) for a in _grid(0.0, 2.0, 6) for b in _grid(0.0, 1.0, 4)]
        scores = [node_loss(x, k) for x in grid_pts]
        budget.used += len(scores)
        order = np.argsort(scores, kind="stable")[:2]
        node_budget = _Budget(min(max(max_evals // (2 * m), 40), budget.left))
        best_x, _, _ = _search(lambda x, _k=k: node_loss(x, _k), [grid_pts[i] for i in order],
                               lo, hi, node_budget, maxfev=max(node_budget.limit // 2, 20))
        budget.used += node_budget.used
        fitted[k] = grid_pts[order[0]] if best_x is None else best_x

    def joint_loss(x):
        xs = x.reshape(m, 2)
        out = _sir_m_multi(s0, i0, xs[:, 0], xs[:, 1], populations, gamma, p_in, p_out, days, k0)
        total = float(np.sum((out["cumulative"] - observed) ** 2))
        return total if np.isfinite(total) else float("inf")

    joint_budget = _Budget(budget.left)
    best_x, best_f, _ = _search(joint_loss, [fitted.reshape(-1)], np.tile(lo, m), np.tile(hi, m),
                                joint_budget, maxfev=max(joint_budget.left, 40))
    start_loss = joint_loss(fitted.reshape(-1))
    if best_x is None or best_f > start_loss:
        best_x = fitted.reshape(-1)
    return best_x.reshape(m, 2)


def _sir_m_multi(s0, i0, alpha, beta0, populations, gamma, p_in, p_out, horizon, k0):
    """Per-node alpha/beta variant of the SIR+M stepper used by the harness."""
    populations = np.asarray(populations, dtype=float)
    m = len(populations)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (m,))
    beta0 = np.broadcast_to(np.asarray(beta0, dtype=float), (m,))
    if gamma > 0:
        p_in = np.asarray(p_in, dtype=float)
        p_out = np.asarray(p_out, dtype=float)
    else:
        p_in = np.zeros((m, m))
        p_out = np.zeros((m, m))
    s = np.asarray(s0, dtype=float).copy()
    i = np.asarray(i0, dtype=float).copy()
    k = np.asarray(k0, dtype=float).copy()
    out = {"s": [s.copy()], "i": [i.copy()], "cumulative": [k.copy()]}
    for _ in range(horizon):
        incidence = alpha * i * s / populations
        ds = -incidence + gamma * (p_in @ s - p_out.sum(axis=0) * s)
        di = incidence - beta0 * i + gamma * (p_in @ i - p_out.sum(axis=0) * i)
        s = np.minimum(np.maximum(s + ds, 0.0), populations)
        i = np.maximum(i + di, 0.0)
        k = k + incidence
        out["s"].append(s.copy())
        out["i"].append(i.copy())
        out["cumulative"].append(k.copy())
    return {key: np.stack(val) for key, val in out.items()}


def _uniform_mobility(dataset: Dataset, t0: int, t1: int):
    """Uniform gamma and time-averaged composition matrices over the window."""
    flows = dataset.flows.flows[t0:t1 + 1]
    populations = dataset.populations
    gamma = float(np.mean(flows.sum(axis=2) / populations[None, :]))
    total = flows.sum(axis=0)
    inflow = total.sum(axis=1)
    outflow = total.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_in = np.where(inflow[:, None] > 0, total / np.where(inflow[:, None] > 0, inflow[:, None], 1.0), 0.0)
        p_out = np.where(outflow[None, :] > 0, total / np.where(outflow[None, :] > 0, outflow[None, :], 1.0), 0.0)
    return gamma, p_in, p_out


def compare_models(dataset: Dataset, config: FitConfig, horizon: int = 3,
                   methods=METHODS, baseline_evals: int = 2000) -> dict[str, dict[str, ForecastReport]]:
    """Fit each requested model on the window and score the holdout forecast."""
    t0 = dataset.date_index(config.train_start)
    t1 = dataset.date_index(config.train_end)
    if t1 + horizon >= len(dataset.dates):
        raise ValueError(f"need {horizon} observed days after {config.train_end} to compare")
    populations = dataset.populations
    days = (t1 - t0) + horizon
    results: dict[str, dict[str, ForecastReport]] = {}

    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected subset of {METHODS}")
        if method in ("SIR", "SIR+M"):
            if method == "SIR":
                gamma, p_in, p_out = 0.0, None, None
            else:
                gamma, p_in, p_out = _uniform_mobility(dataset, t0, t1)
            ab = _fit_sir_family(dataset, config, gamma, p_in, p_out, baseline_evals)
            s0, i0, k0 = _sir_initial(dataset, t0)
            out = _sir_m_multi(s0, i0, ab[:, 0], ab[:, 1], populations, gamma, p_in, p_out, days, k0)
            predicted = out["cumulative"]
        else:
            schedule = None
            if method == "SaucIR":
                schedule = schedule_from_flows(dataset.flows, populations)
            fit = fit_parameters(dataset, config, schedule)
            p = fit.params
            init = initial_state(dataset, config.train_start, p.theta,
                                 p.incubation_lag, p.asymptomatic_lag, zeta=p.zeta)
            if method == "SaucIR-M":
                run_schedule = zero_schedule(days, len(populations))
            else:
                run_schedule = slice_schedule(schedule, t0, days)
            predicted = simulate(init, p, populations, run_schedule, days).compartment("d")
        results[method] = _reports_from_predictions(dataset, predicted, t0, t1, horizon)
    return results


def comparison_to_csv(results: dict[str, dict[str, ForecastReport]], metric: str) -> str:
    """Table export: method,node,<metric>; MAPE at 4 decimals, RMSE as integers."""
    if metric not in ("mape", "rmse"):
        raise ValueError("metric must be 'mape' or 'rmse'")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "node", metric])
    for method, reports in results.items():
        for node_id, report in reports.items():
            value = getattr(report, metric)
            if value is None:
                rendered = ""
            elif metric == "mape":
                rendered = f"{value:.4f}"
            else:
                rendered = str(int(round(value)))
            writer.writerow([method, node_id, rendered])
    return buf.getvalue()


def plot_data_csv(results: dict[str, dict[str, ForecastReport]]) -> str:
    """Chart-ready export: date,node,observed,predicted,method."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "node", "observed", "predicted", "method"])
    for method, reports in results.items():
        for node_id, report in reports.items():
            for j, d in enumerate(report.dates):
                obs = "" if report.observed is None else repr(float(report.observed[j]))
                writer.writerow([d.isoformat(), node_id, obs, repr(float(report.predicted[j])), method])
    return buf.getvalue()


def report_to_dict(report: ForecastReport) -> dict:
    return {
        "node": report.node,
        "dates": [d.isoformat() for d in report.dates],
        "predicted": [float(x) for x in report.predicted],
        "observed": None if report.observed is None else [float(x) for x in report.observed],
        "pe": None if report.pe is None else [float(x) for x in report.pe],
        "mape": report.mape,
        "rmse": report.rmse,
    }
