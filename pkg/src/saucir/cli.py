"""Command-line front end: fit, forecast, compare, optimize, serve.

Every command writes its result files plus a run manifest (resolved
configuration, sha256 digests of the inputs, seed, version, timestamps)
adjacent to the outputs, so a run can be reproduced from the manifest alone.
Seeded commands are bit-reproducible in their result files; the manifest
carries wall-clock timestamps and is the one exception.

Exit codes: 0 success, 1 input/validation failure, 2 computation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import date, datetime, timezone
from pathlib import Path

from . import __version__
from .calibration import FitConfig, fit_parameters, fit_result_from_dict, fit_result_to_dict, initial_state
from .data import (
    ParseError,
    ValidationError,
    parse_epidemic_csv,
    parse_flow_edges,
    parse_flow_scaled,
    parse_nodes_csv,
    validate_dataset,
)
from .evaluate import (
    METHODS,
    compare_models,
    comparison_to_csv,
    fitted_values,
    forecast_fit,
    plot_data_csv,
    report_to_dict,
)
from .mobility import aggregate, scale_schedule, schedule_from_flows, slice_schedule
from .model import SimulationBlowUp
from .policyopt import GAConfig, optimize, result_to_dict, schedule_to_csv

SCALE_PRESETS = {"small": 1.0, "medium": 2.0, "large": 3.0}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        self.exit_code = exit_code
        super().__init__(message)


def _read(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"input file not found: {path}")
    return p.read_bytes()


def _parse_window(text: str) -> tuple[date, date]:
    try:
        start_text, end_text = text.split(":")
        start, end = date.fromisoformat(start_text), date.fromisoformat(end_text)
    except ValueError:
        raise CliError(f"--train must be START:END in ISO dates, got {text!r}")
    if end < start:
        raise CliError(f"--train window ends before it starts: {text!r}")
    return start, end


def _load_dataset(args) -> "Dataset":
    nodes = parse_nodes_csv(_read(args.nodes))
    series = parse_epidemic_csv(_read(args.epidemic))
    if args.flows:
        flows = parse_flow_edges(_read(args.flows), nodes)
    elif args.flow_scale and args.flow_shares:
        flows = parse_flow_scaled(_read(args.flow_scale), _read(args.flow_shares), nodes)
    else:
        raise CliError("provide --flows or both --flow-scale and --flow-shares")
    return validate_dataset(series, flows, nodes)


def _input_digests(args) -> dict[str, str]:
    digests = {}
    for name in ("epidemic", "flows", "flow_scale", "flow_shares", "nodes", "fit"):
        path = getattr(args, name, None)
        if path:
            digests[path] = hashlib.sha256(_read(path)).hexdigest()
    return digests


def _write_manifest(out_dir: Path, command: str, args, started: datetime):
    resolved = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    manifest = {
        "command": command,
        "arguments": resolved,
        "inputs": _input_digests(args),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "version": __version__,
        "started_at": started.isoformat(),
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))


def _dump_json(path: Path, doc: dict):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))


def _fit_document(result, dataset, cfg: FitConfig) -> dict:
    doc = fit_result_to_dict(result, dataset.node_ids)
    doc["train_start"] = cfg.train_start.isoformat()
    doc["train_end"] = cfg.train_end.isoformat()
    doc["loss"] = cfg.loss
    return doc


def _load_fit_document(path: str, dataset):
    doc = json.loads(_read(path))
    result = fit_result_from_dict(doc, dataset.node_ids)
    return result, date.fromisoformat(doc["train_start"]), date.fromisoformat(doc["train_end"])


def cmd_fit(args) -> int:
    started = datetime.now(timezone.utc)
    dataset = _load_dataset(args)
    if not 0 <= args.theta < 1:
        raise CliError(f"--theta must lie in [0, 1), got {args.theta}")
    cfg = FitConfig(train_start=args.train[0], train_end=args.train[1], theta=args.theta,
                    loss=args.loss, max_evals=args.max_evals, seed=args.seed)
    schedule = schedule_from_flows(dataset.flows, dataset.populations)
    try:
        result = fit_parameters(dataset, cfg, schedule)
    except (RuntimeError, SimulationBlowUp) as exc:
        raise CliError(f"fit failed: {exc}", exit_code=2)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(out, _fit_document(result, dataset, cfg))
    _write_manifest(out.parent, "fit", args, started)
    print(f"fit written to {out} (train loss {result.train_loss:.6g}, "
          f"{result.evals_used} evaluations)")
    return 0


def cmd_forecast(args) -> int:
    started = datetime.now(timezone.utc)
    dataset = _load_dataset(args)
    result, train_start, train_end = _load_fit_document(args.fit, dataset)
    cfg = FitConfig(train_start=train_start, train_end=train_end, theta=result.params.theta)
    t1 = dataset.date_index(train_end)
    flows_left = len(dataset.dates) - 1 - t1
    if args.horizon > flows_left and not args.extend_schedule:
        raise CliError(
            f"forecast horizon {args.horizon} exceeds the {flows_left} days of flow data "
            f"after {train_end}; pass --extend-schedule to repeat the last observed day")
    try:
        reports = forecast_fit(dataset, result, cfg, args.horizon)
        fitted, t0, _ = fitted_values(dataset, result, cfg)
    except SimulationBlowUp as exc:
        raise CliError(f"forecast failed: {exc}", exit_code=2)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(out_dir / "forecast.json",
               {"horizon": args.horizon,
                "reports": {nid: report_to_dict(r) for nid, r in sorted(reports.items())}})
    lines = ["date,node,predicted,observed,pe"]
    for k, nid in enumerate(dataset.node_ids):
        # anchor row: the fitted value on the last training day
        observed_anchor = dataset.series[nid].cumulative_confirmed[dataset.date_index(train_end)]
        lines.append(f"{train_end.isoformat()},{nid},{float(fitted[-1, k])!r},"
                     f"{float(observed_anchor)!r},")
        r = reports[nid]
        for j, d in enumerate(r.dates):
            obs = "" if r.observed is None else repr(float(r.observed[j]))
            pe = "" if r.pe is None else repr(float(r.pe[j]))
            lines.append(f"{d.isoformat()},{nid},{float(r.predicted[j])!r},{obs},{pe}")
    (out_dir / "forecast.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(out_dir, "forecast", args, started)
    print(f"forecast written to {out_dir}")
    return 0


def cmd_compare(args) -> int:
    started = datetime.now(timezone.utc)
    dataset = _load_dataset(args)
    methods = tuple(m.strip() for m in args.methods.split(",")) if args.methods else METHODS
    for m in methods:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    cfg = FitConfig(train_start=args.train[0], train_end=args.train[1], theta=args.theta,
                    max_evals=args.max_evals, seed=args.seed)
    try:
        results = compare_models(dataset, cfg, horizon=args.horizon, methods=methods,
                                 baseline_evals=args.baseline_evals)
    except (RuntimeError, SimulationBlowUp, ValueError) as exc:
        raise CliError(f"comparison failed: {exc}", exit_code=2)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "mape.csv").write_text(comparison_to_csv(results, "mape"))
    (out_dir / "rmse.csv").write_text(comparison_to_csv(results, "rmse"))
    (out_dir / "plotdata.csv").write_text(plot_data_csv(results))
    _dump_json(out_dir / "comparison.json",
               {method: {nid: report_to_dict(r) for nid, r in sorted(reports.items())}
                for method, reports in results.items()})
    _write_manifest(out_dir, "compare", args, started)
    print(f"comparison tables written to {out_dir}")
    return 0


def cmd_optimize(args) -> int:
    started = datetime.now(timezone.utc)
    dataset = _load_dataset(args)
    result, train_start, _ = _load_fit_document(args.fit, dataset)
    params = result.params
    scale_text = args.scale.lower()
    if scale_text in SCALE_PRESETS:
        multiplier = SCALE_PRESETS[scale_text]
    else:
        try:
            multiplier = float(args.scale)
        except ValueError:
            raise CliError(f"--scale must be small, medium, large, or a number; got {args.scale!r}")
        if multiplier < 0:
            raise CliError("--scale must be non-negative")
    start_date = args.start or train_start
    targets = [t.strip() for t in args.target.split(",")] if args.target else None
    elitism = min(args.elitism, max(args.population - 1, 0))  # tiny populations
    try:
        config = GAConfig(horizon=args.horizon, population_size=args.population,
                          generations=args.generations, crossover_rate=args.crossover_rate,
                          mutation_rate=args.mutation_rate, elitism_count=elitism,
                          seed=args.seed, target_nodes=targets)
    except ValueError as exc:
        raise CliError(str(exc))
    t0 = dataset.date_index(start_date)
    schedule = scale_schedule(slice_schedule(schedule_from_flows(dataset.flows, dataset.populations),
                                             t0, args.horizon), multiplier)
    agg = aggregate(schedule)
    init = initial_state(dataset, start_date, params.theta,
                         params.incubation_lag, params.asymptomatic_lag, zeta=params.zeta)
    try:
        outcome = optimize(agg, init, params, dataset.populations, config,
                           node_ids=dataset.node_ids)
    except (RuntimeError, SimulationBlowUp) as exc:
        raise CliError(f"optimization failed: {exc}", exit_code=2)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = result_to_dict(outcome)
    doc["scale"] = multiplier
    doc["start"] = start_date.isoformat()
    _dump_json(out_dir / "result.json", doc)
    (out_dir / "schedule.csv").write_text(schedule_to_csv(outcome.best_schedule, dataset.node_ids))
    _write_manifest(out_dir, "optimize", args, started)
    print(f"best objective {outcome.best_objective:.6g}; results written to {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import LoadedFit, ServiceState, create_app

    dataset = _load_dataset(args)
    result, train_start, train_end = _load_fit_document(args.fit, dataset)
    state = ServiceState(dataset=dataset,
                         fits={args.fit_id: LoadedFit(result, train_start, train_end)})
    app = create_app(state)
    print(f"serving on port {args.port} with fit {args.fit_id!r} "
          f"({len(dataset.nodes)} nodes)")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    except (OSError, SystemExit) as exc:
        raise CliError(f"server failed to start: {exc}")
    return 0


def _add_dataset_arguments(parser):
    parser.add_argument("--epidemic", required=True, help="epidemic CSV (date,node,cumulative_confirmed,...)")
    parser.add_argument("--nodes", required=True, help="node metadata CSV (id,name,population)")
    parser.add_argument("--flows", help="edge-list flow CSV (date,origin,destination,flow)")
    parser.add_argument("--flow-scale", help="per-origin outflow totals CSV")
    parser.add_argument("--flow-shares", help="destination share CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saucir",
                                     description="Network epidemic forecasting and migration planning")
    parser.add_argument("--version", action="version", version=f"saucir {__version__}")
    parser.add_argument("--threads", type=int,
                        default=int(os.environ.get("SAUCIR_THREADS", "0")) or None,
                        help="parallelism bound (default SAUCIR_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    default_window = "2020-01-24:2020-02-15"

    p = sub.add_parser("fit", help="estimate per-node epidemic parameters")
    _add_dataset_arguments(p)
    p.add_argument("--train", type=_parse_window, default=_parse_window(default_window),
                   help=f"START:END inclusive ISO dates (default {default_window})")
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--loss", choices=("cumulative", "daily"), default="cumulative")
    p.add_argument("--max-evals", type=int, default=6000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output fit JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="forecast past the training window")
    _add_dataset_arguments(p)
    p.add_argument("--fit", required=True, help="fit JSON from `saucir fit`")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--extend-schedule", action="store_true",
                   help="repeat the last flow day when data ends before the horizon")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("compare", help="four-model accuracy comparison")
    _add_dataset_arguments(p)
    p.add_argument("--train", type=_parse_window, default=_parse_window(default_window),
                   help=f"START:END inclusive ISO dates (default {default_window})")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--theta", type=float, default=0.25)
    p.add_argument("--methods", help="comma-separated subset of SIR,SIR+M,SaucIR-M,SaucIR")
    p.add_argument("--max-evals", type=int, default=6000)
    p.add_argument("--baseline-evals", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("optimize", help="search migration schedules with the genetic algorithm")
    _add_dataset_arguments(p)
    p.add_argument("--fit", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--scale", default="small", help="small|medium|large (1x/2x/3x) or a number")
    p.add_argument("--start", type=date.fromisoformat, help="simulation start date (default: fit train start)")
    p.add_argument("--target", help="comma-separated target node ids (default: all)")
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--crossover-rate", type=float, default=0.8)
    p.add_argument("--mutation-rate", type=float, default=0.02)
    p.add_argument("--elitism", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("serve", help="run the HTTP what-if API")
    _add_dataset_arguments(p)
    p.add_argument("--fit", required=True)
    p.add_argument("--fit-id", default="base", help="identifier the API exposes for the fit")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
