"""SaucIR: delayed compartmental epidemic modeling on a dynamic mobility network.

Subpackages
-----------
::

 data         -- CSV ingestion, validation, the canonical Dataset bundle
 mobility     -- flow tensors to combined mobility rates, aggregates, balance checks
 model        -- the daily-stepped network model and the SIR baselines
 calibration  -- observation-driven initial states and parameter fitting
 evaluate     -- MAPE/RMSE metrics and the four-model comparison harness
 policyopt    -- genetic search over migration schedules under fixed aggregates
 service      -- HTTP/JSON what-if API
 cli          -- command-line front end (fit / forecast / compare / optimize / serve)
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    EpidemicSeries,
    FlowTensor,
    NodeMeta,
    parse_epidemic_csv,
    parse_flow_edges,
    parse_flow_scaled,
    validate_dataset,
)
from .mobility import (
    AggregateRates,
    MobilitySchedule,
    aggregate,
    check_balance,
    rates_from_flows,
    scale_schedule,
    schedule_from_flows,
)
from .model import (
    EpidemicParams,
    NetworkState,
    SimulationTrace,
    simulate,
    simulate_saucir_minus_m,
    simulate_sir,
    simulate_sir_m,
    step,
)
from .calibration import (
    FitConfig,
    FitResult,
    estimate_quarantine_rate,
    fit_loss,
    fit_parameters,
    initial_state,
)
from .evaluate import ForecastReport, compare_models, mape, percentage_error, rmse
from .policyopt import GAConfig, Individual, OptimizationResult, optimize
