"""Ingestion of epidemic case series and migration flows into a validated dataset.

File formats (all CSV, ISO-8601 dates):

* epidemic:    ``date,node,cumulative_confirmed[,cumulative_removed][,quarantine_labeled]``
* flow edges:  ``date,origin,destination,flow``
* scaled pair: scale file ``date,origin,outflow_total`` plus a share file
  ``date,origin,destination,share`` with share in [0, 1].

Flow tensors are indexed ``flows[day][destination][origin]``: entry (n, m) is the
number of people moving from node m into node n on that day.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

EPIDEMIC_COLUMNS = ("date", "node", "cumulative_confirmed", "cumulative_removed", "quarantine_labeled")


class ParseError(ValueError):
    """Malformed input file; the message names the offending line or symbol."""


class ValidationError(ValueError):
    """Structurally valid data that violates a dataset invariant."""


@dataclass(frozen=True)
class NodeMeta:
    id: str
    name: str
    population: int

    def __post_init__(self):
        if self.population < 1:
            raise ValidationError(f"node {self.id!r}: population must be >= 1, got {self.population}")


@dataclass
class EpidemicSeries:
    """Daily cumulative counts for one node.

    ``cumulative_confirmed`` is kept as float64 so that synthetic series produced
    by the simulator replay exactly; the CSV parser only accepts integer counts.
    Optional columns stay None when absent (unknown, not zero).
    """

    node: str
    dates: list[date]
    cumulative_confirmed: np.ndarray
    cumulative_removed: np.ndarray | None = None
    quarantine_labeled: np.ndarray | None = None

    def __post_init__(self):
        self.cumulative_confirmed = np.asarray(self.cumulative_confirmed, dtype=float)
        if self.cumulative_removed is not None:
            self.cumulative_removed = np.asarray(self.cumulative_removed, dtype=float)
        if self.quarantine_labeled is not None:
            self.quarantine_labeled = np.asarray(self.quarantine_labeled, dtype=float)
        n = len(self.dates)
        for name in ("cumulative_confirmed", "cumulative_removed", "quarantine_labeled"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ValidationError(f"node {self.node!r}: {name} has {len(arr)} values for {n} dates")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur != prev + timedelta(days=1):
                raise ValidationError(f"node {self.node!r}: date gap between {prev} and {cur}")
        if np.any(self.cumulative_confirmed < 0):
            raise ValidationError(f"node {self.node!r}: negative cumulative count")
        if self.cumulative_removed is not None and np.any(self.cumulative_removed < 0):
            raise ValidationError(f"node {self.node!r}: negative removed count")
        drops = np.nonzero(np.diff(self.cumulative_confirmed) < 0)[0]
        if drops.size:
            d = self.dates[drops[0] + 1]
            raise ValidationError(f"node {self.node!r}: cumulative confirmed decreases on {d}")
        if self.quarantine_labeled is not None:
            if np.any(self.quarantine_labeled < 0) or np.any(self.quarantine_labeled > self.cumulative_confirmed):
                raise ValidationError(f"node {self.node!r}: quarantine-labeled count exceeds confirmed")

    @property
    def new_confirmed(self) -> np.ndarray:
        """Daily new diagnoses; the first day has no predecessor and counts as 0."""
        return np.diff(self.cumulative_confirmed, prepend=self.cumulative_confirmed[:1])


@dataclass
class FlowTensor:
    """Dense day x destination x origin migration counts."""

    dates: list[date]
    nodes: list[str]
    flows: np.ndarray

    def __post_init__(self):
        self.flows = np.asarray(self.flows, dtype=float)
        t, m = len(self.dates), len(self.nodes)
        if self.flows.shape != (t, m, m):
            raise ValidationError(f"flow tensor shape {self.flows.shape} != ({t}, {m}, {m})")
        if not np.all(np.isfinite(self.flows)) or np.any(self.flows < 0):
            raise ValidationError("flow tensor entries must be finite and non-negative")
        if np.any(self.flows[:, np.arange(m), np.arange(m)] != 0):
            raise ValidationError("flow tensor has nonzero self-flow on the diagonal")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur != prev + timedelta(days=1):
                raise ValidationError(f"flow tensor: date gap between {prev} and {cur}")


@dataclass
class Dataset:
    """Validated bundle of node metadata, case series, and migration flows."""

    nodes: list[NodeMeta]
    series: dict[str, EpidemicSeries]
    flows: FlowTensor

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    @property
    def populations(self) -> np.ndarray:
        return np.array([n.population for n in self.nodes], dtype=float)

    @property
    def dates(self) -> list[date]:
        return self.flows.dates

    def date_index(self, d: date) -> int:
        try:
            return self.dates.index(d)
        except ValueError:
            raise KeyError(f"date {d} not covered by the dataset ({self.dates[0]}..{self.dates[-1]})")

    def confirmed_matrix(self) -> np.ndarray:
        """Observed cumulative confirmed, shaped (days, nodes) in canonical node order."""
        return np.column_stack([self.series[i].cumulative_confirmed for i in self.node_ids])


def _reader(raw) -> csv.reader:
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    elif isinstance(raw, str):
        text = raw
    elif hasattr(raw, "read"):
        data = raw.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        raise TypeError(f"cannot read CSV from {type(raw).__name__}")
    return csv.reader(io.StringIO(text))


def _parse_date(token: str, lineno: int) -> date:
    try:
        return date.fromisoformat(token.strip())
    except ValueError:
        raise ParseError(f"line {lineno}: bad date {token!r} (expected YYYY-MM-DD)")


def _parse_count(token: str, lineno: int, column: str) -> int:
    try:
        value = int(token.strip())
    except ValueError:
        raise ParseError(f"line {lineno}: column {column!r} must be an integer, got {token!r}")
    if value < 0:
        raise ParseError(f"line {lineno}: column {column!r} must be non-negative, got {value}")
    return value


def parse_epidemic_csv(raw) -> list[EpidemicSeries]:
    """Parse an epidemic CSV into one date-sorted series per node."""
    rows = _reader(raw)
    try:
        header = [h.strip() for h in next(rows)]
    except StopIteration:
        raise ParseError("empty epidemic file")
    for col in header:
        if col not in EPIDEMIC_COLUMNS:
            raise ParseError(f"unknown column {col!r} in epidemic header")
    for required in ("date", "node", "cumulative_confirmed"):
        if required not in header:
            raise ParseError(f"epidemic header missing required column {required!r}")
    idx = {col: header.index(col) for col in header}
    has_removed = "cumulative_removed" in idx
    has_quarantine = "quarantine_labeled" in idx

    per_node: dict[str, dict[date, tuple]] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        d = _parse_date(row[idx["date"]], lineno)
        node = row[idx["node"]].strip()
        if not node:
            raise ParseError(f"line {lineno}: empty node id")
        confirmed = _parse_count(row[idx["cumulative_confirmed"]], lineno, "cumulative_confirmed")
        removed = _parse_count(row[idx["cumulative_removed"]], lineno, "cumulative_removed") if has_removed else None
        quarantine = _parse_count(row[idx["quarantine_labeled"]], lineno, "quarantine_labeled") if has_quarantine else None
        bucket = per_node.setdefault(node, {})
        if d in bucket:
            raise ParseError(f"line {lineno}: duplicate row for node {node!r} on {d}")
        bucket[d] = (confirmed, removed, quarantine)

    out = []
    for node in sorted(per_node):
        dates = sorted(per_node[node])
        confirmed = np.array([per_node[node][d][0] for d in dates], dtype=float)
        removed = np.array([per_node[node][d][1] for d in dates], dtype=float) if has_removed else None
        quarantine = np.array([per_node[node][d][2] for d in dates], dtype=float) if has_quarantine else None
        out.append(EpidemicSeries(node, dates, confirmed, removed, quarantine))
    return out


def _date_range(lo: date, hi: date) -> list[date]:
    return [lo + timedelta(days=k) for k in range((hi - lo).days + 1)]


def parse_flow_edges(raw, nodes: list[NodeMeta]) -> FlowTensor:
    """Parse an edge-list flow CSV into a dense tensor; absent edges are zero."""
    ids = [n.id for n in nodes]
    pos = {i: k for k, i in enumerate(ids)}
    if len(pos) != len(ids):
        raise ValidationError("node ids are not unique")
    rows = _reader(raw)
    try:
        header = [h.strip() for h in next(rows)]
    except StopIteration:
        raise ParseError("empty flow file")
    if header != ["date", "origin", "destination", "flow"]:
        raise ParseError(f"flow header must be date,origin,destination,flow; got {header}")

    entries: dict[tuple[date, str, str], float] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
        d = _parse_date(row[0], lineno)
        origin, dest = row[1].strip(), row[2].strip()
        for sym in (origin, dest):
            if sym not in pos:
                raise ParseError(f"line {lineno}: unknown node id {sym!r}")
        if origin == dest:
            raise ParseError(f"line {lineno}: self-flow {origin!r} -> {dest!r} is not allowed")
        try:
            flow = float(row[3])
        except ValueError:
            raise ParseError(f"line {lineno}: bad flow value {row[3]!r}")
        if flow < 0 or not np.isfinite(flow):
            raise ParseError(f"line {lineno}: flow must be non-negative and finite, got {row[3]!r}")
        key = (d, origin, dest)
        if key in entries:
            raise ParseError(f"line {lineno}: duplicate edge ({d}, {origin!r}, {dest!r})")
        entries[key] = flow

    if not entries:
        raise ParseError("flow file has no data rows")
    dates = _date_range(min(k[0] for k in entries), max(k[0] for k in entries))
    day_pos = {d: t for t, d in enumerate(dates)}
    flows = np.zeros((len(dates), len(ids), len(ids)))
    for (d, origin, dest), flow in entries.items():
        flows[day_pos[d], pos[dest], pos[origin]] = flow
    return FlowTensor(dates, ids, flows)


def parse_flow_scaled(raw_scale, raw_pct, nodes: list[NodeMeta]) -> FlowTensor:
    """Combine per-origin outflow totals with destination shares into a flow tensor.

    Shares for one (date, origin) must sum to at most 1; any remainder is flow
    leaving the modeled network and is dropped, not renormalized.
    """
    ids = [n.id for n in nodes]
    pos = {i: k for k, i in enumerate(ids)}

    rows = _reader(raw_scale)
    header = [h.strip() for h in next(rows, [])]
    if header != ["date", "origin", "outflow_total"]:
        raise ParseError(f"scale header must be date,origin,outflow_total; got {header}")
    totals: dict[tuple[date, str], float] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        d = _parse_date(row[0], lineno)
        origin = row[1].strip()
        if origin not in pos:
            raise ParseError(f"scale line {lineno}: unknown node id {origin!r}")
        total = float(row[2])
        if total < 0 or not np.isfinite(total):
            raise ParseError(f"scale line {lineno}: outflow_total must be non-negative, got {row[2]!r}")
        if (d, origin) in totals:
            raise ParseError(f"scale line {lineno}: duplicate row for ({d}, {origin!r})")
        totals[(d, origin)] = total

    if not totals:
        raise ParseError("scale file has no data rows")
    dates = _date_range(min(k[0] for k in totals), max(k[0] for k in totals))
    day_pos = {d: t for t, d in enumerate(dates)}
    flows = np.zeros((len(dates), len(ids), len(ids)))

    rows = _reader(raw_pct)
    header = [h.strip() for h in next(rows, [])]
    if header != ["date", "origin", "destination", "share"]:
        raise ParseError(f"share header must be date,origin,destination,share; got {header}")
    share_sums: dict[tuple[date, str], float] = {}
    seen: set[tuple[date, str, str]] = set()
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        d = _parse_date(row[0], lineno)
        origin, dest = row[1].strip(), row[2].strip()
        for sym in (origin, dest):
            if sym not in pos:
                raise ParseError(f"share line {lineno}: unknown node id {sym!r}")
        if origin == dest:
            raise ParseError(f"share line {lineno}: self-flow share {origin!r} -> {dest!r}")
        share = float(row[3])
        if share < 0:
            raise ParseError(f"share line {lineno}: negative share {share}")
        key = (d, origin, dest)
        if key in seen:
            raise ParseError(f"share line {lineno}: duplicate share for ({d}, {origin!r}, {dest!r})")
        seen.add(key)
        if (d, origin) not in totals:
            raise ParseError(f"share line {lineno}: no scale row for ({d}, {origin!r})")
        share_sums[(d, origin)] = share_sums.get((d, origin), 0.0) + share
        if share_sums[(d, origin)] > 1 + 1e-9:
            raise ValidationError(
                f"shares for ({d}, {origin!r}) sum to {share_sums[(d, origin)]:.6f} > 1")
        flows[day_pos[d], pos[dest], pos[origin]] = totals[(d, origin)] * share
    return FlowTensor(dates, ids, flows)


def validate_dataset(series: list[EpidemicSeries], flows: FlowTensor, nodes: list[NodeMeta]) -> Dataset:
    """Check node sets and date ranges line up, returning the canonical dataset."""
    ids = [n.id for n in nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError("node ids are not unique")
    series_ids = {s.node for s in series}
    if series_ids != set(ids):
        missing = sorted(set(ids) - series_ids) + sorted(series_ids - set(ids))
        raise ValidationError(f"node-set mismatch between series and node metadata: {missing}")
    if set(flows.nodes) != set(ids):
        missing = sorted(set(ids).symmetric_difference(flows.nodes))
        raise ValidationError(f"node-set mismatch between flows and node metadata: {missing}")

    by_node = {s.node: s for s in series}
    ref = by_node[ids[0]].dates
    for s in series:
        if s.dates != ref:
            raise ValidationError(
                f"date-range mismatch: node {s.node!r} covers {s.dates[0]}..{s.dates[-1]}, "
                f"node {ids[0]!r} covers {ref[0]}..{ref[-1]}")
    if flows.dates != ref:
        raise ValidationError(
            f"date-range mismatch: flows cover {flows.dates[0]}..{flows.dates[-1]}, "
            f"series cover {ref[0]}..{ref[-1]}")

    if flows.nodes != ids:
        # same set, different order: reindex the tensor to the canonical order
        perm = [flows.nodes.index(i) for i in ids]
        flows = FlowTensor(flows.dates, ids, flows.flows[:, perm][:, :, perm])
    return Dataset(nodes=list(nodes), series=by_node, flows=flows)


def flow_tensor_to_edge_csv(tensor: FlowTensor) -> str:
    """Serialize a flow tensor to edge-list CSV (nonzero entries, full precision)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", "origin", "destination", "flow"])
    for t, d in enumerate(tensor.dates):
        for n, dest in enumerate(tensor.nodes):
            for m, origin in enumerate(tensor.nodes):
                value = tensor.flows[t, n, m]
                if value != 0:
                    writer.writerow([d.isoformat(), origin, dest, repr(float(value))])
    return buf.getvalue()


def epidemic_to_csv(series: list[EpidemicSeries]) -> str:
    """Serialize series to the epidemic CSV format (integer counts required)."""
    has_removed = any(s.cumulative_removed is not None for s in series)
    has_quarantine = any(s.quarantine_labeled is not None for s in series)
    header = ["date", "node", "cumulative_confirmed"]
    if has_removed:
        header.append("cumulative_removed")
    if has_quarantine:
        header.append("quarantine_labeled")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for s in series:
        for k, d in enumerate(s.dates):
            row = [d.isoformat(), s.node, int(round(s.cumulative_confirmed[k]))]
            if has_removed:
                row.append(int(round(s.cumulative_removed[k])) if s.cumulative_removed is not None else 0)
            if has_quarantine:
                row.append(int(round(s.quarantine_labeled[k])) if s.quarantine_labeled is not None else 0)
            writer.writerow(row)
    return buf.getvalue()


def nodes_to_csv(nodes: list[NodeMeta]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "name", "population"])
    for n in nodes:
        writer.writerow([n.id, n.name, n.population])
    return buf.getvalue()


def parse_nodes_csv(raw) -> list[NodeMeta]:
    """Parse node metadata CSV with header id,name,population."""
    rows = _reader(raw)
    header = [h.strip() for h in next(rows, [])]
    if header != ["id", "name", "population"]:
        raise ParseError(f"nodes header must be id,name,population; got {header}")
    nodes = []
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"line {lineno}: expected 3 fields, got {len(row)}")
        node_id = row[0].strip()
        if node_id in seen:
            raise ParseError(f"line {lineno}: duplicate node id {node_id!r}")
        seen.add(node_id)
        nodes.append(NodeMeta(node_id, row[1].strip(), _parse_count(row[2], lineno, "population")))
    if not nodes:
        raise ParseError("nodes file has no data rows")
    return nodes
