"""CSV ingestion: 5-minute counts to gap-filled 15-minute series."""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from ..data import SeriesSet
from ..spectral import InvalidInputError

log = logging.getLogger(__name__)

RAW_STEP = timedelta(minutes=5)
BLOCK = 3
MAX_MISSING = 0.05


class IngestError(InvalidInputError):
    """Rows that cannot be parsed; ``problems`` lists ``(line, message)``."""

    def __init__(self, path, problems):
        self.problems = problems
        shown = "; ".join(f"line {ln}: {msg}" for ln, msg in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        super().__init__(f"{path}: {shown}{more}")


class AlignmentError(InvalidInputError):
    pass


@dataclass
class IngestReport:
    interpolated: dict = field(default_factory=dict)
    rejected: dict = field(default_factory=dict)


def _parse_time(text: str) -> datetime:
    return datetime.fromisoformat(text.strip().replace("Z", "+00:00"))


def _rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise IngestError(path, [(1, f"missing columns {missing}")])
        for row in reader:
            yield reader.line_num, row


def read_flows(path) -> dict:
    """``node_id -> {timestamp: count}`` from a long-format flow CSV."""
    out = defaultdict(dict)
    problems = []
    for line, row in _rows(path, ("timestamp", "node_id", "count")):
        try:
            ts = _parse_time(row["timestamp"])
            text = (row["count"] or "").strip()
            value = float("nan") if text == "" else float(text)
        except (ValueError, TypeError) as exc:
            problems.append((line, str(exc)))
            continue
        out[row["node_id"].strip()][ts] = value
    if problems:
        raise IngestError(path, problems)
    return dict(out)


def read_metadata(path) -> list[dict]:
    meta, problems = [], []
    for line, row in _rows(path, ("node_id", "lat", "lon", "lanes")):
        try:
            meta.append({"node_id": row["node_id"].strip(), "lat": float(row["lat"]),
                         "lon": float(row["lon"]), "lanes": int(float(row["lanes"]))})
        except (ValueError, TypeError) as exc:
            problems.append((line, str(exc)))
    if problems:
        raise IngestError(path, problems)
    return meta


def read_distances(path, node_ids) -> np.ndarray:
    """Symmetric distance matrix; unlisted pairs are unreachable (``inf``)."""
    index = {nid: i for i, nid in enumerate(node_ids)}
    n = len(node_ids)
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    problems = []
    for line, row in _rows(path, ("id_a", "id_b", "distance_km")):
        a, b = row["id_a"].strip(), row["id_b"].strip()
        try:
            value = float(row["distance_km"])
        except (ValueError, TypeError) as exc:
            problems.append((line, str(exc)))
            continue
        if a not in index or b not in index:
            continue
        if value < 0:
            problems.append((line, "negative distance"))
            continue
        i, j = index[a], index[b]
        d[i, j] = d[j, i] = min(d[i, j], value) if i != j else 0.0
    if problems:
        raise IngestError(path, problems)
    return d


def fill_gaps(x: np.ndarray) -> tuple[np.ndarray, int]:
    """Linear interpolation over NaNs; edges take the nearest observation."""
    x = np.asarray(x, dtype=np.float64).copy()
    bad = np.isnan(x)
    n_bad = int(bad.sum())
    if n_bad == 0:
        return x, 0
    good = np.flatnonzero(~bad)
    if good.size == 0:
        raise InvalidInputError("series has no observations")
    x[bad] = np.interp(np.flatnonzero(bad), good, x[good])
    return x, n_bad


def aggregate(x: np.ndarray, how: str = "sum", block: int = BLOCK) -> np.ndarray:
    if how not in ("sum", "mean"):
        raise InvalidInputError(f"aggregation must be 'sum' or 'mean', got {how!r}")
    n = (x.shape[-1] // block) * block
    blocks = x[..., :n].reshape(*x.shape[:-1], -1, block)
    return blocks.sum(axis=-1) if how == "sum" else blocks.mean(axis=-1)


def align(flows: dict, step: timedelta = RAW_STEP, block: int = BLOCK):
    """Place every node on a common clock starting at a block boundary.

    Returns ``(start, node_ids, matrix)`` with NaN where a count is missing.
    """
    if not flows:
        raise InvalidInputError("no flow rows")
    stamps = sorted({ts for per in flows.values() for ts in per})
    origin = stamps[0]
    block_span = step * block
    # first full block boundary at or after the earliest stamp
    day = origin.replace(hour=0, minute=0, second=0, microsecond=0)
    offset = (origin - day) % block_span
    start = origin if offset == timedelta(0) else origin + (block_span - offset)
    for ts in stamps:
        if (ts - origin) % step:
            raise AlignmentError(f"timestamp {ts.isoformat()} is off the {step} grid")
    n = int((stamps[-1] - start) // step) + 1
    node_ids = sorted(flows)
    M = np.full((len(node_ids), max(n, 0)), np.nan)
    for i, nid in enumerate(node_ids):
        for ts, v in flows[nid].items():
            k = (ts - start) // step
            if 0 <= k < n:
                M[i, k] = v
    return start, node_ids, M


def ingest(flows_path, how: str = "sum", max_missing: float = MAX_MISSING):
    """Read, align, gap-fill and aggregate flows into a :class:`SeriesSet`."""
    start, node_ids, raw = align(read_flows(flows_path))
    report = IngestReport()
    keep_ids, rows = [], []
    for nid, x in zip(node_ids, raw):
        frac = float(np.mean(np.isnan(x))) if x.size else 1.0
        if frac > max_missing:
            report.rejected[nid] = f"{frac:.1%} of intervals missing (limit {max_missing:.0%})"
            log.warning("rejecting node %s: %s", nid, report.rejected[nid])
            continue
        filled, n_fill = fill_gaps(x)
        report.interpolated[nid] = n_fill
        keep_ids.append(nid)
        rows.append(aggregate(filled, how))
    if not rows:
        raise InvalidInputError("every node was rejected during ingestion")
    series = SeriesSet(keep_ids, np.stack(rows), start, RAW_STEP * BLOCK)
    return series, report


def write_flows_csv(series: SeriesSet, path, step: timedelta = RAW_STEP, split: int = BLOCK):
    """Write a series set as 5-minute counts (each value split evenly)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "node_id", "count"])
        for k in range(series.length):
            for j in range(split):
                ts = series.start_time + k * series.step + j * step
                for nid, row in zip(series.node_ids, series.values):
                    w.writerow([ts.isoformat(), nid, repr(float(row[k]) / split)])


def write_metadata_csv(meta, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "lat", "lon", "lanes"])
        for m in meta:
            w.writerow([m["node_id"], m["lat"], m["lon"], m["lanes"]])


def write_distances_csv(node_ids, distances, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id_a", "id_b", "distance_km"])
        n = len(node_ids)
        for i in range(n):
            for j in range(i + 1, n):
                if np.isfinite(distances[i, j]):
                    w.writerow([node_ids[i], node_ids[j], repr(float(distances[i, j]))])
