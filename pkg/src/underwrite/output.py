"""CSV emission and parsing for aggregated metrics."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import CsvFormatError
from .harness import AggregateMetrics, allocation_bands

# csv column stem -> AggregateMetrics series
COLUMNS = {
    "regret": "regret",
    "cum_regret": "cumulative_regret",
    "exp_reward": "expected_reward",
    "cum_reward": "cumulative_reward",
    "realized_reward": "realized_reward",
}
COMPARISON = ("regret", "cum_regret", "exp_reward", "cum_reward")


def fmt(x) -> str:
    return format(float(x), ".17g")


def metrics_header() -> list[str]:
    header = ["step"]
    for stem in COLUMNS:
        header += [stem, f"{stem}_se"]
    return header


def write_metrics_csv(path, agg: AggregateMetrics) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(metrics_header())
        for t in range(agg.horizon):
            row = [str(t)]
            for series in COLUMNS.values():
                row += [fmt(agg.mean[series][t]), fmt(agg.stderr[series][t])]
            w.writerow(row)


def write_allocation_csv(path, agg: AggregateMetrics) -> None:
    bands = allocation_bands(agg)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "rank", "fraction"])
        for t, row in enumerate(bands):
            for rank, f in enumerate(row):
                w.writerow([str(t), str(rank), fmt(f)])


def write_comparison_csv(path, aggs: dict) -> None:
    labels = list(aggs)
    horizon = aggs[labels[0]].horizon
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + [f"{a}_{c}" for a in labels for c in COMPARISON])
        for t in range(horizon):
            w.writerow([str(t)] + [fmt(aggs[a].mean[COLUMNS[c]][t]) for a in labels for c in COMPARISON])


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_metrics_csv(path) -> dict:
    """Columns of a metrics CSV as float arrays, keyed by header name."""
    header, rows = _read_rows(path)
    if header != metrics_header():
        raise CsvFormatError(f"{path}: row 1: unexpected header {header}")
    data = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {i + 2}: expected {len(header)} fields, got {len(row)}")
        try:
            data[i] = [float(x) for x in row]
        except ValueError:
            raise CsvFormatError(f"{path}: row {i + 2}: non-numeric field") from None
        if data[i, 0] != i:
            raise CsvFormatError(f"{path}: row {i + 2}: step {row[0]} out of sequence")
    return {name: data[:, j] for j, name in enumerate(header)}


def read_allocation_csv(path) -> np.ndarray:
    """Ranked band fractions as a (T, M) array."""
    header, rows = _read_rows(path)
    if header != ["step", "rank", "fraction"]:
        raise CsvFormatError(f"{path}: row 1: unexpected header {header}")
    cells = {}
    for i, row in enumerate(rows):
        try:
            t, r, f = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise CsvFormatError(f"{path}: row {i + 2}: malformed") from None
        cells[(t, r)] = f
    if not cells:
        return np.empty((0, 0))
    T = max(t for t, _ in cells) + 1
    M = max(r for _, r in cells) + 1
    if len(cells) != T * M:
        raise CsvFormatError(f"{path}: incomplete step/rank grid")
    out = np.empty((T, M))
    for (t, r), f in cells.items():
        out[t, r] = f
    return out


def metrics_path(out_dir, label: str) -> Path:
    return Path(out_dir) / f"metrics_{label}.csv"


def allocation_path(out_dir, label: str) -> Path:
    return Path(out_dir) / f"allocation_{label}.csv"
