"""Pearson / Spearman correlation and metric-by-dimension correlation tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np


class DegenerateInput(ValueError):
    """A correlation is undefined (constant input or too few points)."""


def _as_pair(xs: Sequence[float], ys: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("inputs must be one-dimensional")
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise DegenerateInput("need at least two points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    return x, y


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.all(x == x[0]):
        raise DegenerateInput("first input has zero variance")
    if np.all(y == y[0]):
        raise DegenerateInput("second input has zero variance")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise DegenerateInput("zero variance")
    return max(-1.0, min(1.0, float(dx @ dy) / denom))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation. Raises :class:`DegenerateInput` on zero variance."""
    return _pearson(*_as_pair(xs, ys))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the positions they occupy."""
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(a.size, dtype=np.float64)
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    x, y = _as_pair(xs, ys)
    return _pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class CorrelationResult:
    pearson: float
    spearman: float
    n: int
    degenerate_flags: frozenset[str] = frozenset()

    @property
    def defined(self) -> bool:
        return not self.degenerate_flags


def correlate(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Both coefficients at once; undefined values come back as NaN with a flag set."""
    x, y = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    flags = set()
    values = {}
    for name, fn in (("pearson", pearson), ("spearman", spearman)):
        try:
            values[name] = fn(x, y)
        except DegenerateInput:
            values[name] = math.nan
            flags.add(f"{name}_undefined")
    return CorrelationResult(values["pearson"], values["spearman"], int(x.size), frozenset(flags))


@dataclass
class CorrelationTable:
    """Metric rows by dimension columns, each cell a :class:`CorrelationResult`."""

    metrics: list[str] = field(default_factory=list)
    dimensions: list[str] = field(default_factory=list)
    cells: dict[tuple[str, str], CorrelationResult] = field(default_factory=dict)

    def __getitem__(self, key: tuple[str, str]) -> CorrelationResult:
        return self.cells[key]

    def __len__(self) -> int:
        return len(self.cells)

    def to_records(self) -> list[dict[str, Any]]:
        rows = []
        for m in self.metrics:
            for d in self.dimensions:
                cell = self.cells.get((m, d))
                if cell is None:
                    continue
                rows.append(
                    {
                        "metric": m,
                        "dimension": d,
                        "pearson": None if math.isnan(cell.pearson) else cell.pearson,
                        "spearman": None if math.isnan(cell.spearman) else cell.spearman,
                        "n": cell.n,
                        "flags": sorted(cell.degenerate_flags),
                    }
                )
        return rows

    def to_csv(self, digits: int | None = None) -> str:
        """One row per metric; ``<dimension>_pearson`` / ``<dimension>_spearman`` columns."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["metric"]
        for d in self.dimensions:
            header += [f"{d}_pearson", f"{d}_spearman"]
        writer.writerow(header)

        def fmt(v: float) -> str:
            if math.isnan(v):
                return ""
            return f"{v:.{digits}f}" if digits is not None else repr(v)

        for m in self.metrics:
            row = [m]
            for d in self.dimensions:
                cell = self.cells.get((m, d))
                row += ["", ""] if cell is None else [fmt(cell.pearson), fmt(cell.spearman)]
            writer.writerow(row)
        return buf.getvalue()


ScoreColumn = Sequence[float] | Mapping[str, Sequence[float]]


def correlation_table(
    score_columns: Mapping[str, ScoreColumn],
    human_columns: Mapping[str, Sequence[float]],
) -> CorrelationTable:
    """Correlate every metric column with every human-score column.

    A metric column is either one score list used against all dimensions, or
    a mapping from dimension to its own list (a learned metric with one
    submodel per dimension); missing dimensions leave the cell empty.
    """
    lengths = {len(v) for v in human_columns.values()}
    for col in score_columns.values():
        if isinstance(col, Mapping):
            lengths.update(len(v) for v in col.values())
        else:
            lengths.add(len(col))
    if len(lengths) > 1:
        raise ValueError(f"misaligned columns: lengths {sorted(lengths)}")
    table = CorrelationTable(metrics=list(score_columns), dimensions=list(human_columns))
    for metric, col in score_columns.items():
        for dim, human in human_columns.items():
            if isinstance(col, Mapping):
                if dim not in col:
                    continue
                scores = col[dim]
            else:
                scores = col
            table.cells[(metric, dim)] = correlate(scores, human)
    return table


def system_level(values: Sequence[float], systems: Sequence[str]) -> tuple[list[str], list[float]]:
    """Average ``values`` per system (sorted by system name)."""
    if len(values) != len(systems):
        raise ValueError("values and systems are misaligned")
    sums: dict[str, list[float]] = {}
    for v, s in zip(values, systems):
        sums.setdefault(s, []).append(v)
    names = sorted(sums)
    return names, [math.fsum(sums[s]) / len(sums[s]) for s in names]
