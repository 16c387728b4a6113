"""Tabular results with byte-stable CSV and manifest output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .config import config_hash


def format_value(v: Any) -> str:
    """Shortest round-trip text for floats; ints and flags as integers."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(float(v))
    if hasattr(v, "item"):
        return format_value(v.item())
    return str(v)


@dataclass
class ResultTable:
    """Named table; ``columns`` maps each column to its one-line description."""

    name: str
    columns: dict[str, str]
    rows: list[dict[str, Any]] = field(default_factory=list)

    def add(self, **row: Any) -> None:
        missing = set(self.columns) - set(row)
        extra = set(row) - set(self.columns)
        if missing or extra:
            raise KeyError(f"row for {self.name!r}: missing {sorted(missing)}, unexpected {sorted(extra)}")
        self.rows.append(row)

    def sort(self, keys: Sequence[str]) -> "ResultTable":
        self.rows.sort(key=lambda r: tuple(r[k] for k in keys))
        return self

    def column(self, name: str) -> list[Any]:
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.columns))
        for r in self.rows:
            w.writerow([format_value(r[c]) for c in self.columns])
        return buf.getvalue()


@dataclass
class ExperimentResult:
    experiment: str
    tables: list[ResultTable]
    summary: dict[str, Any]

    def table(self, name: str) -> ResultTable:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def manifest(cfg: Mapping[str, Any], result: ExperimentResult) -> dict[str, Any]:
    return _jsonable(
        {
            "experiment": result.experiment,
            "code_version": __version__,
            "config_hash": config_hash(cfg),
            "config": cfg,
            "tables": {
                t.name: {
                    "file": f"{t.name}.csv",
                    "rows": len(t.rows),
                    # a list keeps the CSV column order under sort_keys
                    "columns": [{"name": c, "description": d} for c, d in t.columns.items()],
                }
                for t in result.tables
            },
            "summary": result.summary,
        }
    )


def write_outputs(out_dir: str | Path, cfg: Mapping[str, Any], result: ExperimentResult) -> list[Path]:
    """Write one CSV per table plus ``manifest.json``; nothing time- or host-dependent."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in result.tables:
        p = out / f"{t.name}.csv"
        p.write_text(t.to_csv())
        paths.append(p)
    p = out / "manifest.json"
    p.write_text(json.dumps(manifest(cfg, result), indent=2, sort_keys=True, allow_nan=False) + "\n")
    paths.append(p)
    return paths
