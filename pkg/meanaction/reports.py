"""Report rendering: canonical JSON, CSV with a provenance header, and a fixed-width table."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import __version__
from .config import AppConfig


@dataclass(frozen=True)
class Report:
    command: str
    payload: Mapping[str, Any]
    rows: Optional[Sequence[Mapping[str, Any]]] = None
    columns: Optional[Sequence[str]] = None
    passed: bool = True


def provenance(config: AppConfig) -> Dict[str, Any]:
    quad = config.quadrature
    return {
        "version": __version__,
        "guard_eps": config.ech.guard_eps,
        "quadrature_rule": quad.rule,
        "quadrature_tol": quad.tol,
        "line_order": quad.line_order,
        "area_grid": list(quad.area_grid),
        "fd_step": quad.fd_step,
        "precision": config.ech.precision,
        "seed": config.run.seed,
    }


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, set, frozenset)):
        return list(value)
    if hasattr(value, "as_dict"):
        return value.as_dict()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def render_json(report: Report, config: AppConfig) -> str:
    document: Dict[str, Any] = {
        "command": report.command,
        "status": "ok" if report.passed else "failed",
        "provenance": provenance(config),
        "result": report.payload,
    }
    if report.rows is not None:
        document["rows"] = list(report.rows)
    return json.dumps(document, indent=2, sort_keys=True, default=_json_default) + "\n"


def _flatten(payload: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in payload.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value)) if math.isfinite(value) else str(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return json.dumps(value, default=_json_default)
    return str(value)


def _tabular(report: Report):
    if report.rows is not None:
        rows = [dict(r) for r in report.rows]
        columns = list(report.columns) if report.columns else sorted({k for r in rows for k in r})
    else:
        flat = _flatten(report.payload)
        rows = [flat]
        columns = list(report.columns) if report.columns else sorted(flat)
    return columns, rows


def render_csv(report: Report, config: AppConfig) -> str:
    out = io.StringIO()
    for key, value in provenance(config).items():
        out.write(f"# {key}={_cell(value)}\n")
    columns, rows = _tabular(report)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return out.getvalue()


def _short(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return _cell(value)


def render_table(report: Report, config: AppConfig) -> str:
    columns, rows = _tabular(report)
    cells: List[List[str]] = [[_short(row.get(c)) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]
    lines = [
        f"{report.command} (meanaction {__version__}, guard_eps={config.ech.guard_eps:g}, tol={config.quadrature.tol:g})",
        "  ".join(c.ljust(w) for c, w in zip(columns, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells)
    return "\n".join(line.rstrip() for line in lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "table": render_table}


def render(report: Report, config: AppConfig, output_format: Optional[str] = None) -> str:
    return RENDERERS[output_format or config.run.output_format](report, config)
