"""Tabular and JSON writers; every file starts with the resolved-config hash."""

import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from src.models.results import MeasureReport, SimEstimate, SteadyState
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
_write_lock = threading.Lock()


def header_line(config_hash: str) -> str:
    return f"# config_sha256={config_hash}\n"


def write_csv(frame: pd.DataFrame, path: Union[str, Path], config_hash: str) -> Path:
    path = Path(path)
    try:
        with _write_lock, open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(header_line(config_hash))
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    logger.info("wrote %d rows to %s", len(frame), path)
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_json(payload: Dict[str, Any], path: Union[str, Path], config_hash: str) -> Path:
    path = Path(path)
    document = {"config_sha256": config_hash, **payload}
    try:
        with _write_lock:
            path.write_text(json.dumps(document, indent=2, sort_keys=True, default=_jsonable) + "\n",
                            encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not serialisable: {type(value).__name__}")


def steady_state_frame(ss: SteadyState) -> pd.DataFrame:
    """One row per state: level, kappa, j, index within the segment, probability."""
    rows: List[Dict[str, Any]] = []
    for level, layout in enumerate(ss.layouts):
        for kappa, j in layout.segments:
            for idx, prob in enumerate(ss.segment(level, kappa, j)):
                rows.append({"level": level, "kappa": kappa, "j": j, "component_index": idx,
                             "probability": float(prob)})
    return pd.DataFrame(rows, columns=["level", "kappa", "j", "component_index", "probability"])


def measures_frame(report: MeasureReport) -> pd.DataFrame:
    flat = report.to_flat()
    return pd.DataFrame({"measure": list(flat), "value": [np.nan if v is None else v for v in flat.values()]})


def simulation_frame(estimates: Iterable[tuple]) -> pd.DataFrame:
    """Rows of (param, SimEstimate) flattened into param, measure, estimate, stderr, events, seed."""
    rows: List[Dict[str, Any]] = []
    for param, estimate in estimates:
        rows.extend(estimate.rows(str(param)))
    return pd.DataFrame(rows, columns=["param", "measure", "estimate", "stderr", "events", "seed"])


def sweep_frame(records: Sequence[Dict[str, Any]], measures: Sequence[str], wide: bool = False) -> pd.DataFrame:
    """Long format (axis, axis_value, S, measure, value, M) or one row per point."""
    if wide:
        columns = ["axis", "axis_value", "S", "M", *measures]
        return pd.DataFrame([{c: r.get(c) for c in columns} for r in records], columns=columns)
    rows = [
        {"axis": r["axis"], "axis_value": r["axis_value"], "S": r["S"], "measure": name,
         "value": r.get(name), "M": r["M"]}
        for r in records
        for name in measures
    ]
    return pd.DataFrame(rows, columns=["axis", "axis_value", "S", "measure", "value", "M"])


def optimization_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows))


def sim_estimate_dict(estimate: SimEstimate) -> Dict[str, Any]:
    return {"estimates": estimate.estimates, "stderr": estimate.stderr, "events": estimate.events,
            "seed": estimate.seed, "counters": estimate.counters, "batches": estimate.batches}


__all__ = [
    "header_line",
    "write_csv",
    "read_csv",
    "write_json",
    "steady_state_frame",
    "measures_frame",
    "simulation_frame",
    "sweep_frame",
    "optimization_frame",
    "sim_estimate_dict",
]
