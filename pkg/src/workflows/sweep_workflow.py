"""Parameter sweep workflow using LangGraph for orchestration."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from src.config import settings
from src.config.loader import AXES, apply_axis
from src.models.stochastic import Mode, ModelConfig
from src.tools.export_tools import sweep_frame
from src.tools.measure_tools import compute_measures
from src.tools.solver_tools import solve
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class SweepState(TypedDict, total=False):
    """State for the sweep workflow."""
    config: ModelConfig
    axis: str
    grid: List[float]
    channels: List[int]
    measures: List[str]
    mode: Mode
    wide: bool
    points: List[Dict[str, Any]]
    records: List[Dict[str, Any]]
    table: Optional[pd.DataFrame]
    status: str
    error_message: str
    error: Optional[Exception]


def parse_grid(spec: str) -> List[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    try:
        if ":" in spec:
            start, stop, step = (float(part) for part in spec.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            count = int(round((stop - start) / step))
            return [round(start + k * step, 12) for k in range(count + 1)]
        return [float(part) for part in spec.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"invalid grid '{spec}': {exc}") from exc


class SweepWorkflow:
    """
    Solver sweep along one parameter axis for one or more channel counts.

    1. Expand the grid into concrete configurations
    2. Solve every point (optionally on a thread pool)
    3. Tabulate the requested measures
    """

    def __init__(self, workers: int = settings.WORKERS, verbose: bool = True):
        self.workers = workers
        self.verbose = verbose
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(SweepState)

        workflow.add_node("expand_grid", self._expand_grid)
        workflow.add_node("solve_points", self._solve_points)
        workflow.add_node("tabulate", self._tabulate)

        workflow.set_entry_point("expand_grid")

        workflow.add_conditional_edges("expand_grid", self._route("solve_points"))
        workflow.add_conditional_edges("solve_points", self._route("tabulate"))
        workflow.add_edge("tabulate", END)

        return workflow.compile()

    @staticmethod
    def _route(next_node: str):
        def route(state: SweepState) -> str:
            return END if state.get("status") == "error" else next_node
        return route

    def _expand_grid(self, state: SweepState) -> SweepState:
        try:
            axis = state["axis"]
            if axis not in AXES:
                raise ConfigError(f"unknown axis '{axis}'; expected one of {', '.join(AXES)}")
            base = state["config"]
            channels = [base.S] if axis == "S" else (state.get("channels") or [base.S])
            points = []
            for S in channels:
                at_s = base.replace(S=int(S))
                for value in state["grid"]:
                    cfg = apply_axis(at_s, axis, value)
                    points.append({"axis": axis, "axis_value": value, "S": cfg.S, "config": cfg})
            if self.verbose:
                print(f"🗂️ Sweep over {axis}: {len(state['grid'])} values x {len(channels)} channel counts")
            return {**state, "points": points, "status": "expanded"}
        except Exception as exc:
            logger.error("grid expansion failed: %s", exc)
            return {**state, "status": "error", "error_message": str(exc), "error": exc}

    def _solve_point(self, point: Dict[str, Any], mode: Mode) -> Dict[str, Any]:
        cfg = point["config"]
        ss, _ = solve(cfg.validated(), mode)
        flat = compute_measures(ss, cfg).to_flat()
        logger.info("%s=%g, S=%d solved at M=%d", point["axis"], point["axis_value"], cfg.S, ss.M)
        return {"axis": point["axis"], "axis_value": point["axis_value"], "S": cfg.S, **flat}

    def _solve_points(self, state: SweepState) -> SweepState:
        try:
            mode = state["mode"]
            points = state["points"]
            if self.workers > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    records = list(pool.map(lambda p: self._solve_point(p, mode), points))
            else:
                records = [self._solve_point(p, mode) for p in points]
            if self.verbose:
                print(f"   ✅ Solved {len(records)} points")
            return {**state, "records": records, "status": "solved"}
        except Exception as exc:
            if self.verbose:
                print(f"❌ Sweep failed: {exc}")
            logger.error("sweep failed: %s", exc)
            return {**state, "status": "error", "error_message": str(exc), "error": exc}

    def _tabulate(self, state: SweepState) -> SweepState:
        table = sweep_frame(state["records"], state["measures"], wide=state.get("wide", False))
        return {**state, "table": table, "status": "completed"}

    def run(self, config: ModelConfig, axis: str, grid: Sequence[float], measures: Sequence[str],
            channels: Optional[Sequence[int]] = None, mode: Optional[Mode] = None,
            wide: bool = False) -> Dict[str, Any]:
        initial_state: SweepState = {
            "config": config,
            "axis": axis,
            "grid": list(grid),
            "channels": list(channels or []),
            "measures": list(measures),
            "mode": mode or config.mode,
            "wide": wide,
            "points": [],
            "records": [],
            "table": None,
            "status": "starting",
            "error_message": "",
            "error": None,
        }
        return self.graph.invoke(initial_state)
