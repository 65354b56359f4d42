"""Solve workflow using LangGraph for orchestration."""

import logging
from typing import Any, Dict, Optional

from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from src.models.results import MeasureReport, SteadyState
from src.models.stochastic import Mode, ModelConfig
from src.tools.measure_tools import compute_measures
from src.tools.solver_tools import TruncationReport, choose_truncation, solve_steady_state

logger = logging.getLogger(__name__)


class SolveState(TypedDict, total=False):
    """State for the solve workflow."""
    config: ModelConfig
    mode: Mode
    with_measures: bool
    M: int
    steady_state: Optional[SteadyState]
    truncation: Optional[TruncationReport]
    measures: Optional[MeasureReport]
    status: str
    error_message: str
    error: Optional[Exception]


class SolveWorkflow:
    """
    Steady-state pipeline for one configuration.

    1. Validate the configuration
    2. Select the truncation level (fixed or by measure stability)
    3. Solve the level chain at that level
    4. Evaluate the performance measures
    """

    def __init__(self, verbose: bool = True):
        self.verbose = verbose
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(SolveState)

        workflow.add_node("validate_config", self._validate_config)
        workflow.add_node("select_truncation", self._select_truncation)
        workflow.add_node("solve_levels", self._solve_levels)
        workflow.add_node("evaluate_measures", self._evaluate_measures)
        workflow.add_node("finalize", self._finalize)

        workflow.set_entry_point("validate_config")

        workflow.add_conditional_edges("validate_config", self._route("select_truncation"))
        workflow.add_conditional_edges("select_truncation", self._route("solve_levels"))
        workflow.add_conditional_edges("solve_levels", self._route("evaluate_measures"))
        workflow.add_edge("evaluate_measures", "finalize")
        workflow.add_edge("finalize", END)

        return workflow.compile()

    @staticmethod
    def _route(next_node: str):
        def route(state: SolveState) -> str:
            return "finalize" if state.get("status") == "error" else next_node
        return route

    def _say(self, message: str) -> None:
        if self.verbose:
            print(message)

    def _fail(self, state: SolveState, exc: Exception, stage: str) -> SolveState:
        self._say(f"❌ {stage} failed: {exc}")
        logger.error("%s failed: %s", stage, exc)
        return {**state, "status": "error", "error_message": str(exc), "error": exc}

    def _validate_config(self, state: SolveState) -> SolveState:
        try:
            cfg = state["config"].validated()
            self._say(f"📋 Configuration '{cfg.name}': S={cfg.S}, "
                      f"lambda_H={cfg.lambda_h:.4g}, lambda_N={cfg.lambda_n:.4g}")
            return {**state, "config": cfg, "status": "validated"}
        except Exception as exc:
            return self._fail(state, exc, "Validation")

    def _select_truncation(self, state: SolveState) -> SolveState:
        cfg, mode = state["config"], state["mode"]
        policy = cfg.truncation
        try:
            if policy.is_fixed:
                self._say(f"📏 Fixed truncation level M={policy.M}")
                return {**state, "M": policy.M, "status": "truncation_selected"}
            M, ss, report = choose_truncation(cfg, mode=mode)
            self._say(f"📏 Truncation level M={M} (tail mass {report.tail_mass:.2e})")
            return {**state, "M": M, "steady_state": ss, "truncation": report, "status": "truncation_selected"}
        except Exception as exc:
            return self._fail(state, exc, "Truncation search")

    def _solve_levels(self, state: SolveState) -> SolveState:
        try:
            ss = state.get("steady_state")
            if ss is None:
                ss = solve_steady_state(state["config"], state["M"], state["mode"])
                state = {**state, "truncation": TruncationReport(
                    M=state["M"], tail_mass=ss.tail_mass, eps=state["config"].truncation.eps, tried=[state["M"]]
                )}
            self._say(f"🧮 Solved {len(ss.z)} levels, worst residual {ss.residual:.2e}")
            return {**state, "steady_state": ss, "status": "solved"}
        except Exception as exc:
            return self._fail(state, exc, "Solve")

    def _evaluate_measures(self, state: SolveState) -> SolveState:
        if not state.get("with_measures", True):
            return state
        try:
            report = compute_measures(state["steady_state"], state["config"])
            self._say(f"📊 P_d={report.P_d}, P_preempt={report.P_preempt}, E_orbit={report.E_orbit:.4g}")
            return {**state, "measures": report, "status": "measured"}
        except Exception as exc:
            return self._fail(state, exc, "Measure evaluation")

    def _finalize(self, state: SolveState) -> SolveState:
        if state.get("status") == "error":
            return state
        self._say("✅ Solve completed")
        return {**state, "status": "completed"}

    def run(self, config: ModelConfig, mode: Optional[Mode] = None, with_measures: bool = True) -> Dict[str, Any]:
        initial_state: SolveState = {
            "config": config,
            "mode": mode or config.mode,
            "with_measures": with_measures,
            "steady_state": None,
            "truncation": None,
            "measures": None,
            "status": "starting",
            "error_message": "",
            "error": None,
        }
        return self.graph.invoke(initial_state)
