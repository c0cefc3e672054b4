"""
Master agent for orchestrating an experiment using LangGraph.
"""
from typing import Any, Dict, List, Optional, Tuple, TypedDict
import asyncio
from langgraph.graph import StateGraph, END

from app.agents.base_agent import BaseAgent
from app.agents.flow_logger import FlowLogger
from app.agents.limit_agent import LimitAgent, limit_summary
from app.agents.planner_agent import PlannerAgent
from app.agents.replicate_agent import ReplicateAgent
from app.agents.report_agent import ReportAgent
from app.agents.summary_agent import SummaryAgent
from app.memory import LimitConstantCache, RecordStore
from app.tools.simulation import IseRecord, SimulationConfig


class ExperimentState(TypedDict):
    config: SimulationConfig
    report: bool
    cells: List[Tuple[int, int, int]]
    needs_limits: bool
    limits: Dict[Any, Any]
    limit_constants: List[Any]
    records: List[IseRecord]
    flagged: List[Dict[str, Any]]
    table: Any
    checks: List[Any]
    written: List[str]
    failed_steps: List[Dict[str, Any]]
    status: Optional[str]


class MasterAgent(BaseAgent):
    """
    Runs plan -> limits -> replicates -> summarize -> report.

    The limits stage is skipped when neither IGau nor RIG is requested; with
    ``report`` off the run stops after the replicates.
    """

    def __init__(self, memory: Optional[RecordStore] = None, long_memory: Optional[LimitConstantCache] = None,
                 logger: Optional[FlowLogger] = None):
        super().__init__(name="master")
        self.memory = memory if memory is not None else RecordStore()
        self.long_memory = long_memory

        self.planner = PlannerAgent()
        self.limits = LimitAgent(long_memory)
        self.replicates = ReplicateAgent(self.memory)
        self.summary = SummaryAgent()
        self.reporter = ReportAgent()

        self.graph = self._build_graph()
        self.logger = logger or FlowLogger()
        self.logger.log_event("MasterAgent initialized and flow started.")

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run one experiment.

        Args:
            state: The initial state containing:
                - config: SimulationConfig
                - report: write summary files (default True)

        Returns:
            Final state with records, table, written files, failed_steps and
            status ("ok", "flagged" or "failed")
        """
        config = state["config"]
        self.logger.log_event(
            f"MasterAgent triggered: distributions={list(config.distributions)} sizes={list(config.sizes)} "
            f"replicates={config.replicates} estimators={[e.label for e in config.estimators]} "
            f"seed={config.seed} threads={config.threads}"
        )
        result = await self.graph.ainvoke({
            "config": config,
            "report": state.get("report", True),
            "cells": [],
            "needs_limits": False,
            "limits": {},
            "limit_constants": [],
            "records": [],
            "flagged": [],
            "table": None,
            "checks": [],
            "written": [],
            "failed_steps": [],
            "status": None,
        })
        state.update(result)
        self.logger.log_event("MasterAgent finished.")
        self.logger.log_final_response(
            f"status={state['status']} records={len(state['records'])} flagged={len(state['flagged'])} "
            f"failed_steps={len(state['failed_steps'])}"
        )
        return state

    def _build_graph(self) -> Any:
        """Build the LangGraph for the experiment stages."""
        graph = StateGraph(ExperimentState)

        graph.add_node("plan", self._sync(self._plan_node, 1, "PlannerAgent"))
        graph.add_node("limits_stage", self._sync(self._limits_node, 2, "LimitAgent"))
        graph.add_node("replicates", self._sync(self._replicates_node, 3, "ReplicateAgent"))
        graph.add_node("summarize", self._sync(self._summarize_node, 4, "SummaryAgent"))
        graph.add_node("report_stage", self._sync(self._report_node, 5, "ReportAgent"))
        graph.add_node("finish", self._finish_node)

        graph.set_entry_point("plan")
        graph.add_conditional_edges(
            "plan",
            self._route_after_plan,
            {"limits": "limits_stage", "replicates": "replicates", "done": "finish"}
        )
        graph.add_conditional_edges(
            "limits_stage",
            self._route_on_failure("replicates"),
            {"replicates": "replicates", "done": "finish"}
        )
        graph.add_conditional_edges(
            "replicates",
            self._route_after_replicates,
            {"summarize": "summarize", "done": "finish"}
        )
        graph.add_conditional_edges(
            "summarize",
            self._route_on_failure("report"),
            {"report": "report_stage", "done": "finish"}
        )
        graph.add_edge("report_stage", "finish")
        graph.add_edge("finish", END)

        return graph.compile()

    # Synchronous wrappers for LangGraph nodes

    def _sync(self, node, step_num: int, agent_name: str):
        def wrapper(state: ExperimentState) -> ExperimentState:
            self.logger.log_step_start(step_num, agent_name)
            loop = asyncio.new_event_loop()
            try:
                result_state = loop.run_until_complete(node(state))
            finally:
                loop.close()
            self.logger.log_step_end(step_num, agent_name)
            return result_state
        return wrapper

    # Routing

    @staticmethod
    def _route_after_plan(state: ExperimentState) -> str:
        if state["failed_steps"]:
            return "done"
        return "limits" if state["needs_limits"] else "replicates"

    @staticmethod
    def _route_on_failure(next_node: str):
        def route(state: ExperimentState) -> str:
            return "done" if state["failed_steps"] else next_node
        return route

    @staticmethod
    def _route_after_replicates(state: ExperimentState) -> str:
        return "summarize" if state["report"] else "done"

    # Stage nodes

    def _record_failure(self, state: ExperimentState, stage: str, result: Dict[str, Any]):
        state["failed_steps"].append({"stage": stage, "error": result.get("error", "unknown error")})
        self.logger.log_agent(stage, f"failed: {result.get('error')}")

    async def _plan_node(self, state: ExperimentState) -> ExperimentState:
        result = await self.planner.run({"config": state["config"]})
        if not result.get("success"):
            self._record_failure(state, "plan", result)
            return state
        state["cells"] = result["cells"]
        state["needs_limits"] = result["needs_limits"]
        self.logger.log_step(1, "PlannerAgent", "config", f"{len(state['cells'])} replicate cells", "completed")
        return state

    async def _limits_node(self, state: ExperimentState) -> ExperimentState:
        result = await self.limits.run({"config": state["config"], "logger": self.logger})
        if not result.get("success"):
            self._record_failure(state, "limits", result)
            return state
        state["limits"] = result["limits"]
        state["limit_constants"] = result["limit_constants"]
        self.logger.log_step(2, "LimitAgent", "IGau/RIG", limit_summary(state["limits"]), "completed")
        return state

    async def _replicates_node(self, state: ExperimentState) -> ExperimentState:
        result = await self.replicates.run({
            "config": state["config"],
            "cells": state["cells"],
            "limits": state["limits"],
            "logger": self.logger,
        })
        state["records"] = result["records"]
        state["flagged"] = result["flagged"]
        self.logger.log_step(3, "ReplicateAgent", f"{len(state['cells'])} cells",
                             f"{len(state['records'])} records, {len(state['flagged'])} flagged",
                             "completed" if not state["flagged"] else "completed with flagged cells")
        return state

    async def _summarize_node(self, state: ExperimentState) -> ExperimentState:
        result = await self.summary.run({"config": state["config"], "records": state["records"],
                                         "logger": self.logger})
        if not result.get("success"):
            self._record_failure(state, "summarize", result)
            return state
        state["table"] = result["table"]
        state["checks"] = result["checks"]
        failed = sum(not c.passed for c in state["checks"])
        self.logger.log_step(4, "SummaryAgent", f"{len(state['records'])} records",
                             f"{len(state['table'].cells)} cells, {failed} soft check(s) failed", "completed")
        return state

    async def _report_node(self, state: ExperimentState) -> ExperimentState:
        result = await self.reporter.run({
            "config": state["config"],
            "records": state["records"],
            "table": state["table"],
            "limits": state["limits"],
        })
        state["written"] = result.get("written", [])
        if not result.get("success"):
            self._record_failure(state, "report", result)
            return state
        self.logger.log_step(5, "ReportAgent", state["config"].out_dir, ", ".join(state["written"]), "completed")
        return state

    def _finish_node(self, state: ExperimentState) -> ExperimentState:
        if state["failed_steps"]:
            state["status"] = "failed"
        elif state["flagged"]:
            state["status"] = "flagged"
        else:
            state["status"] = "ok"
        return state


def run_experiment(config: SimulationConfig, long_memory: Optional[LimitConstantCache] = None) -> List[IseRecord]:
    """All ISE records of a configuration, without writing any summary file."""
    master = MasterAgent(long_memory=long_memory)
    state = asyncio.run(master.run({"config": config, "report": False}))
    return state["records"]
