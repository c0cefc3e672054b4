"""
Planner agent: expands a configuration into the replicate cells to simulate.
"""
from typing import Any, Dict

from app.agents.base_agent import BaseAgent
from app.tools.errors import AcdfError
from app.tools.simulation import SimulationConfig, plan_cells


class PlannerAgent(BaseAgent):
    """Lists every (distribution, n, replicate) cell of a run."""

    def __init__(self):
        super().__init__(name="planner")

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """
        Plan the run.

        Args:
            state: The current state containing:
                - config: SimulationConfig

        Returns:
            Updated state with ``cells`` and ``needs_limits``
        """
        config = state.get("config")
        if not isinstance(config, SimulationConfig):
            state["cells"] = []
            state["success"] = False
            state["error"] = "No configuration provided"
            return state
        try:
            state["cells"] = plan_cells(config)
            state["needs_limits"] = config.needs_limits()
            state["success"] = True
        except AcdfError as e:
            return self.fail(state, e)
        return state
