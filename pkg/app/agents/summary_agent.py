"""
Summary agent: ISE mean/difference tables and the soft ordering checks.
"""
from typing import Any, Dict

from app.agents.base_agent import BaseAgent
from app.tools.errors import AcdfError
from app.tools.summary import ordering_checks, summarize


class SummaryAgent(BaseAgent):
    def __init__(self):
        super().__init__(name="summary")

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        config = state.get("config")
        logger = state.get("logger")
        try:
            if config is None:
                table = summarize(state["records"])
            else:
                table = summarize(state["records"], config.distributions, [int(e) for e in config.estimators],
                                  config.sizes, config.replicates)
        except AcdfError as e:
            return self.fail(state, e)
        checks = ordering_checks(table)
        for check in checks:
            if not check.passed and logger:
                logger.log_check(check)
        state["table"] = table
        state["checks"] = checks
        state["success"] = True
        return state
