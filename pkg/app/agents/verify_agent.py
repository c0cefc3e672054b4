"""
Verification agent: runs the property suite and writes verify.csv.
"""
from dataclasses import astuple
from pathlib import Path
from typing import Any, Dict, Optional

from app.agents.base_agent import BaseAgent
from app.tools.errors import AcdfError
from app.tools.summary import write_rows
from app.tools.verification import VERIFY_COLUMNS, VerificationSettings, run_checks


class VerifyAgent(BaseAgent):
    def __init__(self, settings: Optional[VerificationSettings] = None):
        super().__init__(name="verify")
        self.settings = settings

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run every check.

        Args:
            state: The current state containing:
                - config: SimulationConfig (seed, quadrature, threads, out_dir)
                - logger: Optional FlowLogger

        Returns:
            Updated state with ``checks`` (CheckResult list), ``written`` and
            ``success`` (False when any check failed)
        """
        config = state["config"]
        logger = state.get("logger")
        settings = self.settings or VerificationSettings(
            seed=config.seed, limit_reps=config.limit_reps, limit_b_probe=config.limit_b_probe
        )
        results = []
        for result in run_checks(settings, config.quadrature, config.threads):
            results.append(result)
            if logger:
                status = "passed" if result.passed else "FAILED"
                logger.log_tool("verify", f"{result.check}: {status} (observed {result.observed:.6g})")
        state["checks"] = results
        try:
            path = write_rows((astuple(r) for r in results), VERIFY_COLUMNS, Path(config.out_dir) / "verify.csv")
        except AcdfError as e:
            return self.fail(state, e)
        state["written"] = [str(path)]
        state["success"] = all(r.passed for r in results)
        if not state["success"]:
            state["error"] = f"{sum(not r.passed for r in results)} verification check(s) failed"
        return state
