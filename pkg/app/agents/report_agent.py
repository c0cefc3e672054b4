"""
Report agent: writes records, summary tables and curve data to the output directory.
"""
from pathlib import Path
from typing import Any, Dict

from app.agents.base_agent import BaseAgent
from app.tools.errors import AcdfError
from app.tools.simulation import curve_rows
from app.tools.summary import emit, emit_curves, write_records


class ReportAgent(BaseAgent):
    def __init__(self):
        super().__init__(name="report")

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        config = state["config"]
        out_dir = Path(state.get("out_dir") or config.out_dir)
        written = []
        try:
            if state.get("records") and state.get("write_records", True):
                written.append(write_records(state["records"], out_dir / "records.csv"))
            written.extend(emit(state["table"], config.formats, out_dir))
            if config.curves and state.get("write_records", True):
                rows = []
                for i in config.distributions:
                    for n in config.sizes:
                        rows.extend(curve_rows(config, i, n, state.get("limits")))
                written.append(emit_curves(rows, out_dir))
        except AcdfError as e:
            state["written"] = [str(p) for p in written]
            return self.fail(state, e)
        state["written"] = [str(p) for p in written]
        state["success"] = True
        return state
