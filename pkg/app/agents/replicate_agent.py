"""
Replicate agent: runs every planned cell on a thread pool.
"""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional

from app.agents.base_agent import BaseAgent
from app.memory.records import RecordStore
from app.tools.simulation import IseRecord, simulate_cell


class ReplicateAgent(BaseAgent):
    """
    Simulates all (distribution, n, replicate) cells.

    Cells are independent; the merged records are ordered by
    (distribution, estimator, n, replicate), so the output does not depend
    on the number of threads.
    """

    def __init__(self, store: Optional[RecordStore] = None):
        super().__init__(name="replicates")
        self.store = store if store is not None else RecordStore()

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        config = state["config"]
        cells = state.get("cells", [])
        limits = state.get("limits") or {}
        logger = state.get("logger")
        failures: List[Dict[str, Any]] = []

        def on_failure(record: IseRecord, error: BaseException):
            failures.append({"cell": record.key, "flag": record.flag, "error": str(error)})
            if logger:
                logger.log_failure(record, error)

        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            futures = [
                loop.run_in_executor(pool, simulate_cell, config, i, n, k, limits, on_failure)
                for i, n, k in cells
            ]
            batches = await asyncio.gather(*futures)
        self.store.clear()
        for batch in batches:
            self.store.extend(batch)
        failures.sort(key=lambda f: f["cell"])
        state["records"] = self.store.get()
        state["flagged"] = failures
        state["success"] = True
        return state
