"""
Limit-constant agent: provides c(x) for the IGau and RIG bandwidth rules.
"""
import os
from typing import Any, Dict, Optional

from app.agents.base_agent import BaseAgent
from app.memory.limit_cache import LimitConstantCache
from app.tools.bandwidth import LimitCurve, c_limit
from app.tools.distributions import KernelKind, RngStream
from app.tools.errors import AcdfError
from app.tools.estimators import EstimatorKind

# c(x) is linear in x for both kernels, one probe fixes the curve
PROBE_X = 1.0


class LimitAgent(BaseAgent):
    """Looks up c(PROBE_X) in the cache, estimating and storing it on a miss."""

    def __init__(self, cache: Optional[LimitConstantCache] = None):
        super().__init__(name="limits")
        self.cache = cache or LimitConstantCache(os.getenv("ACDF_CACHE_PATH", "data/limit_constants.json"))

    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        config = state["config"]
        logger = state.get("logger")
        curves, constants = {}, []
        try:
            for est in (EstimatorKind.IGAU, EstimatorKind.RIG):
                if est not in config.estimators:
                    continue
                kind = est.kernel
                limit = self.cache.get(kind, PROBE_X, config.limit_reps, config.limit_b_probe, config.seed,
                                       config.limit_richardson)
                if limit is None:
                    if logger:
                        logger.log_tool("c_limit", f"{kind.value}: estimating with {config.limit_reps} pairs")
                    limit = c_limit(kind, PROBE_X, reps=config.limit_reps, b_probe=config.limit_b_probe,
                                    rng=RngStream(config.seed, (0, int(est))), richardson=config.limit_richardson,
                                    threads=config.threads)
                    self.cache.add(limit)
                elif logger:
                    logger.log_tool("c_limit", f"{kind.value}: cached value reused")
                constants.append(limit)
                curves[kind] = LimitCurve({limit.x: limit})
        except AcdfError as e:
            return self.fail(state, e)
        state["limits"] = curves
        state["limit_constants"] = constants
        state["success"] = True
        return state


def limit_summary(curves: Dict[KernelKind, LimitCurve]) -> str:
    return ", ".join(f"{k.value}: c(1)={curve(PROBE_X):.6f}" for k, curve in curves.items()) or "none"
