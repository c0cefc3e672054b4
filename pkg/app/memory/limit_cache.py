import os
import json
from typing import Dict, List, Optional, Tuple

from app.tools.bandwidth import LimitConstant
from app.tools.distributions import KernelKind

CacheKey = Tuple[str, float, int, float, int, bool]


def cache_key(kind, x: float, reps: int, b_probe: float, seed: int, richardson: bool) -> CacheKey:
    return KernelKind(kind).value, float(x), int(reps), float(b_probe), int(seed), bool(richardson)


class LimitConstantCache:
    """JSON file of Monte Carlo limit constants, keyed by (kind, x, reps, b_probe, seed, richardson)."""

    def __init__(self, path: str = "data/limit_constants.json"):
        self.path = path
        directory = os.path.dirname(self.path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        if not os.path.exists(self.path):
            with open(self.path, "w") as f:
                json.dump([], f)

    def add(self, limit: LimitConstant):
        entries = [e for e in self.get_all() if self._key(e) != self._key(limit)]
        entries.append(limit)
        with open(self.path, "w") as f:
            json.dump([e.to_dict() for e in entries], f, indent=2)

    def get_all(self) -> List[LimitConstant]:
        with open(self.path, "r") as f:
            try:
                raw = json.load(f)
            except json.JSONDecodeError:
                return []
        return [LimitConstant.from_dict(e) for e in raw]

    def get(self, kind, x: float, reps: int, b_probe: float, seed: int, richardson: bool) -> Optional[LimitConstant]:
        wanted = cache_key(kind, x, reps, b_probe, seed, richardson)
        for entry in self.get_all():
            if self._key(entry) == wanted:
                return entry
        return None

    def as_mapping(self, kind) -> Dict[float, LimitConstant]:
        kind = KernelKind(kind)
        return {e.x: e for e in self.get_all() if e.kind == kind}

    @staticmethod
    def _key(limit: LimitConstant) -> CacheKey:
        return cache_key(limit.kind, limit.x, limit.reps, limit.b_probe, limit.seed, limit.richardson)
