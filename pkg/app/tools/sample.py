"""
Observation container shared by the estimators, bandwidth selectors and the harness.
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from app.tools.errors import DomainError


@dataclass(frozen=True)
class Sample:
    """
    Sorted, read-only vector of positive observations with provenance.

    ``values`` is sorted ascending; ``original`` keeps the draw order.
    """
    values: np.ndarray
    original: np.ndarray
    seed: Optional[int] = None
    stream: Tuple[int, ...] = field(default_factory=tuple)
    law: str = ""

    @classmethod
    def from_values(
        cls,
        observations: Sequence[float],
        seed: Optional[int] = None,
        stream: Tuple[int, ...] = (),
        law: str = "",
    ) -> "Sample":
        original = np.array(observations, dtype=float).reshape(-1)
        if original.size < 1:
            raise DomainError("a sample needs at least one observation")
        if not np.all(np.isfinite(original)) or np.any(original <= 0):
            raise DomainError("observations must be finite and strictly positive")
        values = np.sort(original)
        original.setflags(write=False)
        values.setflags(write=False)
        return cls(values=values, original=original, seed=seed, stream=tuple(stream), law=law)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def union(self, other: "Sample") -> "Sample":
        return Sample.from_values(np.concatenate([self.original, other.original]), law=self.law)
