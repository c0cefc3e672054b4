"""
Common interface of the experiment stages (plan, limits, replicates, summary, report, verify).
"""
from abc import ABC, abstractmethod
from typing import Any, Dict


class BaseAgent(ABC):
    """Base class for all experiment stages."""

    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    async def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run the stage on the given workflow state.

        Args:
            state: The current state of the workflow

        Returns:
            Updated state with ``success`` set and, on failure, ``error``
        """
        pass

    def get_name(self) -> str:
        """Stage name used in flow logs and failed_steps."""
        return self.name

    def fail(self, state: Dict[str, Any], error: BaseException) -> Dict[str, Any]:
        """Mark the state failed with the error type and message."""
        state["success"] = False
        state["error"] = f"{type(error).__name__}: {error}"
        return state
