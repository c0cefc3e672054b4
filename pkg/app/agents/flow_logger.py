import os
import threading
from datetime import datetime


class FlowLogger:
    """
    One timestamped text log per run.

    The directory defaults to ``ACDF_LOG_DIR`` from the environment, then ``logs``.
    """

    def __init__(self, log_dir=None):
        log_dir = log_dir or os.getenv("ACDF_LOG_DIR", "logs")
        os.makedirs(log_dir, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        self.log_path = os.path.join(log_dir, f"log_flow_{timestamp}.txt")
        self._lock = threading.Lock()
        with open(self.log_path, "w") as f:
            f.write(f"Flow Log started at {timestamp}\n\n")

    def log(self, message: str):
        with self._lock:
            with open(self.log_path, "a") as f:
                f.write(message + "\n")

    @staticmethod
    def _now() -> str:
        return datetime.now().strftime("%Y-%m-%d %H:%M:%S")

    def log_event(self, event: str):
        self.log(f"{self._now()} - [EVENT] - {event}")

    def log_tool(self, tool_name: str, message: str = ""):
        msg = f"{self._now()} - [TOOL: {tool_name}]"
        if message:
            msg += f" - {message}"
        self.log(msg)

    def log_agent(self, agent_name: str, message: str = ""):
        msg = f"{self._now()} - [AGENT: {agent_name}]"
        if message:
            msg += f" - {message}"
        self.log(msg)

    def log_failure(self, record, error: BaseException):
        """One flagged (distribution, estimator, n, replicate) cell; never the sample itself."""
        self.log(
            f"{self._now()} - [CELL FAILED] - dist={record.dist_index} estimator={record.estimator.label} "
            f"n={record.n} replicate={record.replicate} flag={record.flag}: {error}"
        )

    def log_check(self, check):
        self.log(
            f"{self._now()} - [SOFT CHECK FAILED] - {check.check} dist={check.dist_index} n={check.n} "
            f"observed={check.observed:.6g} threshold={check.threshold:.6g}"
        )

    def log_final_response(self, message: str = ""):
        msg = f"{self._now()} - [FINAL STATUS]"
        if message:
            msg += f" - {message}"
        self.log(msg)

    def log_step_start(self, step_num, agent_name):
        self.log(f"{self._now()} - [EVENT] - Step {step_num} started: {agent_name}")

    def log_step_end(self, step_num, agent_name):
        self.log(f"{self._now()} - [EVENT] - Step {step_num} finished: {agent_name}")

    def log_step(self, step_num, agent_name, input_val, output_val, status):
        self.log(f"[Step {step_num}] Agent: {agent_name}\nInput: {input_val}\nOutput: {output_val}\nStatus: {status}\n---")
