"""System-level simulator of multi-cell networks served by moving drone base stations."""
__version__ = "0.1.0"

from dbsim.config import DMA, Scheduler, ScenarioConfig, default_config, validate  # noqa: E402
from dbsim.engine import RunResult, run, run_batch  # noqa: E402
from dbsim.kernels import BACKEND  # noqa: E402
from dbsim.metrics import MetricsSummary, summarize  # noqa: E402

__all__ = ["BACKEND", "DMA", "MetricsSummary", "RunResult", "Scheduler", "ScenarioConfig",
           "default_config", "run", "run_batch", "summarize", "validate"]
