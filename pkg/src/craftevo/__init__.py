"""Combinatorial innovation task: evolutionary simulator, metrics, and play service."""

__version__ = "0.1.0"

from .agents import AgentState, BehaviorParams, Strategy  # noqa: F401
from .evolution import GenerationRecord, SimConfig, Trajectory, run_simulation  # noqa: F401
from .events import AttemptEvent  # noqa: F401
from .semantic import EmbeddingNet, init_net  # noqa: F401
from .task import TaskTree, default_task_tree, load_task_tree  # noqa: F401
