"""Discrete-time multi-agent system simulation with ensemble and vulnerability experiments."""

from .core import (
    EMPTY,
    AgentSpec,
    AgentState,
    FeedbackSignal,
    InputBundle,
    KernelContractError,
    OrderingError,
    StructuralError,
    Value,
    assemble_input,
    assemble_input_dag,
    step_agent,
)
from .kernels import BACKEND
from .runtime import RunConfig, RunError, StoppingCriterion, Trace, replay_check, run
from .topology import TopologyGraph, apply_update, topological_order, validate_graph

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EMPTY",
    "AgentSpec",
    "AgentState",
    "FeedbackSignal",
    "InputBundle",
    "KernelContractError",
    "OrderingError",
    "RunConfig",
    "RunError",
    "StoppingCriterion",
    "StructuralError",
    "TopologyGraph",
    "Trace",
    "Value",
    "apply_update",
    "assemble_input",
    "assemble_input_dag",
    "replay_check",
    "run",
    "step_agent",
    "topological_order",
    "validate_graph",
]
