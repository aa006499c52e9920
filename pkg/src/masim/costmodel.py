"""Expected cost of one agent searching a joint space versus two agents splitting it."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional


@dataclass(frozen=True)
class CostParams:
    c_single: float
    c1: float
    c2: float
    delta_comm: float
    steps_multi: float
    steps_y1: float
    steps_y2_given_y1: float

    def __post_init__(self):
        for name in ("c_single", "c1", "c2", "delta_comm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("steps_multi", "steps_y1", "steps_y2_given_y1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def cost_single(p: CostParams) -> float:
    return p.c_single * p.steps_multi


def cost_two_agent(p: CostParams) -> float:
    return p.c1 * p.steps_y1 + (p.c1 * p.steps_y1 + p.c2) * p.steps_y2_given_y1 + p.delta_comm


@dataclass(frozen=True)
class Advantage:
    delta_cost: float
    advantageous: bool
    step_reduction_holds: bool  # (steps_y1 + steps_y2) / steps_multi <= ratio
    low_comm_holds: bool  # delta_comm / (c2 * steps_y2) <= ratio
    ratio_lhs: float  # steps_multi / (steps_y1 + steps_y2)
    ratio_rhs: Optional[float]  # (c1 + c2 + delta_comm / steps_y2) / c_single; None when c_single is 0

    def to_json(self) -> dict:
        return asdict(self)


def advantage(p: CostParams, ratio: float = 0.1) -> Advantage:
    delta = cost_single(p) - cost_two_agent(p)
    step_sum = p.steps_y1 + p.steps_y2_given_y1
    comm_scale = p.c2 * p.steps_y2_given_y1
    low_comm = p.delta_comm == 0 if comm_scale == 0 else p.delta_comm / comm_scale <= ratio
    rhs_num = p.c1 + p.c2 + p.delta_comm / p.steps_y2_given_y1
    rhs = rhs_num / p.c_single if p.c_single > 0 else None
    return Advantage(
        delta_cost=delta,
        advantageous=delta > 0,
        step_reduction_holds=step_sum / p.steps_multi <= ratio,
        low_comm_holds=low_comm,
        ratio_lhs=p.steps_multi / step_sum,
        ratio_rhs=rhs,
    )
