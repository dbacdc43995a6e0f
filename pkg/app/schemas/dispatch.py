"""
Pydantic schemas for security-constrained dispatch results.
"""

from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.schemas.powerflow import PowerFlowState

ConstraintKind = Literal["line_base", "line_contingency", "gen_max", "gen_min"]


class BindingConstraint(BaseModel):
    """A constraint sitting at its limit in a dispatch solution."""
    model_config = ConfigDict(frozen=True)

    kind: ConstraintKind
    element: int = Field(..., description="Line id for line limits, bus id for generator limits")
    contingency: Optional[int] = Field(None, description="Tripped line id for contingency limits")
    value: float
    limit: float


class ScopfSolution(BaseModel):
    """Least-cost N-1 secure dispatch."""
    model_config = ConfigDict(frozen=True)

    dispatch: Tuple[float, ...] = Field(..., description="Generation per bus (pu), 0 where none")
    cost: float = Field(..., description="Total generation cost ($)")
    flows: PowerFlowState
    binding: Tuple[BindingConstraint, ...] = ()
    committed: Tuple[int, ...] = Field(..., description="Buses whose generator is on")
    islanding_excluded: Tuple[int, ...] = Field(
        (), description="Outages left out of the security constraints"
    )
    contingencies: bool = Field(True, description="Post-contingency limits were enforced")

    def dispatch_array(self) -> np.ndarray:
        return np.asarray(self.dispatch, dtype=float)
