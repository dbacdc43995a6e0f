"""
Pydantic schemas for attack replay reports.
"""

from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.dispatch import ScopfSolution
from app.schemas.powerflow import PowerFlowState

# (line id, outage id, |flow| / capacity)
ContingencyLoading = Tuple[int, int, float]


class ConfirmedOverload(BaseModel):
    """A post-contingency overload found by both flow oracles."""
    model_config = ConfigDict(frozen=True)

    line: int
    outage: int
    predicted_flow: float = Field(..., description="Flow from outage distribution factors (pu)")
    resolved_flow: float = Field(..., description="Flow from a power flow with the line removed (pu)")
    loading_percent: float = Field(..., description="100 * |flow| / capacity")

    @property
    def excess_percent(self) -> float:
        return self.loading_percent - 100.0


class TrueView(BaseModel):
    """The real system (true loads) running a given dispatch."""
    model_config = ConfigDict(frozen=True)

    source: Literal["vector", "ems"]
    dispatch: Tuple[float, ...]
    cost: float
    state: PowerFlowState
    base_violations: Tuple[int, ...] = Field((), description="Lines over capacity without any outage")
    overloads: Tuple[ConfirmedOverload, ...] = ()
    oracle_gap: float = Field(0.0, description="Largest |predicted - resolved| flow (pu)")


class VerificationReport(BaseModel):
    """Independent replay of one attack vector."""
    model_config = ConfigDict(frozen=True)

    stealthy: bool
    ems_view: Optional[ScopfSolution] = Field(None, description="SCOPF re-optimized on the attacked loads")
    ems_infeasible: Optional[str] = Field(None, description="Why the EMS found no secure dispatch")
    ems_screen: Tuple[ContingencyLoading, ...] = ()
    ems_secure: bool = Field(False, description="Every expected post-contingency loading <= 100%")
    true_view: TrueView = Field(..., description="Real loads with the vector's own dispatch")
    true_view_ems: Optional[TrueView] = Field(None, description="Real loads with the EMS dispatch")
    confirmed_overloads: Tuple[ConfirmedOverload, ...] = ()
    cost_delta: float = Field(..., description="Corrupted cost minus pre-attack cost ($)")

    @property
    def oracles_agree(self) -> bool:
        views = [self.true_view] + ([self.true_view_ems] if self.true_view_ems else [])
        return all(view.oracle_gap <= 1e-6 for view in views)
