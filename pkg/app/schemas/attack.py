"""
Pydantic schemas for false data injection attack vectors and search results.
"""

from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class SynthesisGoal(BaseModel):
    """What the attacker wants to achieve on the real system."""
    model_config = ConfigDict(frozen=True)

    min_overload_pairs: int = Field(..., ge=1, description="T_L, distinct (line, outage) pairs")
    overload_margin: float = Field(..., ge=0, le=1, description="delta_l, fraction of capacity")
    cost_budget: float = Field(..., ge=0, description="Corrupted dispatch cost limit ($)")


class OverloadPair(BaseModel):
    """A line overloaded on the real system after an outage."""
    model_config = ConfigDict(frozen=True)

    line: int = Field(..., description="Overloaded line id")
    outage: int = Field(..., description="Tripped line id")
    flow: float = Field(..., description="Post-contingency flow (pu)")
    loading_percent: float = Field(..., description="100 * |flow| / capacity")

    @property
    def excess_percent(self) -> float:
        """Percent above capacity."""
        return self.loading_percent - 100.0


class AttackVector(BaseModel):
    """
    A stealthy measurement attack and its consequences.

    Per-bus arrays use position j-1 for bus j; ``altered`` follows measurement
    indexing (forward flows, backward flows, bus consumptions).
    """
    model_config = ConfigDict(frozen=True)

    delta_theta: Tuple[float, ...] = Field(..., description="Angle shift per bus (slack 0)")
    delta_line: Tuple[float, ...] = Field(..., description="Forward flow measurement shift per line")
    delta_bus: Tuple[float, ...] = Field(..., description="Consumption shift per bus (= load shift)")
    altered: Tuple[bool, ...] = Field(..., description="Measurement changed by the attacker")
    corrupted: Tuple[bool, ...] = Field(..., description="Bus angle estimate shifted")
    compromised: Tuple[bool, ...] = Field(..., description="Bus with an altered meter")
    attacked_load: Tuple[float, ...] = Field(..., description="Load seen by the control center")
    corrupted_dispatch: Tuple[float, ...] = Field(..., description="Dispatch computed from attacked loads")
    corrupted_cost: float
    overload_pairs: Tuple[OverloadPair, ...] = ()
    explored_buses: Tuple[int, ...] = Field((), description="Bus subset the search attributed")
    anchor: Optional[Tuple[int, int, int]] = Field(
        None, description="(line, outage, sign) the vector was synthesized to overload"
    )

    @model_validator(mode="after")
    def check_shapes(self) -> "AttackVector":
        b = len(self.delta_bus)
        l = len(self.delta_line)
        if len(self.altered) != 2 * l + b:
            raise ValueError("altered flags must cover 2l + b measurements")
        for name in ("delta_theta", "corrupted", "compromised", "attacked_load", "corrupted_dispatch"):
            if len(getattr(self, name)) != b:
                raise ValueError(f"{name} must have one entry per bus")
        if abs(sum(self.delta_bus)) > 1e-8:
            raise ValueError("bus consumption shifts must sum to zero")
        return self

    def measurement_injection(self) -> np.ndarray:
        """Full m-vector a = (delta_line, -delta_line, delta_bus)."""
        delta_line = np.asarray(self.delta_line, dtype=float)
        return np.concatenate([delta_line, -delta_line, np.asarray(self.delta_bus, dtype=float)])

    def compromised_buses(self) -> Tuple[int, ...]:
        return tuple(j + 1 for j, flag in enumerate(self.compromised) if flag)

    def altered_measurements(self) -> Tuple[int, ...]:
        return tuple(i + 1 for i, flag in enumerate(self.altered) if flag)

    def overload_set(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((pair.line, pair.outage) for pair in self.overload_pairs)

    @classmethod
    def null(cls, n_buses: int, n_lines: int, load, dispatch, cost: float) -> "AttackVector":
        """The attack that changes nothing."""
        zeros = (0.0,) * n_buses
        return cls(
            delta_theta=zeros,
            delta_line=(0.0,) * n_lines,
            delta_bus=zeros,
            altered=(False,) * (2 * n_lines + n_buses),
            corrupted=(False,) * n_buses,
            compromised=(False,) * n_buses,
            attacked_load=tuple(float(v) for v in load),
            corrupted_dispatch=tuple(float(v) for v in dispatch),
            corrupted_cost=cost,
        )


class SearchCertificate(BaseModel):
    """What the subset search covered."""
    model_config = ConfigDict(frozen=True)

    max_buses: int
    subsets_explored: int = Field(..., description="Bus subsets of size <= max_buses examined")
    subsets_total: int = Field(..., description="All bus subsets of size <= max_buses")
    subspaces: int = Field(..., description="Distinct admissible state-shift subspaces")
    feasibility_solves: int = Field(..., description="Mixed-integer feasibility problems solved")

    @property
    def exhaustive(self) -> bool:
        return self.subsets_explored == self.subsets_total


class SynthesisResult(BaseModel):
    """Outcome of an attack search."""
    model_config = ConfigDict(frozen=True)

    verdict: Literal["sat", "unsat"]
    attack: Optional[AttackVector] = None
    certificate: SearchCertificate

    @property
    def sat(self) -> bool:
        return self.verdict == "sat"
