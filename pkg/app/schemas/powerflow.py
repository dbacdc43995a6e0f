"""
Pydantic schemas for power flow results and outage sensitivity factors.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class PowerFlowState(BaseModel):
    """Bus angles, line flows and bus consumptions of one operating point."""
    model_config = ConfigDict(frozen=True)

    theta: Tuple[float, ...] = Field(..., description="Bus phase angle (rad), slack fixed to 0")
    line_flow: Tuple[float, ...] = Field(..., description="Flow from_bus -> to_bus per line (pu)")
    injection: Tuple[float, ...] = Field(..., description="Consumption P^D - P^G per bus (pu)")

    def flows(self) -> np.ndarray:
        return np.asarray(self.line_flow, dtype=float)


class LodfMatrix(BaseModel):
    """
    Line outage distribution factors.

    factors[i][k] is the share of line k's pre-outage flow picked up by line i
    when k trips. Columns of islanding outages hold NaN off the diagonal.
    """
    model_config = ConfigDict(frozen=True)

    factors: Tuple[Tuple[float, ...], ...]
    islanding: Tuple[bool, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.factors, dtype=float)

    def secure_outages(self) -> Tuple[int, ...]:
        """Line ids whose outage keeps the network connected."""
        return tuple(k + 1 for k, island in enumerate(self.islanding) if not island)

    def islanding_outages(self) -> Tuple[int, ...]:
        return tuple(k + 1 for k, island in enumerate(self.islanding) if island)
