"""
Pydantic schemas for state estimation inputs and outputs.
"""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class MeasurementVector(BaseModel):
    """Readings of the taken measurements, in measurement index order."""
    model_config = ConfigDict(frozen=True)

    indices: Tuple[int, ...] = Field(..., description="1-based measurement indices")
    values: Tuple[float, ...] = Field(..., description="Measured value per index (pu)")

    @model_validator(mode="after")
    def check_lengths(self) -> "MeasurementVector":
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values differ in length")
        if list(self.indices) != sorted(set(self.indices)):
            raise ValueError("indices must be strictly increasing")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class EstimationResult(BaseModel):
    """Weighted least squares estimate and bad data verdict."""
    model_config = ConfigDict(frozen=True)

    x_hat: Tuple[float, ...] = Field(..., description="Estimated non-slack angles (rad)")
    residual_norm: float = Field(..., ge=0)
    tau: float = Field(..., ge=0, description="Detection threshold used")
    flagged: bool = Field(..., description="Residual exceeded the threshold")
    bad_measurement: Optional[int] = Field(
        None, description="Index with the largest absolute residual when flagged"
    )
