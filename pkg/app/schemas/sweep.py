"""
Pydantic schemas for batch attack-space experiments.
"""

import re
from typing import Dict, Literal, NamedTuple, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

_POLICY = re.compile(r"^(none|random:\d+|analytical:\d+)$")


class SecuringPolicy(NamedTuple):
    """How measurements are secured before the attack-space count."""
    kind: Literal["none", "random", "analytical"]
    amount: int = 0

    @classmethod
    def parse(cls, text: str) -> "SecuringPolicy":
        """Parse ``none``, ``random:<measurements>`` or ``analytical:<buses>``."""
        if not _POLICY.match(text):
            raise ValueError(f"unknown securing policy '{text}'")
        if text == "none":
            return cls("none")
        kind, amount = text.split(":")
        return cls(kind, int(amount))

    def label(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.amount}"


class SweepSpec(BaseModel):
    """Parameter grid of an attack-space sweep; every combination is one cell."""
    model_config = ConfigDict(frozen=True)

    delta_b: Tuple[float, ...] = Field(..., description="Load change fractions")
    delta_l: Tuple[float, ...] = Field(..., description="Overload margins")
    line_fraction: Tuple[float, ...] = Field(..., description="Fractions of lines to overload")
    max_buses: Tuple[int, ...] = Field(..., description="T_B values")
    securing: Tuple[str, ...] = Field(("none",), description="Securing policies")
    seeds: Tuple[int, ...] = Field((0,), description="Seeds for randomized securing")

    @field_validator("delta_b", "delta_l", "line_fraction", "max_buses", "securing", "seeds")
    @classmethod
    def non_empty(cls, value: tuple) -> tuple:
        if not value:
            raise ValueError("grid must not be empty")
        return value

    @field_validator("delta_b", "delta_l", "line_fraction")
    @classmethod
    def fractions(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(v < 0 or v > 1 for v in value):
            raise ValueError("fractions must lie in [0, 1]")
        return value

    @field_validator("max_buses")
    @classmethod
    def bus_counts(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if any(v < 0 for v in value):
            raise ValueError("T_B must be >= 0")
        return value

    @field_validator("securing")
    @classmethod
    def policies(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        for text in value:
            SecuringPolicy.parse(text)
        return value


class SweepCell(BaseModel):
    """One grid point and its attack-space size."""
    model_config = ConfigDict(frozen=True)

    delta_b: float
    delta_l: float
    line_fraction: float
    max_buses: int
    policy: str = "none"
    seed: Optional[int] = Field(None, description="Seed used by a randomized policy")
    secured: Tuple[int, ...] = Field((), description="Measurement indices secured for this cell")
    attack_space: int = 0
    error: Optional[str] = Field(None, description="Why the cell could not be evaluated")


class SweepResult(BaseModel):
    """Cells in grid order plus the aggregates over all attack vectors found."""
    model_config = ConfigDict(frozen=True)

    cells: Tuple[SweepCell, ...]
    bus_frequency: Tuple[int, ...] = Field(..., description="Vectors compromising each bus")
    heatmaps: Dict[int, Tuple[Tuple[int, ...], ...]] = Field(
        default_factory=dict,
        description="Per T_B, counts [tripped k][overloaded i] over all vectors",
    )


class SecuringComparison(BaseModel):
    """Analytical against random securing at the same number of secured measurements."""
    model_config = ConfigDict(frozen=True)

    top_buses: int
    secured_count: int
    baseline: int
    analytical: int
    random_mean: float
    random_spaces: Tuple[int, ...]
