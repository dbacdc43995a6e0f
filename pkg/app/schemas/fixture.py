"""
Pydantic schemas describing bundled cases and where their numbers come from.
"""

from typing import Any, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field


class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    field: str
    source: Literal["published", "standard-dataset", "fitted"]
    note: str = ""


class Expectation(BaseModel):
    """A value the case is known to produce."""
    model_config = ConfigDict(frozen=True)

    name: str
    value: Any
    tolerance: float = 0.0
    kind: Literal["hard", "soft"] = Field(..., description="hard: asserted; soft: annotation only")


class FixtureManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    file: str
    description: str = ""
    provenance: Tuple[Provenance, ...] = ()
    expectations: Tuple[Expectation, ...] = ()

    def expected(self, name: str) -> Any:
        for expectation in self.expectations:
            if expectation.name == name:
                return expectation.value
        raise KeyError(name)
