"""
Pydantic models describing a static grid case.

A GridCase bundles:
- Buses with generator/load flags
- Lines with admittance and rated capacity (pu on a 100 MVA base)
- Generators with linear cost coefficients
- Loads with their rated bounds
- Measurement configuration (taken / secured / attacker-accessible)
- Attacker resource limits
"""

import math
from typing import Dict, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Bus(BaseModel):
    """A network node."""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=1, description="1-based bus number")
    is_generator: bool = Field(False, description="Bus hosts a generator")
    is_load: bool = Field(False, description="Bus hosts a load")


class Line(BaseModel):
    """A lossless transmission line oriented from_bus -> to_bus."""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=1, description="1-based line number")
    from_bus: int = Field(..., ge=1)
    to_bus: int = Field(..., ge=1)
    admittance: float = Field(..., gt=0, description="Reciprocal of line reactance (pu)")
    capacity: float = Field(..., gt=0, description="Rated flow limit (pu)")

    @model_validator(mode="after")
    def check_endpoints(self) -> "Line":
        if self.from_bus == self.to_bus:
            raise ValueError(f"line {self.id} starts and ends at bus {self.from_bus}")
        return self


class Generator(BaseModel):
    """A generator with cost alpha + beta * P while dispatched."""
    model_config = ConfigDict(frozen=True)

    bus: int = Field(..., ge=1)
    p_max: float = Field(..., ge=0, description="Maximum output (pu)")
    p_min: float = Field(..., ge=0, description="Minimum output while on (pu)")
    alpha: float = Field(..., ge=0, description="Fixed cost ($)")
    beta: float = Field(..., ge=0, description="Marginal cost ($/pu)")

    @model_validator(mode="after")
    def check_limits(self) -> "Generator":
        if self.p_min > self.p_max:
            raise ValueError(f"generator at bus {self.bus}: p_min exceeds p_max")
        return self


class LoadSpec(BaseModel):
    """Current load of a bus and its rated bounds."""
    model_config = ConfigDict(frozen=True)

    bus: int = Field(..., ge=1)
    current: float = Field(..., ge=0, description="Present consumption (pu)")
    p_max: float = Field(..., ge=0, description="Rated maximum (pu)")
    p_min: float = Field(..., ge=0, description="Rated minimum (pu)")

    @model_validator(mode="after")
    def check_bounds(self) -> "LoadSpec":
        if not (self.p_min <= self.current <= self.p_max):
            raise ValueError(
                f"load at bus {self.bus}: {self.current} outside [{self.p_min}, {self.p_max}]"
            )
        return self


class MeasurementConfig(BaseModel):
    """
    One meter. Indices 1..l are forward line flows, l+1..2l backward line
    flows and 2l+1..2l+b bus consumptions.
    """
    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=1)
    taken: bool = True
    secured: bool = False
    accessible: bool = True


class AttackerLimits(BaseModel):
    """Attacker resources and goal parameters carried by a case file."""
    model_config = ConfigDict(frozen=True)

    max_measurements: int = Field(..., ge=0, description="Altered measurement budget")
    max_buses: int = Field(..., ge=0, description="Compromised substation budget (T_B)")
    delta_b: float = Field(..., ge=0, le=1, description="Load change limit, fraction of load")
    delta_l: float = Field(..., ge=0, le=1, description="Overload margin, fraction of capacity")
    target_line_fraction: float = Field(..., ge=0, le=1, description="Fraction of lines to overload")
    cost_budget: Optional[float] = Field(
        None, ge=0, description="Dispatch cost budget ($); None means use the pre-attack optimum"
    )


class GridCase(BaseModel):
    """Full static description of a grid and its attacker model."""
    model_config = ConfigDict(frozen=True)

    buses: Tuple[Bus, ...]
    lines: Tuple[Line, ...]
    generators: Tuple[Generator, ...] = ()
    loads: Tuple[LoadSpec, ...] = ()
    measurements: Tuple[MeasurementConfig, ...]
    attacker_limits: AttackerLimits
    slack_bus: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_case(self) -> "GridCase":
        b = len(self.buses)
        l = len(self.lines)

        # Check ids are contiguous
        if [bus.id for bus in self.buses] != list(range(1, b + 1)):
            raise ValueError("bus ids must be contiguous 1..b in order")
        if [line.id for line in self.lines] != list(range(1, l + 1)):
            raise ValueError("line ids must be contiguous 1..l in order")
        if b < 2 or l < 1:
            raise ValueError("a case needs at least two buses and one line")

        def known(bus_id: int, what: str) -> None:
            if not 1 <= bus_id <= b:
                raise ValueError(f"{what} references unknown bus {bus_id}")

        for line in self.lines:
            known(line.from_bus, f"line {line.id}")
            known(line.to_bus, f"line {line.id}")
        known(self.slack_bus, "slack bus")

        gen_buses = [g.bus for g in self.generators]
        load_buses = [d.bus for d in self.loads]
        for bus_id in gen_buses:
            known(bus_id, "generator")
        for bus_id in load_buses:
            known(bus_id, "load")
        if len(set(gen_buses)) != len(gen_buses):
            raise ValueError("at most one generator per bus")
        if len(set(load_buses)) != len(load_buses):
            raise ValueError("at most one load record per bus")

        # Check bus flags agree with generator and load records
        for bus in self.buses:
            if bus.is_generator != (bus.id in gen_buses):
                raise ValueError(f"bus {bus.id}: generator flag disagrees with generator records")
            if bus.is_load != (bus.id in load_buses):
                raise ValueError(f"bus {bus.id}: load flag disagrees with load records")

        m = len(self.measurements)
        if m != 2 * l + b:
            raise ValueError(f"expected {2 * l + b} measurements (2l + b), found {m}")
        if [meas.index for meas in self.measurements] != list(range(1, m + 1)):
            raise ValueError("measurement indices must be contiguous 1..m in order")

        graph = nx.MultiGraph()
        graph.add_nodes_from(range(1, b + 1))
        graph.add_edges_from((line.from_bus, line.to_bus) for line in self.lines)
        if not nx.is_connected(graph):
            raise ValueError("line graph is disconnected")

        capacity = sum(g.p_max for g in self.generators)
        demand = sum(d.current for d in self.loads)
        if capacity < demand - 1e-9:
            raise ValueError(f"generation capacity {capacity} below total load {demand}")
        return self

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_measurements(self) -> int:
        return len(self.measurements)

    @property
    def target_overload_pairs(self) -> int:
        """T_L = ceil(fraction x l) over distinct (overloaded, tripped) pairs."""
        return math.ceil(round(self.attacker_limits.target_line_fraction * self.n_lines, 9))

    def generator_map(self) -> Dict[int, Generator]:
        return {g.bus: g for g in self.generators}

    def load_map(self) -> Dict[int, LoadSpec]:
        return {d.bus: d for d in self.loads}

    def load_vector(self) -> np.ndarray:
        """Current load per bus, position j-1 for bus j."""
        vector = np.zeros(self.n_buses)
        for load in self.loads:
            vector[load.bus - 1] = load.current
        return vector

    def measurement_bus(self, index: int) -> int:
        """Bus at which measurement ``index`` is metered."""
        l = self.n_lines
        if index <= l:
            return self.lines[index - 1].from_bus
        if index <= 2 * l:
            return self.lines[index - l - 1].to_bus
        return index - 2 * l

    def taken_mask(self) -> np.ndarray:
        return np.array([meas.taken for meas in self.measurements], dtype=bool)

    def alterable_mask(self) -> np.ndarray:
        """Measurements the attacker may change (accessible and not secured)."""
        return np.array(
            [meas.accessible and not meas.secured for meas in self.measurements], dtype=bool
        )
