"""
Stealthy false data injection attack synthesis against SCOPF.

The attacker shifts bus angle estimates by a vector in the column space of the
measurement Jacobian, so bad data detection keeps its residual. Shifted
estimates move the loads the control center believes in, the control center
re-dispatches within its cost budget, and the real system ends up with
post-contingency overloads.

Search layout:
- outer loop over compromised bus subsets H with |H| <= T_B
- each subset fixes which line flows and bus consumptions may change; the
  admissible angle shifts form a linear subspace, cached by that pattern
- per subspace, one mixed-integer feasibility problem decides generator
  commitment and which (line, outage) pairs get overloaded
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, FrozenSet, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.linalg import null_space

from app.config import get_settings
from app.schemas.attack import (
    AttackVector,
    OverloadPair,
    SearchCertificate,
    SynthesisGoal,
    SynthesisResult,
)
from app.schemas.dispatch import ScopfSolution
from app.schemas.grid import GridCase
from app.schemas.powerflow import LodfMatrix
from app.services.lodf import compute_lodf, contingency_flow_matrix
from app.services.lp_kernel import LinearProblem
from app.services.powerflow import (
    admittance_vector,
    build_b_matrix,
    incidence_matrix,
    laplacian,
    non_slack,
    ptdf_matrix,
)
from app.services.scopf import evaluate_cost, security_rows
from app.utils.errors import AttackInvariantError, GoalImpossibleError, InconsistentLimitsError

logger = logging.getLogger(__name__)

ALTERED_TOLERANCE = 1e-9
ZERO_SHIFT = 1e-10
MAX_POLISH_MARGIN = 1.0

# (allowed line changes, allowed bus changes)
Signature = Tuple[Tuple[bool, ...], Tuple[bool, ...]]
# (line id, outage id, sign of the overloading flow)
Anchor = Tuple[int, int, int]


def goal_from_case(case: GridCase, pre: ScopfSolution) -> SynthesisGoal:
    """Goal carried by the case file; a missing cost budget means the pre-attack cost."""
    limits = case.attacker_limits
    budget = pre.cost if limits.cost_budget is None else limits.cost_budget
    return SynthesisGoal(
        min_overload_pairs=max(1, case.target_overload_pairs),
        overload_margin=limits.delta_l,
        cost_budget=budget,
    )


def bus_subsets(n_buses: int, max_buses: int) -> Iterator[Tuple[int, ...]]:
    """All bus subsets of size <= max_buses, by size then lexicographically."""
    for size in range(0, min(max_buses, n_buses) + 1):
        yield from itertools.combinations(range(1, n_buses + 1), size)


def count_subsets(n_buses: int, max_buses: int) -> int:
    return sum(math.comb(n_buses, size) for size in range(0, min(max_buses, n_buses) + 1))


def true_overloads(
    case: GridCase, dispatch: np.ndarray, lodf: LodfMatrix, margin: float
) -> Tuple[OverloadPair, ...]:
    """Pairs overloaded beyond (1 + margin) * capacity with the real loads and ``dispatch``."""
    flows = ptdf_matrix(case) @ (dispatch - case.load_vector())
    post = contingency_flow_matrix(flows, lodf.as_array())
    capacity = np.array([line.capacity for line in case.lines])

    pairs = []
    for k in lodf.secure_outages():
        for i in range(1, case.n_lines + 1):
            flow = post[i - 1, k - 1]
            if i != k and abs(flow) > (1 + margin) * capacity[i - 1]:
                pairs.append(OverloadPair(
                    line=i, outage=k, flow=float(flow),
                    loading_percent=100.0 * abs(flow) / capacity[i - 1],
                ))
    pairs.sort(key=lambda p: (-p.loading_percent, p.outage, p.line))
    return tuple(pairs)


def build_vector(
    case: GridCase,
    delta_theta: np.ndarray,
    dispatch: np.ndarray,
    lodf: LodfMatrix,
    margin: float,
    explored: Sequence[int] = (),
    anchor: Optional[Anchor] = None,
) -> AttackVector:
    """
    Derive every field of an attack vector from its angle shift and dispatch.

    Shifts below numerical noise are zeroed; the last dispatched generator
    absorbs any balance round-off.
    """
    delta_theta = np.array(delta_theta, dtype=float)
    delta_theta[np.abs(delta_theta) <= ZERO_SHIFT] = 0.0
    delta_line = admittance_vector(case) * (incidence_matrix(case) @ delta_theta)
    delta_line[np.abs(delta_line) <= ZERO_SHIFT] = 0.0
    delta_bus = -laplacian(case) @ delta_theta
    delta_bus[np.abs(delta_bus) <= ZERO_SHIFT] = 0.0

    line_changed = np.abs(delta_line) > ALTERED_TOLERANCE
    changed = np.concatenate([line_changed, line_changed, np.abs(delta_bus) > ALTERED_TOLERANCE])
    altered = changed & case.taken_mask()
    compromised = np.zeros(case.n_buses, dtype=bool)
    for index in np.flatnonzero(altered) + 1:
        compromised[case.measurement_bus(int(index)) - 1] = True

    loads = case.load_vector()
    dispatch = np.array(dispatch, dtype=float)
    on = np.flatnonzero(dispatch > 0)
    if len(on):
        dispatch[on[-1]] += loads.sum() - dispatch.sum()

    return AttackVector(
        delta_theta=tuple(delta_theta.tolist()),
        delta_line=tuple(delta_line.tolist()),
        delta_bus=tuple(delta_bus.tolist()),
        altered=tuple(bool(v) for v in altered),
        corrupted=tuple(bool(v) for v in delta_theta != 0.0),
        compromised=tuple(bool(v) for v in compromised),
        attacked_load=tuple((loads + delta_bus).tolist()),
        corrupted_dispatch=tuple(dispatch.tolist()),
        corrupted_cost=evaluate_cost(case, dispatch),
        overload_pairs=true_overloads(case, dispatch, lodf, margin),
        explored_buses=tuple(explored),
        anchor=anchor,
    )


def vector_from_load_shift(
    case: GridCase,
    delta_load: Sequence[float],
    dispatch: Sequence[float],
    lodf: Optional[LodfMatrix] = None,
    margin: Optional[float] = None,
) -> AttackVector:
    """
    The stealthy vector that makes the control center see ``load + delta_load``.

    Any balanced load shift is reachable: the angle shift solves the reduced
    susceptance system for the shifted consumptions.

    Raises:
        AttackInvariantError: The shift does not sum to zero
    """
    delta_load = np.asarray(delta_load, dtype=float)
    if abs(delta_load.sum()) > 1e-8:
        raise AttackInvariantError("load shifts must sum to zero")

    keep = non_slack(case)
    delta_theta = np.zeros(case.n_buses)
    delta_theta[keep] = np.linalg.solve(build_b_matrix(case), -delta_load[keep])
    return build_vector(
        case,
        delta_theta,
        np.asarray(dispatch, dtype=float),
        compute_lodf(case) if lodf is None else lodf,
        case.attacker_limits.delta_l if margin is None else margin,
        explored=tuple(int(j) + 1 for j in np.flatnonzero(np.abs(delta_load) > ALTERED_TOLERANCE)),
    )


class Subspace:
    """Admissible angle shifts delta_theta = basis @ w and their linear images."""

    def __init__(self, model: "AttackModel", basis: np.ndarray):
        self.basis = basis
        self.dim = basis.shape[1]
        self.flow_shift = model.flow_map @ basis
        self.bus_shift = -model.lap @ basis
        # True minus expected flows for a given w
        self.flow_gap = model.ptdf @ self.bus_shift
        self.w_bounds = self._w_bounds(model)

    def _box(self, model: "AttackModel") -> LinearProblem:
        problem = LinearProblem(self.dim)
        self.add_load_rows(model, problem, 0)
        return problem

    def _w_bounds(self, model: "AttackModel") -> np.ndarray:
        bounds = np.zeros((self.dim, 2))
        box = self._box(model)
        for q in range(self.dim):
            for side, sign in ((0, 1.0), (1, -1.0)):
                objective = np.zeros(self.dim)
                objective[q] = sign
                box.set_objective(objective)
                result = box.solve()
                bounds[q, side] = sign * result.objective if result.feasible else 0.0
        return bounds

    def max_along(self, row: np.ndarray, sign: float = 1.0) -> float:
        """Upper bound of sign * row @ w over the box enclosing the admissible w."""
        low, high = self.w_bounds[:, 0], self.w_bounds[:, 1]
        scaled = sign * row
        return float(np.sum(np.maximum(scaled * low, scaled * high)))

    def add_load_rows(self, model: "AttackModel", problem: LinearProblem, offset: int) -> None:
        """Load shifts within delta_b of the current load and within the rated bounds."""
        columns = slice(offset, offset + self.dim)
        for j in range(model.case.n_buses):
            row = np.zeros(problem.n_vars)
            row[columns] = self.bus_shift[j]
            if not np.any(np.abs(self.bus_shift[j]) > ZERO_SHIFT):
                continue
            problem.add_abs_le(row, 0.0, model.delta_b * model.loads[j])
            spec = model.load_specs.get(j + 1)
            if spec is not None:
                problem.add_le(row, spec.p_max - model.loads[j])
                problem.add_ge(row, spec.p_min - model.loads[j])


class _Layout(NamedTuple):
    n_vars: int
    w: slice
    power: slice
    on: slice
    over_pos: slice
    over_neg: slice
    altered: slice
    margin: Optional[int]


class _Witness(NamedTuple):
    delta_theta: np.ndarray
    dispatch: np.ndarray


class SignatureOutcome(NamedTuple):
    """What solving one signature established, in a form a worker process can return."""
    spanning: bool
    solves: int
    witness: Optional[_Witness]
    anchors: Optional[Dict[Anchor, _Witness]]


class AttackModel:
    """
    Data shared by every bus subset of one search.

    Raises:
        GoalImpossibleError: T_L exceeds the number of non-islanding pairs
        InconsistentLimitsError: No measurement may be altered but T_L >= 1
    """

    def __init__(
        self,
        case: GridCase,
        pre: ScopfSolution,
        goal: Optional[SynthesisGoal] = None,
        lodf: Optional[LodfMatrix] = None,
    ):
        settings = get_settings()
        self.case = case
        self.pre = pre
        self.goal = goal or goal_from_case(case, pre)
        self.lodf = compute_lodf(case) if lodf is None else lodf
        self.limits = case.attacker_limits
        self.delta_b = self.limits.delta_b
        self.epsilon = settings.overload_epsilon

        self.factors = self.lodf.as_array()
        self.ptdf = ptdf_matrix(case)
        self.flow_map = admittance_vector(case)[:, None] * incidence_matrix(case)
        self.lap = laplacian(case)
        self.keep = non_slack(case)
        self.loads = case.load_vector()
        self.load_specs = case.load_map()
        self.generators = sorted(case.generators, key=lambda g: g.bus)
        self.gen_columns = [g.bus - 1 for g in self.generators]
        self.capacity = np.array([line.capacity for line in case.lines])
        self.taken = case.taken_mask()
        self.alterable = case.alterable_mask()

        l = case.n_lines
        self.pairs = [
            (i, k) for k in self.lodf.secure_outages() for i in range(1, l + 1) if i != k
        ]
        if self.goal.min_overload_pairs > len(self.pairs):
            raise GoalImpossibleError(
                f"goal needs {self.goal.min_overload_pairs} overload pairs but only "
                f"{len(self.pairs)} non-islanding pairs exist"
            )
        if self.limits.max_measurements == 0:
            raise InconsistentLimitsError(
                "attacker may alter no measurement but the goal needs an overload"
            )

        self.threshold = (1 + self.goal.overload_margin) * self.capacity + self.epsilon
        # True flows as affine functions of the generator outputs
        self.true_coef = self.ptdf[:, self.gen_columns]
        self.true_const = -self.ptdf @ self.loads

        self._subspaces: Dict[Signature, Optional[Subspace]] = {}
        self._verdicts: Dict[Signature, Optional[_Witness]] = {}
        self._anchors: Dict[Signature, Dict[Anchor, _Witness]] = {}
        self._spanning: Set[Signature] = set()
        self.solves = 0

    # Subset structure

    def signature(self, buses: Sequence[int]) -> Signature:
        """Which line flows and bus consumptions may change when ``buses`` are compromised."""
        chosen: FrozenSet[int] = frozenset(buses)
        l = self.case.n_lines

        def may_alter(index: int, bus: int) -> bool:
            if not self.taken[index]:
                return True
            return bus in chosen and bool(self.alterable[index])

        lines = tuple(
            may_alter(i, line.from_bus) and may_alter(l + i, line.to_bus)
            for i, line in enumerate(self.case.lines)
        )
        buses_allowed = tuple(
            self.delta_b > 0
            and self.loads[j] > 0
            and may_alter(2 * l + j, j + 1)
            for j in range(self.case.n_buses)
        )
        return lines, buses_allowed

    def subspace(self, signature: Signature) -> Optional[Subspace]:
        """Admissible angle shifts for a signature, or None when only zero is admissible."""
        if signature not in self._subspaces:
            lines, buses = signature
            rows = [self.flow_map[i] for i, ok in enumerate(lines) if not ok]
            rows += [self.lap[j] for j, ok in enumerate(buses) if not ok]
            constraints = np.array(rows)[:, self.keep] if rows else np.zeros((0, len(self.keep)))

            basis = null_space(constraints) if len(rows) else np.eye(len(self.keep))
            found = None
            if basis.shape[1] > 0:
                full = np.zeros((self.case.n_buses, basis.shape[1]))
                full[self.keep] = basis
                found = Subspace(self, full)
                self._spanning.add(signature)
                logger.debug("Subspace of dimension %d", found.dim)
            self._subspaces[signature] = found
        return self._subspaces[signature]

    # Feasibility problems

    def _candidates(self, subspace: Subspace) -> List[Tuple[int, int, Tuple[bool, bool]]]:
        """Pairs whose true flow can exceed its expected flow by the overload margin."""
        found = []
        for i, k in self.pairs:
            factor = self.factors[i - 1, k - 1]
            gap = subspace.flow_gap[i - 1] + factor * subspace.flow_gap[k - 1]
            need = self.goal.overload_margin * self.capacity[i - 1] + self.epsilon
            signs = (subspace.max_along(gap, 1.0) >= need, subspace.max_along(gap, -1.0) >= need)
            if any(signs):
                found.append((i, k, signs))
        return found

    def _measurement_rows(self, subspace: Subspace) -> List[np.ndarray]:
        """Rows (over w) of taken measurements the subspace can move."""
        rows = []
        l = self.case.n_lines
        for i in range(l):
            for index in (i, l + i):
                if self.taken[index] and np.any(np.abs(subspace.flow_shift[i]) > ZERO_SHIFT):
                    rows.append(subspace.flow_shift[i])
        for j in range(self.case.n_buses):
            if self.taken[2 * l + j] and np.any(np.abs(subspace.bus_shift[j]) > ZERO_SHIFT):
                rows.append(subspace.bus_shift[j])
        return rows

    def _layout(self, subspace: Subspace, n_pairs: int, n_altered: int, polish: bool) -> _Layout:
        r = subspace.dim
        g = len(self.generators)
        start = 0

        def take(size: int) -> slice:
            nonlocal start
            block = slice(start, start + size)
            start += size
            return block

        w, power, on = take(r), take(g), take(g)
        over_pos, over_neg = take(n_pairs), take(n_pairs)
        altered = take(n_altered)
        margin = take(1).start if polish else None
        return _Layout(start, w, power, on, over_pos, over_neg, altered, margin)

    def _base_problem(self, subspace: Subspace, layout: _Layout) -> LinearProblem:
        problem = LinearProblem(layout.n_vars)
        subspace.add_load_rows(self, problem, layout.w.start)

        # Balance and generator limits
        balance = np.zeros(layout.n_vars)
        balance[layout.power] = 1.0
        problem.add_eq(balance, self.loads.sum())
        for j, generator in enumerate(self.generators):
            p, u = layout.power.start + j, layout.on.start + j
            problem.set_bounds(p, 0.0, generator.p_max)
            problem.set_binary(u)
            row = np.zeros(layout.n_vars)
            row[p], row[u] = 1.0, -generator.p_max
            problem.add_le(row, 0.0)
            row = np.zeros(layout.n_vars)
            row[p], row[u] = -1.0, generator.p_min
            problem.add_le(row, 0.0)

        # Control center view: attacked loads must look N-1 secure
        expected = np.zeros((self.case.n_lines, layout.n_vars))
        expected[:, layout.w] = -subspace.flow_gap
        expected[:, layout.power] = self.true_coef
        rows, constants, labels = security_rows(expected, self.true_const, self.lodf)
        problem.add_abs_le(rows, constants, self.capacity[[line - 1 for line, _ in labels]])

        # Real system: no base-case violation
        actual = np.zeros((self.case.n_lines, layout.n_vars))
        actual[:, layout.power] = self.true_coef
        problem.add_abs_le(actual, self.true_const, self.capacity)

        cost = np.zeros(layout.n_vars)
        cost[layout.power] = [g.beta for g in self.generators]
        cost[layout.on] = [g.alpha for g in self.generators]
        problem.add_le(cost, self.goal.cost_budget)
        return problem

    def _pair_row(self, i: int, k: int, n_vars: int, power: slice) -> Tuple[np.ndarray, float]:
        """Real post-contingency flow on line i after outage k as row @ x + constant."""
        factor = self.factors[i - 1, k - 1]
        row = np.zeros(n_vars)
        row[power] = self.true_coef[i - 1] + factor * self.true_coef[k - 1]
        return row, self.true_const[i - 1] + factor * self.true_const[k - 1]

    def _search_problem(
        self,
        subspace: Subspace,
        candidates: List[Tuple[int, int, Tuple[bool, bool]]],
        anchor: Optional[Anchor],
    ) -> Tuple[LinearProblem, _Layout, List[np.ndarray]]:
        measurement_rows = self._measurement_rows(subspace)
        capped = len(measurement_rows) > self.limits.max_measurements
        layout = self._layout(
            subspace, len(candidates), len(measurement_rows) if capped else 0, polish=False
        )
        problem = self._base_problem(subspace, layout)

        selected = np.zeros(layout.n_vars)
        for n, (i, k, signs) in enumerate(candidates):
            row, constant = self._pair_row(i, k, layout.n_vars, layout.power)
            threshold = self.threshold[i - 1]
            big_m = threshold + self.capacity[i - 1] + abs(self.factors[i - 1, k - 1]) * self.capacity[k - 1]
            pos, neg = layout.over_pos.start + n, layout.over_neg.start + n
            problem.set_binary(pos)
            problem.set_binary(neg)

            # o+ = 1 forces flow >= threshold, o- = 1 forces flow <= -threshold
            indicator = -row.copy()
            indicator[pos] = big_m
            problem.add_le(indicator, big_m - threshold + constant)
            indicator = row.copy()
            indicator[neg] = big_m
            problem.add_le(indicator, big_m - threshold - constant)

            either = np.zeros(layout.n_vars)
            either[pos] = either[neg] = 1.0
            problem.add_le(either, 1.0)
            if not signs[0]:
                problem.set_bounds(pos, 0.0, 0.0)
            if not signs[1]:
                problem.set_bounds(neg, 0.0, 0.0)
            selected[pos] = selected[neg] = 1.0

            if anchor is not None and (i, k) == anchor[:2]:
                problem.set_bounds(pos if anchor[2] > 0 else neg, 1.0, 1.0)
        problem.add_ge(selected, self.goal.min_overload_pairs)

        if capped:
            count = np.zeros(layout.n_vars)
            for n, meas_row in enumerate(measurement_rows):
                flag = layout.altered.start + n
                problem.set_binary(flag)
                big_m = subspace.max_along(np.abs(meas_row)) + 1.0
                for sign in (1.0, -1.0):
                    row = np.zeros(layout.n_vars)
                    row[layout.w] = sign * meas_row
                    row[flag] = -big_m
                    problem.add_le(row, 0.0)
                count[flag] = 1.0
            problem.add_le(count, self.limits.max_measurements)
        return problem, layout, measurement_rows

    def _polish(
        self,
        subspace: Subspace,
        targets: List[Tuple[int, int, int]],
        committed: np.ndarray,
    ) -> Optional[_Witness]:
        """Re-solve with the combinatorial choices fixed, maximizing the smallest overload."""
        layout = self._layout(subspace, 0, 0, polish=True)
        problem = self._base_problem(subspace, layout)
        problem.integrality[:] = 0
        for j, on in enumerate(committed):
            u = layout.on.start + j
            problem.set_bounds(u, float(on), float(on))
            if not on:
                problem.set_bounds(layout.power.start + j, 0.0, 0.0)

        problem.set_bounds(layout.margin, 0.0, MAX_POLISH_MARGIN)
        for i, k, sign in targets:
            row, constant = self._pair_row(i, k, layout.n_vars, layout.power)
            row = sign * row
            row[layout.margin] = -1.0
            problem.add_ge(row, self.threshold[i - 1] - sign * constant)

        objective = np.zeros(layout.n_vars)
        objective[layout.margin] = -1.0
        problem.set_objective(objective)
        result = problem.solve()
        if not result.feasible:
            return None
        return _Witness(
            subspace.basis @ result.x[layout.w], self._dispatch(result.x[layout.power], committed)
        )

    def _dispatch(self, power: np.ndarray, committed: np.ndarray) -> np.ndarray:
        dispatch = np.zeros(self.case.n_buses)
        for j, generator in enumerate(self.generators):
            dispatch[generator.bus - 1] = power[j] if committed[j] else 0.0
        dispatch[np.abs(dispatch) <= ALTERED_TOLERANCE] = 0.0
        return dispatch

    def _solve(self, subspace: Subspace, anchor: Optional[Anchor] = None) -> Optional[_Witness]:
        candidates = self._candidates(subspace)
        if anchor is not None:
            candidates = [
                c for c in candidates
                if c[:2] != anchor[:2] or c[2][0 if anchor[2] > 0 else 1]
            ]
            if not any(c[:2] == anchor[:2] for c in candidates):
                return None
        if len(candidates) < self.goal.min_overload_pairs:
            return None

        problem, layout, measurement_rows = self._search_problem(subspace, candidates, anchor)
        self.solves += 1
        result = problem.solve()
        if not result.feasible:
            return None

        x = result.x
        committed = np.round(x[layout.on]).astype(bool)
        targets = []
        for n, (i, k, _) in enumerate(candidates):
            if x[layout.over_pos.start + n] > 0.5:
                targets.append((i, k, 1))
            elif x[layout.over_neg.start + n] > 0.5:
                targets.append((i, k, -1))

        # Measurements the solution left untouched stay exactly zero
        polish_space = subspace
        if layout.altered.stop > layout.altered.start:
            untouched = [
                row for n, row in enumerate(measurement_rows)
                if x[layout.altered.start + n] < 0.5
            ]
            if untouched:
                reduced = null_space(np.array(untouched))
                polish_space = Subspace(self, subspace.basis @ reduced)

        witness = self._polish(polish_space, targets, committed)
        if witness is None:
            logger.debug("Polishing failed; keeping the raw mixed-integer solution")
            witness = _Witness(subspace.basis @ x[layout.w], self._dispatch(x[layout.power], committed))
        return witness

    def solve_signature(self, signature: Signature) -> Optional[_Witness]:
        """Any feasible attack for a signature (cached)."""
        if signature not in self._verdicts:
            subspace = self.subspace(signature)
            self._verdicts[signature] = None if subspace is None else self._solve(subspace)
        return self._verdicts[signature]

    def feasible_anchors(self, signature: Signature) -> Dict[Anchor, _Witness]:
        """Every (pair, sign) some feasible attack of this signature overloads (cached)."""
        if signature in self._anchors:
            return self._anchors[signature]

        known: Dict[Anchor, _Witness] = {}
        witness = self.solve_signature(signature)
        if witness is not None:
            subspace = self.subspace(signature)
            self._record(known, witness)
            for i, k, signs in self._candidates(subspace):
                for sign, possible in ((1, signs[0]), (-1, signs[1])):
                    anchor = (i, k, sign)
                    if not possible or anchor in known:
                        continue
                    found = self._solve(subspace, anchor)
                    if found is not None:
                        self._record(known, found)
                        known.setdefault(anchor, found)

        self._anchors[signature] = dict(sorted(known.items()))
        return self._anchors[signature]

    def knows(self, signature: Signature, with_anchors: bool = False) -> bool:
        if with_anchors:
            return signature in self._anchors
        return signature in self._verdicts

    def outcome(self, signature: Signature) -> SignatureOutcome:
        return SignatureOutcome(
            spanning=signature in self._spanning,
            solves=self.solves,
            witness=self._verdicts.get(signature),
            anchors=self._anchors.get(signature),
        )

    def absorb(self, signature: Signature, outcome: SignatureOutcome) -> None:
        """Take over what a worker process established for ``signature``."""
        if outcome.spanning:
            self._spanning.add(signature)
        self.solves += outcome.solves
        self._verdicts[signature] = outcome.witness
        if outcome.anchors is not None:
            self._anchors[signature] = outcome.anchors

    def _record(self, known: Dict[Anchor, _Witness], witness: _Witness) -> None:
        post = self.true_post_flows(witness.dispatch)
        margin = np.abs(post) - self.threshold[:, None]
        overloaded = [(i, k) for i, k in self.pairs if margin[i - 1, k - 1] >= -1e-9]
        if len(overloaded) < self.goal.min_overload_pairs:
            return
        for i, k in overloaded:
            known.setdefault((i, k, 1 if post[i - 1, k - 1] > 0 else -1), witness)

    # Reporting

    def true_post_flows(self, dispatch: np.ndarray) -> np.ndarray:
        flows = self.ptdf @ (dispatch - self.loads)
        return contingency_flow_matrix(flows, self.factors)

    def to_vector(
        self,
        witness: _Witness,
        explored: Sequence[int],
        anchor: Optional[Anchor] = None,
    ) -> AttackVector:
        """Expand a witness into a full AttackVector."""
        return build_vector(
            self.case,
            witness.delta_theta,
            witness.dispatch,
            self.lodf,
            self.goal.overload_margin,
            explored=explored,
            anchor=anchor,
        )

    def certificate(self, explored: int) -> SearchCertificate:
        return SearchCertificate(
            max_buses=self.limits.max_buses,
            subsets_explored=explored,
            subsets_total=count_subsets(self.case.n_buses, self.limits.max_buses),
            subspaces=len(self._spanning),
            feasibility_solves=self.solves,
        )


class SignatureJob(NamedTuple):
    case: GridCase
    pre: ScopfSolution
    goal: SynthesisGoal
    lodf: LodfMatrix
    signature: Signature
    with_anchors: bool


def explore_signature(job: SignatureJob) -> SignatureOutcome:
    """Worker entry point: solve one signature on a fresh model."""
    model = AttackModel(job.case, job.pre, job.goal, job.lodf)
    model.solve_signature(job.signature)
    if job.with_anchors:
        model.feasible_anchors(job.signature)
    return model.outcome(job.signature)


def _walk(
    model: AttackModel, workers: int, with_anchors: bool
) -> Iterator[Tuple[Tuple[int, ...], Signature]]:
    """
    Bus subsets in search order, each with its signature.

    With more than one worker the distinct signatures are solved ahead on a
    process pool, and each outcome is absorbed into the model before the first
    subset that needs it is yielded.
    """
    subsets = list(bus_subsets(model.case.n_buses, model.limits.max_buses))
    signatures = [model.signature(buses) for buses in subsets]
    if workers <= 1:
        yield from zip(subsets, signatures)
        return

    distinct = list(dict.fromkeys(signatures))
    logger.info("Solving %d distinct signatures on %d workers", len(distinct), workers)
    jobs = [
        SignatureJob(model.case, model.pre, model.goal, model.lodf, signature, with_anchors)
        for signature in distinct
    ]
    pool = ProcessPoolExecutor(max_workers=workers)
    try:
        outcomes = zip(distinct, pool.map(explore_signature, jobs))
        for buses, signature in zip(subsets, signatures):
            while not model.knows(signature, with_anchors):
                model.absorb(*next(outcomes))
            yield buses, signature
    finally:
        pool.shutdown(wait=True, cancel_futures=True)


def synthesize(
    case: GridCase,
    pre: ScopfSolution,
    goal: Optional[SynthesisGoal] = None,
    lodf: Optional[LodfMatrix] = None,
    workers: Optional[int] = None,
) -> SynthesisResult:
    """
    Search for one stealthy attack meeting the goal.

    Bus subsets are tried by size then lexicographically, so the first hit
    uses the fewest compromised buses.

    Args:
        case: Grid case with measurement configuration and attacker limits
        pre: Attack-free SCOPF solution
        goal: Overload goal; derived from the case file when omitted
        lodf: Precomputed factors for the case topology
        workers: Process count for the subset loop; settings default when omitted

    Returns:
        SynthesisResult with the attack on "sat", or an exhaustive certificate on "unsat"
    """
    model = AttackModel(case, pre, goal, lodf)
    total = count_subsets(case.n_buses, model.limits.max_buses)
    logger.info(
        "Searching %d bus subsets (T_B=%d, delta_b=%.2f, T_L=%d)",
        total, model.limits.max_buses, model.delta_b, model.goal.min_overload_pairs,
    )

    explored = 0
    for buses, signature in _walk(model, workers or get_settings().workers, with_anchors=False):
        explored += 1
        witness = model.solve_signature(signature)
        if witness is not None:
            attack = model.to_vector(witness, buses)
            logger.info("Attack found compromising buses %s", list(attack.compromised_buses()))
            return SynthesisResult(verdict="sat", attack=attack, certificate=model.certificate(explored))

    logger.info("No attack exists; %d subsets explored", explored)
    return SynthesisResult(verdict="unsat", certificate=model.certificate(explored))


def _targets(
    model: AttackModel, workers: int
) -> Iterator[Tuple[Tuple[int, ...], Anchor, AttackVector]]:
    expanded: Dict[Tuple[Signature, Anchor], AttackVector] = {}
    for buses, signature in _walk(model, workers, with_anchors=True):
        for anchor, witness in model.feasible_anchors(signature).items():
            key = (signature, anchor)
            if key not in expanded:
                expanded[key] = model.to_vector(witness, buses, anchor)
            yield buses, anchor, expanded[key]


def feasible_targets(
    case: GridCase,
    pre: ScopfSolution,
    goal: Optional[SynthesisGoal] = None,
    lodf: Optional[LodfMatrix] = None,
    workers: Optional[int] = None,
) -> List[Tuple[Tuple[int, ...], Anchor]]:
    """Every (bus subset, anchored overload pair and sign) some stealthy attack achieves."""
    model = AttackModel(case, pre, goal, lodf)
    return [(buses, anchor) for buses, anchor, _ in _targets(model, workers or get_settings().workers)]


def enumerate_attack_space(
    case: GridCase,
    pre: ScopfSolution,
    goal: Optional[SynthesisGoal] = None,
    lodf: Optional[LodfMatrix] = None,
    workers: Optional[int] = None,
) -> List[AttackVector]:
    """
    Distinct attacks over every feasible (bus subset, anchored overload pair, sign).

    Each vector overloads its anchor pair and at least T_L pairs in total.
    Vectors sharing a compromised-bus set and an overload-pair set count
    once; the first in search order is kept.

    Returns:
        Vectors sorted by bus subset then anchor; empty when no attack exists
    """
    model = AttackModel(case, pre, goal, lodf)
    vectors: List[AttackVector] = []
    seen: Set[Tuple[Tuple[int, ...], Tuple[Tuple[int, int], ...]]] = set()

    for buses, anchor, vector in _targets(model, workers or get_settings().workers):
        key = (vector.compromised_buses(), tuple(sorted(vector.overload_set())))
        if key in seen:
            continue
        seen.add(key)
        vectors.append(vector.model_copy(update={"explored_buses": buses, "anchor": anchor}))

    logger.info("Attack space holds %d vectors", len(vectors))
    return vectors
