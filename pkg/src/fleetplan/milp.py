"""Exact strategy optimization for a fixed assignment, plus LP-format export.

The internal solver enumerates, per robot, one collaborative state per level
of its layered automaton (initial and accepting endpoints are then forced to
their cheapest edges), evaluates joint choices with the shared cost fold, and
prunes with the ideal-completion lower bound.  The same model is exportable
as LP text with the flow/arrival/delay constraints for external solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .alloc import Assignment
from .errors import BudgetExceeded, LevelDisconnected
from .mission import Mission, Occurrence
from .product import PrunedPa, State, Strategy
from .schedule import CostReport, Timeline, compute_time_cost

DEFAULT_COMBINATION_CAP = 10_000_000


@dataclass
class RobotChoice:
    """One robot's collaborative-state tuple with its induced ideal timeline."""

    collab_states: Tuple[State, ...]
    init_state: State
    accept_state: State
    timeline: Timeline

    def full_choice(self) -> List[State]:
        return [self.init_state, *self.collab_states, self.accept_state]


def enumerate_robot_choices(pruned: PrunedPa) -> List[RobotChoice]:
    """All per-level collaborative placements with their cheapest endpoints."""
    robot = pruned.pa.wts.robot_id
    inner_levels = pruned.levels[1:-1]
    choices: List[RobotChoice] = []
    for combo in iter_product(*inner_levels) if inner_levels else [()]:
        # cheapest initial edge into the first inner state (or straight to accepting)
        first_target = combo[0] if combo else None
        best_init = None
        for init in pruned.levels[0]:
            target = first_target if first_target is not None else None
            if target is None:
                cost = pruned.suffix_cost(0, init)
                if cost is None:
                    continue
                cand = (0.0, init)
            else:
                w = pruned.edge_weight(0, init, target)
                if w is None:
                    continue
                cand = (w, init)
            if best_init is None or cand < best_init:
                best_init = cand
        if best_init is None:
            continue
        arrivals: Dict[Occurrence, float] = {}
        total = best_init[0]
        feasible = True
        for li in range(len(combo)):
            if li > 0:
                w = pruned.edge_weight(li, combo[li - 1], combo[li])
                if w is None:
                    feasible = False
                    break
                total += w
            arrivals[pruned.assigned[li][0]] = total
        if not feasible:
            continue
        last_level = len(pruned.levels) - 2
        last_state = combo[-1] if combo else best_init[1]
        best_acc = None
        for acc in pruned.levels[-1]:
            w = pruned.edge_weight(last_level, last_state, acc)
            if w is not None:
                cand = (w, acc)
                if best_acc is None or cand < best_acc:
                    best_acc = cand
        if best_acc is None:
            continue
        completion = total + best_acc[0]
        timeline = Timeline(robot, arrivals, completion)
        choices.append(RobotChoice(tuple(combo), best_init[1], best_acc[1], timeline))
    if not choices:
        raise LevelDisconnected(f"robot {robot}: no feasible level placement")
    return choices


@dataclass
class ExactResult:
    objective: float
    report: CostReport
    choices: Dict[int, RobotChoice]
    strategies: Dict[int, Strategy]
    explored: int


def solve_exact(pruned_map: Mapping[int, PrunedPa], mission: Mission,
                assignment: Assignment,
                combination_cap: int = DEFAULT_COMBINATION_CAP) -> ExactResult:
    """Optimal total time cost over all joint collaborative placements.

    Depth-first over robots with branch-and-bound: a partial tuple is pruned
    when its ideal completions (a valid lower bound on the synchronized
    total) cannot beat the incumbent.
    """
    robots = sorted(pruned_map)
    per_robot = {r: enumerate_robot_choices(pruned_map[r]) for r in robots}
    count = 1
    for r in robots:
        count *= len(per_robot[r])
        if count > combination_cap:
            raise BudgetExceeded(
                f"joint choice count exceeds cap ({combination_cap})")
    min_completion = {
        r: min(c.timeline.completion for c in per_robot[r]) for r in robots
    }
    best: Optional[Tuple[float, Dict[int, RobotChoice], CostReport]] = None
    explored = 0
    stack_choice: Dict[int, RobotChoice] = {}

    def dfs(idx: int, partial_sum: float):
        nonlocal best, explored
        bound = partial_sum + sum(min_completion[r] for r in robots[idx:])
        if best is not None and bound >= best[0]:
            return
        if idx == len(robots):
            explored += 1
            timelines = {r: stack_choice[r].timeline for r in robots}
            report = compute_time_cost(timelines, mission, assignment)
            if best is None or report.total < best[0]:
                best = (report.total, dict(stack_choice), report)
            return
        r = robots[idx]
        for choice in per_robot[r]:
            stack_choice[r] = choice
            dfs(idx + 1, partial_sum + choice.timeline.completion)
        del stack_choice[r]

    dfs(0, 0.0)
    if best is None:
        raise LevelDisconnected("no joint feasible placement")
    objective, choices, report = best
    strategies = {
        r: pruned_map[r].expand(choices[r].full_choice()) for r in robots
    }
    return ExactResult(objective, report, choices, strategies, explored)


# ---------------------------------------------------------------------------
# LP model construction and emission
# ---------------------------------------------------------------------------


@dataclass
class Row:
    name: str
    terms: Tuple[Tuple[float, str], ...]
    sense: str  # "=", "<=", ">="
    rhs: float


@dataclass
class MilpModel:
    """Linear model over edge-selection, arrival, delay, and latest-arrival variables."""

    objective: Tuple[Tuple[float, str], ...]
    rows: List[Row]
    binaries: Tuple[str, ...]
    continuous: Tuple[str, ...]
    big_m: Mapping[int, float]

    def variable_names(self) -> Tuple[str, ...]:
        return tuple(self.binaries) + tuple(self.continuous)


def _state_index(pruned: PrunedPa) -> Dict[State, int]:
    states: List[State] = []
    seen = set()
    for level in pruned.levels:
        for s in level:
            if s not in seen:
                seen.add(s)
                states.append(s)
    return {s: i for i, s in enumerate(states)}


def build_milp(pruned_map: Mapping[int, PrunedPa], mission: Mission,
               assignment: Assignment) -> MilpModel:
    """Assemble the flow + timing model for the given assignment."""
    rows: List[Row] = []
    objective: List[Tuple[float, str]] = []
    binaries: List[str] = []
    continuous: List[str] = []
    big_m: Dict[int, float] = {}
    z_names: Dict[Occurrence, str] = {}
    for occ in mission.sorted_occurrences:
        k, l = occ
        name = f"z_{k}_{l}"
        z_names[occ] = name
        continuous.append(name)

    for r in sorted(pruned_map):
        pruned = pruned_map[r]
        index = _state_index(pruned)
        edges = sorted(pruned.edges.items())
        big_m[r] = sum(w for (_li, _a, _b), (w, _wit) in edges) or 1.0
        m_val = big_m[r]

        def yname(a: State, b: State) -> str:
            return f"y_{r}_{index[a]}_{index[b]}"

        for (_li, a, b), (_w, _wit) in edges:
            binaries.append(yname(a, b))

        out_of: Dict[Tuple[int, State], List[Tuple[State, float]]] = {}
        into: Dict[Tuple[int, State], List[Tuple[State, float]]] = {}
        for (li, a, b), (w, _wit) in edges:
            out_of.setdefault((li, a), []).append((b, w))
            into.setdefault((li + 1, b), []).append((a, w))

        # unit out-flow from the initial level, unit in-flow to the accepting level
        init_terms = [(1.0, yname(a, b))
                      for a in pruned.levels[0] for b, _w in out_of.get((0, a), ())]
        rows.append(Row(f"src_{r}", tuple(init_terms), "=", 1.0))
        last = len(pruned.levels) - 1
        acc_terms = [(1.0, yname(a, b))
                     for b in pruned.levels[last] for a, _w in into.get((last, b), ())]
        rows.append(Row(f"snk_{r}", tuple(acc_terms), "=", 1.0))

        # conservation at interior states, at most one unit through each
        for li in range(1, last):
            for s in pruned.levels[li]:
                inc = [(1.0, yname(a, s)) for a, _w in into.get((li, s), ())]
                out = [(-1.0, yname(s, b)) for b, _w in out_of.get((li, s), ())]
                if not inc and not out:
                    continue
                rows.append(Row(f"flow_{r}_{li}_{index[s]}", tuple(inc + out), "=", 0.0))
                rows.append(Row(f"cap_{r}_{li}_{index[s]}", tuple(inc), "<=", 1.0))

        # arrival recursion, linearized with indicator-style big-M pairs
        assigned = pruned.assigned
        prev_t: Optional[str] = None
        for li, (occ, _prop) in enumerate(assigned):
            k, l = occ
            t_name = f"t_{r}_{k}_{l}"
            d_name = f"d_{r}_{k}_{l}"
            continuous.extend([t_name, d_name])
            for s in pruned.levels[li + 1]:
                for a, w in into.get((li + 1, s), ()):
                    y = yname(a, s)
                    base = [(1.0, t_name), (-m_val, y)]
                    if prev_t is not None:
                        base.append((-1.0, prev_t))
                    rows.append(Row(f"arrlo_{r}_{k}_{l}_{index[a]}_{index[s]}",
                                    tuple(base), ">=", w - m_val))
                    base_hi = [(1.0, t_name), (m_val, y)]
                    if prev_t is not None:
                        base_hi.append((-1.0, prev_t))
                    rows.append(Row(f"arrhi_{r}_{k}_{l}_{index[a]}_{index[s]}",
                                    tuple(base_hi), "<=", w + m_val))
            prev_t = t_name

        # objective: last arrival + final delay + the accepting leg's travel
        if assigned:
            k, l = assigned[-1][0]
            objective.append((1.0, f"t_{r}_{k}_{l}"))
            objective.append((1.0, f"d_{r}_{k}_{l}"))
            for b in pruned.levels[last]:
                for a, w in into.get((last, b), ()):
                    if w:
                        objective.append((w, yname(a, b)))
        else:
            for (_li, a, b), (w, _wit) in edges:
                if w:
                    objective.append((w, yname(a, b)))

    # synchronization-coupled occurrences execute at one shared time
    for elem in mission.elements():
        occs = mission.element_occurrences(elem)
        for o1, o2 in zip(occs, occs[1:]):
            rows.append(Row(f"sync_{o1[0]}_{o1[1]}_{o2[1]}",
                            ((1.0, z_names[o1]), (-1.0, z_names[o2])), "=", 0.0))

    # z is the latest actual arrival; delays bind to it
    for occ in mission.sorted_occurrences:
        k, l = occ
        z = z_names[occ]
        for r in sorted(assignment.robots_for(occ)):
            t_name = f"t_{r}_{k}_{l}"
            d_name = f"d_{r}_{k}_{l}"
            rows.append(Row(f"delay_{r}_{k}_{l}",
                            ((1.0, t_name), (1.0, d_name), (-1.0, z)), "=", 0.0))
            prev = _previous(assignment, r, occ)
            terms = [(1.0, z), (-1.0, t_name)]
            if prev is not None:
                terms.append((-1.0, f"d_{r}_{prev[0]}_{prev[1]}"))
            rows.append(Row(f"zmax_{r}_{k}_{l}", tuple(terms), ">=", 0.0))

    return MilpModel(tuple(objective), rows, tuple(binaries), tuple(continuous), big_m)


def _previous(assignment: Assignment, robot: int, occ: Occurrence):
    mine = assignment.tasks_of(robot)
    idx = mine.index(occ)
    return mine[idx - 1] if idx > 0 else None


def emit_lp(model: MilpModel, path) -> None:
    """Write the model in LP text format (minimize; subject to; bounds; binaries)."""
    lines = []
    for r in sorted(model.big_m):
        lines.append(f"\\ big-M robot {r}: {model.big_m[r]:g}")
    lines.append("Minimize")
    lines.append(" obj: " + _terms_str(model.objective))
    lines.append("Subject To")
    for row in model.rows:
        lines.append(f" {row.name}: " + _terms_str(row.terms) + f" {row.sense} {row.rhs:g}")
    lines.append("Bounds")
    for name in model.continuous:
        lines.append(f" 0 <= {name}")
    lines.append("Binaries")
    for name in model.binaries:
        lines.append(f" {name}")
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _terms_str(terms: Sequence[Tuple[float, str]]) -> str:
    if not terms:
        return "0"
    parts = []
    for i, (coef, var) in enumerate(terms):
        sign = "-" if coef < 0 else ("+" if i else "")
        mag = abs(coef)
        coef_str = "" if mag == 1 else f"{mag:g} "
        parts.append(f"{sign} {coef_str}{var}".strip())
    return " ".join(parts)
