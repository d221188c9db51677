"""The outer planning loop: allocation enumeration, local synthesis, adjustment, oracle.

Per feasible assignment the loop synthesizes each robot's initial strategy on
its pruned layered automaton, optionally runs the distributed adjustment and
the exact optimizer, and keeps the best adjusted plan as incumbent.
Previously returned assignments dominate later supersets, which are filtered
before any synthesis work.
"""

from __future__ import annotations

import csv
import json
import random
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .alloc import AllocModel, Assignment, dominated, next_assignment
from .errors import (
    BudgetExceeded,
    EmptyLanguage,
    InfeasibleMission,
    LevelDisconnected,
    NoAcceptingPath,
)
from .ltl import Nfa, nfa_accepts, to_nfa
from .milp import solve_exact
from .mission import Mission, build_mission, decomposition_states, prune_nfa, shortest_accepting_run
from .product import PrunedPa, Strategy, build_local_formula, build_product, prune_product
from .protocol import NetSim, ProtocolContext, choice_timeline, run_protocol
from .scenario import Scenario
from .schedule import SimResult, compute_time_cost, simulate
from .world import build_wts


@dataclass
class AssignmentRow:
    index: int
    status: str  # evaluated | filtered | infeasible
    detail: str = ""
    t_init: Optional[float] = None
    t_ideal: Optional[float] = None
    t_adjusted: Optional[float] = None
    oracle_j: Optional[float] = None
    history: List[float] = field(default_factory=list)
    cycles: int = 0
    messages: int = 0
    wall_prune_avg: float = 0.0
    wall_adjust: float = 0.0
    wall_oracle: float = 0.0
    product_states: int = 0
    max_level_width: int = 0
    product_edges: int = 0
    sim_matches: Optional[bool] = None
    collab_accepted: Optional[bool] = None
    locals_accepted: Optional[bool] = None
    element_sync_ok: Optional[bool] = None
    trace_lines: List[str] = field(default_factory=list)


@dataclass
class PlanOutput:
    """Winning plan: strategies, schedule timing, and executable walks."""

    assignment_index: int
    assignment: Assignment
    strategies: Dict[int, Strategy]
    sim: SimResult
    total: float


@dataclass
class RunReport:
    scenario_name: str
    mission: Optional[Mission]
    rows: List[AssignmentRow]
    incumbent: Optional[PlanOutput]
    stopped_because: str
    protocol_trace: List[str] = field(default_factory=list)

    def incumbent_total(self) -> Optional[float]:
        return None if self.incumbent is None else self.incumbent.total


def _resolve_comm_pairs(option, mission: Mission):
    if option in (None, "none"):
        return ()
    available = mission.consecutive_element_pairs()
    if option == "all":
        return available
    chosen = {tuple(p) for p in option}
    return tuple(p for p in available if p in chosen)


def run_framework(scenario: Scenario) -> RunReport:
    """Execute the full pipeline on a scenario (the planner's main entry point)."""
    opts = scenario.options
    started = time.perf_counter()
    fleet = scenario.fleet
    tasks = list(scenario.tasks)
    collab_tasks = scenario.collaborative_tasks()
    collab_props = frozenset(t.prop for t in collab_tasks)
    wts = {r: build_wts(scenario.world, fleet, tasks, r) for r in fleet.robot_ids()}

    collab_nfa = to_nfa(scenario.parsed_collaborative(), opts.state_cap)
    try:
        pruned_nfa = prune_nfa(collab_nfa, fleet, collab_tasks)
    except EmptyLanguage as exc:
        raise InfeasibleMission(str(exc)) from None
    run = shortest_accepting_run(pruned_nfa)
    positions = decomposition_states(pruned_nfa, run)
    mission = build_mission(pruned_nfa, run, positions)
    comm_pairs = _resolve_comm_pairs(opts.comm_pairs, mission)

    model = AllocModel(mission, fleet, collab_tasks, comm_pairs)
    rows: List[AssignmentRow] = []
    incumbent: Optional[PlanOutput] = None
    protocol_trace: List[str] = []
    history_vectors: List[Tuple[bool, ...]] = []
    nfa_cache: Dict[str, Nfa] = {}
    stopped = "unsat"
    index = 0
    while True:
        if opts.max_assignments is not None and index >= opts.max_assignments:
            stopped = "assignment-cap"
            break
        if opts.budget_seconds is not None and time.perf_counter() - started > opts.budget_seconds:
            stopped = "budget"
            break
        assignment = next_assignment(model)
        if assignment is None:
            stopped = "unsat"
            break
        row = AssignmentRow(index=index, status="evaluated")
        rows.append(row)
        index += 1
        if dominated(assignment.vector, history_vectors):
            row.status = "filtered"
            history_vectors.append(assignment.vector)
            continue
        history_vectors.append(assignment.vector)
        try:
            plan = _evaluate_assignment(
                scenario, mission, assignment, wts, collab_props, nfa_cache, row)
        except (NoAcceptingPath, LevelDisconnected) as exc:
            row.status = "infeasible"
            row.detail = str(exc)
            continue
        row.collab_accepted = nfa_accepts(collab_nfa, plan.sim.global_sequence)
        if incumbent is None or plan.total < incumbent.total:
            incumbent = plan
        protocol_trace.extend(row.trace_lines)
    return RunReport(scenario.name, mission, rows, incumbent, stopped, protocol_trace)


def _evaluate_assignment(scenario: Scenario, mission: Mission, assignment: Assignment,
                         wts, collab_props, nfa_cache, row: AssignmentRow) -> PlanOutput:
    opts = scenario.options
    fleet = scenario.fleet
    pruned_map: Dict[int, PrunedPa] = {}
    choices = {}
    prune_times = []
    for r in sorted(fleet.robot_ids()):
        assigned = [(occ, mission.task_of(occ)) for occ in assignment.tasks_of(r)]
        phi = build_local_formula(scenario.parsed_individual(r), assigned)
        key = f"{r}|{phi!r}"
        t0 = time.perf_counter()
        nfa = nfa_cache.get(key)
        if nfa is None:
            nfa = to_nfa(phi, opts.state_cap)
            nfa_cache[key] = nfa
        pa = build_product(wts[r], nfa, assigned, collab_props)
        pruned = prune_product(pa)
        prune_times.append(time.perf_counter() - t0)
        pruned_map[r] = pruned
        choices[r] = pruned.shortest_choice()
    row.wall_prune_avg = sum(prune_times) / len(prune_times)
    stats = [p.size_stats() for p in pruned_map.values()]
    row.product_states = max(s["product_states"] for s in stats)
    row.max_level_width = max(s["max_level_width"] for s in stats)
    row.product_edges = max(s["product_edges"] for s in stats)

    timelines = {r: choice_timeline(pruned_map[r], choices[r]) for r in pruned_map}
    initial_report = compute_time_cost(timelines, mission, assignment)
    row.t_init = initial_report.total
    row.t_ideal = sum(tl.completion for tl in timelines.values())

    if opts.adjust:
        ctx = ProtocolContext(
            mission, assignment, pruned_map, dict(choices), dict(timelines),
            rng=random.Random(opts.seed) if opts.shuffle_candidates else None)
        net = NetSim(sorted(pruned_map))
        t0 = time.perf_counter()
        result = run_protocol(ctx, net)
        row.wall_adjust = time.perf_counter() - t0
        row.history = result.history
        row.cycles = result.cycles
        row.messages = result.messages
        row.trace_lines = result.trace
        strategies = result.strategies
        final_report = result.report
    else:
        strategies = {r: pruned_map[r].expand(choices[r]) for r in pruned_map}
        final_report = initial_report
        row.history = [initial_report.total]
    row.t_adjusted = final_report.total

    if opts.oracle:
        t0 = time.perf_counter()
        try:
            exact = solve_exact(pruned_map, mission, assignment, opts.combination_cap)
            row.oracle_j = exact.objective
        except BudgetExceeded as exc:
            row.detail = f"oracle skipped: {exc}"
        row.wall_oracle = time.perf_counter() - t0

    sim = simulate(strategies, mission, assignment)
    row.sim_matches = (
        abs(sim.report.total - final_report.total) < 1e-9
        and all(abs(sim.report.task_times[o] - final_report.task_times[o]) < 1e-9
                for o in final_report.task_times)
    )
    row.element_sync_ok = sim.element_sync_ok
    local_ok = True
    for r, strategy in strategies.items():
        assigned = [(occ, mission.task_of(occ)) for occ in assignment.tasks_of(r)]
        phi = build_local_formula(scenario.parsed_individual(r), assigned)
        key = f"{r}|{phi!r}"
        if not nfa_accepts(nfa_cache[key], strategy.label_trace()):
            local_ok = False
    row.locals_accepted = local_ok
    return PlanOutput(row.index, assignment, strategies, sim, final_report.total)


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

METRIC_COLUMNS = [
    "assignment", "status", "detail", "t_init", "t_adjusted", "oracle_j",
    "cycles", "messages", "product_states", "max_level_width", "product_edges",
    "sim_matches", "collab_accepted", "locals_accepted", "element_sync_ok",
    "wall_prune_avg", "wall_adjust", "wall_oracle",
]

WALL_COLUMNS = {"wall_prune_avg", "wall_adjust", "wall_oracle"}


def write_metrics_csv(report: RunReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for row in report.rows:
            writer.writerow([
                row.index, row.status, row.detail,
                _num(row.t_init), _num(row.t_adjusted), _num(row.oracle_j),
                row.cycles, row.messages, row.product_states,
                row.max_level_width, row.product_edges,
                _flag(row.sim_matches), _flag(row.collab_accepted),
                _flag(row.locals_accepted), _flag(row.element_sync_ok),
                f"{row.wall_prune_avg:.6f}", f"{row.wall_adjust:.6f}",
                f"{row.wall_oracle:.6f}",
            ])


def write_series_csv(report: RunReport, path):
    """Total-cost trajectory per assignment (one row per accepted adjustment)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["assignment", "step", "total_cost"])
        for row in report.rows:
            for step, value in enumerate(row.history):
                writer.writerow([row.index, step, _num(value)])


def write_schedule_json(report: RunReport, path):
    data = {"scenario": report.scenario_name, "stopped": report.stopped_because}
    if report.incumbent is not None:
        plan = report.incumbent
        robots = {}
        for r in sorted(plan.strategies):
            strategy = plan.strategies[r]
            robots[str(r)] = {
                "walk": list(strategy.walk),
                "totalTravel": _num(strategy.weight),
                "delay": _num(plan.sim.report.delays[r]),
                "completion": _num(plan.sim.report.per_robot[r]),
                "collaborations": [
                    {"occurrence": list(occ), "position": pos,
                     "time": _num(plan.sim.fire_times[occ])}
                    for occ, pos in sorted(strategy.collab_positions.items())
                ],
            }
        data.update({
            "assignment": plan.assignment_index,
            "totalCost": _num(plan.total),
            "robots": robots,
            "events": plan.sim.trace_lines(),
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_protocol_trace(report: RunReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        for line in report.protocol_trace:
            fh.write(line + "\n")


def write_reports(report: RunReport, out_dir):
    import os

    os.makedirs(out_dir, exist_ok=True)
    write_metrics_csv(report, os.path.join(out_dir, "metrics.csv"))
    write_series_csv(report, os.path.join(out_dir, "tcolla_series.csv"))
    write_schedule_json(report, os.path.join(out_dir, "schedule.json"))
    write_protocol_trace(report, os.path.join(out_dir, "protocol_trace.txt"))


def _num(value):
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


def _flag(value):
    return "" if value is None else ("yes" if value else "no")
