"""Timelines, synchronized execution times, and discrete-event validation.

Two independent implementations of the same timing semantics live here: the
closed-form pass (`compute_time_cost`) that folds waits into per-robot delays
task by task, and the event simulation (`simulate`) that moves robots along
their walks and blocks them at collaborations.  Valid plans must get the
same total cost from both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from .alloc import Assignment
from .errors import DeadlockDetected, NegativeObligationViolated
from .ltl import Nfa, nfa_accepts
from .mission import Mission, Occurrence
from .product import Strategy


@dataclass(frozen=True)
class Timeline:
    """A robot's ideal arrival times (no waits) and ideal completion time."""

    robot_id: int
    arrivals: Mapping[Occurrence, float]
    completion: float

    def arrival(self, occ: Occurrence) -> float:
        return self.arrivals[occ]


@dataclass(frozen=True)
class CostReport:
    """Synchronized task times, per-robot final delays, and the total cost."""

    task_times: Mapping[Occurrence, float]
    delays: Mapping[int, float]
    per_robot: Mapping[int, float]
    total: float

    def task_time(self, occ: Occurrence) -> float:
        return self.task_times[occ]


def compute_timeline(strategy: Strategy) -> Timeline:
    """Prefix-sum arrival times along the strategy's run."""
    arrivals = {occ: strategy.arrival(occ) for occ in strategy.collab_positions}
    return Timeline(strategy.robot_id, arrivals, strategy.weight)


def compute_time_cost(timelines: Mapping[int, Timeline], mission: Mission,
                      assignment: Assignment) -> CostReport:
    """Fold synchronization waits over the global task order.

    Walks the mission's elements in (k, m) order.  Tasks sharing an element
    are synchronization-coupled and execute together when the last robot of
    the whole element arrives; every participant's delay is then overwritten
    with its accumulated wait.  On singleton elements this is exactly the
    per-task fold (arrival plus carried delay, max over the task's robots).
    """
    delays: Dict[int, float] = {r: 0.0 for r in timelines}
    task_times: Dict[Occurrence, float] = {}
    for elem in mission.elements():
        occs = mission.element_occurrences(elem)
        actual = []
        for occ in occs:
            for r in sorted(assignment.robots_for(occ)):
                actual.append(timelines[r].arrival(occ) + delays[r])
        t = max(actual)
        for occ in occs:
            task_times[occ] = t
            for r in assignment.robots_for(occ):
                delays[r] = t - timelines[r].arrival(occ)
    per_robot = {r: timelines[r].completion + delays[r] for r in timelines}
    total = sum(per_robot.values())
    return CostReport(task_times, delays, per_robot, total)


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # "MOVE" or "TASK"
    robot: Optional[int]
    detail: Tuple

    def format(self) -> str:
        if self.kind == "MOVE":
            src, dst = self.detail
            return f"{_fmt(self.time)} {self.robot} MOVE {src} {dst}"
        props, robots = self.detail
        return (f"{_fmt(self.time)} TASK {'+'.join(sorted(props))} ROBOTS "
                + ",".join(str(r) for r in sorted(robots)))


def _fmt(value: float) -> str:
    return f"{value:g}"


@dataclass
class SimResult:
    events: List[SimEvent]
    report: CostReport
    fire_times: Dict[Occurrence, float]
    global_sequence: List[FrozenSet[str]]
    element_sync_ok: bool
    element_order_ok: bool

    def trace_lines(self) -> List[str]:
        return [e.format() for e in self.events]


def simulate(strategies: Mapping[int, Strategy], mission: Mission,
             assignment: Assignment) -> SimResult:
    """Discrete-event execution of the strategies.

    Robots move asynchronously along their runs and block at collaborative
    positions until every robot of the occurrence is ready; all participants
    then fire together at the latest arrival.  Raises on deadlock and when a
    proposition fires at an instant its element forbids it.  The resulting
    cost report is computed from observed times and must match
    `compute_time_cost` on valid plans.
    """
    robots = sorted(strategies)
    next_pos = {r: 0 for r in robots}  # next run position to arrive at
    clock = {r: 0.0 for r in robots}
    waiting: Dict[int, Occurrence] = {}
    fire_times: Dict[Occurrence, float] = {}
    events: List[SimEvent] = []
    elements = list(mission.elements())
    members = {
        elem: sorted(
            (r, occ)
            for occ in mission.element_occurrences(elem)
            for r in assignment.robots_for(occ)
        )
        for elem in elements
    }
    collab_at = {
        r: {pos: occ for occ, pos in strategies[r].collab_positions.items()}
        for r in robots
    }

    def advance(r: int):
        """Move robot r forward until it blocks or finishes; emit events."""
        strategy = strategies[r]
        while next_pos[r] < len(strategy.run):
            pos = next_pos[r]
            if pos > 0:
                clock[r] += strategy.step_weights[pos - 1]
                events.append(SimEvent(clock[r], "MOVE", r,
                                       (strategy.walk[pos - 1], strategy.walk[pos])))
            occ = collab_at[r].get(pos)
            individual = strategy.emits[pos] - strategy.fired[pos]
            if individual:
                events.append(SimEvent(clock[r], "TASK", r, (tuple(sorted(individual)), (r,))))
            if occ is not None:
                waiting[r] = occ
                return
            next_pos[r] += 1

    for r in robots:
        advance(r)

    fired_elements = set()
    while any(next_pos[r] < len(strategies[r].run) for r in robots):
        fireable = []
        for elem in elements:
            if elem in fired_elements:
                continue
            pairs = members[elem]
            if pairs and all(waiting.get(r) == occ for r, occ in pairs):
                t = max(clock[r] for r, _occ in pairs)
                fireable.append((t, elem))
        if not fireable:
            blocked = {r: waiting.get(r) for r in robots if next_pos[r] < len(strategies[r].run)}
            raise DeadlockDetected(f"no collaborative element can fire; blocked: {blocked}")
        fireable.sort(key=lambda item: (item[0], item[1]))
        t, elem = fireable[0]
        fired_elements.add(elem)
        pairs = members[elem]
        props = mission.element_tasks(elem)
        for occ in mission.element_occurrences(elem):
            fire_times[occ] = t
        events.append(SimEvent(t, "TASK", None, (tuple(props), tuple(r for r, _o in pairs))))
        for r, _occ in pairs:
            clock[r] = t
            del waiting[r]
            next_pos[r] += 1
            advance(r)

    # negative obligations: a forbidden proposition must not fire at the same
    # instant as the element that forbids it
    by_time: Dict[float, set] = {}
    for occ, t in fire_times.items():
        by_time.setdefault(t, set()).add(mission.task_of(occ))
    for elem in mission.elements():
        forbidden = mission.forbidden_at(elem)
        if not forbidden:
            continue
        for occ in mission.element_occurrences(elem):
            simultaneous = by_time[fire_times[occ]]
            hit = sorted(forbidden & (simultaneous - {mission.task_of(occ)}))
            if hit:
                raise NegativeObligationViolated(hit[0], fire_times[occ], elem)

    # element synchrony / ordering verification (reported, not raised)
    sync_ok = True
    order_ok = True
    for elem in mission.elements():
        times = [fire_times[occ] for occ in mission.element_occurrences(elem)]
        if max(times) != min(times):
            sync_ok = False
    for k, sub in enumerate(mission.subsequences, start=1):
        for m in range(1, len(sub)):
            before = max(fire_times[o] for o in mission.element_occurrences((k, m)))
            after = min(fire_times[o] for o in mission.element_occurrences((k, m + 1)))
            if after < before:
                order_ok = False

    global_sequence = [
        frozenset(by_time[t]) for t in sorted(by_time)
    ]
    per_robot = {r: clock[r] for r in robots}
    delays = {r: clock[r] - strategies[r].weight for r in robots}
    task_times = dict(fire_times)
    report = CostReport(task_times, delays, per_robot, sum(per_robot.values()))
    return SimResult(events, report, fire_times, global_sequence, sync_ok, order_ok)


def local_traces_accepted(strategies: Mapping[int, Strategy],
                          local_nfas: Mapping[int, Nfa]) -> Dict[int, bool]:
    """Check each robot's emitted label trace against its own automaton."""
    return {
        r: nfa_accepts(local_nfas[r], strategies[r].label_trace())
        for r in sorted(strategies)
    }
