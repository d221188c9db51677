"""Collaborative task allocation: all-solutions enumeration with blocking clauses.

The allocation constraints are purely Boolean plus cardinality, so a small
dedicated DPLL solver keeps enumeration deterministic and dependency-free:
branching picks the lowest-index unassigned variable, trying false before
true, and every returned assignment is immediately blocked.
"""

from __future__ import annotations

from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

from .errors import FleetplanError
from .mission import Mission, Occurrence
from .world import Fleet, TaskReq


class Assignment:
    """One satisfying allocation: which robot serves which task occurrence."""

    def __init__(self, robots: Sequence[int], occurrences: Sequence[Occurrence],
                 vector: Sequence[bool]):
        self.robots = tuple(robots)
        self.occurrences = tuple(occurrences)
        self.vector = tuple(vector)
        n_occ = len(self.occurrences)
        self._by_robot: Dict[int, Tuple[Occurrence, ...]] = {}
        self._by_occ: Dict[Occurrence, set] = {occ: set() for occ in self.occurrences}
        for i, robot in enumerate(self.robots):
            mine = []
            for j, occ in enumerate(self.occurrences):
                if self.vector[i * n_occ + j]:
                    mine.append(occ)
                    self._by_occ[occ].add(robot)
            self._by_robot[robot] = tuple(sorted(mine))

    def value(self, robot: int, occ: Occurrence) -> bool:
        i = self.robots.index(robot)
        j = self.occurrences.index(occ)
        return self.vector[i * len(self.occurrences) + j]

    def tasks_of(self, robot: int) -> Tuple[Occurrence, ...]:
        """The robot's occurrences in increasing (k, l) order."""
        return self._by_robot.get(robot, ())

    def robots_for(self, occ: Occurrence) -> FrozenSet[int]:
        return frozenset(self._by_occ[occ])

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.vector == other.vector

    def __hash__(self):
        return hash(self.vector)

    def __repr__(self):
        pairs = [f"r{r}:{list(self.tasks_of(r))}" for r in self.robots if self.tasks_of(r)]
        return "Assignment(" + ", ".join(pairs) + ")"


class AllocModel:
    """Clause store over assignment variables plus enumeration state.

    Variables are robot-major: ``x[r_i * n_occ + o_i]``.  Auxiliary variables
    introduced for the coordination constraint sit after the assignment
    block and are excluded from blocking and enumeration.
    """

    def __init__(self, mission: Mission, fleet: Fleet, tasks: Sequence[TaskReq],
                 comm_pairs: Iterable[Tuple[int, int]] = ()):
        self.mission = mission
        self.fleet = fleet
        self.tasks = {t.prop: t for t in tasks}
        self.comm_pairs = tuple(sorted(comm_pairs))
        self.robots = tuple(sorted(fleet.robot_ids()))
        self.occurrences = mission.sorted_occurrences
        self.n_x = len(self.robots) * len(self.occurrences)
        self.n_vars = self.n_x
        self.clauses: list[Tuple[int, ...]] = []
        self.atleasts: list[Tuple[int, Tuple[int, ...]]] = []
        self.blocked: list[Tuple[bool, ...]] = []
        self._encode()

    def var(self, robot: int, occ: Occurrence) -> int:
        return self.robots.index(robot) * len(self.occurrences) + self.occurrences.index(occ)

    def _new_aux(self) -> int:
        v = self.n_vars
        self.n_vars += 1
        return v

    def _encode(self):
        # (1) staffing: each occurrence gets the required robots per capability
        for occ in self.occurrences:
            task = self.tasks[self.mission.task_of(occ)]
            for cap in sorted(task.requirements):
                count = task.requirements[cap]
                holders = sorted(self.fleet.with_capability(cap))
                lits = tuple(self.var(r, occ) + 1 for r in holders)
                if len(lits) < count:
                    self.clauses.append(())  # unsatisfiable requirement
                else:
                    self.atleasts.append((count, lits))
        # (2) one task per robot within a synchronized element
        for elem in self.mission.elements():
            occs = self.mission.element_occurrences(elem)
            for a in range(len(occs)):
                for b in range(a + 1, len(occs)):
                    for r in self.robots:
                        self.clauses.append((-(self.var(r, occs[a]) + 1),
                                             -(self.var(r, occs[b]) + 1)))
        # (3) coordinator overlap between selected consecutive elements
        for k, m in self.comm_pairs:
            first = self.mission.element_occurrences((k, m))
            second = self.mission.element_occurrences((k, m + 1))
            aux_lits = []
            for r in self.robots:
                a = self._new_aux()
                b = self._new_aux()
                both = self._new_aux()
                self._define_or(a, [self.var(r, occ) for occ in first])
                self._define_or(b, [self.var(r, occ) for occ in second])
                self.clauses.append((-(both + 1), a + 1))
                self.clauses.append((-(both + 1), b + 1))
                self.clauses.append((both + 1, -(a + 1), -(b + 1)))
                aux_lits.append(both + 1)
            self.clauses.append(tuple(aux_lits))

    def _define_or(self, var: int, members: Sequence[int]):
        self.clauses.append((-(var + 1),) + tuple(m + 1 for m in members))
        for m in members:
            self.clauses.append((var + 1, -(m + 1)))

    def block(self, vector: Sequence[bool]):
        self.blocked.append(tuple(vector))

    def blocking_clauses(self) -> list[Tuple[int, ...]]:
        out = []
        for vector in self.blocked:
            out.append(tuple((-(v + 1) if value else v + 1) for v, value in enumerate(vector)))
        return out

    def dump(self) -> str:
        """Debug text form: header, then one clause or cardinality row per line.

        Clauses are DIMACS-style literal lists terminated by 0; cardinality
        rows are ``>= <k>`` followed by their literals and the terminator.
        """
        lines = [f"p alloc {self.n_vars}"]
        for k, lits in self.atleasts:
            lines.append(f">= {k} " + " ".join(map(str, lits)) + " 0")
        for clause in self.clauses + self.blocking_clauses():
            lines.append(" ".join(map(str, clause)) + " 0")
        return "\n".join(lines) + "\n"


def _propagate(n_vars, clauses, atleasts, assign) -> bool:
    changed = True
    while changed:
        changed = False
        for clause in clauses:
            unassigned = None
            satisfied = False
            count = 0
            for lit in clause:
                v = abs(lit) - 1
                val = assign[v]
                if val is None:
                    unassigned = lit
                    count += 1
                elif val == (lit > 0):
                    satisfied = True
                    break
            if satisfied:
                continue
            if count == 0:
                return False
            if count == 1:
                v = abs(unassigned) - 1
                assign[v] = unassigned > 0
                changed = True
        for k, lits in atleasts:
            true_count = 0
            open_lits = []
            for lit in lits:
                v = abs(lit) - 1
                val = assign[v]
                if val is None:
                    open_lits.append(lit)
                elif val == (lit > 0):
                    true_count += 1
            if true_count >= k:
                continue
            if true_count + len(open_lits) < k:
                return False
            if true_count + len(open_lits) == k:
                for lit in open_lits:
                    assign[abs(lit) - 1] = lit > 0
                changed = True
    return True


def _search(n_vars, clauses, atleasts, assign) -> Optional[list]:
    if not _propagate(n_vars, clauses, atleasts, assign):
        return None
    try:
        v = assign.index(None)
    except ValueError:
        return list(assign)
    for value in (False, True):
        trial = list(assign)
        trial[v] = value
        result = _search(n_vars, clauses, atleasts, trial)
        if result is not None:
            return result
    return None


def next_assignment(model: AllocModel) -> Optional[Assignment]:
    """The next satisfying assignment in enumeration order, or None when exhausted.

    The returned assignment is blocked immediately, so repeated calls walk
    the full solution set exactly once.
    """
    clauses = model.clauses + model.blocking_clauses()
    assign = [None] * model.n_vars
    solution = _search(model.n_vars, clauses, model.atleasts, assign)
    if solution is None:
        return None
    vector = tuple(bool(v) for v in solution[: model.n_x])
    model.block(vector)
    assignment = Assignment(model.robots, model.occurrences, vector)
    problems = check_assignment(model, assignment)
    if problems:
        raise FleetplanError(f"solver returned an invalid assignment: {problems}")
    return assignment


def check_assignment(model: AllocModel, assignment: Assignment) -> list[str]:
    """Semantic re-verification of the allocation constraints (solver-independent)."""
    problems = []
    for occ in model.occurrences:
        task = model.tasks[model.mission.task_of(occ)]
        staffed = assignment.robots_for(occ)
        for cap, count in sorted(task.requirements.items()):
            holders = model.fleet.with_capability(cap)
            if len(staffed & holders) < count:
                problems.append(f"occurrence {occ} lacks {count} robots with {cap}")
    for elem in model.mission.elements():
        occs = model.mission.element_occurrences(elem)
        for r in model.robots:
            hits = [occ for occ in occs if r in assignment.robots_for(occ)]
            if len(hits) > 1:
                problems.append(f"robot {r} doubly booked in element {elem}: {hits}")
    for k, m in model.comm_pairs:
        first = model.mission.element_occurrences((k, m))
        second = model.mission.element_occurrences((k, m + 1))
        lhs = set().union(*(assignment.robots_for(o) for o in first))
        rhs = set().union(*(assignment.robots_for(o) for o in second))
        if not lhs & rhs:
            problems.append(f"no coordinator between elements {(k, m)} and {(k, m + 1)}")
    return problems


def dominated(candidate: Sequence[bool], history: Iterable[Sequence[bool]]) -> bool:
    """Componentwise dominance: the candidate assigns a superset to every robot."""
    cand = tuple(candidate)
    for past in history:
        if all(c >= p for c, p in zip(cand, past)):
            return True
    return False
