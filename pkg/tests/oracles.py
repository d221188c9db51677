"""Independent reference implementations used as test oracles.

Everything here deliberately avoids the production code paths: trace
satisfaction is evaluated directly on the formula tree, shortest paths use
Bellman-Ford, and combinatorial questions are settled by exhaustive
enumeration.
"""

from __future__ import annotations

import random
from itertools import chain, combinations, product

from fleetplan.ltl import (
    And,
    Atom,
    Always,
    Eventually,
    FalseF,
    Formula,
    Not,
    Or,
    TrueF,
    Until,
)


def eval_trace(f: Formula, trace) -> bool:
    """Recursive finite-trace satisfaction; the empty trace is allowed."""
    trace = tuple(frozenset(s) for s in trace)
    if not trace:
        return _eval_empty(f)
    return _eval_at(f, trace, 0)


def _eval_empty(f: Formula) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, (FalseF, Atom, Eventually, Until)):
        return False
    if isinstance(f, Not):
        return not _eval_empty(f.child)
    if isinstance(f, And):
        return all(_eval_empty(c) for c in f.children)
    if isinstance(f, Or):
        return any(_eval_empty(c) for c in f.children)
    if isinstance(f, Always):
        return True
    raise TypeError(f)


def _eval_at(f: Formula, trace, i: int) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Atom):
        return f.name in trace[i]
    if isinstance(f, Not):
        return not _eval_at(f.child, trace, i)
    if isinstance(f, And):
        return all(_eval_at(c, trace, i) for c in f.children)
    if isinstance(f, Or):
        return any(_eval_at(c, trace, i) for c in f.children)
    if isinstance(f, Eventually):
        return any(_eval_at(f.child, trace, j) for j in range(i, len(trace)))
    if isinstance(f, Always):
        return all(_eval_at(f.child, trace, j) for j in range(i, len(trace)))
    if isinstance(f, Until):
        for j in range(i, len(trace)):
            if _eval_at(f.right, trace, j):
                return all(_eval_at(f.left, trace, k) for k in range(i, j))
        return False
    raise TypeError(f)


def random_formula(rng: random.Random, atoms, depth: int) -> Formula:
    """Random formula of bounded depth over the given atom names."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.12:
            return TrueF()
        return Atom(rng.choice(atoms))
    kind = rng.choice(["not", "and", "or", "ev", "alw", "until"])
    if kind == "not":
        return Not(random_formula(rng, atoms, depth - 1))
    if kind == "ev":
        return Eventually(random_formula(rng, atoms, depth - 1))
    if kind == "alw":
        return Always(random_formula(rng, atoms, depth - 1))
    left = random_formula(rng, atoms, depth - 1)
    right = random_formula(rng, atoms, depth - 1)
    if kind == "and":
        return And(left, right)
    if kind == "or":
        return Or(left, right)
    return Until(left, right)


def all_label_sets(atoms):
    atoms = sorted(atoms)
    return [frozenset(c) for r in range(len(atoms) + 1) for c in combinations(atoms, r)]


def all_traces(atoms, max_len: int):
    """Every trace up to the given length over the atom alphabet."""
    letters = all_label_sets(atoms)
    for length in range(max_len + 1):
        yield from product(letters, repeat=length)


def powerset(items):
    items = list(items)
    return chain.from_iterable(combinations(items, r) for r in range(len(items) + 1))


def bellman_ford(edges, source):
    """Textbook Bellman-Ford over an undirected edge list [(a, b, w), ...]."""
    nodes = set()
    for a, b, _ in edges:
        nodes.add(a)
        nodes.add(b)
    dist = {n: float("inf") for n in nodes}
    dist[source] = 0
    for _ in range(max(len(nodes) - 1, 0)):
        changed = False
        for a, b, w in edges:
            if dist[a] + w < dist[b]:
                dist[b] = dist[a] + w
                changed = True
            if dist[b] + w < dist[a]:
                dist[a] = dist[b] + w
                changed = True
        if not changed:
            break
    return dist


def interleavings(left, right, cap=None):
    """All order-preserving merges of two sequences."""
    out = []

    def rec(prefix, a, b):
        if cap is not None and len(out) >= cap:
            return
        if not a and not b:
            out.append(tuple(prefix))
            return
        if a:
            rec(prefix + [a[0]], a[1:], b)
        if b:
            rec(prefix + [b[0]], a, b[1:])

    rec([], tuple(left), tuple(right))
    return out
