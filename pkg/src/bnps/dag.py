"""Immutable DAGs over integer node ids, with acyclicity-checked arc moves."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence

from bnps.errors import DataError

KINDS = ("add", "delete", "reverse")
INVERSE_KIND = {"add": "delete", "delete": "add", "reverse": "reverse"}


@dataclass(frozen=True, order=True)
class Move:
    kind: str
    u: int
    v: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown move kind {self.kind!r}")

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (KINDS.index(self.kind), self.u, self.v)

    def inverse(self) -> "Move":
        if self.kind == "reverse":
            return Move("reverse", self.v, self.u)
        return Move(INVERSE_KIND[self.kind], self.u, self.v)

    def __str__(self):
        sym = {"add": "+", "delete": "-", "reverse": "~"}[self.kind]
        return f"{sym}({self.u}->{self.v})"


@dataclass(frozen=True)
class Rejection:
    move: Move
    reason: str

    def __bool__(self):
        return False


class Dag:
    """Parent-set representation; parents of each node are kept sorted."""

    __slots__ = ("_parents",)

    def __init__(self, node_count: int, arcs: Iterable[tuple[int, int]] = ()):
        parents: list[set[int]] = [set() for _ in range(node_count)]
        for u, v in arcs:
            self._check_ids(node_count, u, v)
            if u == v:
                raise DataError(f"self-loop on node {u}")
            if u in parents[v]:
                raise DataError(f"duplicate arc {u}->{v}")
            parents[v].add(u)
        self._parents = tuple(tuple(sorted(s)) for s in parents)
        if not is_acyclic(self._parents):
            raise DataError("arc set contains a cycle")

    @staticmethod
    def _check_ids(node_count, *ids):
        for x in ids:
            if not (isinstance(x, int) and 0 <= x < node_count):
                raise DataError(f"invalid node id {x!r}")

    @classmethod
    def _from_parents(cls, parents: Sequence[Sequence[int]]) -> "Dag":
        g = cls.__new__(cls)
        g._parents = tuple(tuple(sorted(p)) for p in parents)
        return g

    @property
    def node_count(self) -> int:
        return len(self._parents)

    @property
    def parent_sets(self) -> tuple[tuple[int, ...], ...]:
        return self._parents

    def parents(self, v: int) -> tuple[int, ...]:
        return self._parents[v]

    def children(self, u: int) -> list[int]:
        return [v for v, ps in enumerate(self._parents) if u in ps]

    def has_arc(self, u: int, v: int) -> bool:
        return u in self._parents[v]

    @property
    def arcs(self) -> list[tuple[int, int]]:
        return sorted((u, v) for v, ps in enumerate(self._parents) for u in ps)

    def __eq__(self, other):
        return isinstance(other, Dag) and self._parents == other._parents

    def __hash__(self):
        return hash(self._parents)

    def __repr__(self):
        return f"Dag({self.node_count}, {self.arcs})"

    def to_dot(self, names: Sequence[str] | None = None) -> str:
        names = names or [str(i) for i in range(self.node_count)]
        lines = ["digraph G {"]
        lines += [f'  "{nm}";' for nm in names]
        lines += [f'  "{names[u]}" -> "{names[v]}";' for u, v in self.arcs]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _reaches(parents: Sequence[Sequence[int]], src: int, dst: int, skip=None) -> bool:
    """Depth-first search along arcs from ``src``; ``skip`` is an arc to ignore."""
    children: list[list[int]] = [[] for _ in parents]
    for v, ps in enumerate(parents):
        for u in ps:
            if (u, v) != skip:
                children[u].append(v)
    stack, seen = [src], {src}
    while stack:
        x = stack.pop()
        if x == dst:
            return True
        for c in children[x]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def is_acyclic(parents: Sequence[Sequence[int]]) -> bool:
    indeg = [len(p) for p in parents]
    children: list[list[int]] = [[] for _ in parents]
    for v, ps in enumerate(parents):
        for u in ps:
            children[u].append(v)
    stack = [v for v, d in enumerate(indeg) if d == 0]
    seen = 0
    while stack:
        x = stack.pop()
        seen += 1
        for c in children[x]:
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    return seen == len(parents)


def creates_cycle(parents: Sequence[Sequence[int]], move: Move) -> bool:
    u, v = move.u, move.v
    if move.kind == "add":
        return _reaches(parents, v, u)
    if move.kind == "reverse":
        # after dropping u->v, adding v->u closes a cycle iff u still reaches v
        return _reaches(parents, u, v, skip=(u, v))
    return False


def check_move(g: Dag, move: Move) -> None:
    Dag._check_ids(g.node_count, move.u, move.v)
    if move.u == move.v:
        raise DataError("self-loop move")
    present = g.has_arc(move.u, move.v)
    if move.kind == "add" and present:
        raise DataError(f"cannot add {move.u}->{move.v}: arc already present")
    if move.kind in ("delete", "reverse") and not present:
        raise DataError(f"cannot {move.kind} {move.u}->{move.v}: arc absent")


def apply_move(g: Dag, move: Move) -> Dag | Rejection:
    """Return the mutated graph, or a falsy ``Rejection`` if it would be cyclic."""
    check_move(g, move)
    if creates_cycle(g.parent_sets, move):
        return Rejection(move, "cycle")
    parents = [list(p) for p in g.parent_sets]
    u, v = move.u, move.v
    if move.kind == "add":
        parents[v].append(u)
    elif move.kind == "delete":
        parents[v].remove(u)
    else:
        parents[v].remove(u)
        parents[u].append(v)
    return Dag._from_parents(parents)


def topological_order(g: Dag) -> list[int]:
    """Kahn's algorithm, always releasing the smallest ready node id first."""
    indeg = [len(p) for p in g.parent_sets]
    children = [g.children(u) for u in range(g.node_count)]
    ready = [v for v, d in enumerate(indeg) if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        x = heapq.heappop(ready)
        order.append(x)
        for c in children[x]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    return order
