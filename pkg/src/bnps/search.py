"""Score-based structure search (hill climbing and Tabu) maximising BIC."""

from __future__ import annotations

import csv
import io
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from bnps.dag import KINDS, Dag, INVERSE_KIND, Move, check_move, creates_cycle, is_acyclic
from bnps.data import CategoricalDataset
from bnps.errors import DataError
from bnps.network import family_bic

log = logging.getLogger(__name__)

IMPROVE_TOL = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = "tabu"
    tabu_length: int = 10
    max_degrading_steps: int = 10
    max_iter: int = 10000
    blacklist: frozenset = frozenset()
    whitelist: frozenset = frozenset()
    # moves are ranked deterministically; the seed is only recorded in metadata
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("tabu", "hill_climb"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.tabu_length < 1 or self.max_degrading_steps < 1 or self.max_iter < 1:
            raise ValueError("tabu_length, max_degrading_steps and max_iter must be >= 1")
        object.__setattr__(self, "blacklist", frozenset(map(tuple, self.blacklist)))
        object.__setattr__(self, "whitelist", frozenset(map(tuple, self.whitelist)))
        if self.blacklist & self.whitelist:
            raise ValueError("an arc cannot be both black- and whitelisted")


class FamilyScoreCache:
    """Memoised BIC family scores keyed by (child, sorted parent tuple)."""

    def __init__(self, data: CategoricalDataset):
        if data.n == 0:
            raise DataError("cannot score an empty dataset")
        self.codes = np.ascontiguousarray(data.codes)
        self.cards = data.cardinalities
        self._store: dict[tuple[int, tuple[int, ...]], float] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._store)

    def keys(self):
        return list(self._store)

    def score(self, child: int, parents: Iterable[int]) -> float:
        key = (child, tuple(sorted(parents)))
        val = self._store.get(key)
        if val is None:
            self.misses += 1
            val = family_bic(self.codes, self.cards, child, key[1])
            self._store[key] = val
        else:
            self.hits += 1
        return val

    def total(self, parents) -> float:
        return sum(self.score(v, ps) for v, ps in enumerate(parents))


def _delta(cache: FamilyScoreCache, parents, move: Move) -> float:
    u, v = move.u, move.v
    pv = parents[v]
    if move.kind == "add":
        return cache.score(v, pv + (u,)) - cache.score(v, pv)
    without = tuple(x for x in pv if x != u)
    d = cache.score(v, without) - cache.score(v, pv)
    if move.kind == "reverse":
        pu = parents[u]
        d += cache.score(u, pu + (v,)) - cache.score(u, pu)
    return d


def score_delta(cache: FamilyScoreCache, data: CategoricalDataset, g: Dag, move: Move) -> float:
    """Score change of ``move``; only the touched families are rescored."""
    check_move(g, move)
    if creates_cycle(g.parent_sets, move):
        raise DataError(f"illegal move {move}: creates a cycle")
    return _delta(cache, g.parent_sets, move)


def _apply(parents: list[tuple[int, ...]], move: Move) -> None:
    u, v = move.u, move.v
    if move.kind == "add":
        parents[v] = tuple(sorted(parents[v] + (u,)))
    else:
        parents[v] = tuple(x for x in parents[v] if x != u)
        if move.kind == "reverse":
            parents[u] = tuple(sorted(parents[u] + (v,)))


def legal_moves(parents, cfg: SearchConfig) -> list[Move]:
    """All acyclic Add/Delete/Reverse moves honouring the arc constraints,
    in (kind, u, v) lexicographic order."""
    p = len(parents)
    out = []
    for kind in KINDS:
        for u in range(p):
            for v in range(p):
                if u == v:
                    continue
                present = u in parents[v]
                if kind == "add":
                    if present or v in parents[u] or (u, v) in cfg.blacklist:
                        continue
                elif not present or (u, v) in cfg.whitelist:
                    continue
                elif kind == "reverse" and (v, u) in cfg.blacklist:
                    continue
                mv = Move(kind, u, v)
                if not creates_cycle(parents, mv):
                    out.append(mv)
    return out


@dataclass
class TraceStep:
    step: int
    move: Move
    delta: float
    total_score: float
    tabu_hit: bool = False


@dataclass
class SearchResult:
    dag: Dag
    score: float
    trace: list[TraceStep]
    cache: FamilyScoreCache
    warnings: list[str] = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "move_kind", "u", "v", "delta", "total_score", "tabu_hit"])
        for t in self.trace:
            w.writerow([t.step, t.move.kind, t.move.u, t.move.v, repr(t.delta),
                        repr(t.total_score), int(t.tabu_hit)])
        return buf.getvalue()

    def __iter__(self):
        # allows ``dag, score, trace = hill_climb(...)``
        return iter((self.dag, self.score, self.trace))


class _Search:
    def __init__(self, data: CategoricalDataset, cfg: SearchConfig):
        if data.p < 2:
            raise DataError("structure search needs at least two columns")
        for u, v in cfg.whitelist | cfg.blacklist:
            if not (0 <= u < data.p and 0 <= v < data.p) or u == v:
                raise DataError(f"constraint arc {(u, v)} is invalid")
        self.cfg = cfg
        self.cache = FamilyScoreCache(data)
        parents: list[set[int]] = [set() for _ in range(data.p)]
        for u, v in cfg.whitelist:
            parents[v].add(u)
        self.parents = [tuple(sorted(s)) for s in parents]
        if not is_acyclic(self.parents):
            raise DataError("whitelist arcs contain a cycle")
        self.score = self.cache.total(self.parents)
        self.trace: list[TraceStep] = []
        self.warnings: list[str] = []
        self.steps = 0

    def ranked(self):
        ms = legal_moves(self.parents, self.cfg)
        scored = [(_delta(self.cache, self.parents, m), m) for m in ms]
        scored.sort(key=lambda dm: (-dm[0], dm[1].sort_key))
        return scored

    def take(self, delta: float, move: Move, tabu_hit=False) -> None:
        _apply(self.parents, move)
        # recompute rather than accumulate so the running score never drifts
        self.score = self.cache.total(self.parents)
        self.steps += 1
        self.trace.append(TraceStep(self.steps, move, delta, self.score, tabu_hit))

    def budget_left(self) -> bool:
        if self.steps >= self.cfg.max_iter:
            if not self.warnings:
                self.warnings.append(f"max_iter={self.cfg.max_iter} reached")
                log.warning("structure search stopped at max_iter=%d", self.cfg.max_iter)
            return False
        return True

    def climb(self) -> None:
        while self.budget_left():
            ranked = self.ranked()
            if not ranked or ranked[0][0] <= IMPROVE_TOL:
                return
            self.take(*ranked[0])

    def tabu_walk(self) -> None:
        tabu: deque = deque(maxlen=self.cfg.tabu_length)
        for t in self.trace:
            tabu.append((frozenset((t.move.u, t.move.v)), t.move.kind))
        best_parents, best_score = list(self.parents), self.score
        stall = 0
        while stall < self.cfg.max_degrading_steps and self.budget_left():
            chosen, hit = None, False
            for d, mv in self.ranked():
                sig = (frozenset((mv.u, mv.v)), INVERSE_KIND[mv.kind])
                if sig in tabu and not self.score + d > best_score + IMPROVE_TOL:
                    hit = True
                    continue
                chosen = (d, mv)
                break
            if chosen is None:
                break
            d, mv = chosen
            self.take(d, mv, tabu_hit=hit)
            tabu.append((frozenset((mv.u, mv.v)), mv.kind))
            if self.score > best_score + IMPROVE_TOL:
                best_parents, best_score, stall = list(self.parents), self.score, 0
            else:
                stall += 1
        self.parents, self.score = best_parents, best_score

    def result(self) -> SearchResult:
        return SearchResult(Dag._from_parents(self.parents), self.score, self.trace,
                            self.cache, self.warnings)


def hill_climb(data: CategoricalDataset, cfg: SearchConfig = SearchConfig("hill_climb")) -> SearchResult:
    """Greedy ascent from the empty (or whitelisted) graph; the single best
    strictly improving move is applied until none is left."""
    s = _Search(data, cfg)
    s.climb()
    return s.result()


def tabu_search(data: CategoricalDataset, cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Hill climbing, then a Tabu walk out of the local optimum.

    The walk takes the best move whose undo is not tabu (aspiration lets a
    tabu move through if it beats the best score seen) and stops after
    ``max_degrading_steps`` steps without a new best. The best graph visited
    is then re-climbed, so the result is always a local optimum and never
    scores below the plain hill-climbing answer.
    """
    s = _Search(data, cfg)
    s.climb()
    s.tabu_walk()
    s.climb()
    return s.result()


def learn_structure(
    data: CategoricalDataset, columns, cfg: SearchConfig = SearchConfig()
) -> tuple[CategoricalDataset, SearchResult]:
    """Run the configured search on an explicit column subset."""
    sub = data.select(columns)
    fn = tabu_search if cfg.algorithm == "tabu" else hill_climb
    return sub, fn(sub, cfg)


def is_local_optimum(data: CategoricalDataset, g: Dag, cfg: SearchConfig = SearchConfig()) -> bool:
    """Certificate: no legal single move improves BIC by more than the tolerance."""
    cache = FamilyScoreCache(data)
    parents = list(g.parent_sets)
    return all(_delta(cache, parents, m) <= IMPROVE_TOL for m in legal_moves(parents, cfg))
