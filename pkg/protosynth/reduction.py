"""
The reduced candidate space.

Each hole keeps a cache of expression classes: two expressions of the same
nonterminal fall into one class when they evaluate identically under every
interpretation collected for that hole so far. Only one representative per class
is ever combined into larger expressions or proposed as a candidate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product
from typing import Callable, Dict, Hashable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .checker import Completion
from .exceptions import CandidateBudgetError
from .model import Expr, Interpretation, Value, evaluate, instantiate, interpretations, value_to_json
from .pruning import ConstraintSet, PruningConstraint, interps_of
from .sketch import GrammarDecl, HoleDecl, Production, Sketch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotatedNT:
    """A nonterminal paired with the values of an expression under each interpretation."""
    nonterminal: str
    vec: Tuple[Value, ...]


@dataclass
class ClassEntry:
    """One class of a hole's cache.

    Attributes:
        nonterminal: nonterminal the representative derives from
        expr: the representative, the first expression found for the class
        size: node count of expr
        values: expr's value under each interpretation of the hole, in order
        order: discovery position within the hole
    """
    nonterminal: str
    expr: Expr
    size: int
    values: Tuple[Value, ...]
    order: int

    def key(self, syntactic: bool) -> Hashable:
        if syntactic:
            return (self.nonterminal, self.expr)
        return AnnotatedNT(self.nonterminal, self.values)


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Ways to write total as an ordered sum of parts positive integers."""
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class HoleSpace:
    """Class cache and enumeration state of one hole."""

    def __init__(self, hole: HoleDecl, sorts: Mapping[str, int], syntactic: bool = False):
        self.hole = hole
        self.grammar: GrammarDecl = hole.grammar
        self.sorts = sorts
        self.syntactic = syntactic
        self.interps: List[Interpretation] = []
        self._position: Dict[Interpretation, int] = {}
        self._envs: List[Dict[str, Value]] = []
        self.cache: Dict[Hashable, ClassEntry] = {}
        self.entries: List[ClassEntry] = []
        self.by_size: Dict[str, Dict[int, List[ClassEntry]]] = {nt: {} for nt in self.grammar.nonterminals}
        self.level = 0
        self.closed = False
        self.tick: Optional[Callable[[], None]] = None
        self._has_unit = any(len(p.placeholders) == 1 and p.base_size == 0 for p in self.grammar.rules)

    @property
    def start(self) -> str:
        return self.grammar.start

    def classes(self, nonterminal: Optional[str] = None) -> List[ClassEntry]:
        """Classes in discovery order, optionally of one nonterminal."""
        nt = nonterminal or self.start
        return [e for e in self.entries if e.nonterminal == nt]

    def value_at(self, entry: ClassEntry, interp: Interpretation) -> Value:
        return entry.values[self._position[interp]]

    def _admit(self, nt: str, prod: Production, children: Sequence[ClassEntry], size: int) -> bool:
        values = []
        for j, env in enumerate(self._envs):
            local = dict(env)
            for slot, child in enumerate(children):
                local[f"${slot}"] = child.values[j]
            values.append(evaluate(prod.template, local, self.sorts))
        values = tuple(values)
        if not self.syntactic:
            key = AnnotatedNT(nt, values)
            if key in self.cache:
                return False
            expr = instantiate(prod.template, [c.expr for c in children])
        else:
            expr = instantiate(prod.template, [c.expr for c in children])
            key = (nt, expr)
            if key in self.cache:
                return False
        entry = ClassEntry(nt, expr, size, values, len(self.entries))
        self.cache[key] = entry
        self.entries.append(entry)
        self.by_size[nt].setdefault(size, []).append(entry)
        return True

    def _apply(self, prod: Production, size: int) -> int:
        k = len(prod.placeholders)
        rem = size - prod.base_size
        if k == 0:
            return int(rem == 0 and self._admit(prod.lhs, prod, (), size))
        added = 0
        for parts in _compositions(rem, k):
            pools = [list(self.by_size[nt].get(part, ())) for nt, part in zip(prod.placeholders, parts)]
            if not all(pools):
                continue
            for children in product(*pools):
                added += self._admit(prod.lhs, prod, children, size)
        return added

    def _enumerate_size(self, size: int) -> int:
        added = sum(self._apply(p, size) for p in self.grammar.rules)
        if self._has_unit:
            units = [p for p in self.grammar.rules if len(p.placeholders) == 1 and p.base_size == 0]
            while True:
                more = sum(self._apply(p, size) for p in units)
                added += more
                if not more:
                    break
        return added

    def _saturated(self) -> bool:
        """No production over cached classes can build an expression larger than the enumerated sizes."""
        biggest = max((e.size for e in self.entries), default=0)
        need = max((p.base_size + len(p.placeholders) * biggest for p in self.grammar.rules), default=0)
        return self.level >= need

    def extend_to(self, size_cap: int) -> int:
        """Enumerate every size up to size_cap; returns the number of new classes."""
        added = 0
        while self.level < size_cap and not self.closed:
            if self.tick is not None:
                self.tick()
            self.level += 1
            found = self._enumerate_size(self.level)
            added += found
            logger.debug(f"?{self.hole.name}: size {self.level} added {found} classes ({len(self.entries)} total)")
            if self._saturated():
                self.closed = True
        return added

    def add_interps(self, new: Sequence[Interpretation]) -> int:
        """Extend every class vector with values under new interpretations.

        Returns:
            Number of interpretations actually added
        """
        fresh = []
        for a in new:
            if a not in self._position and a not in fresh:
                fresh.append(a)
        if not fresh:
            return 0
        envs = [a.as_dict() for a in fresh]
        for a in fresh:
            self._position[a] = len(self.interps)
            self.interps.append(a)
        self._envs.extend(envs)
        self.cache = {}
        for entry in self.entries:
            entry.values = entry.values + tuple(evaluate(entry.expr, env, self.sorts) for env in envs)
            self.cache[entry.key(self.syntactic)] = entry
        if not self.syntactic:
            # split classes may expose smaller expressions that were shadowed before
            self.level = 0
            self.closed = False
        return len(fresh)

    def to_json(self) -> Dict[str, object]:
        return {
            "hole": self.hole.name,
            "interps": [a.to_json() for a in self.interps],
            "classes": [
                {
                    "nonterminal": e.nonterminal,
                    "vector": [value_to_json(v) for v in e.values],
                    "representative": str(e.expr),
                    "size": e.size,
                }
                for e in self.entries
            ],
        }


class GlobalSpace:
    """Candidate space of a whole sketch: one HoleSpace per hole plus the learned constraints.

    Attributes:
        per_hole: hole spaces in hole declaration order
        constraints: every constraint learned so far
        seen: expression tuples already proposed or filtered out
        enumerated: candidate tuples considered
        pruned: candidate tuples rejected by the constraints
    """

    def __init__(
        self,
        sk: Sketch,
        no_reduction: bool = False,
        no_pruning: bool = False,
        candidate_budget: Optional[int] = None,
        tick: Optional[Callable[[], None]] = None,
    ):
        self.sketch = sk
        self.holes = tuple(h.name for h in sk.holes)
        self.per_hole = [HoleSpace(h, sk.sort_sizes, syntactic=no_reduction) for h in sk.holes]
        self.constraints = ConstraintSet()
        self.no_pruning = no_pruning
        self.candidate_budget = candidate_budget
        self.tick = tick
        for hs in self.per_hole:
            hs.tick = tick
        self.seen: Set[Tuple[Expr, ...]] = set()
        self.enumerated = 0
        self.pruned = 0
        self._cursor: Iterator[Tuple[ClassEntry, ...]] = self._tuples()

    def _tuples_of_size(self, i: int, remaining: int) -> Iterator[Tuple[ClassEntry, ...]]:
        spaces = self.per_hole
        hs = spaces[i]
        if i == len(spaces) - 1:
            for entry in hs.classes():
                if entry.size == remaining:
                    yield (entry,)
            return
        for entry in hs.classes():
            rest = remaining - entry.size
            if rest < len(spaces) - 1 - i:
                continue
            for tail in self._tuples_of_size(i + 1, rest):
                yield (entry,) + tail

    def _tuples(self) -> Iterator[Tuple[ClassEntry, ...]]:
        """Tuples of start-class representatives by nondecreasing total size."""
        n = len(self.per_hole)
        if n == 0:
            yield ()
            return
        total = n
        while True:
            for hs in self.per_hole:
                hs.extend_to(total - (n - 1))
            if all(hs.closed for hs in self.per_hole):
                largest = sum(max((e.size for e in hs.classes()), default=0) for hs in self.per_hole)
                if total > largest:
                    return
            yield from self._tuples_of_size(0, total)
            total += 1

    def lookup_for(self, combo: Sequence[ClassEntry]) -> Callable[[str, Interpretation], Value]:
        by_hole = {hs.hole.name: (hs, entry) for hs, entry in zip(self.per_hole, combo)}

        def lookup(hole: str, interp: Interpretation) -> Value:
            hs, entry = by_hole[hole]
            return hs.value_at(entry, interp)

        return lookup

    def reset_cursor(self) -> None:
        self._cursor = self._tuples()

    @property
    def closed(self) -> bool:
        return all(hs.closed for hs in self.per_hole)


def init_search_space(sk: Sketch, **options) -> GlobalSpace:
    """Fresh space: no interpretations, empty caches, no constraints."""
    return GlobalSpace(sk, **options)


def enumerate_pass(hs: HoleSpace, size_cap: int) -> int:
    """Enumerate hs up to expressions of size_cap nodes; returns the number of new classes."""
    return hs.extend_to(size_cap)


def pick(gs: GlobalSpace) -> Optional[Completion]:
    """Next candidate satisfying every learned constraint, or None when the space is exhausted.

    Raises:
        CandidateBudgetError: If more than gs.candidate_budget candidates were considered
    """
    for combo in gs._cursor:
        if gs.tick is not None:
            gs.tick()
        exprs = tuple(entry.expr for entry in combo)
        if exprs in gs.seen:
            continue
        if gs.candidate_budget is not None and gs.enumerated >= gs.candidate_budget:
            raise CandidateBudgetError(f"More than {gs.candidate_budget} candidates")
        gs.seen.add(exprs)
        gs.enumerated += 1
        if not gs.no_pruning and not gs.constraints.satisfied_by(gs.lookup_for(combo)):
            gs.pruned += 1
            continue
        provenance = tuple(entry.key(False) for entry in combo)
        return Completion(gs.holes, exprs, provenance)
    return None


def prune(gs: GlobalSpace, pc: PruningConstraint) -> GlobalSpace:
    """Record a constraint; candidates are filtered against it lazily in pick."""
    gs.constraints.add(pc)
    return gs


def abstract(gs: GlobalSpace, pc: PruningConstraint) -> GlobalSpace:
    """Refine the classes of every hole pc mentions with the interpretations it introduces."""
    found = interps_of(pc)
    changed = False
    for hs in gs.per_hole:
        if hs.hole.name in found:
            added = hs.add_interps(found[hs.hole.name])
            if added:
                logger.debug(f"?{hs.hole.name}: {added} new interpretations ({len(hs.interps)} total)")
                changed = True
    if changed:
        gs.reset_cursor()
    return gs


def brute_force_keys(
    grammar: GrammarDecl,
    interps: Sequence[Interpretation],
    sorts: Mapping[str, int],
    depth: int,
) -> Dict[str, Set[Tuple[Value, ...]]]:
    """Value vectors of every expression derivable within depth production steps.

    Depth 1 covers productions without nonterminals; each further level applies
    one production over the vectors of the previous level.
    """
    envs = [a.as_dict() for a in interps]
    found: Dict[str, Set[Tuple[Value, ...]]] = {nt: set() for nt in grammar.nonterminals}
    for _ in range(depth):
        previous = {nt: list(v) for nt, v in found.items()}
        for prod in grammar.rules:
            pools = [previous[nt] for nt in prod.placeholders]
            for children in product(*pools):
                vec = []
                for j, env in enumerate(envs):
                    local = dict(env)
                    for slot, child in enumerate(children):
                        local[f"${slot}"] = child[j]
                    vec.append(evaluate(prod.template, local, sorts))
                found[prod.lhs].add(tuple(vec))
    return found


def all_interps(hole: HoleDecl, sorts: Mapping[str, int]) -> List[Interpretation]:
    """Every interpretation of a hole's arguments."""
    return list(interpretations(hole.args, sorts))
