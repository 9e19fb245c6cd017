"""
Pruning constraints learned from counterexamples.

A constraint is an and/or tree over atoms ``h(interp) /= value``. A completion
satisfies an atom when its expression for hole h does not evaluate to value
under interp. Generalizing a counterexample yields a constraint that its own
completion violates and that every completion exhibiting the same
counterexample violates too.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .checker import ActionInstance, Completion, Counterexample, Protocol, ViolationKind
from .exceptions import KindMismatchError
from .model import FALSE, TRUE, Interpretation, State, Value, evaluate, restrict, value_to_json
from .sketch import Fairness, Sketch

logger = logging.getLogger(__name__)

STANDARD = "standard"
EXACT_STUT = "exact_stut"


@dataclass(frozen=True)
class PruneAtom:
    """h(interp) /= constant"""
    hole: str
    interp: Interpretation
    constant: Value

    def to_json(self) -> Dict[str, object]:
        return {"hole": self.hole, "interp": self.interp.to_json(), "neq": value_to_json(self.constant)}

    def __str__(self) -> str:
        return f"?{self.hole}{self.interp} /= {self.constant}"


@dataclass(frozen=True)
class PruneOr:
    children: Tuple["PruningConstraint", ...] = ()

    def to_json(self) -> Dict[str, object]:
        return {"or": [c.to_json() for c in self.children]}

    def __str__(self) -> str:
        if not self.children:
            return "FALSE"
        return "Or[" + ", ".join(str(c) for c in self.children) + "]"


@dataclass(frozen=True)
class PruneAnd:
    children: Tuple["PruningConstraint", ...] = ()

    def to_json(self) -> Dict[str, object]:
        return {"and": [c.to_json() for c in self.children]}

    def __str__(self) -> str:
        if not self.children:
            return "TRUE"
        return "And[" + ", ".join(str(c) for c in self.children) + "]"


PruningConstraint = Union[PruneAtom, PruneOr, PruneAnd]
PRUNE_FALSE = PruneOr(())
PRUNE_TRUE = PruneAnd(())

# (hole, interpretation) -> value of the candidate's expression there
Lookup = Callable[[str, Interpretation], Value]


def atoms(pc: PruningConstraint) -> Iterator[PruneAtom]:
    """Atoms of a constraint in preorder."""
    if isinstance(pc, PruneAtom):
        yield pc
        return
    for child in pc.children:
        yield from atoms(child)


def interps_of(pc: PruningConstraint) -> Dict[str, List[Interpretation]]:
    """Per hole, the interpretations a constraint mentions, in first-appearance order."""
    found: Dict[str, List[Interpretation]] = {}
    for atom in atoms(pc):
        seen = found.setdefault(atom.hole, [])
        if atom.interp not in seen:
            seen.append(atom.interp)
    return found


def completion_lookup(c: Completion, sorts: Mapping[str, int]) -> Lookup:
    """Evaluate c's expressions on demand, memoizing per (hole, interpretation)."""
    exprs = c.as_dict()
    memo: Dict[Tuple[str, Interpretation], Value] = {}

    def lookup(hole: str, interp: Interpretation) -> Value:
        key = (hole, interp)
        if key not in memo:
            memo[key] = evaluate(exprs[hole], interp.as_dict(), sorts)
        return memo[key]

    return lookup


def _holds(pc: PruningConstraint, lookup: Lookup) -> bool:
    if isinstance(pc, PruneAtom):
        return lookup(pc.hole, pc.interp) != pc.constant
    if isinstance(pc, PruneOr):
        return any(_holds(child, lookup) for child in pc.children)
    return all(_holds(child, lookup) for child in pc.children)


def satisfies(c: Completion, pc: PruningConstraint, sorts: Mapping[str, int], lookup: Optional[Lookup] = None) -> bool:
    """Whether completion c satisfies pc.

    Args:
        c: Total completion
        pc: Constraint to evaluate
        sorts: Sort cardinalities used to evaluate c's expressions
        lookup: Precomputed hole values; overrides evaluating c
    """
    return _holds(pc, lookup or completion_lookup(c, sorts))


class ConstraintSet:
    """The conjunction of every constraint learned so far, with the interpretations it mentions."""

    def __init__(self):
        self.constraints: List[PruningConstraint] = []
        self.per_hole_interps: Dict[str, List[Interpretation]] = {}

    def add(self, pc: PruningConstraint) -> Dict[str, List[Interpretation]]:
        """Append a constraint.

        Returns:
            Per hole, the interpretations not mentioned by any earlier constraint
        """
        self.constraints.append(pc)
        fresh: Dict[str, List[Interpretation]] = {}
        for hole, interps in interps_of(pc).items():
            known = self.per_hole_interps.setdefault(hole, [])
            for interp in interps:
                if interp not in known:
                    known.append(interp)
                    fresh.setdefault(hole, []).append(interp)
        return fresh

    def satisfied_by(self, lookup: Lookup) -> bool:
        return all(_holds(pc, lookup) for pc in self.constraints)

    def interps_total(self) -> int:
        return sum(len(v) for v in self.per_hole_interps.values())

    def to_json(self) -> List[Dict[str, object]]:
        return [pc.to_json() for pc in self.constraints]

    def __len__(self) -> int:
        return len(self.constraints)


# ---------------------------------------------------------------------------
# Gadgets
# ---------------------------------------------------------------------------

def _interp(sk: Sketch, hole: str, s: State, inst: ActionInstance) -> Interpretation:
    return restrict(s, inst.params_dict(), sk.hole(hole).arg_names)


def chi_move(sk: Sketch, insts: Sequence[ActionInstance], states: Sequence[State], c: Completion) -> PruneOr:
    """Some post-hole of some instance leads somewhere other than under c."""
    lookup = completion_lookup(c, sk.sort_sizes)
    found = []
    for inst in insts:
        holes = sk.action(inst.action).post_holes
        for s in states:
            for h in holes:
                interp = _interp(sk, h, s, inst)
                found.append(PruneAtom(h, interp, lookup(h, interp)))
    return PruneOr(tuple(found))


def chi_disable(sk: Sketch, insts: Sequence[ActionInstance], states: Sequence[State]) -> PruneOr:
    """Some pre-hole of some instance is not true at some state."""
    return PruneOr(tuple(
        PruneAtom(h, _interp(sk, h, s, inst), TRUE)
        for inst in insts
        for s in states
        for h in sk.action(inst.action).pre_holes
    ))


def chi_enable(sk: Sketch, insts: Sequence[ActionInstance], states: Sequence[State]) -> PruneOr:
    """Some instance has no pre-hole that is false at any of the states."""
    return PruneOr(tuple(
        PruneAnd(tuple(
            PruneAtom(h, _interp(sk, h, s, inst), FALSE)
            for s in states
            for h in sk.action(inst.action).pre_holes
        ))
        for inst in insts
    ))


# ---------------------------------------------------------------------------
# Generalizers
# ---------------------------------------------------------------------------

def _expect(r: Counterexample, *kinds: ViolationKind) -> None:
    if r.kind not in kinds:
        raise KindMismatchError(f"Cannot generalize a {r.kind.value} counterexample here")


def _can_enable_at(proto: Protocol, s: State) -> List[ActionInstance]:
    return [inst for inst in proto.instances if proto.can_enable(s, inst)]


def _safe_atoms(r: Counterexample, c: Completion, sk: Sketch) -> Tuple[PruningConstraint, ...]:
    found: List[PruningConstraint] = []
    for s, inst, _ in r.transitions():
        found.extend(chi_move(sk, [inst], [s], c).children)
        found.extend(chi_disable(sk, [inst], [s]).children)
    return tuple(found)


def gen_safe(r: Counterexample, c: Completion, sk: Sketch) -> PruneOr:
    """Some transition of the run moves elsewhere or is disabled."""
    _expect(r, ViolationKind.SAFETY)
    return PruneOr(_safe_atoms(r, c, sk))


def gen_dead(r: Counterexample, c: Completion, sk: Sketch) -> PruneOr:
    _expect(r, ViolationKind.DEADLOCK)
    acts = _can_enable_at(Protocol(sk), r.last)
    return PruneOr(_safe_atoms(r, c, sk) + chi_enable(sk, acts, [r.last]).children)


def gen_live(r: Counterexample, c: Completion, sk: Sketch) -> PruneOr:
    """Break the run, or make the loop fair by enabling a fair instance it never takes.

    Strongly fair instances taken somewhere in the loop are excluded like weak ones:
    a loop that takes an instance is fair to it however often it is enabled.
    """
    _expect(r, ViolationKind.LIVENESS)
    proto = Protocol(sk)
    cycle = r.cycle
    taken = set(r.loop_taken)
    idle = [inst for inst in proto.instances if inst not in taken]
    weak = [
        inst for inst in idle
        if proto.fairness[inst] == Fairness.WEAK and all(proto.can_enable(s, inst) for s in cycle)
    ]
    parts = list(_safe_atoms(r, c, sk))
    parts.extend(chi_enable(sk, weak, cycle).children)
    for s in cycle:
        strong = [inst for inst in idle if proto.fairness[inst] == Fairness.STRONG and proto.can_enable(s, inst)]
        parts.extend(chi_enable(sk, strong, [s]).children)
    return PruneOr(tuple(parts))


def gen_stut(r: Counterexample, c: Completion, sk: Sketch) -> PruneOr:
    """Break the run, move an enabled fair instance, or enable a disabled fair one."""
    _expect(r, ViolationKind.STUTTERING)
    proto = Protocol(sk, c)
    last = r.last
    fair = [inst for inst in _can_enable_at(proto, last) if proto.fairness[inst] != Fairness.NONE]
    enabled = [inst for inst in fair if proto.is_enabled(last, inst)]
    disabled = [inst for inst in fair if not proto.is_enabled(last, inst)]
    return PruneOr(
        _safe_atoms(r, c, sk)
        + chi_move(sk, enabled, [last], c).children
        + chi_enable(sk, disabled, [last]).children
    )


def _keeps_state(proto: Protocol, sk: Sketch, s: State, inst: ActionInstance) -> bool:
    """Every fixed post-clause of inst leaves its variable unchanged at s."""
    env = proto.env(s, inst)
    for clause in sk.action(inst.action).post_clauses:
        if clause.hole is None and evaluate(clause.expr, env, proto.sorts) != s[clause.var]:
            return False
    return True


def gen_stut_alt(r: Counterexample, c: Completion, sk: Sketch) -> PruneOr:
    """Exact stuttering constraint: satisfied iff r is not a stuttering counterexample."""
    _expect(r, ViolationKind.STUTTERING)
    proto = Protocol(sk)
    last = r.last
    can_enable = _can_enable_at(proto, last)
    fair = [inst for inst in can_enable if proto.fairness[inst] != Fairness.NONE]
    same = [inst for inst in fair if _keeps_state(proto, sk, last, inst)]
    moving = [inst for inst in fair if inst not in same]

    unstut = []
    for inst in same:
        action = sk.action(inst.action)
        enable = tuple(PruneAtom(h, _interp(sk, h, last, inst), FALSE) for h in action.pre_holes)
        move = PruneOr(tuple(
            PruneAtom(clause.hole, _interp(sk, clause.hole, last, inst), last[clause.var])
            for clause in action.post_clauses if clause.hole is not None
        ))
        unstut.append(PruneAnd(enable + (move,)))

    deadlocked = PruneAnd(tuple(
        PruneOr(tuple(PruneAtom(h, _interp(sk, h, last, inst), TRUE) for h in sk.action(inst.action).pre_holes))
        for inst in can_enable
    ))
    return PruneOr(
        _safe_atoms(r, c, sk)
        + chi_enable(sk, moving, [last]).children
        + tuple(unstut)
        + (deadlocked,)
    )


def generalize(r: Counterexample, c: Completion, sk: Sketch, mode: str = STANDARD) -> PruneOr:
    """Constraint excluding c and every completion sharing counterexample r."""
    if r.kind == ViolationKind.SAFETY:
        return gen_safe(r, c, sk)
    if r.kind == ViolationKind.DEADLOCK:
        return gen_dead(r, c, sk)
    if r.kind == ViolationKind.LIVENESS:
        return gen_live(r, c, sk)
    if mode == EXACT_STUT:
        return gen_stut_alt(r, c, sk)
    return gen_stut(r, c, sk)
