"""
Explicit-state model checker for completed sketches.

Builds the reachable transition graph breadth first and reports the first
violation in a fixed order: safety, deadlock, liveness lassos, stuttering.
Fairness is per ground action instance: a weakly fair VoteYes(n) means every
instance VoteYes(node1), VoteYes(node2), ... is weakly fair on its own.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx

from .exceptions import CheckerError, NotEnabledError, StateBudgetExceededError
from .model import AtomT, Expr, State, Value, all_values, conjuncts, Eq, VarRef, evaluate, format_expr, free_names, value_to_json
from .sketch import ActionDecl, Fairness, Property, PropertyKind, Sketch

logger = logging.getLogger(__name__)


class ViolationKind(str, Enum):
    SAFETY = "safety"
    DEADLOCK = "deadlock"
    LIVENESS = "liveness"
    STUTTERING = "stuttering"


@dataclass(frozen=True)
class Completion:
    """One expression per hole, in hole declaration order.

    Attributes:
        holes: hole names
        exprs: the expression filling each hole
        provenance: per hole, the (nonterminal, value vector) class the expression represents
    """
    holes: Tuple[str, ...]
    exprs: Tuple[Expr, ...]
    provenance: Tuple[object, ...] = field(default=(), compare=False)

    @classmethod
    def of(cls, sk: Sketch, mapping: Mapping[str, Expr]) -> "Completion":
        names = tuple(h.name for h in sk.holes)
        return cls(names, tuple(mapping[n] for n in names))

    def as_dict(self) -> Dict[str, Expr]:
        return dict(zip(self.holes, self.exprs))

    def expr(self, hole: str) -> Expr:
        return self.exprs[self.holes.index(hole)]

    def to_json(self) -> Dict[str, str]:
        return {h: format_expr(e) for h, e in zip(self.holes, self.exprs)}

    def __str__(self) -> str:
        if not self.holes:
            return "(no holes)"
        return ", ".join(f"?{h} := {format_expr(e)}" for h, e in zip(self.holes, self.exprs))


@dataclass(frozen=True)
class ActionInstance:
    """An action with every parameter fixed."""
    action: str
    params: Tuple[Tuple[str, Value], ...] = ()

    def params_dict(self) -> Dict[str, Value]:
        return dict(self.params)

    def to_json(self) -> Dict[str, object]:
        return {"action": self.action, "params": {n: value_to_json(v) for n, v in self.params}}

    def __str__(self) -> str:
        return f"{self.action}({', '.join(str(v) for _, v in self.params)})"


@dataclass(frozen=True)
class Counterexample:
    """A run s0 -A1-> s1 ... -Ak-> sk annotated with the violation it witnesses.

    Attributes:
        kind: safety, deadlock, liveness or stuttering
        states: s0..sk
        taken: A1..Ak
        loop_start: liveness only, the index where the loop starts (states[loop_start] == states[-1])
        violated: the property the run violates (None for a plain deadlock)
    """
    kind: ViolationKind
    states: Tuple[State, ...]
    taken: Tuple[ActionInstance, ...]
    loop_start: Optional[int] = None
    violated: Optional[Property] = None

    @property
    def last(self) -> State:
        return self.states[-1]

    @property
    def cycle(self) -> Tuple[State, ...]:
        """States of the loop, without repeating its first state."""
        if self.loop_start is None:
            return ()
        return self.states[self.loop_start:-1] or (self.states[-1],)

    @property
    def loop_taken(self) -> Tuple[ActionInstance, ...]:
        if self.loop_start is None:
            return ()
        return self.taken[self.loop_start:]

    def transitions(self) -> Iterable[Tuple[State, ActionInstance, State]]:
        for i, inst in enumerate(self.taken):
            yield self.states[i], inst, self.states[i + 1]

    def to_json(self) -> Dict[str, object]:
        return {
            "kind": self.kind.value,
            "states": [s.to_json() for s in self.states],
            "taken": [a.to_json() for a in self.taken],
            "loop_start": self.loop_start,
            "violated": str(self.violated) if self.violated is not None else None,
        }


@dataclass
class StateGraph:
    """Reachable states indexed in discovery order, with labelled out-edges.

    Attributes:
        states: discovered states
        edges: per state, (instance, target index) in instance enumeration order
        initial: indices of the initial states
        parent: per state, the (predecessor, instance) it was first reached by
    """
    states: List[State] = field(default_factory=list)
    edges: List[List[Tuple[ActionInstance, int]]] = field(default_factory=list)
    initial: List[int] = field(default_factory=list)
    parent: List[Optional[Tuple[int, ActionInstance]]] = field(default_factory=list)
    index: Dict[State, int] = field(default_factory=dict)

    def add(self, s: State, parent: Optional[Tuple[int, ActionInstance]]) -> Tuple[int, bool]:
        i = self.index.get(s)
        if i is not None:
            return i, False
        i = len(self.states)
        self.index[s] = i
        self.states.append(s)
        self.edges.append([])
        self.parent.append(parent)
        return i, True

    def path_to(self, i: int) -> Tuple[List[State], List[ActionInstance]]:
        states, taken = [self.states[i]], []
        while self.parent[i] is not None:
            i, inst = self.parent[i]
            states.append(self.states[i])
            taken.append(inst)
        return states[::-1], taken[::-1]

    def __len__(self) -> int:
        return len(self.states)


class Protocol:
    """A sketch with its holes filled, ready for execution.

    Without a completion only the fixed parts are usable (is_can_enable).
    """

    def __init__(self, sk: Sketch, c: Optional[Completion] = None):
        self.sk = sk
        self.sorts = sk.sort_sizes
        self.names = sk.var_names
        fill = c.as_dict() if c is not None else None
        self.instances: List[ActionInstance] = []
        self.fairness: Dict[ActionInstance, Fairness] = {}
        self._params: Dict[ActionInstance, Dict[str, Value]] = {}
        self._fixed: Dict[str, Tuple[Expr, ...]] = {}
        self._hole_pres: Dict[str, Tuple[Expr, ...]] = {}
        self._updates: Dict[str, Tuple[Optional[Expr], ...]] = {}

        for a in sk.actions:
            self._fixed[a.name] = a.fixed_pres
            if fill is not None:
                self._hole_pres[a.name] = tuple(self._filled(fill, h) for h in a.pre_holes)
                updates = []
                for v in self.names:
                    clause = a.post_for(v)
                    updates.append(clause.expr if clause.hole is None else self._filled(fill, clause.hole))
                self._updates[a.name] = tuple(updates)
            for inst in action_instances(sk, a):
                self.instances.append(inst)
                self.fairness[inst] = a.fairness
                self._params[inst] = inst.params_dict()

    @staticmethod
    def _filled(fill: Mapping[str, Expr], hole: str) -> Expr:
        try:
            return fill[hole]
        except KeyError:
            raise CheckerError(f"Completion has no expression for ?{hole}") from None

    def env(self, s: State, inst: ActionInstance) -> Dict[str, Value]:
        env = dict(zip(self.names, s.values))
        env.update(self._params[inst])
        return env

    def can_enable(self, s: State, inst: ActionInstance) -> bool:
        env = self.env(s, inst)
        return all(evaluate(p, env, self.sorts).value for p in self._fixed[inst.action])

    def is_enabled(self, s: State, inst: ActionInstance) -> bool:
        env = self.env(s, inst)
        if not all(evaluate(p, env, self.sorts).value for p in self._fixed[inst.action]):
            return False
        return all(evaluate(p, env, self.sorts).value for p in self._hole_pres[inst.action])

    def apply(self, s: State, inst: ActionInstance) -> State:
        env = self.env(s, inst)
        return State(self.names, tuple(evaluate(u, env, self.sorts) for u in self._updates[inst.action]))

    def step(self, s: State) -> List[Tuple[ActionInstance, State]]:
        return [(inst, self.apply(s, inst)) for inst in self.instances if self.is_enabled(s, inst)]


def action_instances(sk: Sketch, action: ActionDecl) -> List[ActionInstance]:
    """Ground instances of one action in lexicographic parameter order."""
    names = [p for p, _ in action.params]
    domains = [all_values(AtomT(s), sk.sort_sizes) for _, s in action.params]
    return [ActionInstance(action.name, tuple(zip(names, combo))) for combo in product(*domains)]


def all_instances(sk: Sketch) -> List[ActionInstance]:
    """Every ground action instance: declaration order, then parameter order."""
    return [inst for a in sk.actions for inst in action_instances(sk, a)]


def initial_states(sk: Sketch) -> List[State]:
    """States satisfying init, in enumeration order.

    Conjuncts of the form v = closed-expression fix v directly; the remaining
    variables are enumerated.
    """
    sorts = sk.sort_sizes
    fixed: Dict[str, Value] = {}
    for part in conjuncts(sk.init):
        if isinstance(part, Eq) and isinstance(part.left, VarRef) and part.left.name in sk.var_types \
                and not free_names(part.right) and part.left.name not in fixed:
            fixed[part.left.name] = evaluate(part.right, {}, sorts)
    domains = [[fixed[n]] if n in fixed else all_values(t, sorts) for n, t in sk.vars]
    states = []
    for combo in product(*domains):
        env = dict(zip(sk.var_names, combo))
        if evaluate(sk.init, env, sorts).value:
            states.append(State(sk.var_names, combo))
    return states


def enabled_instances(sk: Sketch, c: Completion, s: State) -> List[ActionInstance]:
    """Instances whose fixed and hole pre-conditions all hold at s."""
    proto = Protocol(sk, c)
    return [inst for inst in proto.instances if proto.is_enabled(s, inst)]


def successor(sk: Sketch, c: Completion, s: State, ai: ActionInstance) -> State:
    """The state an enabled instance leads to.

    Raises:
        NotEnabledError: If ai is not enabled at s
    """
    proto = Protocol(sk, c)
    if ai not in proto.fairness or not proto.is_enabled(s, ai):
        raise NotEnabledError(f"{ai} is not enabled at {s}")
    return proto.apply(s, ai)


def is_can_enable(sk: Sketch, s: State, ai: ActionInstance) -> bool:
    """True iff every fixed (non-hole) pre-condition of ai holds at s."""
    return Protocol(sk).can_enable(s, ai)


def _expand(proto: Protocol, frontier: Sequence[State], workers: int) -> List[List[Tuple[ActionInstance, State]]]:
    if workers <= 1 or len(frontier) < 2:
        return [proto.step(s) for s in frontier]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(proto.step, frontier))


class _Explorer:
    """Breadth-first exploration with an optional on-the-fly safety check."""

    def __init__(self, proto: Protocol, state_budget: int, workers: int):
        self.proto = proto
        self.state_budget = state_budget
        self.workers = workers
        self.graph = StateGraph()

    def _admit(self, s: State, parent) -> Tuple[int, bool]:
        i, new = self.graph.add(s, parent)
        if new and len(self.graph) > self.state_budget:
            raise StateBudgetExceededError(f"More than {self.state_budget} reachable states")
        return i, new

    def run(self, invariants: Sequence[Property] = ()) -> Optional[Tuple[int, Property]]:
        sk = self.proto.sk
        sorts = self.proto.sorts

        def violated(s: State) -> Optional[Property]:
            env = s.as_dict()
            for prop in invariants:
                if not evaluate(prop.pred, env, sorts).value:
                    return prop
            return None

        frontier = []
        for s in initial_states(sk):
            i, new = self._admit(s, None)
            if new:
                self.graph.initial.append(i)
                frontier.append(i)
                bad = violated(s)
                if bad is not None:
                    return i, bad

        while frontier:
            expansions = _expand(self.proto, [self.graph.states[i] for i in frontier], self.workers)
            next_frontier = []
            for i, succs in zip(frontier, expansions):
                for inst, t in succs:
                    j, new = self._admit(t, (i, inst))
                    self.graph.edges[i].append((inst, j))
                    if new:
                        next_frontier.append(j)
                        bad = violated(t)
                        if bad is not None:
                            return j, bad
            frontier = next_frontier
        return None


def reachable_graph(sk: Sketch, c: Completion, state_budget: int = 1_000_000, workers: int = 1) -> StateGraph:
    """Breadth-first closure from the initial states, indices in discovery order.

    Raises:
        StateBudgetExceededError: If more than state_budget states are reachable
    """
    explorer = _Explorer(Protocol(sk, c), state_budget, workers)
    explorer.run()
    return explorer.graph


class _LivenessSearch:
    """Lasso and stuttering search for one liveness property over a finished graph."""

    def __init__(self, proto: Protocol, graph: StateGraph, prop: Property):
        self.proto = proto
        self.graph = graph
        self.prop = prop
        sorts = proto.sorts
        envs = [s.as_dict() for s in graph.states]
        if prop.kind == PropertyKind.EVENTUALLY:
            self.trigger = None
            self.bad = [not evaluate(prop.pred, e, sorts).value for e in envs]
        else:
            self.bad = [not evaluate(prop.goal, e, sorts).value for e in envs]
            self.trigger = [b and evaluate(prop.pred, e, sorts).value for b, e in zip(self.bad, envs)]
        self.enabled = [{inst for inst, _ in out} for out in graph.edges]
        self._phase_search()

    def _phase_search(self) -> None:
        """0-1 breadth-first search over (state, phase); phase 1 means the property is being violated."""
        graph = self.graph
        dist: Dict[Tuple[int, int], int] = {}
        self.back: Dict[Tuple[int, int], Optional[Tuple[Tuple[int, int], Optional[ActionInstance]]]] = {}
        queue = deque()
        for i in graph.initial:
            node = (i, 1) if self.trigger is None else (i, 0)
            if self.trigger is None and not self.bad[i]:
                continue
            if node not in dist:
                dist[node] = 0
                self.back[node] = None
                queue.append(node)
        while queue:
            node = queue.popleft()
            i, phase = node
            d = dist[node]
            if phase == 0 and self.trigger[i]:
                nxt = (i, 1)
                if dist.get(nxt, d + 1) > d:
                    dist[nxt] = d
                    self.back[nxt] = (node, None)
                    queue.appendleft(nxt)
            for inst, j in graph.edges[i]:
                if phase == 1 and not self.bad[j]:
                    continue
                nxt = (j, phase)
                if dist.get(nxt, d + 2) > d + 1:
                    dist[nxt] = d + 1
                    self.back[nxt] = (node, inst)
                    queue.append(nxt)
        self.dist1 = {i: d for (i, phase), d in dist.items() if phase == 1}

    def _prefix(self, i: int) -> Tuple[List[State], List[ActionInstance]]:
        states, taken = [self.graph.states[i]], []
        node = (i, 1)
        while self.back[node] is not None:
            prev, inst = self.back[node]
            if inst is not None:
                states.append(self.graph.states[prev[0]])
                taken.append(inst)
            node = prev
        return states[::-1], taken[::-1]

    def _fair_components(self, nodes: Set[int]) -> List[Set[int]]:
        sub = nx.DiGraph()
        sub.add_nodes_from(sorted(nodes))
        for i in sorted(nodes):
            for _, j in self.graph.edges[i]:
                if j in nodes:
                    sub.add_edge(i, j)
        found = []
        for comp in nx.strongly_connected_components(sub):
            if len(comp) == 1 and not sub.has_edge(next(iter(comp)), next(iter(comp))):
                continue
            labels = {inst for i in comp for inst, j in self.graph.edges[i] if j in comp}
            unfair_strong = {
                inst for i in comp for inst in self.enabled[i]
                if self.proto.fairness[inst] == Fairness.STRONG and inst not in labels
            }
            if unfair_strong:
                keep = {i for i in comp if not (self.enabled[i] & unfair_strong)}
                found.extend(self._fair_components(keep))
                continue
            weak_everywhere = any(
                self.proto.fairness[inst] == Fairness.WEAK and inst not in labels
                and all(inst in self.enabled[i] for i in comp)
                for inst in self.enabled[min(comp)]
            )
            if not weak_everywhere:
                found.append(comp)
        return found

    def _path_within(self, comp: Set[int], src: int, dst: int) -> List[Tuple[int, ActionInstance, int]]:
        if src == dst:
            return []
        back = {src: None}
        queue = deque([src])
        while queue:
            i = queue.popleft()
            for inst, j in self.graph.edges[i]:
                if j in comp and j not in back:
                    back[j] = (i, inst)
                    if j == dst:
                        path = []
                        while back[j] is not None:
                            p, a = back[j]
                            path.append((p, a, j))
                            j = p
                        return path[::-1]
                    queue.append(j)
        raise CheckerError("component is not strongly connected")

    def _loop(self, comp: Set[int], entry: int) -> List[Tuple[int, ActionInstance, int]]:
        order = {inst: k for k, inst in enumerate(self.proto.instances)}
        internal = [(i, inst, j) for i in sorted(comp) for inst, j in self.graph.edges[i] if j in comp]
        first_edge: Dict[ActionInstance, Tuple[int, ActionInstance, int]] = {}
        for edge in internal:
            if self.proto.fairness[edge[1]] != Fairness.NONE:
                first_edge.setdefault(edge[1], edge)
        labels = {inst for _, inst, _ in internal}

        walk: List[Tuple[int, ActionInstance, int]] = []
        cur = entry
        for inst in sorted(first_edge, key=order.__getitem__):
            u, a, v = first_edge[inst]
            walk += self._path_within(comp, cur, u)
            walk.append((u, a, v))
            cur = v
        for inst in sorted(self.enabled[entry], key=order.__getitem__):
            if self.proto.fairness[inst] != Fairness.WEAK or inst in labels:
                continue
            target = min(i for i in comp if inst not in self.enabled[i])
            walk += self._path_within(comp, cur, target)
            cur = target
        walk += self._path_within(comp, cur, entry)
        if not walk:
            u, a, v = next(e for e in internal if e[0] == entry)
            walk = [(u, a, v)] + self._path_within(comp, v, entry)
        return walk

    def find_lasso(self) -> Optional[Counterexample]:
        comps = self._fair_components(set(self.dist1))
        if not comps:
            return None
        comp = min(comps, key=lambda c: min((self.dist1[i], i) for i in c))
        entry = min(comp, key=lambda i: (self.dist1[i], i))
        states, taken = self._prefix(entry)
        loop_start = len(states) - 1
        for _, inst, j in self._loop(comp, entry):
            taken.append(inst)
            states.append(self.graph.states[j])
        return Counterexample(ViolationKind.LIVENESS, tuple(states), tuple(taken), loop_start, self.prop)

    def find_stutter(self, allow_deadlock: bool) -> Optional[Counterexample]:
        best = None
        for i, d in self.dist1.items():
            out = self.graph.edges[i]
            if not out:
                if not allow_deadlock:
                    continue
            elif any(self.proto.fairness[inst] != Fairness.NONE and j != i for inst, j in out):
                continue
            if best is None or (d, i) < best:
                best = (d, i)
        if best is None:
            return None
        i = best[1]
        states, taken = self._prefix(i)
        kind = ViolationKind.STUTTERING if self.graph.edges[i] else ViolationKind.DEADLOCK
        return Counterexample(kind, tuple(states), tuple(taken), None, self.prop)


def check(
    sk: Sketch,
    c: Completion,
    props: Sequence[Property],
    state_budget: int = 1_000_000,
    no_deadlock: bool = False,
    workers: int = 1,
) -> Optional[Counterexample]:
    """Model check a completion against properties.

    Args:
        sk: Validated sketch
        c: Total completion of sk
        props: Properties to check
        state_budget: Maximum number of reachable states
        no_deadlock: Skip deadlock detection
        workers: Threads used to expand each breadth-first level

    Returns:
        None when every property holds, otherwise the first violation found

    Raises:
        StateBudgetExceededError: If the state space outgrows state_budget
    """
    proto = Protocol(sk, c)
    explorer = _Explorer(proto, state_budget, workers)
    invariants = [p for p in props if p.is_safety]
    hit = explorer.run(invariants)
    graph = explorer.graph
    if hit is not None:
        i, prop = hit
        states, taken = graph.path_to(i)
        logger.debug(f"Safety violation of {prop} after {len(taken)} steps")
        return Counterexample(ViolationKind.SAFETY, tuple(states), tuple(taken), None, prop)
    logger.debug(f"Explored {len(graph)} states")

    if not no_deadlock:
        for i, out in enumerate(graph.edges):
            if not out:
                states, taken = graph.path_to(i)
                return Counterexample(ViolationKind.DEADLOCK, tuple(states), tuple(taken))

    searches = [_LivenessSearch(proto, graph, p) for p in props if not p.is_safety]
    for search in searches:
        lasso = search.find_lasso()
        if lasso is not None:
            return lasso
    for search in searches:
        stutter = search.find_stutter(allow_deadlock=no_deadlock)
        if stutter is not None:
            return stutter
    return None


# ---------------------------------------------------------------------------
# Replaying a recorded run against another completion
# ---------------------------------------------------------------------------

def _violates(prop: Property, states: Sequence[State], loop_start: Optional[int], sorts) -> bool:
    """Whether the infinite run induced by states violates a liveness property.

    With loop_start None the run stutters forever on its last state.
    """
    envs = [s.as_dict() for s in states]
    if prop.kind == PropertyKind.EVENTUALLY:
        return not any(evaluate(prop.pred, e, sorts).value for e in envs)
    q = [evaluate(prop.goal, e, sorts).value for e in envs]
    p = [evaluate(prop.pred, e, sorts).value for e in envs]
    repeat_from = len(states) - 1 if loop_start is None else loop_start
    if any(q[repeat_from:]):
        return False
    return any(p[i] and not any(q[i:]) for i in range(len(states)))


def is_run(proto: Protocol, r: Counterexample) -> bool:
    """Whether r's states and instances form a run of the protocol from an initial state."""
    sk = proto.sk
    if not evaluate(sk.init, r.states[0].as_dict(), proto.sorts).value:
        return False
    for s, inst, t in r.transitions():
        if not proto.is_enabled(s, inst) or proto.apply(s, inst) != t:
            return False
    return True


def replay(sk: Sketch, c: Completion, r: Counterexample, no_deadlock: bool = False) -> bool:
    """Whether r is a counterexample of the same kind for completion c."""
    proto = Protocol(sk, c)
    if not is_run(proto, r):
        return False
    sorts = proto.sorts
    last = r.last
    if r.kind == ViolationKind.SAFETY:
        return not evaluate(r.violated.pred, last.as_dict(), sorts).value
    enabled_last = [inst for inst in proto.instances if proto.is_enabled(last, inst)]
    if r.kind == ViolationKind.DEADLOCK:
        if enabled_last:
            return False
        return r.violated is None or _violates(r.violated, r.states, None, sorts)
    if r.kind == ViolationKind.STUTTERING:
        if not enabled_last:
            return False
        for inst in enabled_last:
            if proto.fairness[inst] != Fairness.NONE and proto.apply(last, inst) != last:
                return False
        return _violates(r.violated, r.states, None, sorts)

    # liveness: the loop must be neither strongly nor weakly fair
    if r.loop_start is None or r.states[r.loop_start] != last or not r.loop_taken:
        return False
    cycle = r.cycle
    taken = set(r.loop_taken)
    for inst in proto.instances:
        if inst in taken:
            continue
        fairness = proto.fairness[inst]
        if fairness == Fairness.STRONG and any(proto.is_enabled(s, inst) for s in cycle):
            return False
        if fairness == Fairness.WEAK and all(proto.is_enabled(s, inst) for s in cycle):
            return False
    return _violates(r.violated, r.states, r.loop_start, sorts)
