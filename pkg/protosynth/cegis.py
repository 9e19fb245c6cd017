"""
Counterexample-guided synthesis loop.

pick a candidate -> model check it -> generalize the counterexample into a
pruning constraint -> record it and refine the classes of the holes it mentions
-> repeat, until a candidate passes or the space runs out.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Set, Tuple

from .checker import Completion, Counterexample, check, replay
from .config import SynthConfig
from .exceptions import CandidateBudgetError, InternalError, StateBudgetExceededError, SynthTimeoutError
from .model import Expr, size
from .pruning import EXACT_STUT, STANDARD, atoms, generalize, satisfies
from .reduction import GlobalSpace, abstract, init_search_space, pick, prune
from .sketch import Property, Sketch

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    SOLUTION = "solution"
    UNREALIZABLE = "unrealizable"
    TIMEOUT = "timeout"
    BUDGET = "budget"


@dataclass
class SynthStats:
    """Counters of one synthesis run.

    Attributes:
        candidates_enumerated: candidate tuples considered by pick
        candidates_pruned: candidates rejected by the constraints without a checker call
        verifier_calls: candidates model checked
        constraints_added: pruning constraints learned
        interps_total: interpretations collected over all holes
        classes_per_hole: classes in each hole's cache at the end
        iterations: loop iterations
        wall_time: seconds spent in synth
    """
    candidates_enumerated: int = 0
    candidates_pruned: int = 0
    verifier_calls: int = 0
    constraints_added: int = 0
    interps_total: int = 0
    classes_per_hole: Dict[str, int] = field(default_factory=dict)
    iterations: int = 0
    wall_time: float = 0.0


@dataclass
class SynthResult:
    """Outcome of a synthesis run.

    Attributes:
        outcome: solution, unrealizable, timeout or budget
        stats: run counters
        completion: the solution, when outcome is solution
        reason: what ran out, for timeout and budget outcomes
        space: the final candidate space, for cache dumps
    """
    outcome: Outcome
    stats: SynthStats
    completion: Optional[Completion] = None
    reason: Optional[str] = None
    space: Optional[GlobalSpace] = field(default=None, repr=False, compare=False)

    @property
    def solved(self) -> bool:
        return self.outcome == Outcome.SOLUTION


def ablate(
    config: SynthConfig,
    no_pruning: Optional[bool] = None,
    no_reduction: Optional[bool] = None,
    exact_stut: Optional[bool] = None,
) -> SynthConfig:
    """Copy of config with search features switched off or on."""
    changes = {
        "no_pruning": no_pruning,
        "no_reduction": no_reduction,
        "exact_stut": exact_stut,
    }
    return dataclasses.replace(config, **{k: v for k, v in changes.items() if v is not None})


class _Synthesizer:

    def __init__(self, sk: Sketch, props: Sequence[Property], config: SynthConfig):
        self.sk = sk
        self.props = list(props)
        self.config = config
        self.mode = EXACT_STUT if config.exact_stut else STANDARD
        self.stats = SynthStats()
        self._started = time.monotonic()
        self._deadline = self._started + config.timeout_seconds
        self.space = init_search_space(
            sk,
            no_reduction=config.no_reduction,
            no_pruning=config.no_pruning,
            candidate_budget=config.candidate_budget,
            tick=self._tick,
        )
        self._verified: Set[Tuple[Expr, ...]] = set()

    def _tick(self) -> None:
        if time.monotonic() > self._deadline:
            raise SynthTimeoutError(f"No result within {self.config.timeout_seconds} seconds")

    def _check(self, candidate: Completion) -> Optional[Counterexample]:
        return check(
            self.sk,
            candidate,
            self.props,
            state_budget=self.config.state_budget,
            no_deadlock=self.config.no_deadlock,
            workers=self.config.workers,
        )

    def _learn(self, candidate: Completion, cex: Counterexample) -> None:
        if not replay(self.sk, candidate, cex, no_deadlock=self.config.no_deadlock):
            raise InternalError(f"Checker returned an invalid {cex.kind.value} counterexample for {candidate}")

        pc = generalize(cex, candidate, self.sk, self.mode)
        if satisfies(candidate, pc, self.sk.sort_sizes):
            raise InternalError(f"Constraint from a {cex.kind.value} counterexample does not exclude {candidate}")

        prune(self.space, pc)
        abstract(self.space, pc)
        self.stats.constraints_added += 1

        logger.info(
            f"Iteration {self.stats.iterations}: size {sum(size(e) for e in candidate.exprs)}, "
            f"{cex.kind.value} counterexample of length {len(cex.taken)}, "
            f"constraint with {sum(1 for _ in atoms(pc))} atoms"
        )
        if self.config.verbosity >= 2:
            logger.debug(f"Candidate: {candidate}")
            logger.debug(f"Constraint: {pc}")

    def run(self) -> SynthResult:
        logger.info(f"Synthesizing {len(self.sk.holes)} holes against {len(self.props)} properties")
        completion = None
        reason = None
        try:
            while True:
                self._tick()
                candidate = pick(self.space)
                if candidate is None:
                    outcome = Outcome.UNREALIZABLE
                    break
                if candidate.exprs in self._verified:
                    raise InternalError(f"Candidate proposed twice: {candidate}")
                self._verified.add(candidate.exprs)
                self.stats.iterations += 1

                self.stats.verifier_calls += 1
                cex = self._check(candidate)
                if cex is None:
                    if self._check(candidate) is not None:
                        raise InternalError(f"Solution failed re-verification: {candidate}")
                    outcome = Outcome.SOLUTION
                    completion = candidate
                    break

                self._tick()
                self._learn(candidate, cex)
        except SynthTimeoutError as e:
            logger.warning(str(e))
            outcome, reason = Outcome.TIMEOUT, str(e)
        except (CandidateBudgetError, StateBudgetExceededError) as e:
            logger.warning(str(e))
            outcome, reason = Outcome.BUDGET, str(e)

        self._finish_stats()
        logger.info(
            f"Finished with {outcome.value} after {self.stats.iterations} iterations "
            f"({self.stats.verifier_calls} checker calls, {self.stats.wall_time:.2f}s)"
        )
        return SynthResult(outcome, self.stats, completion, reason, self.space)

    def _finish_stats(self) -> None:
        stats = self.stats
        stats.candidates_enumerated = self.space.enumerated
        stats.candidates_pruned = self.space.pruned
        stats.interps_total = sum(len(hs.interps) for hs in self.space.per_hole)
        stats.classes_per_hole = {hs.hole.name: len(hs.classes()) for hs in self.space.per_hole}
        stats.wall_time = time.monotonic() - self._started


def synth(sk: Sketch, props: Sequence[Property], config: Optional[SynthConfig] = None) -> SynthResult:
    """Search for a completion of sk satisfying every property.

    Args:
        sk: Validated sketch
        props: Properties the completed protocol must satisfy
        config: Search settings; defaults to SynthConfig()

    Returns:
        SynthResult with outcome solution, unrealizable, timeout or budget

    Raises:
        InternalError: If a runtime invariant of the loop is breached
    """
    return _Synthesizer(sk, props, config or SynthConfig()).run()
