"""JSON report models for the command-line front end."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from .cegis import SynthResult
from .checker import Counterexample


class StatsReport(BaseModel):
    """Synthesis counters. Wall time is left out so reports are reproducible byte for byte."""
    candidates_enumerated: int
    candidates_pruned: int
    verifier_calls: int
    constraints_added: int
    interps_total: int
    classes_per_hole: Dict[str, int]
    iterations: int


class SynthReport(BaseModel):
    """Result of the synth command"""
    command: str = "synth"
    input: str
    outcome: str
    completion: Optional[Dict[str, str]] = None
    reason: Optional[str] = None
    stats: StatsReport


class CheckReport(BaseModel):
    """Result of the check command"""
    command: str = "check"
    input: str
    outcome: str
    counterexample: Optional[Dict[str, Any]] = None


class HoleClasses(BaseModel):
    """Class counts of one hole, next to the brute-force oracle's counts"""
    hole: str
    interps: int
    closed: bool
    classes: Dict[str, int]
    oracle_classes: Dict[str, int]
    missing: int
    coverage_ok: bool


class ClassesReport(BaseModel):
    """Result of the enumerate-classes command"""
    command: str = "enumerate-classes"
    input: str
    oracle_depth: int
    holes: List[HoleClasses]


def synth_report(path: str, result: SynthResult) -> SynthReport:
    s = result.stats
    return SynthReport(
        input=path,
        outcome=result.outcome.value,
        completion=result.completion.to_json() if result.completion is not None else None,
        reason=result.reason,
        stats=StatsReport(
            candidates_enumerated=s.candidates_enumerated,
            candidates_pruned=s.candidates_pruned,
            verifier_calls=s.verifier_calls,
            constraints_added=s.constraints_added,
            interps_total=s.interps_total,
            classes_per_hole=s.classes_per_hole,
            iterations=s.iterations,
        ),
    )


def check_report(path: str, cex: Optional[Counterexample]) -> CheckReport:
    if cex is None:
        return CheckReport(input=path, outcome="ok")
    return CheckReport(input=path, outcome="violation", counterexample=cex.to_json())
