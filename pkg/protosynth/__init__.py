"""Synthesis of distributed protocols from sketches.

A sketch is a protocol whose pre-conditions and post-clauses may be left open
as holes, each with a grammar of candidate expressions. protosynth searches the
grammars for a completion that satisfies the sketch's safety and liveness
properties, or proves that none exists.

Example:
    >>> from protosynth import load_sketch, synth
    >>> sk, props = load_sketch("protosynth/corpus/toy2pc.sketch")
    >>> result = synth(sk, props)
    >>> print(result.outcome.value, result.completion)
    solution ?h1 := vote_yes union {n}
"""

from .cegis import Outcome, SynthResult, SynthStats, ablate, synth
from .checker import ActionInstance, Completion, Counterexample, ViolationKind, check, replay
from .config import RunConfig, SynthConfig
from .exceptions import (
    CheckerError,
    ConfigurationError,
    InternalError,
    KindMismatchError,
    SketchError,
    StateBudgetExceededError,
    SynthesisError,
)
from .parser import load_sketch, parse_sketch
from .pruning import generalize, satisfies
from .sketch import Property, Sketch, pretty_print, validate

__version__ = "0.1.0"

__all__ = [
    "synth",
    "ablate",
    "check",
    "replay",
    "generalize",
    "satisfies",
    "parse_sketch",
    "load_sketch",
    "pretty_print",
    "validate",
    "Sketch",
    "Property",
    "Completion",
    "Counterexample",
    "ActionInstance",
    "ViolationKind",
    "Outcome",
    "SynthResult",
    "SynthStats",
    "SynthConfig",
    "RunConfig",
    "SynthesisError",
    "ConfigurationError",
    "SketchError",
    "CheckerError",
    "StateBudgetExceededError",
    "KindMismatchError",
    "InternalError",
]
