"""Configuration management for synthesis and model-checking runs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .exceptions import ConfigurationError


MODES = ("synth", "check", "enumerate-classes")
OUTPUTS = ("text", "json")


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the synthesis loop and the checker it drives.

    Attributes:
        timeout_seconds: wall-clock limit for one synthesis run
        state_budget: maximum number of reachable states per model-checking call
        candidate_budget: maximum number of candidates Pick may produce (None = unbounded)
        no_pruning: ignore accumulated pruning constraints when picking candidates
        no_reduction: key enumerated expressions by syntax instead of by value vectors
        exact_stut: generalize stuttering counterexamples with the exact constraint
        no_deadlock: skip deadlock detection in the checker
        workers: threads used to expand breadth-first frontiers
        verbosity: 0 = quiet, 1 = one line per iteration, 2 = candidates and constraints
    """
    timeout_seconds: float = 3600.0
    state_budget: int = 1_000_000
    candidate_budget: Optional[int] = None
    no_pruning: bool = False
    no_reduction: bool = False
    exact_stut: bool = False
    no_deadlock: bool = False
    workers: int = 1
    verbosity: int = 0

    @classmethod
    def from_options(cls, **overrides) -> "SynthConfig":
        """Create a configuration, ignoring overrides that are None.

        Args:
            **overrides: Override specific config values

        Returns:
            SynthConfig instance

        Raises:
            ConfigurationError: If an override names an unknown setting or is invalid
        """
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigurationError(f"Unknown settings: {', '.join(sorted(unknown))}")

        config = cls(**{k: v for k, v in overrides.items() if v is not None})
        config.validate()
        return config

    def validate(self) -> None:
        """Validate configuration values.

        Raises:
            ConfigurationError: If any configuration value is invalid
        """
        if self.timeout_seconds <= 0:
            raise ConfigurationError("timeout_seconds must be positive")

        if self.state_budget < 1:
            raise ConfigurationError("state_budget must be at least 1")

        if self.candidate_budget is not None and self.candidate_budget < 1:
            raise ConfigurationError("candidate_budget must be at least 1")

        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")

        if self.verbosity < 0:
            raise ConfigurationError("verbosity cannot be negative")


@dataclass(frozen=True)
class RunConfig:
    """Configuration for one command-line invocation.

    Attributes:
        input_path: path of the .sketch file
        mode: synth, check or enumerate-classes
        output: text or json
        synth: settings forwarded to the synthesizer and checker
        interps: enumerate-classes only, number of interpretations per hole (None = all)
        oracle_depth: enumerate-classes only, derivation depth of the brute-force cross-check
    """
    input_path: str
    mode: str = "synth"
    output: str = "text"
    synth: SynthConfig = field(default_factory=SynthConfig)
    interps: Optional[int] = None
    oracle_depth: int = 4

    def validate(self) -> None:
        """Validate the invocation, including mode/flag compatibility.

        Raises:
            ConfigurationError: If any value is invalid or flags do not fit the mode
        """
        if self.mode not in MODES:
            raise ConfigurationError(f"Invalid mode: {self.mode}. Must be one of: {', '.join(MODES)}")

        if self.output not in OUTPUTS:
            raise ConfigurationError(f"Invalid output: {self.output}. Must be one of: {', '.join(OUTPUTS)}")

        if self.interps is not None and self.interps < 0:
            raise ConfigurationError("interps cannot be negative")

        if self.oracle_depth < 1:
            raise ConfigurationError("oracle_depth must be at least 1")

        search_flags = self.synth.no_pruning or self.synth.no_reduction or self.synth.exact_stut
        if self.mode != "synth" and search_flags:
            raise ConfigurationError(
                "--no-pruning, --no-reduction and --exact-stut only apply to synth mode"
            )

        self.synth.validate()
