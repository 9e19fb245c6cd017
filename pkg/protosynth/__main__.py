"""Command-line interface for protosynth."""

import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click

from .cegis import Outcome, SynthResult, synth
from .checker import Completion, Counterexample, check
from .config import RunConfig, SynthConfig
from .exceptions import ConfigurationError, SketchError, StateBudgetExceededError, SynthesisError
from .parser import load_sketch
from .reduction import HoleSpace, all_interps, brute_force_keys
from .report import ClassesReport, HoleClasses, check_report, synth_report

EXIT_OK = 0
EXIT_FOUND = 1
EXIT_LIMIT = 2
EXIT_USAGE = 3

# Configure logging
logging.basicConfig(
    level=logging.WARNING,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
logger = logging.getLogger(__name__)


def _set_verbosity(verbose: int) -> None:
    if verbose >= 2:
        logging.getLogger('protosynth').setLevel(logging.DEBUG)
    elif verbose == 1:
        logging.getLogger('protosynth').setLevel(logging.INFO)


def _load(ctx: click.Context, path: str):
    try:
        return load_sketch(path)
    except SketchError as e:
        for diagnostic in e.diagnostics:
            click.echo(diagnostic.format(path), err=True)
        ctx.exit(EXIT_USAGE)
    except OSError as e:
        click.echo(f"Cannot read {path}: {e}", err=True)
        ctx.exit(EXIT_USAGE)


def _validated(ctx: click.Context, **fields) -> RunConfig:
    try:
        config = RunConfig(**fields)
        config.validate()
        return config
    except ConfigurationError as e:
        click.echo(f"Configuration error: {e}", err=True)
        ctx.exit(EXIT_USAGE)


def _write_json(path: Optional[str], payload) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _format_run(cex: Counterexample) -> List[str]:
    lines = []
    for i, s in enumerate(cex.states):
        marker = "  <- loop starts here" if cex.loop_start == i else ""
        lines.append(f"  {i}: {s}{marker}")
        if i < len(cex.taken):
            lines.append(f"       -- {cex.taken[i]} -->")
    return lines


def _print_synth_text(result: SynthResult) -> None:
    s = result.stats
    click.echo(f"Outcome: {result.outcome.value}")
    if result.completion is not None:
        for hole, expr in result.completion.to_json().items():
            click.echo(f"  ?{hole} := {expr}")
    if result.reason:
        click.echo(f"  {result.reason}")
    click.echo(
        f"Iterations: {s.iterations}  checker calls: {s.verifier_calls}  "
        f"candidates: {s.candidates_enumerated} ({s.candidates_pruned} pruned)  "
        f"constraints: {s.constraints_added}  interpretations: {s.interps_total}"
    )
    click.echo(f"Wall time: {s.wall_time:.2f}s")


@click.group()
@click.version_option(package_name='protosynth')
def cli():
    """Synthesize distributed protocols from sketches.

    Examples:

        # Fill the holes of a sketch
        protosynth synth protosynth/corpus/toy2pc.sketch

        # Model check a sketch without holes, JSON report on stdout
        protosynth check protosynth/corpus/toy2pc_completed.sketch --json

        # Compare the class cache of every hole with a brute-force enumeration
        protosynth enumerate-classes protosynth/corpus/toy2pc.sketch --interps 2
    """


@cli.command('synth')
@click.argument('sketch', type=click.Path())
@click.option('--timeout', 'timeout_seconds', type=float, default=3600.0, help='Wall-clock limit in seconds (default: 3600)')
@click.option('--state-budget', type=int, default=1_000_000, help='Maximum reachable states per check (default: 1000000)')
@click.option('--candidate-budget', type=int, help='Maximum candidates to consider (default: unbounded)')
@click.option('--no-pruning', is_flag=True, help='Ignore learned constraints when picking candidates')
@click.option('--no-reduction', is_flag=True, help='Treat every expression as its own class')
@click.option('--exact-stut', is_flag=True, help='Generalize stuttering counterexamples exactly')
@click.option('--no-deadlock', is_flag=True, help='Do not report deadlocks')
@click.option('--workers', type=int, default=1, help='Threads for state-space expansion (default: 1)')
@click.option('--json', 'as_json', is_flag=True, help='Print a JSON report')
@click.option('--dump-constraints', type=click.Path(), help='Write the learned constraints as JSON')
@click.option('--dump-cache', type=click.Path(), help='Write the final class caches as JSON')
@click.option('--verbose', '-v', count=True, help='-v: one line per iteration, -vv: candidates and constraints')
@click.pass_context
def synth_command(
    ctx: click.Context,
    sketch: str,
    timeout_seconds: float,
    state_budget: int,
    candidate_budget: Optional[int],
    no_pruning: bool,
    no_reduction: bool,
    exact_stut: bool,
    no_deadlock: bool,
    workers: int,
    as_json: bool,
    dump_constraints: Optional[str],
    dump_cache: Optional[str],
    verbose: int,
):
    """Search for a completion of SKETCH that satisfies its properties."""
    _set_verbosity(verbose)
    config = _validated(
        ctx,
        input_path=sketch,
        mode="synth",
        output="json" if as_json else "text",
        synth=SynthConfig(
            timeout_seconds=timeout_seconds,
            state_budget=state_budget,
            candidate_budget=candidate_budget,
            no_pruning=no_pruning,
            no_reduction=no_reduction,
            exact_stut=exact_stut,
            no_deadlock=no_deadlock,
            workers=workers,
            verbosity=verbose,
        ),
    )
    sk, props = _load(ctx, sketch)

    try:
        result = synth(sk, props, config.synth)
    except SynthesisError as e:
        logger.exception("Synthesis aborted")
        click.echo(f"Internal error: {e}", err=True)
        ctx.exit(EXIT_LIMIT)

    if dump_constraints:
        _write_json(dump_constraints, result.space.constraints.to_json())
    if dump_cache:
        _write_json(dump_cache, [hs.to_json() for hs in result.space.per_hole])

    if config.output == "json":
        click.echo(synth_report(sketch, result).model_dump_json(indent=2))
    else:
        _print_synth_text(result)

    codes = {
        Outcome.SOLUTION: EXIT_OK,
        Outcome.UNREALIZABLE: EXIT_FOUND,
        Outcome.TIMEOUT: EXIT_LIMIT,
        Outcome.BUDGET: EXIT_LIMIT,
    }
    ctx.exit(codes[result.outcome])


@cli.command('check')
@click.argument('sketch', type=click.Path())
@click.option('--state-budget', type=int, default=1_000_000, help='Maximum reachable states (default: 1000000)')
@click.option('--no-deadlock', is_flag=True, help='Do not report deadlocks')
@click.option('--workers', type=int, default=1, help='Threads for state-space expansion (default: 1)')
@click.option('--json', 'as_json', is_flag=True, help='Print a JSON report')
@click.option('--verbose', '-v', count=True, help='Enable verbose logging')
@click.pass_context
def check_command(
    ctx: click.Context,
    sketch: str,
    state_budget: int,
    no_deadlock: bool,
    workers: int,
    as_json: bool,
    verbose: int,
):
    """Model check SKETCH, which must not contain holes."""
    _set_verbosity(verbose)
    config = _validated(
        ctx,
        input_path=sketch,
        mode="check",
        output="json" if as_json else "text",
        synth=SynthConfig(state_budget=state_budget, no_deadlock=no_deadlock, workers=workers, verbosity=verbose),
    )
    sk, props = _load(ctx, sketch)
    if sk.holes:
        click.echo(f"{sketch} has {len(sk.holes)} holes; use synth instead", err=True)
        ctx.exit(EXIT_USAGE)

    try:
        cex = check(
            sk,
            Completion((), ()),
            props,
            state_budget=config.synth.state_budget,
            no_deadlock=config.synth.no_deadlock,
            workers=config.synth.workers,
        )
    except StateBudgetExceededError as e:
        click.echo(f"State budget exceeded: {e}", err=True)
        ctx.exit(EXIT_LIMIT)

    if config.output == "json":
        click.echo(check_report(sketch, cex).model_dump_json(indent=2))
    elif cex is None:
        click.echo(f"OK: {len(props)} properties hold")
    else:
        violated = f" of {cex.violated}" if cex.violated is not None else ""
        click.echo(f"Violation ({cex.kind.value}){violated}:")
        for line in _format_run(cex):
            click.echo(line)

    ctx.exit(EXIT_OK if cex is None else EXIT_FOUND)


@cli.command('enumerate-classes')
@click.argument('sketch', type=click.Path())
@click.option('--interps', type=int, help='Interpretations per hole, taken in enumeration order (default: all)')
@click.option('--oracle-depth', type=int, default=4, help='Derivation depth of the brute-force cross-check (default: 4)')
@click.option('--json', 'as_json', is_flag=True, help='Print a JSON report')
@click.option('--verbose', '-v', count=True, help='Enable verbose logging')
@click.pass_context
def enumerate_classes_command(
    ctx: click.Context,
    sketch: str,
    interps: Optional[int],
    oracle_depth: int,
    as_json: bool,
    verbose: int,
):
    """Enumerate the expression classes of every hole of SKETCH to closure."""
    _set_verbosity(verbose)
    config = _validated(
        ctx,
        input_path=sketch,
        mode="enumerate-classes",
        output="json" if as_json else "text",
        interps=interps,
        oracle_depth=oracle_depth,
    )
    sk, _ = _load(ctx, sketch)
    sorts = sk.sort_sizes

    rows = []
    for hole in sk.holes:
        chosen = all_interps(hole, sorts)
        if config.interps is not None:
            chosen = chosen[:config.interps]
        hs = HoleSpace(hole, sorts)
        hs.add_interps(chosen)
        while not hs.closed:
            hs.extend_to(hs.level + 1)
        oracle = brute_force_keys(hole.grammar, chosen, sorts, config.oracle_depth)
        cached = {nt: {e.values for e in hs.classes(nt)} for nt in hole.grammar.nonterminals}
        missing = sum(len(oracle[nt] - cached[nt]) for nt in hole.grammar.nonterminals)
        rows.append(HoleClasses(
            hole=hole.name,
            interps=len(chosen),
            closed=hs.closed,
            classes={nt: len(v) for nt, v in cached.items()},
            oracle_classes={nt: len(v) for nt, v in oracle.items()},
            missing=missing,
            coverage_ok=missing == 0,
        ))

    if config.output == "json":
        report = ClassesReport(input=sketch, oracle_depth=config.oracle_depth, holes=rows)
        click.echo(report.model_dump_json(indent=2))
    else:
        for row in rows:
            counts = ", ".join(f"{nt}: {n} (oracle {row.oracle_classes[nt]})" for nt, n in row.classes.items())
            status = "ok" if row.coverage_ok else f"{row.missing} classes missing"
            click.echo(f"?{row.hole} [{row.interps} interpretations] {counts} -- {status}")

    ctx.exit(EXIT_OK if all(row.coverage_ok for row in rows) else EXIT_FOUND)


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit code."""
    try:
        code = cli.main(args=argv, prog_name='protosynth', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    return code or 0


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
