"""Property harness over generated programs.

Every seed yields one program. Well-typed runs evaluate it and check progress, blame,
preservation between adjacent configurations, simulation of every adjacent pair through
the compiler, and that halting errors survive compilation. Near-ill-typed runs only ask
the checker to reject. Seeds are split into contiguous shards, one per worker, and the
shard reports are merged in seed order.
"""

from __future__ import annotations

import logging
import random
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from corechkc.checker import TypeChecker, check_fun, subtype, type_expr
from corechkc.compiler import compile_config, compile_fun, compile_program
from corechkc.core import check_structs, close_type, literals
from corechkc.corec_eval import CoreCOutcome, eval_corec, erase
from corechkc.errors import ModelError
from corechkc.genprop.generator import Relaxation, gen_program, inject_unchecked
from corechkc.genprop.shrink import shrink
from corechkc.models.report import Counterexample, GenConfig, GenMode, PropertyReport
from corechkc.models.state import CHeap, Heap, Stack
from corechkc.models.syntax import Deref, Expr, If, Mode, Program, Type, Var
from corechkc.printer import print_program, print_type
from corechkc.semantics import EvalOutcome, Halt, Status, heap_consistent, run_program

logger = logging.getLogger(__name__)

# CoreC needs several steps per source step.
COREC_FUEL_FACTOR = 50
MAX_TRACE_LINES = 40
MIN_TERMS_PER_WORKER = 50


@dataclass(frozen=True, slots=True)
class Verdict:
    result: bool | None
    step: int | None = None
    detail: str = ""


PASS = Verdict(True)
INCONCLUSIVE = Verdict(None)

PropertyCheck = Callable[[Program, EvalOutcome, GenConfig], Verdict]


def flatten(program: Program) -> str:
    return " ".join(print_program(program).split())


def check_with_coverage(program: Program) -> tuple[Type, dict[str, int]]:
    """Like :func:`check_program`, also returning rule counts for main."""
    check_structs(program.structs)
    for fdef in program.funs.values():
        check_fun(fdef, program.funs, program.structs)
    checker = TypeChecker(program.funs, program.structs)
    ty = checker.type_of({}, {}, Mode.CHECKED, program.main)
    return ty, dict(checker.coverage)


def _configs(outcome: EvalOutcome, main: Expr) -> list[tuple[Stack, Heap, Expr | Halt]]:
    configs: list[tuple[Stack, Heap, Expr | Halt]] = [({}, Heap(), main)]
    configs.extend((s.phi, s.heap, s.expr) for s in outcome.trace)
    return configs


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------


def check_progress(program: Program, outcome: EvalOutcome, cfg: GenConfig) -> Verdict:
    if outcome.status is Status.OUT_OF_FUEL:
        return INCONCLUSIVE
    if outcome.status is Status.STUCK:
        reason = outcome.stuck.reason if outcome.stuck else ""
        return Verdict(False, len(outcome.trace) + 1, f"stuck without unchecked code: {reason}")
    return PASS


def check_blame(program: Program, outcome: EvalOutcome, cfg: GenConfig) -> Verdict:
    if outcome.status is not Status.STUCK:
        return PASS
    if outcome.stuck_mode is Mode.UNCHECKED:
        return PASS
    if any(s.mode is Mode.UNCHECKED for s in outcome.trace):
        return PASS
    return Verdict(False, len(outcome.trace) + 1, "stuck with every step in checked mode")


def _runtime_type(phi: Stack, heap: Heap, e: Expr, program: Program) -> Type:
    env = {x: lit.type for x, lit in phi.items()}
    ty = type_expr(env, {}, Mode.CHECKED, e, program.funs, program.structs, heap, phi)
    return close_type(ty, phi)


def check_preservation(program: Program, outcome: EvalOutcome, cfg: GenConfig) -> Verdict:
    configs = _configs(outcome, program.main)
    phi, heap, e = configs[0]
    try:
        before = _runtime_type(phi, heap, e, program)
    except ModelError as exc:
        return Verdict(False, 0, f"initial configuration does not type: {exc}")
    for step, (phi2, heap2, e2) in enumerate(configs[1:], start=1):
        lits = [*literals(e), *phi.values()]
        if not heap_consistent(heap, heap2, lits, program.structs):
            return Verdict(False, step, "heap no longer types a live literal")
        if isinstance(e2, Halt):
            break
        try:
            after = _runtime_type(phi2, heap2, e2, program)
        except ModelError as exc:
            return Verdict(False, step, f"stepped expression does not type: {exc}")
        if not subtype(after, before, {}, None, program.structs):
            detail = f"type grew from {print_type(before)} to {print_type(after)}"
            return Verdict(False, step, detail)
        phi, heap, e, before = phi2, heap2, e2, after
    return PASS


def _visible(phi: dict[str, int]) -> dict[str, int]:
    return {name: v for name, v in phi.items() if "$" not in name}


def _final_difference(a: CoreCOutcome, b: CoreCOutcome) -> str | None:
    """Name the first component where two finished images differ.

    A halt discards the stack, so halted images are compared on result and heap only.
    """
    if a.result != b.result:
        return f"results differ: {a.describe()} vs {b.describe()}"
    if a.heap.cells != b.heap.cells or a.heap.cursor != b.heap.cursor:
        return f"heaps differ after {a.describe()}"
    if isinstance(a.result, Halt):
        return None
    if _visible(a.phi) != _visible(b.phi):
        return f"stacks differ: {_visible(a.phi)} vs {_visible(b.phi)}"
    return None


def check_simulation(program: Program, outcome: EvalOutcome, cfg: GenConfig) -> Verdict:
    """Compile every adjacent pair of configurations and compare where their images end."""
    if outcome.status is not Status.FINISHED:
        return INCONCLUSIVE
    fuel = cfg.step_fuel * COREC_FUEL_FACTOR
    cfuns = compile_fun(program.funs, program.structs)
    images: list[CoreCOutcome] = []
    for step, (phi, heap, e) in enumerate(_configs(outcome, program.main)):
        if isinstance(e, Halt):
            image = images[-1]
            if image.result != e:
                detail = f"source halts with {e.value}, image gives {image.describe()}"
                return Verdict(False, step, detail)
            break
        try:
            ce = compile_config(phi, e, program.funs, program.structs)
        except ModelError as exc:
            return Verdict(False, step, f"compilation failed: {exc}")
        cphi, cheap = erase(phi, heap)
        image = eval_corec(cphi, cheap, ce, cfuns, fuel)
        if image.status is Status.OUT_OF_FUEL:
            return INCONCLUSIVE
        if image.status is Status.STUCK:
            reason = image.stuck.reason if image.stuck else ""
            return Verdict(False, step, f"compiled configuration is stuck: {reason}")
        difference = _final_difference(images[-1], image) if images else None
        if difference is not None:
            return Verdict(False, step, f"images disagree, {difference}")
        images.append(image)
    return PASS


def check_error_kind(program: Program, outcome: EvalOutcome, cfg: GenConfig) -> Verdict:
    """Only meaningful when the source run halts with an error."""
    if not isinstance(outcome.result, Halt):
        return INCONCLUSIVE
    compiled = compile_program(program)
    fuel = cfg.step_fuel * COREC_FUEL_FACTOR
    image = eval_corec({}, CHeap(), compiled.main, compiled.funs, fuel)
    if image.status is Status.OUT_OF_FUEL:
        return INCONCLUSIVE
    if image.result != outcome.result:
        return Verdict(False, None, f"source {outcome.result.value}, compiled {image.describe()}")
    return PASS


PROPERTY_CHECKS: dict[str, PropertyCheck] = {
    "progress": check_progress,
    "blame": check_blame,
    "preservation": check_preservation,
    "simulation": check_simulation,
    "error-kind": check_error_kind,
}


# ---------------------------------------------------------------------------
# Per-term driver
# ---------------------------------------------------------------------------


def _still_fails(prop: str, cfg: GenConfig) -> Callable[[Program], bool]:
    def predicate(candidate: Program) -> bool:
        outcome = run_program(candidate, cfg.step_fuel)
        return PROPERTY_CHECKS[prop](candidate, outcome, cfg).result is False

    return predicate


def _counterexample(
    prop: str, seed: int, program: Program, outcome: EvalOutcome, verdict: Verdict, cfg: GenConfig
) -> Counterexample:
    smaller = shrink(program, _still_fails(prop, cfg))
    detail = verdict.detail
    if smaller != program:
        detail = f"{detail}; shrunk from {flatten(program)}"
    return Counterexample(
        prop=prop,
        seed=seed,
        program=flatten(smaller),
        step=verdict.step,
        trace=outcome.trace_lines()[:MAX_TRACE_LINES],
        detail=detail,
    )


def _if_nt_stats(outcome: EvalOutcome) -> tuple[int, int]:
    taken = total = 0
    for s in outcome.trace:
        redex = s.redex
        if isinstance(redex, If) and isinstance(redex.cond, Deref):
            if isinstance(redex.cond.expr, Var) and not isinstance(s.result, If):
                total += 1
                taken += s.result is redex.then
    return taken, total


def _run_near_ill(report: PropertyReport, cfg: GenConfig, seed: int) -> None:
    generated = gen_program(cfg, seed, near_ill_typed=True)
    try:
        check_with_coverage(generated.program)
    except ModelError:
        report.record("ill-typed-rejection", True)
        return
    if generated.relaxation is Relaxation.STRING_OFF_BY_ONE:
        outcome = run_program(generated.program, cfg.step_fuel)
        site = generated.describe_site()
        flag = f"seed={seed} G-ASTR off-by-one at {site} accepted, eval {outcome.describe()}"
        logger.warning("consistency flag: %s", flag)
        report.consistency_flags.append(flag)
        report.record("ill-typed-rejection", None)
        return
    report.record("ill-typed-rejection", False)
    report.counterexamples.append(
        Counterexample(
            prop="ill-typed-rejection",
            seed=seed,
            program=flatten(generated.program),
            detail=(
                f"relaxed {generated.relaxation.value} premise at {generated.describe_site()}"
                " was accepted"
            ),
        )
    )


def _run_well_typed(report: PropertyReport, cfg: GenConfig, seed: int) -> None:
    generated = gen_program(cfg, seed)
    program = generated.program
    try:
        ty, coverage = check_with_coverage(program)
        accepted = subtype(ty, generated.goal, {}, None, program.structs)
        detail = f"type {print_type(ty)} misses goal {print_type(generated.goal)}"
    except ModelError as exc:
        accepted, coverage, detail = False, {}, str(exc)
    report.record("generator", accepted)
    if not accepted:
        report.counterexamples.append(
            Counterexample(prop="generator", seed=seed, program=flatten(program), detail=detail)
        )
        return
    for rule, n in coverage.items():
        report.coverage[rule] = report.coverage.get(rule, 0) + n

    inject_rng = random.Random((seed << 1) | 1)
    injected = None
    if inject_rng.random() < cfg.unchecked_rate:
        injected = inject_unchecked(program, inject_rng)
    if injected is not None:
        props = ("blame",)
        program = injected
    else:
        props = ("progress", "preservation", "simulation", "error-kind")

    outcome = run_program(program, cfg.step_fuel)
    taken, total = _if_nt_stats(outcome)
    report.if_nt_taken += taken
    report.if_nt_total += total
    for prop in props:
        if prop == "error-kind" and not isinstance(outcome.result, Halt):
            continue
        try:
            verdict = PROPERTY_CHECKS[prop](program, outcome, cfg)
        except ModelError as exc:
            verdict = Verdict(False, None, f"{type(exc).__name__}: {exc}")
        report.record(prop, verdict.result)
        if verdict.result is False:
            logger.info("seed %d fails %s: %s", seed, prop, verdict.detail)
            report.counterexamples.append(
                _counterexample(prop, seed, program, outcome, verdict, cfg)
            )


def check_seed(cfg: GenConfig, seed: int) -> PropertyReport:
    """Run one seed on its own; replaying a counterexample goes through here."""
    return run_shard(cfg, [seed])


def run_shard(cfg: GenConfig, seeds: list[int]) -> PropertyReport:
    report = PropertyReport()
    for seed in seeds:
        report.terms += 1
        if cfg.mode is GenMode.NEAR_ILL_TYPED:
            _run_near_ill(report, cfg, seed)
        else:
            _run_well_typed(report, cfg, seed)
    return report


def _shards(cfg: GenConfig) -> list[list[int]]:
    seeds = [cfg.seed + i for i in range(cfg.count)]
    n = min(cfg.workers, max(1, cfg.count // MIN_TERMS_PER_WORKER))
    size = -(-len(seeds) // n) if seeds else 0
    return [seeds[i : i + size] for i in range(0, len(seeds), size)] if size else []


def run_properties(cfg: GenConfig) -> PropertyReport:
    started = time.monotonic()
    shards = _shards(cfg)
    report = PropertyReport()
    if len(shards) > 1:
        with ProcessPoolExecutor(max_workers=len(shards)) as pool:
            for shard in pool.map(run_shard, [cfg] * len(shards), shards):
                report = report.merge(shard)
    else:
        for seeds in shards:
            report = report.merge(run_shard(cfg, seeds))
    logger.info(
        "checked %d term(s) in %.1fs across %d shard(s), failures: %s",
        report.terms,
        time.monotonic() - started,
        len(shards),
        report.failed,
    )
    return report
