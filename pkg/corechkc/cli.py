"""Command-line entry point: ``corechkc <command> [options]``.

Results go to standard output; diagnostics and logs go to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from corechkc.checker import check_program
from corechkc.compiler import compile_program
from corechkc.config import settings
from corechkc.corec_eval import eval_corec
from corechkc.emit.checkedc import emit_checkedc
from corechkc.errors import ModelError
from corechkc.genprop.harness import run_properties
from corechkc.models.report import GenConfig, GenMode
from corechkc.models.state import CHeap
from corechkc.models.syntax import Program
from corechkc.parser import parse_program
from corechkc.printer import print_corec_program, print_program, print_type
from corechkc.semantics import run_program
from corechkc.store import RunStore

logger = logging.getLogger(__name__)


def _load(path: Path) -> Program:
    return parse_program(path.read_text(encoding="utf-8"))


def _cmd_parse(args: argparse.Namespace) -> int:
    print(print_program(_load(args.path)), end="")
    return 0


def _cmd_typecheck(args: argparse.Namespace) -> int:
    print(print_type(check_program(_load(args.path))))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    outcome = run_program(_load(args.path), args.fuel)
    if args.trace:
        for line in outcome.trace_lines():
            print(line)
    print(outcome.describe())
    return 0


def _cmd_compile(args: argparse.Namespace) -> int:
    program = _load(args.path)
    check_program(program)
    print(print_corec_program(compile_program(program)), end="")
    return 0


def _cmd_run_corec(args: argparse.Namespace) -> int:
    program = _load(args.path)
    check_program(program)
    compiled = compile_program(program)
    outcome = eval_corec({}, CHeap(), compiled.main, compiled.funs, args.fuel)
    print(outcome.describe())
    return 0


def _cmd_emit(args: argparse.Namespace) -> int:
    program = _load(args.path)
    check_program(program)
    print(emit_checkedc(program), end="")
    return 0


def _cmd_fuzz(args: argparse.Namespace) -> int:
    overrides = {
        "seed": args.seed,
        "count": args.count,
        "depth": args.depth,
        "step_fuel": args.fuel,
        "workers": args.workers,
        "mode": GenMode(args.mode),
        "unchecked_rate": args.unchecked_rate,
        "retries": settings.retries,
    }
    if args.weights:
        cfg = GenConfig.from_weights_file(args.weights, **overrides)
    else:
        cfg = GenConfig(**overrides)
    report = run_properties(cfg)
    print(report.to_text(), end="")
    if args.save:
        run_id = RunStore().save(report, cfg)
        logger.info("saved run %s", run_id)
    return 1 if report.failed else 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    level = args.log_level.lower()
    uvicorn.run("corechkc.main:app", host=args.host, port=args.port, log_level=level)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corechkc", description="Check, run, compile and fuzz CoreChkC programs."
    )
    parser.add_argument("--log-level", default=settings.log_level, help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_path(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("path", type=Path, help="program file")
        p.set_defaults(handler=handler)
        return p

    with_path("parse", _cmd_parse, "parse and pretty-print a program")
    with_path("typecheck", _cmd_typecheck, "print the type of main")
    p = with_path("eval", _cmd_eval, "evaluate with the checked semantics")
    p.add_argument("--fuel", type=int, default=settings.fuel, help="maximum steps")
    p.add_argument("--trace", action="store_true", help="print every step")
    with_path("compile", _cmd_compile, "print the compiled CoreC program")
    p = with_path("run-corec", _cmd_run_corec, "compile, then run the CoreC program")
    p.add_argument("--fuel", type=int, default=settings.fuel * 50, help="maximum steps")
    with_path("emit-checkedc", _cmd_emit, "print Checked C source text")

    p = sub.add_parser("fuzz", help="generate programs and check the properties")
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--count", type=int, default=settings.count)
    p.add_argument("--depth", type=int, default=settings.depth)
    p.add_argument("--fuel", type=int, default=settings.fuel, help="evaluation steps per term")
    p.add_argument("--weights", type=Path, help="JSON object of rule weights")
    p.add_argument("--workers", type=int, default=settings.workers)
    p.add_argument("--mode", choices=[m.value for m in GenMode], default=GenMode.WELL_TYPED.value)
    p.add_argument("--unchecked-rate", type=float, default=settings.unchecked_rate)
    p.add_argument("--save", action="store_true", help="persist the report as a run")
    p.set_defaults(handler=_cmd_fuzz)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default=settings.host)
    p.add_argument("--port", type=int, default=settings.port)
    p.set_defaults(handler=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr)
    try:
        return args.handler(args)
    except (OSError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
