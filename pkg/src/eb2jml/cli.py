"""Command-line front door: translate, check and parse machine files.

Exit codes: 0 success / all checks PASS, 1 a refinement check FAILed,
2 parse or well-formedness errors (and unreadable input), 3 a resource
limit was hit.  Diagnostics go to stderr; artifacts and reports go to
stdout or the --out path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .checker import FAIL, RESOURCE_LIMIT, check_machine
from .ebcheck import well_formedness_check
from .jmlast import render_class
from .parser import ParseError, parse_machine, render_machine
from .semantics import DEFAULT_CEILING, Universe
from .translate import TranslationError, translate_machine

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2
EXIT_RESOURCE = 3


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _build_arg_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="eb2jml",
        description="Translate Event-B machines to JML class specifications "
                    "and check the translation by exhaustive finite-universe "
                    "simulation.")
    sub = top.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("translate", help="translate a machine to a .java spec")
    tr.add_argument("input", help="machine file (.ebm)")
    tr.add_argument("-o", "--out", help="output path (default <MachineName>.java)")

    ck = sub.add_parser("check", help="check the translation against the source")
    ck.add_argument("input", help="machine file (.ebm)")
    ck.add_argument("--int-range", default="0..2", metavar="LO..HI",
                    help="integer variable range (default 0..2)")
    ck.add_argument("--carrier", action="append", default=[], metavar="NAME=N",
                    help="carrier set cardinality; repeatable (default 2)")
    ck.add_argument("--ceiling", type=int, default=None,
                    help="enumeration work ceiling (default 10^6, or "
                         "EB2JML_CEILING)")
    ck.add_argument("--witnesses", type=int, default=5,
                    help="maximum counterexamples reported per event")
    ck.add_argument("--format", choices=("text", "tree"), default="text",
                    help="report format: human text or machine-readable tree")

    pa = sub.add_parser("parse", help="parse and render a machine canonically")
    pa.add_argument("input", help="machine file (.ebm)")
    return top


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _CliError(f"cannot read '{path}': {exc.strerror or exc}")


def _load_machine(path: str):
    text = _read(path)
    try:
        machine = parse_machine(text)
    except ParseError as exc:
        raise _CliError(f"{path}:{exc}")
    diagnostics = well_formedness_check(machine)
    if diagnostics:
        message = "\n".join(f"{path}:{d}" for d in diagnostics)
        raise _CliError(message)
    return machine


def _parse_int_range(text: str) -> tuple[int, int]:
    lo_text, sep, hi_text = text.partition("..")
    if not sep:
        raise _CliError(f"--int-range must look like LO..HI, got '{text}'")
    try:
        lo, hi = int(lo_text), int(hi_text)
    except ValueError:
        raise _CliError(f"--int-range must look like LO..HI, got '{text}'")
    if lo > hi:
        raise _CliError(f"empty integer range '{text}'")
    return lo, hi


def _build_universe(args) -> Universe:
    lo, hi = _parse_int_range(args.int_range)
    carriers: dict[str, int] = {}
    for spec in args.carrier:
        name, sep, size_text = spec.partition("=")
        if not sep or not name:
            raise _CliError(f"--carrier must look like NAME=N, got '{spec}'")
        try:
            size = int(size_text)
        except ValueError:
            raise _CliError(f"--carrier must look like NAME=N, got '{spec}'")
        if size < 1:
            raise _CliError(f"carrier '{name}' needs cardinality >= 1")
        carriers[name] = size
    ceiling = args.ceiling
    if ceiling is None:
        env = os.environ.get("EB2JML_CEILING")
        ceiling = int(env) if env else DEFAULT_CEILING
    if ceiling < 1:
        raise _CliError("--ceiling must be at least 1")
    return Universe(int_lo=lo, int_hi=hi, carriers=carriers, ceiling=ceiling)


def cmd_translate(args) -> int:
    machine = _load_machine(args.input)
    try:
        unit = translate_machine(machine)
    except TranslationError as exc:
        raise _CliError(f"{args.input}: {exc}")
    out_path = Path(args.out) if args.out else Path(f"{machine.name}.java")
    out_path.write_text(render_class(unit.result), encoding="utf-8")
    print(f"wrote {out_path}")
    print(f"class {unit.result.name}: {len(unit.result.model_fields)} model "
          f"fields, {len(unit.result.methods)} methods")
    for source, fragment in unit.trace:
        print(f"  {source} -> {fragment}")
    return EXIT_OK


def cmd_check(args) -> int:
    machine = _load_machine(args.input)
    universe = _build_universe(args)
    try:
        unit = translate_machine(machine)
    except TranslationError as exc:
        raise _CliError(f"{args.input}: {exc}")
    report = check_machine(machine, universe, unit, witness_cap=args.witnesses)
    if args.format == "tree":
        print(json.dumps(report.to_tree(), indent=2))
    else:
        print(report.to_text(), end="")
    if report.status == RESOURCE_LIMIT:
        return EXIT_RESOURCE
    if report.status == FAIL:
        return EXIT_FAIL
    return EXIT_OK


def cmd_parse(args) -> int:
    machine = _load_machine(args.input)
    print(render_machine(machine), end="")
    return EXIT_OK


_COMMANDS = {"translate": cmd_translate, "check": cmd_check, "parse": cmd_parse}


def main(argv=None) -> int:
    args = _build_arg_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        print(f"eb2jml: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
