"""Command-line entry point: ``scc <command> ...``.

Exit codes: 0 when the requested analysis passes, 1 when it reports
findings, violations or a failing verdict, 2 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import checker, framework
from .denotation import denote
from .handlers import HANDLER_PACKS, install_pack
from .model import ModelError, parse_ref
from .parser import ParseError, parse_file
from .runtime import ScenarioError, SimulationError, Simulator, Stimulus, load_scenario
from .verify import emit_promela, reach_witness
from .verify.invariants import InvariantError, load_invariants, parse_invariant
from .verify.modelcheck import DEFAULT_BOUND, SEMANTICS, SEQUENTIAL, check_invariant

OK, FINDINGS, USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _readable(path: str) -> bool:
    p = Path(path)
    return p.exists() and not p.is_dir()


def _load(path: str):
    if not _readable(path):
        raise _Usage(f"cannot read {path}")
    return parse_file(path)


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _records(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, default=str) + "\n" for r in records)


def cmd_check(args) -> int:
    arch = _load(args.file)
    report = checker.check(arch)
    if args.format == "machine":
        sys.stdout.write(report.render_machine() + "\n")
    else:
        for f in report.findings:
            print(f"{f.severity}: [{f.rule}] {f.subject}: {f.message}"
                  + (f" (contracts {f.witness[0]}, {f.witness[1]})" if f.witness else ""))
        print(checker.summary(report))
    return OK if report.ok else FINDINGS


def cmd_denote(args) -> int:
    arch = _load(args.file)
    ops = arch.contexts
    if args.operator:
        if not arch.is_context(args.operator):
            raise _Usage(f"{args.operator} is not a context operator")
        ops = [arch.context(args.operator)]
    records = []
    for op in ops:
        for d in denote(op, arch):
            records.append({"operator": op.id, "contract": d.contract_index, "method": d.name,
                            "type": d.type_string(), "stub": d.stub()})
    if args.format == "machine":
        sys.stdout.write(_records(records))
    else:
        for r in records:
            print(f"{r['operator']}.{r['method']} : {r['type']}")
    return OK


def cmd_generate(args) -> int:
    arch = _load(args.file)
    try:
        manifest = framework.generate_manifest(arch)
    except framework.GenerationError as exc:
        sys.stderr.write(exc.report.render_text() + "\n")
        return FINDINGS
    if args.diff:
        old_path = Path(args.diff)
        if not _readable(args.diff):
            raise _Usage(f"cannot read {args.diff}")
        entries = framework.diff_manifests(framework.loads(old_path.read_text(encoding="utf-8")),
                                           manifest)
        if args.format == "machine":
            _emit(_records({"kind": e.kind, "path": e.path, "detail": e.detail}
                           for e in entries), args.output)
        else:
            _emit("".join(f"{e}\n" for e in entries) or "no changes\n", args.output)
        return OK
    if args.emit == "manifest":
        _emit(framework.dumps(manifest), args.output)
    else:
        _emit(framework.render_stubs(manifest), args.output)
    return OK


def cmd_simulate(args) -> int:
    arch = _load(args.file)
    if not _readable(args.scenario):
        raise _Usage(f"cannot read {args.scenario}")
    scenario = load_scenario(args.scenario)
    for item in scenario:
        name = item.source if isinstance(item, Stimulus) else item.target
        if not (arch.resolves(name) or arch.has_component(str(name))):
            raise _Usage(f"{args.scenario}: unknown name {name}")
    policy = args.sync_policy
    if args.sync_latest:
        unknown = [op for op in args.sync_latest if not arch.is_context(op)]
        if unknown:
            raise _Usage(f"not a context operator: {', '.join(unknown)}")
        policy = {op.id: "latest" if op.id in args.sync_latest else args.sync_policy
                  for op in arch.contexts}
    sim = Simulator(arch, sync_policy=policy, scheduler=args.scheduler, seed=args.seed)
    install_pack(sim, args.handlers, seed=args.seed)
    trace = sim.run(scenario)
    _emit(trace.render_machine() if args.format == "machine" else trace.render(), args.output)
    return OK if trace.ok else FINDINGS


def cmd_reach(args) -> int:
    arch = _load(args.file)
    target = parse_ref(args.target)
    for name in (args.source, target):
        if not (arch.has_component(str(name)) or arch.resolves(name)):
            raise _Usage(f"unknown name {name}")
    path = reach_witness(args.source, target, arch)
    if args.format == "machine":
        print(json.dumps({"from": args.source, "to": str(target), "reachable": path is not None,
                          "path": [str(p) for p in path] if path else None}, sort_keys=True))
    elif path is None:
        print(f"{target} is not reachable from {args.source}")
    else:
        print(f"{target} is reachable from {args.source}: {' -> '.join(map(str, path))}")
    return OK if path is not None else FINDINGS


def cmd_verify(args) -> int:
    arch = _load(args.file)
    invariants = [parse_invariant(text) for text in args.invariant]
    for path in args.invariants or ():
        if not _readable(path):
            raise _Usage(f"cannot read {path}")
        invariants.extend(load_invariants(path))
    if not invariants:
        raise _Usage("no invariant given (use --invariant or --invariants FILE)")
    status = OK
    for inv in invariants:
        verdict = check_invariant(arch, inv, args.bound, capacity=args.channel_capacity,
                                  optional_pulls=args.optional_pulls,
                                  semantics=args.semantics)
        if args.format == "machine":
            sys.stdout.write(_records(verdict.records()))
        else:
            sys.stdout.write(verdict.render_text())
        if not verdict.holds:
            status = FINDINGS
    return status


def cmd_emit_promela(args) -> int:
    arch = _load(args.file)
    _emit(emit_promela(arch, capacity=args.channel_capacity,
                       optional_pulls=args.optional_pulls), args.output)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scc", description="Toolchain for Sense/Compute/Control architecture descriptions.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def command(name: str, fn, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("file", help="architecture description (.adl)")
        p.add_argument("--format", choices=("text", "machine"), default="text")
        p.set_defaults(fn=fn)
        return p

    command("check", cmd_check, "check consistency, determinacy and typing")

    p = command("denote", cmd_denote, "print the denotation of every basic contract")
    p.add_argument("--operator", help="only this context operator")

    p = command("generate", cmd_generate, "generate the framework manifest or stubs")
    p.add_argument("--emit", choices=("manifest", "stubs"), default="manifest")
    p.add_argument("--diff", metavar="OLD_MANIFEST",
                   help="report obligations changed since a previously generated manifest")
    p.add_argument("-o", "--output", help="write to this file instead of standard output")

    p = command("simulate", cmd_simulate, "run a scenario through the simulator")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--handlers", choices=HANDLER_PACKS, default="webserver")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheduler", choices=("fifo", "random"), default="fifo")
    p.add_argument("--sync-policy", choices=("queue", "latest"), default="queue")
    p.add_argument("--sync-latest", nargs="*", metavar="OPERATOR",
                   help="operators that keep only the latest value per term")
    p.add_argument("-o", "--output")

    p = command("reach", cmd_reach, "decide whether data of TARGET may reach SOURCE")
    p.add_argument("source", help="component whose access is queried")
    p.add_argument("target", help="component id or Sensor.source")

    p = command("verify", cmd_verify, "check interaction invariants on the flow model")
    p.add_argument("--invariant", action="append", default=[],
                   help="'always <pred> leadsto <pred>' or 'never <pred>'")
    p.add_argument("--invariants", action="append", metavar="FILE",
                   help="file with one invariant per line")
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND, help="state limit")
    p.add_argument("--channel-capacity", type=int, default=1)
    p.add_argument("--optional-pulls", action="store_true",
                   help="let every data requirement be skipped")
    p.add_argument("--semantics", choices=SEMANTICS, default=SEQUENTIAL,
                   help="sequential: one activation at a time, as the simulator runs; "
                        "concurrent: free interleaving, as the emitted Promela")

    p = command("emit-promela", cmd_emit_promela, "write the Promela flow model")
    p.add_argument("--channel-capacity", type=int, default=1)
    p.add_argument("--optional-pulls", action="store_true")
    p.add_argument("-o", "--output")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.fn(args)
    except _Usage as exc:
        sys.stderr.write(f"scc: {exc}\n")
        return USAGE
    except ParseError as exc:
        for d in exc.diagnostics:
            sys.stderr.write(f"{d}\n")
        return FINDINGS
    except (InvariantError, ScenarioError) as exc:
        sys.stderr.write(f"scc: {exc}\n")
        return USAGE
    except (SimulationError, ModelError, ValueError) as exc:
        sys.stderr.write(f"scc: {exc}\n")
        return FINDINGS
    except OSError as exc:
        sys.stderr.write(f"scc: {exc}\n")
        return USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
