"""Architecture-level judgments: consistency, determinacy and typing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

from .model import (
    TOP,
    Architecture,
    BasicContract,
    ContextOperator,
    Emission,
    Push,
    Ref,
    SourceRef,
    names,
)

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    rule: str
    subject: str
    message: str
    severity: str = ERROR
    witness: tuple[int, int] | None = None

    def to_record(self) -> dict:
        return {
            "rule": self.rule,
            "subject": self.subject,
            "severity": self.severity,
            "message": self.message,
            "witness": list(self.witness) if self.witness else None,
        }


@dataclass
class CheckReport:
    findings: list[Finding] = field(default_factory=list)
    # disjunction types computed by the typing check, keyed by (operator, contract, term)
    term_types: dict[tuple[str, int, int], str] = field(default_factory=dict)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == ERROR]

    @property
    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == WARNING]

    @property
    def verdict(self) -> str:
        return "fail" if self.errors else "pass"

    @property
    def ok(self) -> bool:
        return not self.errors

    def rules(self) -> set[str]:
        return {f.rule for f in self.findings}

    def extend(self, other: CheckReport) -> CheckReport:
        self.findings.extend(other.findings)
        self.term_types.update(other.term_types)
        return self

    def render_text(self) -> str:
        lines = [f"{f.severity}: [{f.rule}] {f.subject}: {f.message}"
                 + (f" (contracts {f.witness[0]}, {f.witness[1]})" if f.witness else "")
                 for f in self.findings]
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)

    def render_machine(self) -> str:
        records = [json.dumps(f.to_record(), sort_keys=True) for f in self.findings]
        records.append(json.dumps({"verdict": self.verdict}))
        return "\n".join(records)


# -- consistency ------------------------------------------------------------


def _has_pull_self(op: ContextOperator) -> bool:
    return any(c.is_pull for c in op.contracts)


def check_contract_consistency(op: ContextOperator, arch: Architecture) -> CheckReport:
    report = CheckReport()
    for idx, contract in enumerate(op.contracts):
        for req in contract.requirements:
            if arch.is_context(req) and not _has_pull_self(arch.context(req)):
                report.findings.append(Finding(
                    "requirement-needs-pull-self", op.id,
                    f"contract {idx} pulls {req}, which has no pull contract",
                ))
        if isinstance(contract.activation, Push):
            for n in sorted(names(contract.activation), key=str):
                if arch.is_context(n) and not arch.context(n).emits:
                    report.findings.append(Finding(
                        "activation-needs-emission", op.id,
                        f"contract {idx} is activated by {n}, which never publishes",
                    ))
    return report


def check_architecture_consistency(arch: Architecture) -> CheckReport:
    report = CheckReport()
    for op in arch.contexts:
        report.extend(check_contract_consistency(op, arch))
    # controllers carry a fixed push contract on their subscriptions
    for ctl in arch.controllers:
        for sub in ctl.subscriptions:
            if arch.is_context(sub) and not arch.context(sub).emits:
                report.findings.append(Finding(
                    "subscription-needs-emission", ctl.id,
                    f"subscribes to {sub}, which never publishes",
                ))
    return report


# -- determinacy ------------------------------------------------------------


def interferes(c1: BasicContract, c2: BasicContract) -> bool:
    return bool(names(c1.activation) & names(c2.activation))


def check_determinacy(arch: Architecture) -> CheckReport:
    report = CheckReport()
    for op in arch.contexts:
        for (i, a), (j, b) in combinations(enumerate(op.contracts), 2):
            if interferes(a, b):
                shared = sorted(str(n) for n in names(a.activation) & names(b.activation))
                report.findings.append(Finding(
                    "interference", op.id,
                    f"contracts {i} and {j} are both activated by {', '.join(shared)}",
                    witness=(i, j),
                ))
    return report


# -- typing -----------------------------------------------------------------


def type_of(name: Ref, arch: Architecture) -> str:
    if isinstance(name, SourceRef):
        return arch.source(name).value_type
    return arch.context(name).value_type


def pull_args(name: Ref, arch: Architecture) -> tuple[str, ...]:
    if isinstance(name, SourceRef):
        return arch.source(name).pull_params
    return arch.context(name).args


@dataclass(frozen=True)
class PullSite:
    """A concrete pull: ``target`` asked with arguments of ``arg_types``."""

    target: Ref
    arg_types: tuple[str, ...]
    origin: str = "<external>"


def check_pull_site(site: PullSite, arch: Architecture) -> list[Finding]:
    expected = pull_args(site.target, arch)
    if len(site.arg_types) != len(expected):
        return [Finding(
            "pull-arity-mismatch", site.origin,
            f"pull of {site.target} passes {len(site.arg_types)} argument(s), "
            f"expected {len(expected)} ({', '.join(expected) or 'none'})",
        )]
    found = []
    for pos, (got, want) in enumerate(zip(site.arg_types, expected)):
        if not arch.is_subtype(got, want):
            found.append(Finding(
                "pull-type-mismatch", site.origin,
                f"argument {pos} of pull on {site.target} is {got}, expected {want}",
            ))
    return found


def check_typing(arch: Architecture, pull_sites: Iterable[PullSite] = ()) -> CheckReport:
    report = CheckReport()
    for op in arch.contexts:
        for ci, contract in enumerate(op.contracts):
            if not isinstance(contract.activation, Push):
                continue
            for ti, term in enumerate(contract.activation.terms):
                t = type_of(term[0], arch)
                for member in term[1:]:
                    t = arch.lub(t, type_of(member, arch))
                report.term_types[(op.id, ci, ti)] = t
                if len(term) > 1 and t == TOP:
                    report.findings.append(Finding(
                        "disjunction-widens-to-top", op.id,
                        f"disjunction {' | '.join(map(str, term))} widens to {TOP}",
                        severity=WARNING,
                    ))
        if op.pull_params and not any(c.is_pull for c in op.contracts):
            report.findings.append(Finding(
                "unused-pull-params", op.id,
                "declares pull parameters but has no pull contract",
                severity=WARNING,
            ))
    for ctl in arch.controllers:
        for sub in ctl.subscriptions:
            sub_type = type_of(sub, arch)
            for order in ctl.orders:
                params = arch.component(order.actuator).action(order.action).param_types
                if len(params) != 1 or not arch.is_subtype(sub_type, params[0]):
                    report.findings.append(Finding(
                        "order-type-mismatch", ctl.id,
                        f"forwards {sub_type} from {sub} to {order}({', '.join(params)})",
                    ))
    for site in pull_sites:
        report.findings.extend(check_pull_site(site, arch))
    return report


def check_requirement_cycles(arch: Architecture) -> CheckReport:
    """Warn on context operators that can end up pulling themselves."""
    graph = {op.id: [r for c in op.contracts for r in c.requirements if arch.is_context(r)]
             for op in arch.contexts}
    report = CheckReport()
    state: dict[str, int] = {}
    flagged: set[str] = set()

    def visit(node: str, stack: list[str]) -> None:
        state[node] = 1
        stack.append(node)
        for nxt in graph[node]:
            if state.get(nxt) == 1:
                cycle = stack[stack.index(nxt):]
                if not flagged.intersection(cycle):
                    flagged.update(cycle)
                    report.findings.append(Finding(
                        "cyclic-requirements", nxt,
                        "pull cycle: " + " -> ".join(cycle + [nxt]),
                        severity=WARNING,
                    ))
            elif nxt not in state:
                visit(nxt, stack)
        stack.pop()
        state[node] = 2

    for op in arch.contexts:
        if op.id not in state:
            visit(op.id, [])
    return report


def check(arch: Architecture, pull_sites: Iterable[PullSite] = ()) -> CheckReport:
    """Run every architecture-level check and merge the findings."""
    report = CheckReport()
    report.extend(check_architecture_consistency(arch))
    report.extend(check_determinacy(arch))
    report.extend(check_typing(arch, pull_sites))
    report.extend(check_requirement_cycles(arch))
    return report


def summary(report: CheckReport) -> str:
    rules = report.rules()
    consistent = not rules & {"requirement-needs-pull-self", "activation-needs-emission",
                              "subscription-needs-emission"}
    deterministic = "interference" not in rules
    parts = ["consistent" if consistent else "inconsistent",
             "deterministic" if deterministic else "nondeterministic"]
    if any(f.severity == ERROR for f in report.findings
           if f.rule not in {"requirement-needs-pull-self", "activation-needs-emission",
                             "subscription-needs-emission", "interference"}):
        parts.append("ill-typed")
    return ", ".join(parts)

