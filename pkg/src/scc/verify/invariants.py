"""Interaction invariants: ``always P leadsto Q`` and ``never P``.

Predicates name one kind of event: ``publish(Sensor.source)``,
``activated(Component)`` or ``invoked(Actuator.action)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from ..model import Architecture, ModelError, parse_ref
from ..runtime import ActionInvoked, Event, OperatorActivated, SourcePublished

PUBLISH = "publish"
ACTIVATED = "activated"
INVOKED = "invoked"


class InvariantError(ModelError):
    pass


@dataclass(frozen=True)
class Predicate:
    kind: str
    name: str

    def __str__(self) -> str:
        return f"{self.kind}({self.name})"


@dataclass(frozen=True)
class Response:
    trigger: Predicate
    goal: Predicate

    def __str__(self) -> str:
        return f"always {self.trigger} leadsto {self.goal}"


@dataclass(frozen=True)
class Never:
    predicate: Predicate

    def __str__(self) -> str:
        return f"never {self.predicate}"


Invariant = Union[Response, Never]

_PRED = r"(publish|activated|invoked)\s*\(\s*([A-Za-z_][\w]*(?:\.[A-Za-z_][\w]*)?)\s*\)"
_RESPONSE = re.compile(rf"^always\s+{_PRED}\s+leadsto\s+{_PRED}$")
_NEVER = re.compile(rf"^never\s+{_PRED}$")


def parse_invariant(text: str) -> Invariant:
    text = text.strip()
    m = _RESPONSE.match(text)
    if m:
        return Response(Predicate(m[1], m[2]), Predicate(m[3], m[4]))
    m = _NEVER.match(text)
    if m:
        return Never(Predicate(m[1], m[2]))
    raise InvariantError(
        f"cannot parse invariant {text!r}: expected 'always <pred> leadsto <pred>' or 'never <pred>'")


def load_invariants(path: str | Path) -> list[Invariant]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("//")[0].strip()
        if line:
            out.append(parse_invariant(line))
    return out


def predicates(inv: Invariant) -> tuple[Predicate, ...]:
    return (inv.trigger, inv.goal) if isinstance(inv, Response) else (inv.predicate,)


def validate(inv: Invariant, arch: Architecture) -> None:
    """Raise unless every predicate names a declared source, component or action."""
    for p in predicates(inv):
        if p.kind == PUBLISH:
            ok = "." in p.name and arch.resolves(parse_ref(p.name))
        elif p.kind == ACTIVATED:
            ok = "." not in p.name and arch.has_component(p.name) and (
                arch.is_context(p.name) or any(c.id == p.name for c in arch.controllers))
        else:
            act, _, action = p.name.partition(".")
            ok = any(a.id == act and any(x.name == action for x in a.actions)
                     for a in arch.actuators)
        if not ok:
            raise InvariantError(f"predicate {p} does not reference a declared name")


def event_atom(event: Event) -> Predicate | None:
    if isinstance(event, SourcePublished):
        return Predicate(PUBLISH, event.source)
    if isinstance(event, OperatorActivated):
        return Predicate(ACTIVATED, event.operator)
    if isinstance(event, ActionInvoked):
        return Predicate(INVOKED, f"{event.actuator}.{event.action}")
    return None


def holds_on_trace(inv: Invariant, events: Iterable[Event]) -> bool:
    """Finite-trace reading: every trigger is followed (or matched) by a goal."""
    atoms = [event_atom(e) for e in events]
    if isinstance(inv, Never):
        return inv.predicate not in atoms
    pending = False
    for a in atoms:
        if a == inv.trigger:
            pending = True
        if a == inv.goal:
            pending = False
    return not pending
