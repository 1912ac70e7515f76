"""Denotations: the function type each basic contract imposes on its implementation.

A push contract over children ``A1..An`` with pull requirements ``B1..Bm``
denotes ``typeof(A1) x .. x typeof(An) x access_typeof(B1) x .. -> R`` where
``R`` is the operator's value type when it always publishes and unit
otherwise; a ``maybe`` emission adds a trailing ``publish(T)`` callback.  A
pull contract takes the operator's pull arguments first and always returns a
value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .model import (
    Architecture,
    BasicContract,
    ContextOperator,
    Emission,
    ModelError,
    Push,
    Ref,
    SourceRef,
)


@dataclass(frozen=True)
class Value:
    name: str


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Function:
    params: tuple[TypeTerm, ...]
    result: TypeTerm


@dataclass(frozen=True)
class Tuple:
    items: tuple[TypeTerm, ...]


TypeTerm = Union[Value, Unit, Function, Tuple]

UNIT = Unit()


def publish_type(t: str) -> Function:
    return Function((Value(t),), UNIT)


def render(term: TypeTerm, ascii: bool = False) -> str:
    """Render a type term; ``Access × (IPAddress → Profile) → Profile`` style."""
    times, arrow = (", ", "->") if ascii else (" × ", "→")
    if isinstance(term, Value):
        return term.name
    if isinstance(term, Unit):
        return "()"
    if isinstance(term, Tuple):
        return times.join(_wrap(t, ascii) for t in term.items)
    params = [_wrap(p, ascii) for p in term.params]
    if not params:
        left = "()"
    elif ascii and len(params) > 1:
        left = f"({', '.join(params)})"
    else:
        left = times.join(params)
    return f"{left} {arrow} {render(term.result, ascii)}"


def _wrap(term: TypeTerm, ascii: bool) -> str:
    text = render(term, ascii)
    return f"({text})" if isinstance(term, (Function, Tuple)) else text


def to_data(term: TypeTerm) -> dict:
    if isinstance(term, Value):
        return {"kind": "value", "name": term.name}
    if isinstance(term, Unit):
        return {"kind": "unit"}
    if isinstance(term, Tuple):
        return {"kind": "tuple", "items": [to_data(t) for t in term.items]}
    return {"kind": "function", "params": [to_data(p) for p in term.params],
            "result": to_data(term.result)}


def from_data(data: dict) -> TypeTerm:
    kind = data["kind"]
    if kind == "value":
        return Value(data["name"])
    if kind == "unit":
        return UNIT
    if kind == "tuple":
        return Tuple(tuple(from_data(t) for t in data["items"]))
    return Function(tuple(from_data(p) for p in data["params"]), from_data(data["result"]))


# -- typing functions -------------------------------------------------------


class DenotationError(ModelError):
    pass


def typeof(name: Ref | tuple[Ref, ...], arch: Architecture) -> str:
    """Declared value type of a name; a disjunction widens to the lub."""
    if isinstance(name, tuple):
        t = typeof(name[0], arch)
        for member in name[1:]:
            t = arch.lub(t, typeof(member, arch))
        return t
    if isinstance(name, SourceRef):
        return arch.source(name).value_type
    return arch.context(name).value_type


def args(name: Ref, arch: Architecture) -> tuple[str, ...]:
    if isinstance(name, SourceRef):
        return arch.source(name).pull_params
    return arch.context(name).args


def access_typeof(name: Ref, arch: Architecture) -> Function:
    if not isinstance(name, SourceRef) and arch.context(name).pull_contract_index() is None:
        raise DenotationError(f"{name} cannot be pulled: it has no pull contract")
    return Function(tuple(Value(a) for a in args(name, arch)), Value(typeof(name, arch)))


# -- signature descriptors --------------------------------------------------

ACTIVATION_VALUE = "activation-value"
PULL_ARGS = "pull-args"
PULL_CALLBACK = "pull-callback"
PUBLISH_CALLBACK = "publish-callback"


@dataclass(frozen=True)
class Param:
    role: str
    name: str
    type: TypeTerm
    # the child a pull callback targets (as text), None otherwise
    target: str | None = None
    callback: str | None = None


@dataclass(frozen=True)
class SignatureDescriptor:
    name: str
    params: tuple[Param, ...]
    return_type: TypeTerm
    contract_index: int = 0

    @property
    def function_type(self) -> Function:
        return Function(tuple(p.type for p in self.params), self.return_type)

    def type_string(self) -> str:
        """Unicode rendering with ``publish(T)`` for the publish callback."""
        parts = []
        for p in self.params:
            if p.role == PUBLISH_CALLBACK:
                parts.append(f"publish({render(p.type.params[0])})")
            else:
                parts.append(_wrap(p.type, False))
        left = " × ".join(parts) if parts else "()"
        return f"{left} → {render(self.return_type)}"

    def stub(self) -> str:
        params = ", ".join(f"{p.name}: {render(p.type, ascii=True)}" for p in self.params)
        return f"{self.name}({params}) -> {render(self.return_type, ascii=True)}"

    @property
    def returns_value(self) -> bool:
        return not isinstance(self.return_type, Unit)

    def role_count(self, role: str) -> int:
        return sum(1 for p in self.params if p.role == role)


def camel(name: str) -> str:
    """Java-style variable name: ``IP2Profile`` -> ``ip2Profile``, ``ip2host`` -> ``ip2Host``."""
    m = re.match(r"[A-Z]+", name)
    if m:
        run = m.group()
        rest = name[len(run):]
        if len(run) > 1 and rest[:1].islower():
            name = run[:-1].lower() + run[-1] + rest
        else:
            name = run.lower() + rest
    return re.sub(r"(?<=[0-9])([a-z])", lambda x: x.group(1).upper(), name)


def capitalize(name: str) -> str:
    return name[:1].upper() + name[1:]


def child_label(ref: Ref) -> str:
    return capitalize(ref.source) if isinstance(ref, SourceRef) else ref


def method_name(contract: BasicContract) -> str:
    act = contract.activation
    if not isinstance(act, Push):
        return "get"
    if any(len(term) > 1 for term in act.terms):
        return "onNewDisjunction"
    return "onNew" + "And".join(child_label(term[0]) for term in act.terms)


def _unique(name: str, taken: set[str]) -> str:
    candidate, n = name, 2
    while candidate in taken:
        candidate, n = f"{name}{n}", n + 1
    taken.add(candidate)
    return candidate


def callback_name(ref: Ref, contract: BasicContract) -> str:
    if not isinstance(ref, SourceRef):
        return f"PullFrom{ref}"
    same_sensor = [r for r in contract.requirements
                   if isinstance(r, SourceRef) and r.component == ref.component]
    if len(same_sensor) > 1:
        return f"PullFrom{ref.component}{capitalize(ref.source)}"
    return f"PullFrom{ref.component}"


def describe(contract: BasicContract, index: int, owner: ContextOperator,
             arch: Architecture, name: str | None = None) -> SignatureDescriptor:
    taken: set[str] = set()
    params: list[Param] = []
    act = contract.activation
    if isinstance(act, Push):
        for term in act.terms:
            t = typeof(term, arch)
            # a single source names the value after itself (onNewLine(newLine))
            label = capitalize(term[0].source) if (
                len(term) == 1 and isinstance(term[0], SourceRef)) else t
            params.append(Param(ACTIVATION_VALUE, _unique(f"new{label}", taken), Value(t)))
    else:
        for t in owner.args:
            params.append(Param(PULL_ARGS, _unique(f"new{t}", taken), Value(t)))
    for req in contract.requirements:
        params.append(Param(
            PULL_CALLBACK, _unique(camel(req.source if isinstance(req, SourceRef) else req), taken),
            access_typeof(req, arch), target=str(req), callback=callback_name(req, contract),
        ))
    if contract.emission is Emission.MAYBE:
        params.append(Param(PUBLISH_CALLBACK, _unique("publish", taken),
                            publish_type(owner.value_type), callback="Publish"))
    returns = contract.is_pull or contract.emission is Emission.ALWAYS
    return SignatureDescriptor(
        name or method_name(contract), tuple(params),
        Value(owner.value_type) if returns else UNIT, index,
    )


def denote(owner: ContextOperator, arch: Architecture) -> list[SignatureDescriptor]:
    """One descriptor per basic contract, in declaration order."""
    taken: set[str] = set()
    return [describe(c, i, owner, arch, _unique(method_name(c), taken))
            for i, c in enumerate(owner.contracts)]


def denotation_type(owner: ContextOperator, arch: Architecture) -> TypeTerm:
    """The operator's type: a single function or a tuple of functions."""
    fns = [d.function_type for d in denote(owner, arch)]
    return fns[0] if len(fns) == 1 else Tuple(tuple(fns))
