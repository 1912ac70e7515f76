"""Architecture object model for Sense/Compute/Control applications.

Everything here is immutable.  An :class:`Architecture` groups the four
component layers (sensors, context operators, control operators and
actuators) together with a single-inheritance type hierarchy rooted at the
implicit :data:`TOP` type.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Union

TOP = "Top"


class _SelfMarker:
    """The ``self`` name of a pull activation.  Never equal to a component id."""

    _instance: _SelfMarker | None = None

    def __new__(cls) -> _SelfMarker:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "SELF"

    def __str__(self) -> str:
        return "self"

    def __reduce__(self):
        return (_SelfMarker, ())


SELF = _SelfMarker()


class ModelError(Exception):
    pass


class UnknownComponentError(ModelError, KeyError):
    def __str__(self) -> str:
        return f"unknown component {self.args[0]!r}"


class UnknownTypeError(ModelError, KeyError):
    def __str__(self) -> str:
        return f"undeclared type {self.args[0]!r}"


@dataclass(frozen=True, order=True)
class SourceRef:
    component: str
    source: str

    def __str__(self) -> str:
        return f"{self.component}.{self.source}"


# A name usable in activations and requirements: a sensor source or a
# context operator id.
Ref = Union[SourceRef, str]


def ref_str(ref: Ref | _SelfMarker) -> str:
    return str(ref)


def parse_ref(text: str) -> Ref:
    if "." in text:
        comp, _, src = text.partition(".")
        return SourceRef(comp, src)
    return text


@dataclass(frozen=True)
class TypeDecl:
    name: str
    supertype: str | None = None


@dataclass(frozen=True)
class Source:
    name: str
    value_type: str
    pull_params: tuple[str, ...] = ()


@dataclass(frozen=True)
class Sensor:
    id: str
    sources: tuple[Source, ...]

    def source(self, name: str) -> Source:
        for src in self.sources:
            if src.name == name:
                return src
        raise UnknownComponentError(f"{self.id}.{name}")


@dataclass(frozen=True)
class Push:
    """Activation by pushed values from every term; a term with several
    names is a disjunction."""

    terms: tuple[tuple[Ref, ...], ...]

    def __post_init__(self):
        if not self.terms or any(not t for t in self.terms):
            raise ModelError("push activation needs at least one non-empty term")


@dataclass(frozen=True)
class PullSelf:
    pass


Activation = Union[Push, PullSelf]


class Emission(enum.Enum):
    ALWAYS = "always"
    MAYBE = "maybe"
    NEVER = "no"


@dataclass(frozen=True)
class BasicContract:
    activation: Activation
    requirements: tuple[Ref, ...] = ()
    emission: Emission = Emission.NEVER

    @property
    def is_pull(self) -> bool:
        return isinstance(self.activation, PullSelf)


@dataclass(frozen=True)
class ContextOperator:
    id: str
    value_type: str
    contracts: tuple[BasicContract, ...]
    # None when the operator declares no ``pulled with`` clause.
    pull_params: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.contracts:
            raise ModelError(f"context operator {self.id} has no contract")

    @property
    def args(self) -> tuple[str, ...]:
        return self.pull_params or ()

    def pull_contract_index(self) -> int | None:
        for i, c in enumerate(self.contracts):
            if c.is_pull:
                return i
        return None

    @property
    def emits(self) -> bool:
        return any(c.emission is not Emission.NEVER for c in self.contracts)


@dataclass(frozen=True)
class Order:
    actuator: str
    action: str

    def __str__(self) -> str:
        return f"{self.actuator}.{self.action}"


@dataclass(frozen=True)
class ControlOperator:
    id: str
    subscriptions: tuple[str, ...]
    orders: tuple[Order, ...]


@dataclass(frozen=True)
class Action:
    name: str
    param_types: tuple[str, ...] = ()


@dataclass(frozen=True)
class Actuator:
    id: str
    actions: tuple[Action, ...]

    def action(self, name: str) -> Action:
        for act in self.actions:
            if act.name == name:
                return act
        raise UnknownComponentError(f"{self.id}.{name}")


class Layer(enum.IntEnum):
    SENSOR = 0
    CONTEXT = 1
    CONTROL = 2
    ACTUATOR = 3


Component = Union[Sensor, ContextOperator, ControlOperator, Actuator]


@dataclass(frozen=True)
class Architecture:
    name: str
    types: tuple[TypeDecl, ...] = ()
    sensors: tuple[Sensor, ...] = ()
    contexts: tuple[ContextOperator, ...] = ()
    controllers: tuple[ControlOperator, ...] = ()
    actuators: tuple[Actuator, ...] = ()

    # lookup tables (not part of structural equality)

    @cached_property
    def _components(self) -> dict[str, Component]:
        table: dict[str, Component] = {}
        for group in (self.sensors, self.contexts, self.controllers, self.actuators):
            for comp in group:
                table[comp.id] = comp
        return table

    @cached_property
    def _types(self) -> dict[str, TypeDecl]:
        table = {TOP: TypeDecl(TOP)}
        table.update((t.name, t) for t in self.types)
        return table

    @property
    def component_ids(self) -> list[str]:
        return list(self._components)

    def component(self, cid: str) -> Component:
        try:
            return self._components[cid]
        except KeyError:
            raise UnknownComponentError(cid) from None

    def has_component(self, cid: str) -> bool:
        return cid in self._components

    def layer(self, name: Ref) -> Layer:
        if isinstance(name, SourceRef):
            return Layer.SENSOR
        comp = self.component(name)
        return {
            Sensor: Layer.SENSOR,
            ContextOperator: Layer.CONTEXT,
            ControlOperator: Layer.CONTROL,
            Actuator: Layer.ACTUATOR,
        }[type(comp)]

    def context(self, cid: str) -> ContextOperator:
        comp = self.component(cid)
        if not isinstance(comp, ContextOperator):
            raise UnknownComponentError(cid)
        return comp

    def is_context(self, name: Ref) -> bool:
        return isinstance(name, str) and isinstance(self._components.get(name), ContextOperator)

    def source(self, ref: SourceRef) -> Source:
        comp = self.component(ref.component)
        if not isinstance(comp, Sensor):
            raise UnknownComponentError(str(ref))
        return comp.source(ref.source)

    def resolves(self, ref: Ref) -> bool:
        try:
            if isinstance(ref, SourceRef):
                self.source(ref)
            else:
                self.context(ref)
        except UnknownComponentError:
            return False
        return True

    # -- types --------------------------------------------------------------

    def has_type(self, name: str) -> bool:
        return name in self._types

    def ancestors(self, name: str) -> list[str]:
        """``name`` followed by its supertype chain, ending at :data:`TOP`."""
        if name not in self._types:
            raise UnknownTypeError(name)
        chain = [name]
        seen = {name}
        while chain[-1] != TOP:
            sup = self._types[chain[-1]].supertype or TOP
            if sup not in self._types:
                raise UnknownTypeError(sup)
            if sup in seen:
                raise ModelError(f"cyclic supertype chain through {sup!r}")
            chain.append(sup)
            seen.add(sup)
        return chain

    def is_subtype(self, sub: str, sup: str) -> bool:
        return sup in self.ancestors(sub)

    def lub(self, t1: str, t2: str) -> str:
        return lub(self, t1, t2)

    # -- data-flow graph ----------------------------------------------------

    @cached_property
    def _parents(self) -> dict[Ref, list[str]]:
        parents: dict[Ref, list[str]] = {}
        for comp in (*self.contexts, *self.controllers, *self.actuators):
            for child in children(comp.id, self):
                parents.setdefault(child, [])
                if comp.id not in parents[child]:
                    parents[child].append(comp.id)
        return parents

    def parents(self, name: Ref) -> list[str]:
        return list(self._parents.get(name, ()))

    @cached_property
    def _push_parents(self) -> dict[Ref, list[str]]:
        table: dict[Ref, list[str]] = {}
        for op in self.contexts:
            for c in op.contracts:
                if isinstance(c.activation, Push):
                    for n in names(c.activation):
                        lst = table.setdefault(n, [])
                        if op.id not in lst:
                            lst.append(op.id)
        for ctl in self.controllers:
            for sub in ctl.subscriptions:
                lst = table.setdefault(sub, [])
                if ctl.id not in lst:
                    lst.append(ctl.id)
        return table

    def push_parents(self, name: Ref) -> list[str]:
        """Components that receive the values pushed by ``name``."""
        return list(self._push_parents.get(name, ()))

    @cached_property
    def _pullers(self) -> dict[Ref, list[str]]:
        table: dict[Ref, list[str]] = {}
        for op in self.contexts:
            for c in op.contracts:
                for r in c.requirements:
                    lst = table.setdefault(r, [])
                    if op.id not in lst:
                        lst.append(op.id)
        return table

    def pullers(self, name: Ref) -> list[str]:
        return list(self._pullers.get(name, ()))

    def all_sources(self) -> list[SourceRef]:
        return [SourceRef(s.id, src.name) for s in self.sensors for src in s.sources]


def names(item: Activation | Iterable[Ref]) -> frozenset:
    """Flat set of names used by an activation condition or a requirement list.

    Disjunctions are expanded; a pull activation yields ``{SELF}``.
    """
    if isinstance(item, PullSelf):
        return frozenset({SELF})
    if isinstance(item, Push):
        return frozenset(n for term in item.terms for n in term)
    return frozenset(item)


def _ordered_unique(items: Iterable) -> list:
    out = []
    for item in items:
        if item not in out:
            out.append(item)
    return out


def children(cid: str, arch: Architecture) -> list[Ref | str]:
    """Sources of the incoming data-flow edges of ``cid``, in declaration order.

    For an actuator these are the control operators ordering one of its
    actions.
    """
    comp = arch.component(cid)
    if isinstance(comp, Sensor):
        return []
    if isinstance(comp, ContextOperator):
        found = []
        for c in comp.contracts:
            if isinstance(c.activation, Push):
                found.extend(n for term in c.activation.terms for n in term)
            found.extend(c.requirements)
        return _ordered_unique(found)
    if isinstance(comp, ControlOperator):
        return _ordered_unique(comp.subscriptions)
    return _ordered_unique(
        ctl.id for ctl in arch.controllers for o in ctl.orders if o.actuator == cid
    )


def lub(arch: Architecture, t1: str, t2: str) -> str:
    """Smallest common supertype of ``t1`` and ``t2``."""
    up = set(arch.ancestors(t1))
    for t in arch.ancestors(t2):
        if t in up:
            return t
    return TOP  # unreachable: both chains end at TOP
