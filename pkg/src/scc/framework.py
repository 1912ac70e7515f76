"""Framework manifests: the implementation obligations derived from an architecture.

For every basic contract the manifest lists an abstract method (its
denotation), the calling method the framework uses to invoke it, and the
callbacks handed to the implementation for optional interactions.  Mandatory
interactions (``always publish``, returning a pulled value) appear as post
actions of the calling method instead of callbacks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .checker import CheckReport, check
from .denotation import (
    PUBLISH_CALLBACK,
    PULL_CALLBACK,
    Param,
    SignatureDescriptor,
    TypeTerm,
    denote,
    from_data,
    render,
    to_data,
)
from .model import Architecture, BasicContract, ContextOperator, Emission, ModelError
from .parser import format_activation

MANIFEST_VERSION = 1

PUBLISH_ALWAYS = "publish-always"
PUBLISH_ON_CALLBACK = "publish-on-callback"
RETURN_TO_CALLER = "return-to-caller"


class GenerationError(ModelError):
    def __init__(self, report: CheckReport):
        super().__init__("architecture failed checks:\n" + report.render_text())
        self.report = report


@dataclass(frozen=True)
class GuardPolicy:
    max_invocations: int | None = None  # None: unlimited
    scope: str = "handler-lifetime"

    def __post_init__(self):
        if self.max_invocations is not None and self.max_invocations < 1:
            raise ValueError("max_invocations must be at least 1")

    def __str__(self) -> str:
        limit = "unlimited" if self.max_invocations is None else f"max {self.max_invocations}"
        return f"{self.scope}, {limit}"


@dataclass(frozen=True)
class GuardConfig:
    pull: GuardPolicy = GuardPolicy(None)
    publish: GuardPolicy = GuardPolicy(1)


@dataclass(frozen=True)
class Callback:
    name: str
    method: str
    signature: TypeTerm
    guard: GuardPolicy
    kind: str  # "pull" | "publish"
    target: str | None = None


@dataclass(frozen=True)
class CallingMethod:
    triggers: str
    invokes: str
    post_actions: tuple[str, ...]


@dataclass(frozen=True)
class OperatorEntry:
    operator_id: str
    value_type: str
    abstract_methods: tuple[SignatureDescriptor, ...]
    callbacks: tuple[Callback, ...]
    calling_methods: tuple[CallingMethod, ...]

    def method(self, name: str) -> SignatureDescriptor:
        for m in self.abstract_methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def method_for(self, contract_index: int) -> SignatureDescriptor:
        for m in self.abstract_methods:
            if m.contract_index == contract_index:
                return m
        raise KeyError(contract_index)

    def callbacks_of(self, method: str) -> list[Callback]:
        return [cb for cb in self.callbacks if cb.method == method]

    def calling(self, method: str) -> CallingMethod:
        for cm in self.calling_methods:
            if cm.invokes == method:
                return cm
        raise KeyError(method)


@dataclass(frozen=True)
class ControllerEntry:
    controller_id: str
    subscriptions: tuple[str, ...]
    orders: tuple[str, ...]


@dataclass(frozen=True)
class ActuatorEntry:
    actuator_id: str
    actions: tuple[tuple[str, tuple[str, ...]], ...]


@dataclass(frozen=True)
class SensorEntry:
    sensor_id: str
    sources: tuple[tuple[str, str, tuple[str, ...]], ...]


@dataclass(frozen=True)
class FrameworkManifest:
    architecture_name: str
    operators: tuple[OperatorEntry, ...] = ()
    controllers: tuple[ControllerEntry, ...] = ()
    actuators: tuple[ActuatorEntry, ...] = ()
    sensors: tuple[SensorEntry, ...] = ()
    guards: GuardConfig = field(default_factory=GuardConfig)

    def operator(self, oid: str) -> OperatorEntry:
        for entry in self.operators:
            if entry.operator_id == oid:
                return entry
        raise KeyError(oid)

    def component_ids(self) -> set[str]:
        return ({e.operator_id for e in self.operators}
                | {e.controller_id for e in self.controllers}
                | {e.actuator_id for e in self.actuators}
                | {e.sensor_id for e in self.sensors})


def post_actions(contract: BasicContract) -> tuple[str, ...]:
    actions = []
    if contract.is_pull:
        actions.append(RETURN_TO_CALLER)
    if contract.emission is Emission.ALWAYS:
        actions.append(PUBLISH_ALWAYS)
    elif contract.emission is Emission.MAYBE:
        actions.append(PUBLISH_ON_CALLBACK)
    return tuple(actions)


def _operator_entry(op: ContextOperator, arch: Architecture, guards: GuardConfig) -> OperatorEntry:
    methods = denote(op, arch)
    callbacks = []
    calling = []
    for desc in methods:
        contract = op.contracts[desc.contract_index]
        for p in desc.params:
            if p.role == PULL_CALLBACK:
                callbacks.append(Callback(p.callback, desc.name, p.type, guards.pull, "pull", p.target))
            elif p.role == PUBLISH_CALLBACK:
                callbacks.append(Callback(p.callback, desc.name, p.type, guards.publish, "publish"))
        calling.append(CallingMethod(format_activation(contract.activation), desc.name,
                                     post_actions(contract)))
    return OperatorEntry(op.id, op.value_type, tuple(methods), tuple(callbacks), tuple(calling))


def generate_manifest(arch: Architecture, guards: GuardConfig | None = None,
                      verify: bool = True) -> FrameworkManifest:
    """Build the manifest; refuses inconsistent or nondeterministic architectures."""
    if verify:
        report = check(arch)
        if not report.ok:
            raise GenerationError(report)
    guards = guards or GuardConfig()
    return FrameworkManifest(
        arch.name,
        tuple(_operator_entry(op, arch, guards) for op in arch.contexts),
        tuple(ControllerEntry(c.id, c.subscriptions, tuple(str(o) for o in c.orders))
              for c in arch.controllers),
        tuple(ActuatorEntry(a.id, tuple((x.name, x.param_types) for x in a.actions))
              for a in arch.actuators),
        tuple(SensorEntry(s.id, tuple((x.name, x.value_type, x.pull_params) for x in s.sources))
              for s in arch.sensors),
        guards,
    )


# -- serialization ----------------------------------------------------------


def _guard_data(g: GuardPolicy) -> dict:
    return {"scope": g.scope, "maxInvocations": g.max_invocations}


def _guard_from(d: dict) -> GuardPolicy:
    return GuardPolicy(d["maxInvocations"], d["scope"])


def _descriptor_data(d: SignatureDescriptor) -> dict:
    return {
        "name": d.name,
        "contractIndex": d.contract_index,
        "params": [{"role": p.role, "name": p.name, "type": to_data(p.type),
                    "target": p.target, "callback": p.callback} for p in d.params],
        "returnType": to_data(d.return_type),
        "signature": d.type_string(),
    }


def _descriptor_from(d: dict) -> SignatureDescriptor:
    params = tuple(Param(p["role"], p["name"], from_data(p["type"]), p["target"], p["callback"])
                   for p in d["params"])
    return SignatureDescriptor(d["name"], params, from_data(d["returnType"]), d["contractIndex"])


def manifest_to_data(m: FrameworkManifest) -> dict:
    return {
        "manifestVersion": MANIFEST_VERSION,
        "architecture": m.architecture_name,
        "guards": {"pull": _guard_data(m.guards.pull), "publish": _guard_data(m.guards.publish)},
        "operators": [{
            "id": e.operator_id,
            "valueType": e.value_type,
            "abstractMethods": [_descriptor_data(d) for d in e.abstract_methods],
            "callbacks": [{"name": c.name, "method": c.method, "kind": c.kind,
                           "target": c.target, "signature": to_data(c.signature),
                           "guard": _guard_data(c.guard)} for c in e.callbacks],
            "callingMethods": [{"triggers": c.triggers, "invokes": c.invokes,
                                "postActions": list(c.post_actions)} for c in e.calling_methods],
        } for e in m.operators],
        "controllers": [{"id": c.controller_id, "subscriptions": list(c.subscriptions),
                         "orders": list(c.orders)} for c in m.controllers],
        "actuators": [{"id": a.actuator_id,
                       "actions": [{"name": n, "params": list(p)} for n, p in a.actions]}
                      for a in m.actuators],
        "sensors": [{"id": s.sensor_id,
                     "sources": [{"name": n, "type": t, "pullParams": list(p)}
                                 for n, t, p in s.sources]} for s in m.sensors],
    }


def manifest_from_data(data: dict) -> FrameworkManifest:
    version = data.get("manifestVersion")
    if version != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {version!r}")
    ops = tuple(OperatorEntry(
        e["id"], e["valueType"],
        tuple(_descriptor_from(d) for d in e["abstractMethods"]),
        tuple(Callback(c["name"], c["method"], from_data(c["signature"]), _guard_from(c["guard"]),
                       c["kind"], c["target"]) for c in e["callbacks"]),
        tuple(CallingMethod(c["triggers"], c["invokes"], tuple(c["postActions"]))
              for c in e["callingMethods"]),
    ) for e in data["operators"])
    return FrameworkManifest(
        data["architecture"], ops,
        tuple(ControllerEntry(c["id"], tuple(c["subscriptions"]), tuple(c["orders"]))
              for c in data["controllers"]),
        tuple(ActuatorEntry(a["id"], tuple((x["name"], tuple(x["params"])) for x in a["actions"]))
              for a in data["actuators"]),
        tuple(SensorEntry(s["id"], tuple((x["name"], x["type"], tuple(x["pullParams"]))
                                         for x in s["sources"])) for s in data["sensors"]),
        GuardConfig(_guard_from(data["guards"]["pull"]), _guard_from(data["guards"]["publish"])),
    )


def dumps(m: FrameworkManifest) -> str:
    return json.dumps(manifest_to_data(m), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def loads(text: str) -> FrameworkManifest:
    return manifest_from_data(json.loads(text))


# -- stubs ------------------------------------------------------------------


def render_stubs(m: FrameworkManifest) -> str:
    lines = [f"// framework for architecture {m.architecture_name}"]
    for e in m.sensors:
        lines.append("")
        lines.append(f"sensor {e.sensor_id}")
        for name, vtype, params in e.sources:
            lines.append(f"  source {name}({', '.join(params)}) -> {vtype}")
    for e in m.operators:
        lines.append("")
        lines.append(f"context operator {e.operator_id} : {e.value_type}")
        for desc in e.abstract_methods:
            lines.append(f"  abstract {desc.stub()}")
            for cb in e.callbacks_of(desc.name):
                lines.append(f"    callback {cb.name}: {render(cb.signature, ascii=True)}"
                             f"  [guard: {cb.guard}]")
            cm = e.calling(desc.name)
            post = ", ".join(cm.post_actions) or "nothing"
            lines.append(f"    called on {cm.triggers}; then {post}")
    for e in m.controllers:
        lines.append("")
        lines.append(f"control operator {e.controller_id}")
        for sub in e.subscriptions:
            lines.append(f"  on push({sub}) forward to {', '.join(e.orders)}")
    for e in m.actuators:
        lines.append("")
        lines.append(f"actuator {e.actuator_id}")
        for name, params in e.actions:
            lines.append(f"  abstract {name}({', '.join(params)}) -> ()")
    return "\n".join(lines) + "\n"


# -- diffing ----------------------------------------------------------------

ADDED, REMOVED, CHANGED = "added", "removed", "changed"


@dataclass(frozen=True)
class DiffEntry:
    kind: str
    path: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind} {self.path}" + (f": {self.detail}" if self.detail else "")


def _obligations(m: FrameworkManifest) -> dict[str, str]:
    flat: dict[str, str] = {}
    for e in m.operators:
        base = f"operators/{e.operator_id}"
        flat[base] = f"context operator : {e.value_type}"
        for d in e.abstract_methods:
            flat[f"{base}/methods/{d.name}"] = d.stub()
        for cb in e.callbacks:
            flat[f"{base}/callbacks/{cb.method}/{cb.name}"] = (
                f"{render(cb.signature, ascii=True)} [guard: {cb.guard}]")
        for cm in e.calling_methods:
            flat[f"{base}/calling/{cm.invokes}"] = (
                f"on {cm.triggers}; then {', '.join(cm.post_actions) or 'nothing'}")
    for c in m.controllers:
        flat[f"controllers/{c.controller_id}"] = (
            f"on push({', '.join(c.subscriptions)}) do {', '.join(c.orders)}")
    for a in m.actuators:
        flat[f"actuators/{a.actuator_id}"] = "actuator"
        for name, params in a.actions:
            flat[f"actuators/{a.actuator_id}/actions/{name}"] = f"{name}({', '.join(params)})"
    for s in m.sensors:
        flat[f"sensors/{s.sensor_id}"] = "sensor"
        for name, vtype, params in s.sources:
            flat[f"sensors/{s.sensor_id}/sources/{name}"] = f"({', '.join(params)}) -> {vtype}"
    return flat


def diff_manifests(old: FrameworkManifest, new: FrameworkManifest) -> list[DiffEntry]:
    """Obligations the developer must add, remove or re-sign after regeneration."""
    a, b = _obligations(old), _obligations(new)
    out = []
    for path in sorted(a.keys() | b.keys()):
        if path not in a:
            out.append(DiffEntry(ADDED, path, b[path]))
        elif path not in b:
            out.append(DiffEntry(REMOVED, path, a[path]))
        elif a[path] != b[path]:
            out.append(DiffEntry(CHANGED, path, f"{a[path]} => {b[path]}"))
    return out
