"""Contract-enforcing simulator for architectures.

A single logical worker drains a queue of pending component interactions
(pushed values and actuator orders).  Pull requests run synchronously inside
the requesting activation.  Handlers only ever see values and callback
capabilities; the callbacks are voided once the activation returns or once
their invocation quota is used up.
"""

from __future__ import annotations

import inspect
import json
import random
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable, Union

from .denotation import PUBLISH_CALLBACK, PULL_ARGS, PULL_CALLBACK, SignatureDescriptor
from .framework import FrameworkManifest, GuardPolicy, generate_manifest
from .model import (
    Architecture,
    ContextOperator,
    ControlOperator,
    Emission,
    Push,
    Ref,
    SourceRef,
    parse_ref,
)

EXTERNAL = "<external>"


class SimulationError(Exception):
    pass


class UnknownDescriptorError(SimulationError):
    pass


class DuplicateBindingError(SimulationError):
    pass


class ShapeMismatchError(SimulationError):
    pass


class NotReadyError(SimulationError):
    pass


class NoPullContractError(SimulationError):
    pass


class GuardViolationError(SimulationError):
    def __init__(self, callback: str, reason: str):
        super().__init__(f"callback {callback} rejected: {reason}")
        self.callback = callback
        self.reason = reason


class PullFailedError(SimulationError):
    pass


# -- trace events -----------------------------------------------------------


def _fmt(value: Any) -> str:
    return json.dumps(value, sort_keys=True, default=str, ensure_ascii=False)


@dataclass(frozen=True)
class Event:
    def line(self) -> str:
        parts = [type(self).__name__]
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("value", "args"):
                v = _fmt(v)
            elif isinstance(v, tuple):
                v = ",".join(map(str, v)) or "-"
            elif v is None:
                v = "-"
            parts.append(f"{f.name}={v}")
        return " ".join(parts)

    def record(self) -> dict:
        data = {"event": type(self).__name__}
        data.update(asdict(self))
        return data


@dataclass(frozen=True)
class SourcePublished(Event):
    source: str
    value: Any


@dataclass(frozen=True)
class OperatorActivated(Event):
    operator: str
    contract: int
    method: str
    children: tuple[str, ...] = ()
    caller: str | None = None


@dataclass(frozen=True)
class PullIssued(Event):
    caller: str
    target: str
    args: tuple = ()


@dataclass(frozen=True)
class PullReturned(Event):
    caller: str
    target: str
    value: Any = None


@dataclass(frozen=True)
class ValuePublished(Event):
    operator: str
    value: Any


@dataclass(frozen=True)
class ActionInvoked(Event):
    actuator: str
    action: str
    args: tuple = ()
    controller: str | None = None


@dataclass(frozen=True)
class GuardViolation(Event):
    operator: str
    callback: str
    reason: str  # "stale" | "quota"


@dataclass(frozen=True)
class Fault(Event):
    component: str
    reason: str


@dataclass(frozen=True)
class ActivationCompleted(Event):
    operator: str
    contract: int
    status: str  # "ok" | "aborted" | "fault"


@dataclass
class SimTrace:
    events: list[Event] = field(default_factory=list)

    @property
    def faults(self) -> list[Fault]:
        return [e for e in self.events if isinstance(e, Fault)]

    @property
    def ok(self) -> bool:
        return not self.faults

    def of(self, kind: type) -> list:
        return [e for e in self.events if isinstance(e, kind)]

    def render(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)

    def render_machine(self) -> str:
        return "".join(_fmt(e.record()) + "\n" for e in self.events)

    def __len__(self) -> int:
        return len(self.events)


# -- scenarios --------------------------------------------------------------


@dataclass(frozen=True)
class Stimulus:
    source: SourceRef
    value: Any


@dataclass(frozen=True)
class Probe:
    target: str
    args: tuple = ()


ScenarioItem = Union[Stimulus, Probe]


class ScenarioError(SimulationError):
    pass


def parse_scenario(text: str, path: str = "<scenario>") -> list[ScenarioItem]:
    """Parse ``publish <Sensor>.<source> <literal>`` / ``pull <Op> (<literals>)`` lines."""
    items: list[ScenarioItem] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        verb, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if verb == "publish":
                name, _, literal = rest.partition(" ")
                ref = parse_ref(name)
                if not isinstance(ref, SourceRef):
                    raise ScenarioError("publish needs a Sensor.source reference")
                items.append(Stimulus(ref, json.loads(literal)))
            elif verb == "pull":
                name, _, literal = rest.partition(" ")
                literal = literal.strip()
                if not (literal.startswith("(") and literal.endswith(")")):
                    raise ScenarioError("pull arguments must be parenthesized")
                items.append(Probe(name, tuple(json.loads(f"[{literal[1:-1]}]"))))
            else:
                raise ScenarioError(f"unknown directive {verb!r}")
        except (ValueError, ScenarioError) as exc:
            raise ScenarioError(f"{path}:{lineno}: {exc}") from None
    return items


def load_scenario(path: str | Path) -> list[ScenarioItem]:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))


# -- handlers ---------------------------------------------------------------


class _Latest:
    def __repr__(self) -> str:
        return "LATEST"


# Bind to a pull contract to answer with the operator's most recent published value.
LATEST = _Latest()


@dataclass(frozen=True)
class Handler:
    operator_id: str
    method: str
    body: Callable[..., Any] | _Latest


def _validate_shape(desc: SignatureDescriptor, body: Callable) -> None:
    try:
        sig = inspect.signature(body)
    except (TypeError, ValueError):
        return
    try:
        sig.bind(*range(len(desc.params)))
    except TypeError:
        raise ShapeMismatchError(
            f"{desc.name} takes {len(desc.params)} argument(s) "
            f"({', '.join(p.name for p in desc.params) or 'none'})"
        ) from None
    ann = sig.return_annotation
    if ann is inspect.Signature.empty:
        return
    returns_unit = ann is None or ann == "None"
    if desc.returns_value and returns_unit:
        raise ShapeMismatchError(f"{desc.name} must return a value but the handler returns None")
    if not desc.returns_value and not returns_unit:
        raise ShapeMismatchError(f"{desc.name} returns () but the handler is annotated {ann}")


class _Activation:
    def __init__(self, operator: str, contract: int):
        self.operator = operator
        self.contract = contract
        self.alive = True
        self.aborted = False
        self.published = 0


class _Callback:
    def __init__(self, sim: Simulator, act: _Activation, name: str, policy: GuardPolicy):
        self._sim = sim
        self._act = act
        self._name = name
        self._policy = policy
        self._count = 0

    def _guard(self) -> None:
        sim, act = self._sim, self._act
        if not act.alive:
            sim._emit(GuardViolation(act.operator, self._name, "stale"))
            raise GuardViolationError(self._name, "stale")
        limit = self._policy.max_invocations
        if limit is not None and self._count >= limit:
            act.aborted = True
            sim._emit(GuardViolation(act.operator, self._name, "quota"))
            raise GuardViolationError(self._name, "quota")
        self._count += 1

    def __repr__(self) -> str:
        return f"<callback {self._name}>"


class PullCallback(_Callback):
    def __init__(self, sim, act, name, policy, target: Ref, arity: int):
        super().__init__(sim, act, name, policy)
        self._target = target
        self._arity = arity

    def __call__(self, *args):
        self._guard()
        if len(args) != self._arity:
            raise TypeError(f"{self._name} takes {self._arity} argument(s), got {len(args)}")
        return self._sim._pull(self._act.operator, self._target, tuple(args))


class PublishCallback(_Callback):
    def __call__(self, value):
        self._guard()
        if value is None:
            raise TypeError("cannot publish None")
        self._act.published += 1
        self._sim._publish_value(self._act.operator, value)


@dataclass
class _Pending:
    target: str
    child: str | Ref
    value: Any
    action: str | None = None  # actuator orders only


class Simulator:
    """Executes an architecture's push/pull semantics over scenarios.

    ``sync_policy`` is ``"queue"`` (one FIFO per activation term) or
    ``"latest"`` (keep only the newest value per term); a dict maps operator
    ids to a policy.  ``scheduler`` is ``"fifo"`` or ``"random"`` (seeded).
    """

    def __init__(self, arch: Architecture, manifest: FrameworkManifest | None = None, *,
                 sync_policy: str | dict[str, str] = "queue", scheduler: str = "fifo",
                 seed: int = 0, max_steps: int = 100_000):
        self.arch = arch
        self.manifest = manifest or generate_manifest(arch)
        self.sync_policy = sync_policy
        if scheduler not in ("fifo", "random"):
            raise ValueError(f"unknown scheduler {scheduler!r}")
        self.scheduler = scheduler
        self.rng = random.Random(seed)
        self.max_steps = max_steps
        self.handlers: dict[tuple[str, str], Callable | _Latest] = {}
        self.sources: dict[SourceRef, Callable] = {}
        self.actions: dict[tuple[str, str], Callable] = {}
        self.events: list[Event] = []
        self._pending: list[_Pending] = []
        self._queues: dict[tuple[str, int], list[deque]] = {}
        self._stack: list[str] = []
        self._latest: dict[str, Any] = {}
        self._latest_source: dict[SourceRef, Any] = {}
        self._steps = 0

    # -- registration -------------------------------------------------------

    def descriptor(self, operator_id: str, method: str) -> SignatureDescriptor:
        try:
            return self.manifest.operator(operator_id).method(method)
        except KeyError:
            raise UnknownDescriptorError(f"no abstract method {operator_id}.{method}") from None

    def register_handler(self, handler: Handler) -> None:
        desc = self.descriptor(handler.operator_id, handler.method)
        key = (handler.operator_id, handler.method)
        if key in self.handlers:
            raise DuplicateBindingError(f"{handler.operator_id}.{handler.method} is already bound")
        if handler.body is LATEST:
            contract = self.arch.context(handler.operator_id).contracts[desc.contract_index]
            if not contract.is_pull:
                raise ShapeMismatchError("LATEST only answers pull contracts")
        else:
            _validate_shape(desc, handler.body)
        self.handlers[key] = handler.body

    def bind(self, operator_id: str, method: str, body: Callable | _Latest) -> None:
        self.register_handler(Handler(operator_id, method, body))

    def bind_all(self, handlers: dict[tuple[str, str], Callable]) -> None:
        for (op, method), body in handlers.items():
            self.bind(op, method, body)

    def register_source(self, ref: SourceRef | str, fn: Callable) -> None:
        ref = parse_ref(ref) if isinstance(ref, str) else ref
        self.arch.source(ref)
        self.sources[ref] = fn

    def register_action(self, actuator: str, action: str, fn: Callable) -> None:
        self.arch.component(actuator).action(action)
        self.actions[(actuator, action)] = fn

    def missing_handlers(self) -> list[str]:
        return [f"{e.operator_id}.{d.name}" for e in self.manifest.operators
                for d in e.abstract_methods if (e.operator_id, d.name) not in self.handlers]

    # -- running ------------------------------------------------------------

    def run(self, scenario: Iterable[ScenarioItem]) -> SimTrace:
        missing = self.missing_handlers()
        if missing:
            raise NotReadyError("unbound abstract methods: " + ", ".join(missing))
        start = len(self.events)
        for item in scenario:
            if isinstance(item, Stimulus):
                self.publish(item.source, item.value)
            else:
                try:
                    self.external_pull(item.target, *item.args)
                except (NoPullContractError, PullFailedError, TypeError) as exc:
                    self._emit(Fault(item.target, str(exc)))
        return SimTrace(self.events[start:])

    def publish(self, source: SourceRef | str, value: Any) -> None:
        ref = parse_ref(source) if isinstance(source, str) else source
        self.arch.source(ref)
        self._emit(SourcePublished(str(ref), value))
        self._latest_source[ref] = value
        self._deliver(ref, value)
        self._drain()

    def external_pull(self, target: str, *args) -> Any:
        """Pull ``target`` from outside the architecture, as a parent would."""
        op = self.arch.context(target)
        if op.pull_contract_index() is None:
            raise NoPullContractError(f"{target} has no pull contract")
        if len(args) != len(op.args):
            raise TypeError(f"pull of {target} takes {len(op.args)} argument(s), got {len(args)}")
        value = self._pull(EXTERNAL, target, tuple(args))
        self._drain()
        return value

    def latest(self, operator_id: str) -> Any:
        return self._latest.get(operator_id)

    # -- internals ----------------------------------------------------------

    def _emit(self, event: Event) -> None:
        self.events.append(event)

    def _deliver(self, child: Ref, value: Any) -> None:
        for parent in self.arch.push_parents(child):
            self._pending.append(_Pending(parent, child, value))

    def _publish_value(self, operator: str, value: Any) -> None:
        self._latest[operator] = value
        self._emit(ValuePublished(operator, value))
        self._deliver(operator, value)

    def _next(self) -> _Pending:
        if self.scheduler == "fifo":
            return self._pending.pop(0)
        targets = sorted({p.target for p in self._pending})
        chosen = self.rng.choice(targets)
        for i, p in enumerate(self._pending):
            if p.target == chosen:
                return self._pending.pop(i)
        raise AssertionError("unreachable")

    def _drain(self) -> None:
        while self._pending:
            self._steps += 1
            if self._steps > self.max_steps:
                self._pending.clear()
                raise SimulationError(f"step limit of {self.max_steps} exceeded")
            item = self._next()
            comp = self.arch.component(item.target)
            if isinstance(comp, ContextOperator):
                self._receive(comp, item.child, item.value)
            elif isinstance(comp, ControlOperator):
                self._control(comp, item.child, item.value)
            else:
                self._actuate(item)

    def _policy(self, operator_id: str) -> str:
        if isinstance(self.sync_policy, dict):
            return self.sync_policy.get(operator_id, "queue")
        return self.sync_policy

    def _receive(self, op: ContextOperator, child: Ref, value: Any) -> None:
        matched = False
        for idx, contract in enumerate(op.contracts):
            act = contract.activation
            if not isinstance(act, Push):
                continue
            term = next((t for t, names in enumerate(act.terms) if child in names), None)
            if term is None:
                continue
            matched = True
            key = (op.id, idx)
            if key not in self._queues:
                maxlen = 1 if self._policy(op.id) == "latest" else None
                self._queues[key] = [deque(maxlen=maxlen) for _ in act.terms]
            queues = self._queues[key]
            queues[term].append((child, value))
            if all(queues):
                taken = [q.popleft() for q in queues]
                self._activate(op, idx, [v for _, v in taken],
                               tuple(str(c) for c, _ in taken))
        if not matched:
            self._emit(Fault(op.id, f"no matching contract for a value from {child}"))

    def pending_values(self, operator_id: str, contract: int = 0) -> list[int]:
        """Number of values waiting in each synchronization queue."""
        return [len(q) for q in self._queues.get((operator_id, contract), [])]

    def _activate(self, op: ContextOperator, idx: int, values: list, children: tuple = (),
                  caller: str | None = None) -> Any:
        """Run one activation; returns the handler result, raises PullFailedError on failure."""
        entry = self.manifest.operator(op.id)
        desc = entry.method_for(idx)
        contract = op.contracts[idx]
        if op.id in self._stack:
            self._emit(Fault(op.id, "pull cycle: " + " -> ".join(self._stack + [op.id])))
            raise PullFailedError(f"pull cycle through {op.id}")
        body = self.handlers[(op.id, desc.name)]
        self._stack.append(op.id)
        act = _Activation(op.id, idx)
        self._emit(OperatorActivated(op.id, idx, desc.name, children, caller))
        status, result = "ok", None
        try:
            if body is LATEST:
                result = self._latest.get(op.id)
            else:
                args = list(values)
                for p in desc.params:
                    if p.role == PULL_CALLBACK:
                        target = parse_ref(p.target)
                        arity = len(self.manifest_args(target))
                        args.append(PullCallback(self, act, p.callback, self.manifest.guards.pull,
                                                 target, arity))
                    elif p.role == PUBLISH_CALLBACK:
                        args.append(PublishCallback(self, act, p.callback,
                                                    self.manifest.guards.publish))
                result = body(*args)
        except GuardViolationError:
            status = "aborted"
        except Exception as exc:  # handler fault
            status = "fault"
            self._emit(Fault(op.id, f"{type(exc).__name__}: {exc}"))
        finally:
            act.alive = False
            self._stack.pop()
        if status == "ok" and act.aborted:
            status = "aborted"
        if status == "ok":
            if desc.returns_value and result is None:
                status = "fault"
                self._emit(Fault(op.id, f"{desc.name} returned None but must return a value"))
            elif not desc.returns_value and result is not None:
                status = "fault"
                self._emit(Fault(op.id, f"{desc.name} must not return a value"))
        if status == "ok" and contract.emission is Emission.ALWAYS:
            self._publish_value(op.id, result)
        self._emit(ActivationCompleted(op.id, idx, status))
        if status != "ok" and caller is not None:
            raise PullFailedError(f"pull of {op.id} failed ({status})")
        return result

    def manifest_args(self, target: Ref) -> tuple[str, ...]:
        if isinstance(target, SourceRef):
            return self.arch.source(target).pull_params
        return self.arch.context(target).args

    def _pull(self, caller: str, target: Ref, args: tuple) -> Any:
        self._emit(PullIssued(caller, str(target), args))
        if isinstance(target, SourceRef):
            fn = self.sources.get(target)
            if fn is not None:
                value = fn(*args)
            elif not args and target in self._latest_source:
                value = self._latest_source[target]
            else:
                value = f"{target}({', '.join(map(str, args))})"
        else:
            op = self.arch.context(target)
            idx = op.pull_contract_index()
            if idx is None:
                raise NoPullContractError(f"{target} has no pull contract")
            pull_params = [p for p in self.manifest.operator(target).method_for(idx).params
                           if p.role == PULL_ARGS]
            value = self._activate(op, idx, list(args)[:len(pull_params)], caller=caller)
        self._emit(PullReturned(caller, str(target), value))
        return value

    def _control(self, ctl: ControlOperator, child: str, value: Any) -> None:
        self._emit(OperatorActivated(ctl.id, 0, "forward", (str(child),)))
        for order in ctl.orders:
            self._pending.append(_Pending(order.actuator, ctl.id, value, order.action))
        self._emit(ActivationCompleted(ctl.id, 0, "ok"))

    def _actuate(self, item: _Pending) -> None:
        self._emit(ActionInvoked(item.target, item.action, (item.value,), item.child))
        fn = self.actions.get((item.target, item.action))
        if fn is not None:
            try:
                fn(item.value)
            except Exception as exc:
                self._emit(Fault(item.target, f"{type(exc).__name__}: {exc}"))


# -- trace properties -------------------------------------------------------


def integrity_violations(arch: Architecture, events: Iterable[Event]) -> list[str]:
    """Interaction edges in a trace that the architecture does not declare."""
    problems = []
    for e in events:
        if isinstance(e, PullIssued):
            target = parse_ref(e.target)
            if e.caller == EXTERNAL:
                ok = arch.is_context(e.target) and \
                    arch.context(e.target).pull_contract_index() is not None
            else:
                ok = arch.is_context(e.caller) and any(
                    target in c.requirements for c in arch.context(e.caller).contracts)
            if not ok:
                problems.append(f"undeclared pull {e.caller} -> {e.target}")
        elif isinstance(e, OperatorActivated):
            comp = arch.component(e.operator)
            for child in e.children:
                if e.operator not in arch.push_parents(parse_ref(child)):
                    problems.append(f"undeclared push {child} -> {e.operator}")
            if isinstance(comp, ContextOperator) and e.caller is not None and \
                    not comp.contracts[e.contract].is_pull:
                problems.append(f"{e.operator} activated by pull on a push contract")
        elif isinstance(e, ActionInvoked):
            ctl = arch.component(e.controller)
            if not isinstance(ctl, ControlOperator) or \
                    (e.actuator, e.action) not in {(o.actuator, o.action) for o in ctl.orders}:
                problems.append(f"undeclared order {e.controller} -> {e.actuator}.{e.action}")
    return problems
