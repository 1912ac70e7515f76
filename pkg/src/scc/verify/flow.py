"""Flow models: one process per basic contract, one channel per interaction.

Values are abstracted to tokens; every send transmits ``1``.  Each process
is a ``do/od`` loop whose branches start with the guarded receive of its
activation condition, followed by a request/response pair per data
requirement and a send for the emission.  Publishers with several parents
push into their own channel and a fan-out process copies each token to one
channel per parent.  The same tree is rendered as Promela and interpreted by
:mod:`scc.verify.modelcheck`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..denotation import capitalize, denote, typeof
from ..model import Architecture, ContextOperator, Emission, Push, Ref, SourceRef
from ..runtime import (
    ActionInvoked,
    Event,
    OperatorActivated,
    PullIssued,
    PullReturned,
    SourcePublished,
    ValuePublished,
)


@dataclass(frozen=True)
class PublishDeclined(Event):
    """A ``maybe`` emission that chose not to publish."""

    operator: str


@dataclass(frozen=True)
class Recv:
    chan: str
    var: str
    note: Event | None = None


@dataclass(frozen=True)
class Send:
    chan: str
    note: Event | None = None
    # (operator, published) when this send resolves a ``maybe`` emission
    decision: tuple[str, bool] | None = None


@dataclass(frozen=True)
class Skip:
    note: Event | None = None
    decision: tuple[str, bool] | None = None


@dataclass(frozen=True)
class Break:
    pass


@dataclass(frozen=True)
class Choice:
    alternatives: tuple[tuple[Stmt, ...], ...]


Stmt = Union[Recv, Send, Skip, Break, Choice]


@dataclass(frozen=True)
class Process:
    name: str
    branches: tuple[tuple[Stmt, ...], ...]
    variables: tuple[str, ...] = ()
    component: str | None = None
    generator: bool = False


@dataclass
class FlowModel:
    name: str
    channels: dict[str, int] = field(default_factory=dict)  # name -> capacity
    processes: list[Process] = field(default_factory=list)
    # component interaction edge -> channel carrying it
    edges: dict[tuple[str, str, str], str] = field(default_factory=dict)
    omitted: list[str] = field(default_factory=list)

    def process(self, name: str) -> Process:
        for p in self.processes:
            if p.name == name:
                return p
        raise KeyError(name)


def low(name: Ref | str) -> str:
    return str(name).lower().replace(".", "_")


def _proc_name(text: Ref | str) -> str:
    return str(text).replace(".", "_")


class _Vars:
    def __init__(self):
        self.names: list[str] = []

    def fresh(self, base: str) -> str:
        base = base.lower()
        name, n = base, 2
        while name in self.names:
            name, n = f"{base}{n}", n + 1
        self.names.append(name)
        return name


class _Builder:
    def __init__(self, arch: Architecture, capacity: int, optional_pulls: bool,
                 sensors_may_stop: bool):
        self.arch = arch
        self.capacity = capacity
        self.optional_pulls = optional_pulls
        self.sensors_may_stop = sensors_may_stop
        self.model = FlowModel(arch.name)
        # processes that pull each target, in declaration order
        self.pull_procs: dict[Ref, list[tuple[str, str]]] = {}
        for op in arch.contexts:
            for idx, c in enumerate(op.contracts):
                for req in c.requirements:
                    self.pull_procs.setdefault(req, []).append((op.id, self.contract_proc(op, idx)))
        self.orderers: dict[tuple[str, str], list[str]] = {}
        for ctl in arch.controllers:
            for o in ctl.orders:
                self.orderers.setdefault((o.actuator, o.action), []).append(ctl.id)

    def chan(self, name: str, edge: tuple[str, str, str] | None = None) -> str:
        self.model.channels.setdefault(name, self.capacity)
        if edge is not None:
            self.model.edges[edge] = name
        return name

    @staticmethod
    def contract_proc(op: ContextOperator, idx: int) -> str:
        return op.id if len(op.contracts) == 1 else f"{op.id}_{idx}"

    # channel naming

    def push_chan(self, publisher: Ref, parent: str) -> str:
        parents = self.arch.push_parents(publisher)
        if len(parents) == 1:
            return self.chan(low(publisher), ("push", str(publisher), parent))
        return self.chan(f"{low(publisher)}_{low(parent)}", ("push", str(publisher), parent))

    def publish_chan(self, publisher: Ref) -> str | None:
        if not self.arch.push_parents(publisher):
            return None
        return self.chan(low(publisher))

    def pull_chans(self, target: Ref, proc: str) -> tuple[str, str]:
        procs = self.pull_procs[target]
        owner = next(op for op, p in procs if p == proc)
        if len(procs) == 1:
            get, ret = f"{low(target)}_get", f"{low(target)}_return"
        else:
            get, ret = f"{low(target)}_get_{low(proc)}", f"{low(target)}_return_{low(proc)}"
        return (self.chan(get, ("pull", owner, str(target))),
                self.chan(ret, ("return", str(target), owner)))

    def order_chan(self, actuator: str, action: str, controller: str) -> str:
        base = f"{low(actuator)}_{low(action)}"
        if len(self.orderers[(actuator, action)]) > 1:
            base = f"{base}_{low(controller)}"
        return self.chan(base, ("order", controller, f"{actuator}.{action}"))

    # processes

    def build(self) -> FlowModel:
        arch = self.arch
        for sensor in arch.sensors:
            for src in sensor.sources:
                ref = SourceRef(sensor.id, src.name)
                if arch.push_parents(ref):
                    self.generator(ref)
                if ref in self.pull_procs:
                    self.source_server(ref)
        for op in arch.contexts:
            for idx, contract in enumerate(op.contracts):
                self.contract(op, idx)
            if len(arch.push_parents(op.id)) > 1:
                self.fanout(op.id)
        for sensor in arch.sensors:
            for src in sensor.sources:
                ref = SourceRef(sensor.id, src.name)
                if len(arch.push_parents(ref)) > 1:
                    self.fanout(ref)
        for ctl in arch.controllers:
            self.controller(ctl)
        for act in arch.actuators:
            self.actuator(act)
        return self.model

    def emit_publish(self, publisher: Ref, decision: tuple[str, bool] | None = None) -> Send | Skip:
        note = (SourcePublished(str(publisher), 1) if isinstance(publisher, SourceRef)
                else ValuePublished(publisher, 1))
        chan = self.publish_chan(publisher)
        return Send(chan, note, decision) if chan else Skip(note, decision)

    def generator(self, ref: SourceRef) -> None:
        branches = [(self.emit_publish(ref),)]
        if self.sensors_may_stop:
            branches.append((Break(),))
        self.model.processes.append(
            Process(_proc_name(ref), tuple(branches), (), str(ref), generator=True))

    def source_server(self, ref: SourceRef) -> None:
        vars_ = _Vars()
        var = vars_.fresh("arg")
        branches = []
        for _, proc in self.pull_procs[ref]:
            get, ret = self.pull_chans(ref, proc)
            branches.append((Recv(get, var), Send(ret)))
        self.model.processes.append(
            Process(f"{_proc_name(ref)}_server", tuple(branches), tuple(vars_.names), str(ref)))

    def fanout(self, publisher: Ref) -> None:
        vars_ = _Vars()
        var = vars_.fresh("v")
        sends = tuple(Send(self.push_chan(publisher, parent))
                      for parent in self.arch.push_parents(publisher))
        self.model.processes.append(Process(
            f"{_proc_name(publisher)}_fanout", ((Recv(self.publish_chan(publisher), var),) + sends,),
            tuple(vars_.names), str(publisher)))

    def contract(self, op: ContextOperator, idx: int) -> None:
        arch = self.arch
        contract = op.contracts[idx]
        name = self.contract_proc(op, idx)
        vars_ = _Vars()
        activated = OperatorActivated(op.id, idx, denote(op, arch)[idx].name, ())
        if isinstance(contract.activation, Push):
            terms = contract.activation.terms
            term_vars = [vars_.fresh("new" + (capitalize(term[0].source) if (
                len(term) == 1 and isinstance(term[0], SourceRef)) else typeof(term, arch)))
                for term in terms]
        else:
            requesters = self.pull_procs.get(op.id, [])
            if not requesters:
                self.model.omitted.append(f"{name}: pull contract without requester")
                return
            arg_var = vars_.fresh(f"new{op.args[0]}" if op.args else "request")
        body: list[Stmt] = []
        for req in contract.requirements:
            get, ret = self.pull_chans(req, name)
            pair = (Send(get, PullIssued(op.id, str(req))),
                    Recv(ret, vars_.fresh(typeof(req, arch)), PullReturned(op.id, str(req))))
            body.extend([Choice((pair, (Skip(),)))] if self.optional_pulls else pair)
        tail: list[Stmt] = []
        if contract.emission is Emission.ALWAYS:
            tail.append(self.emit_publish(op.id))
        elif contract.emission is Emission.MAYBE:
            tail.append(Choice(((self.emit_publish(op.id, (op.id, True)),),
                                (Skip(PublishDeclined(op.id), (op.id, False)),))))

        if isinstance(contract.activation, Push):

            def recvs(t: int, last: bool) -> list[Recv]:
                note = activated if last else None
                return [Recv(self.push_chan(n, op.id), term_vars[t], note) for n in terms[t]]

            rest: list[Stmt] = []
            for t in range(1, len(terms)):
                alts = recvs(t, t == len(terms) - 1)
                rest.append(alts[0] if len(alts) == 1 else Choice(tuple((a,) for a in alts)))
            branches = tuple((first, *rest, *body, *tail)
                             for first in recvs(0, len(terms) == 1))
        else:
            branches = []
            for _, proc in requesters:
                get, ret = self.pull_chans(op.id, proc)
                branches.append((Recv(get, arg_var, activated), *body, Send(ret), *tail))
            branches = tuple(branches)
        self.model.processes.append(Process(name, branches, tuple(vars_.names), op.id))

    def controller(self, ctl) -> None:
        vars_ = _Vars()
        var = vars_.fresh("v")
        branches = []
        for sub in ctl.subscriptions:
            sends = tuple(Send(self.order_chan(o.actuator, o.action, ctl.id)) for o in ctl.orders)
            note = OperatorActivated(ctl.id, 0, "forward", (sub,))
            branches.append((Recv(self.push_chan(sub, ctl.id), var, note),) + sends)
        self.model.processes.append(Process(ctl.id, tuple(branches), tuple(vars_.names), ctl.id))

    def actuator(self, act) -> None:
        vars_ = _Vars()
        var = vars_.fresh("v")
        branches = []
        for action in act.actions:
            for ctl in self.orderers.get((act.id, action.name), []):
                chan = self.order_chan(act.id, action.name, ctl)
                branches.append((Recv(chan, var, ActionInvoked(act.id, action.name, (1,), ctl)),
                                 Skip()))
        if not branches:
            self.model.omitted.append(f"{act.id}: no controller orders its actions")
            return
        self.model.processes.append(Process(act.id, tuple(branches), tuple(vars_.names), act.id))


def build_flow_model(arch: Architecture, *, capacity: int = 1, optional_pulls: bool = False,
                     sensors_may_stop: bool = True) -> FlowModel:
    """Translate ``arch`` into a token-level flow model.

    ``capacity`` bounds every channel; ``optional_pulls`` lets each data
    requirement be skipped; ``sensors_may_stop`` lets source generators halt.
    """
    if capacity < 1:
        raise ValueError("channel capacity must be at least 1")
    return _Builder(arch, capacity, optional_pulls, sensors_may_stop).build()


# -- Promela ----------------------------------------------------------------


def _simple(stmt: Stmt) -> str:
    if isinstance(stmt, Recv):
        return f"{stmt.chan}?{stmt.var}"
    if isinstance(stmt, Send):
        return f"{stmt.chan}!1"
    if isinstance(stmt, Break):
        return "break"
    return "skip"


def _render_seq(stmts, indent: str, out: list[str]) -> None:
    for stmt in stmts:
        if isinstance(stmt, Choice):
            out.append(f"{indent}if")
            for alt in stmt.alternatives:
                _render_branch(alt, indent, out)
            out.append(f"{indent}fi;")
        else:
            out.append(f"{indent}{_simple(stmt)};")


def _render_branch(stmts, indent: str, out: list[str]) -> None:
    head, rest = stmts[0], stmts[1:]
    if not rest:
        out.append(f"{indent}:: {_simple(head)}")
        return
    out.append(f"{indent}:: {_simple(head)} -> {{")
    _render_seq(rest, indent + "    ", out)
    out.append(f"{indent}  }}")


def render_promela(model: FlowModel) -> str:
    out = [f"/* Flow model of architecture {model.name}. Values are abstracted to tokens. */"]
    if model.channels:
        out.append("")
        out.extend(f"chan {name} = [{cap}] of {{ byte }};" for name, cap in model.channels.items())
    for note in model.omitted:
        out.append("")
        out.append(f"/* omitted {note} */")
    for proc in model.processes:
        out.append("")
        out.append(f"active proctype {proc.name}() {{")
        if proc.variables:
            out.append(f"  byte {', '.join(proc.variables)};")
        out.append("  do")
        for branch in proc.branches:
            _render_branch(branch, "  ", out)
        out.append("  od")
        out.append("}")
    return "\n".join(out) + "\n"


def emit_promela(arch: Architecture, **options) -> str:
    return render_promela(build_flow_model(arch, **options))
