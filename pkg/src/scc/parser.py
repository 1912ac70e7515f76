"""Recursive-descent parser and canonical formatter for the ADL.

Grammar (keywords are contextual; ``self`` is reserved)::

    arch       ::= "architecture" ID ";" decl*
    decl       ::= typeDecl | sensor | context | controller | actuator
    typeDecl   ::= "type" ID ("extends" ID)? ";"
    sensor     ::= "sensor" ID "{" ("source" ID ":" ID pulled? ";")+ "}"
    context    ::= "context" ID ":" ID pulled? "{" basic+ "}"
    pulled     ::= "pulled" "with" "(" typeList? ")"
    basic      ::= "contract" "on" act ("get" "(" refList? ")")? emit ";"
    act        ::= "push" "(" disj ("," disj)* ")" | "pull"
    disj       ::= ref ("|" ref)*
    emit       ::= ("always" | "maybe" | "no") "publish"
    controller ::= "controller" ID "{" ("on" "push" "(" ID ")" "do" order ("," order)* ";")+ "}"
    order      ::= ID "." ID
    actuator   ::= "actuator" ID "{" ("action" ID "(" typeList? ")" ";")+ "}"
    ref        ::= ID ("." ID)?

Line comments start with ``//``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    TOP,
    Action,
    Actuator,
    Architecture,
    BasicContract,
    ContextOperator,
    ControlOperator,
    Emission,
    ModelError,
    Order,
    PullSelf,
    Push,
    Ref,
    Sensor,
    Source,
    SourceRef,
    TypeDecl,
)

RESERVED = {"self"}


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    length: int = 1


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    span: Span
    path: str = "<input>"

    def __str__(self) -> str:
        return f"{self.path}:{self.span.line}:{self.span.column}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Token:
    kind: str  # "id" | "punct" | "eof"
    value: str
    span: Span


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[{}();:,.|])"
)


def tokenize(text: str, path: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = Span(line, pos - line_start + 1, 1)
            raise ParseError(
                [Diagnostic("error", f"unexpected character {text[pos]!r}", span, path)]
            )
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("id", "punct"):
            tokens.append(
                Token(kind, m.group(), Span(line, pos - line_start + 1, m.end() - pos))
            )
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, pos - line_start + 1, 0)))
    return tokens


@dataclass
class _Use:
    """A name occurrence awaiting resolution."""

    role: str  # activation | requirement | subscription | order | type
    owner: str
    name: object
    span: Span


@dataclass
class _Pending:
    sensors: list = field(default_factory=list)
    contexts: list = field(default_factory=list)
    controllers: list = field(default_factory=list)
    actuators: list = field(default_factory=list)
    types: list = field(default_factory=list)
    decl_spans: dict = field(default_factory=dict)
    uses: list = field(default_factory=list)


class Parser:
    def __init__(self, text: str, path: str = "<input>"):
        self.path = path
        self.tokens = tokenize(text, path)
        self.pos = 0
        self.out = _Pending()
        self.diagnostics: list[Diagnostic] = []

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, span: Span) -> None:
        self.diagnostics.append(Diagnostic("error", message, span, self.path))

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        self.error(message, tok.span)
        raise ParseError(self.diagnostics)

    def describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.value)

    def at(self, value: str) -> bool:
        return self.tok.kind != "eof" and self.tok.value == value

    def expect(self, value: str) -> Token:
        if not self.at(value):
            self.fail(f"expected {value!r}, found {self.describe(self.tok)}")
        tok = self.tok
        self.pos += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        tok = self.tok
        if tok.kind != "id":
            self.fail(f"expected {what}, found {self.describe(tok)}")
        if tok.value in RESERVED:
            self.fail(f"'{tok.value}' is reserved and cannot be used as {what}")
        self.pos += 1
        return tok

    # -- grammar ------------------------------------------------------------

    def parse(self) -> Architecture:
        self.expect("architecture")
        name = self.ident("architecture name").value
        self.expect(";")
        while self.tok.kind != "eof":
            kw = self.tok.value
            handler = {
                "type": self.type_decl,
                "sensor": self.sensor,
                "context": self.context,
                "controller": self.controller,
                "actuator": self.actuator,
            }.get(kw if self.tok.kind == "id" else "")
            if handler is None:
                self.fail(f"expected a declaration, found {self.describe(self.tok)}")
            self.pos += 1
            handler()
        return self.resolve(name)

    def use_type(self, owner: str, tok: Token) -> str:
        self.out.uses.append(_Use("type", owner, tok.value, tok.span))
        return tok.value

    def declare(self, kind: str, tok: Token) -> str:
        table = self.out.decl_spans.setdefault(kind, {})
        if tok.value in table:
            prev = table[tok.value]
            self.error(
                f"duplicate declaration of '{tok.value}' (first declared at line {prev.line})",
                tok.span,
            )
        else:
            table[tok.value] = tok.span
        return tok.value

    def type_decl(self) -> None:
        tok = self.ident("type name")
        name = self.declare("type", tok)
        if name == TOP:
            self.error(f"'{TOP}' is the implicit top type and cannot be redeclared", tok.span)
        sup = None
        if self.at("extends"):
            self.pos += 1
            sup = self.use_type(name, self.ident("type name"))
        self.expect(";")
        self.out.types.append(TypeDecl(name, sup))

    def type_list(self, owner: str) -> tuple[str, ...]:
        self.expect("(")
        types = []
        if not self.at(")"):
            types.append(self.use_type(owner, self.ident("type name")))
            while self.at(","):
                self.pos += 1
                types.append(self.use_type(owner, self.ident("type name")))
        self.expect(")")
        return tuple(types)

    def pulled(self, owner: str) -> tuple[str, ...] | None:
        if not self.at("pulled"):
            return None
        self.pos += 1
        self.expect("with")
        return self.type_list(owner)

    def sensor(self) -> None:
        tok = self.ident("sensor name")
        sid = self.declare("component", tok)
        self.expect("{")
        sources = []
        seen: set[str] = set()
        while not self.at("}"):
            self.expect("source")
            stok = self.ident("source name")
            if stok.value in seen:
                self.error(f"duplicate source '{stok.value}' in sensor {sid}", stok.span)
            seen.add(stok.value)
            self.expect(":")
            vtype = self.use_type(sid, self.ident("type name"))
            params = self.pulled(sid) or ()
            self.expect(";")
            sources.append(Source(stok.value, vtype, params))
        if not sources:
            self.fail(f"sensor {sid} declares no source")
        self.expect("}")
        self.out.sensors.append((Sensor(sid, tuple(sources)), tok.span))

    def ref(self, owner: str, role: str) -> Ref:
        tok = self.ident("component name")
        if self.at("."):
            self.pos += 1
            src = self.ident("source name")
            ref: Ref = SourceRef(tok.value, src.value)
            span = Span(tok.span.line, tok.span.column,
                        src.span.column + src.span.length - tok.span.column)
        else:
            ref, span = tok.value, tok.span
        self.out.uses.append(_Use(role, owner, ref, span))
        return ref

    def context(self) -> None:
        tok = self.ident("context operator name")
        cid = self.declare("component", tok)
        self.expect(":")
        vtype = self.use_type(cid, self.ident("type name"))
        params = self.pulled(cid)
        self.expect("{")
        contracts = []
        pull_spans = []
        while not self.at("}"):
            start = self.expect("contract")
            contract = self.basic(cid)
            if contract.is_pull:
                pull_spans.append(start.span)
            contracts.append(contract)
        if not contracts:
            self.fail(f"context operator {cid} declares no contract")
        self.expect("}")
        if params is None and pull_spans:
            self.error(
                f"context operator {cid} has a pull contract but no 'pulled with' clause",
                pull_spans[0],
            )
        self.out.contexts.append((ContextOperator(cid, vtype, tuple(contracts), params), tok.span))

    def basic(self, owner: str) -> BasicContract:
        self.expect("on")
        if self.at("pull"):
            self.pos += 1
            activation = PullSelf()
        else:
            self.expect("push")
            self.expect("(")
            terms = [self.disjunction(owner)]
            while self.at(","):
                self.pos += 1
                terms.append(self.disjunction(owner))
            self.expect(")")
            activation = Push(tuple(terms))
        requirements: list[Ref] = []
        if self.at("get"):
            self.pos += 1
            self.expect("(")
            if not self.at(")"):
                requirements.append(self.ref(owner, "requirement"))
                while self.at(","):
                    self.pos += 1
                    requirements.append(self.ref(owner, "requirement"))
            self.expect(")")
        tok = self.tok
        emission = {"always": Emission.ALWAYS, "maybe": Emission.MAYBE, "no": Emission.NEVER}.get(
            tok.value if tok.kind == "id" else ""
        )
        if emission is None:
            self.fail(f"expected 'always', 'maybe' or 'no', found {self.describe(tok)}")
        self.pos += 1
        self.expect("publish")
        self.expect(";")
        return BasicContract(activation, tuple(requirements), emission)

    def disjunction(self, owner: str) -> tuple[Ref, ...]:
        term = [self.ref(owner, "activation")]
        while self.at("|"):
            self.pos += 1
            term.append(self.ref(owner, "activation"))
        return tuple(term)

    def controller(self) -> None:
        tok = self.ident("controller name")
        cid = self.declare("component", tok)
        self.expect("{")
        subs: list[str] = []
        orders: list[Order] = []
        while not self.at("}"):
            self.expect("on")
            self.expect("push")
            self.expect("(")
            sub = self.ident("context operator name")
            if self.at("."):
                self.fail("controller subscription must be a context operator, not a sensor source")
            self.out.uses.append(_Use("subscription", cid, sub.value, sub.span))
            if sub.value not in subs:
                subs.append(sub.value)
            self.expect(")")
            self.expect("do")
            while True:
                act = self.ident("actuator name")
                self.expect(".")
                action = self.ident("action name")
                order = Order(act.value, action.value)
                span = Span(act.span.line, act.span.column,
                            action.span.column + action.span.length - act.span.column)
                self.out.uses.append(_Use("order", cid, order, span))
                if order not in orders:
                    orders.append(order)
                if not self.at(","):
                    break
                self.pos += 1
            self.expect(";")
        if not subs:
            self.fail(f"controller {cid} declares no subscription")
        self.expect("}")
        self.out.controllers.append((ControlOperator(cid, tuple(subs), tuple(orders)), tok.span))

    def actuator(self) -> None:
        tok = self.ident("actuator name")
        aid = self.declare("component", tok)
        self.expect("{")
        actions = []
        seen: set[str] = set()
        while not self.at("}"):
            self.expect("action")
            atok = self.ident("action name")
            if atok.value in seen:
                self.error(f"duplicate action '{atok.value}' in actuator {aid}", atok.span)
            seen.add(atok.value)
            params = self.type_list(aid)
            self.expect(";")
            actions.append(Action(atok.value, params))
        if not actions:
            self.fail(f"actuator {aid} declares no action")
        self.expect("}")
        self.out.actuators.append((Actuator(aid, tuple(actions)), tok.span))

    # -- name resolution ----------------------------------------------------

    def resolve(self, name: str) -> Architecture:
        out = self.out
        arch = Architecture(
            name,
            tuple(out.types),
            tuple(s for s, _ in out.sensors),
            tuple(c for c, _ in out.contexts),
            tuple(c for c, _ in out.controllers),
            tuple(a for a, _ in out.actuators),
        )
        if self.diagnostics:
            # duplicates make lookups ambiguous; report what we have
            raise ParseError(self.diagnostics)
        for use in out.uses:
            msg = self._check_use(arch, use)
            if msg:
                self.error(msg, use.span)
        type_spans = out.decl_spans.get("type", {})
        for t in arch.types:
            try:
                arch.ancestors(t.name)
            except ModelError as exc:
                if "cyclic" in str(exc):
                    self.error(f"cyclic type hierarchy involving '{t.name}'", type_spans[t.name])
        if self.diagnostics:
            raise ParseError(self.diagnostics)
        return arch

    @staticmethod
    def _check_use(arch: Architecture, use: _Use) -> str | None:
        if use.role == "type":
            if not arch.has_type(use.name):
                return f"unknown type '{use.name}'"
            return None
        if use.role in ("activation", "requirement"):
            ref = use.name
            head = ref.component if isinstance(ref, SourceRef) else ref
            if not arch.has_component(head):
                return f"unknown identifier '{head}'"
            if head == use.owner:
                return f"context operator {use.owner} cannot be its own child"
            kind = type(arch.component(head))
            if isinstance(ref, SourceRef):
                if kind is not Sensor:
                    return f"{use.role} child must be a sensor source or context operator"
                if not arch.resolves(ref):
                    return f"sensor {head} has no source '{ref.source}'"
                return None
            if kind is Sensor:
                return f"sensor reference must name a source (write {head}.<source>)"
            if kind is not ContextOperator:
                return f"{use.role} child must be a sensor source or context operator"
            return None
        if use.role == "subscription":
            if not arch.has_component(use.name):
                return f"unknown identifier '{use.name}'"
            if not arch.is_context(use.name):
                return "controller subscription must be a context operator"
            return None
        if use.role == "order":
            order: Order = use.name
            if not arch.has_component(order.actuator):
                return f"unknown identifier '{order.actuator}'"
            comp = arch.component(order.actuator)
            if not isinstance(comp, Actuator):
                return "controller orders must target an actuator action"
            if order.action not in {a.name for a in comp.actions}:
                return f"actuator {order.actuator} has no action '{order.action}'"
            return None
        raise AssertionError(use.role)


def parse(text: str, path: str = "<input>") -> Architecture:
    """Parse ADL text into a resolved :class:`Architecture`.

    Raises :class:`ParseError` carrying every diagnostic found.
    """
    return Parser(text, path).parse()


def parse_file(path: str | Path) -> Architecture:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


# -- formatting -------------------------------------------------------------


def _ref_text(ref: Ref) -> str:
    return str(ref)


def format_activation(activation) -> str:
    if isinstance(activation, PullSelf):
        return "pull"
    terms = [" | ".join(_ref_text(r) for r in term) for term in activation.terms]
    return f"push({', '.join(terms)})"


def format_contract(contract: BasicContract) -> str:
    parts = ["on", format_activation(contract.activation)]
    if contract.requirements:
        parts.append(f"get({', '.join(_ref_text(r) for r in contract.requirements)})")
    parts.append(f"{contract.emission.value} publish")
    return " ".join(parts)


def _pulled(params: tuple[str, ...] | None, always: bool = False) -> str:
    if params is None or (not params and not always):
        return ""
    return f" pulled with ({', '.join(params)})"


def format_architecture(arch: Architecture) -> str:
    """Canonical ADL rendering; ``parse(format_architecture(a)) == a``."""
    blocks = [f"architecture {arch.name};"]
    if arch.types:
        blocks.append("\n".join(
            f"type {t.name}{f' extends {t.supertype}' if t.supertype else ''};" for t in arch.types
        ))
    for s in arch.sensors:
        lines = [f"sensor {s.id} {{"]
        lines += [f"  source {src.name} : {src.value_type}{_pulled(src.pull_params)};"
                  for src in s.sources]
        lines.append("}")
        blocks.append("\n".join(lines))
    for op in arch.contexts:
        lines = [f"context {op.id} : {op.value_type}{_pulled(op.pull_params, always=True)} {{"]
        lines += [f"  contract {format_contract(c)};" for c in op.contracts]
        lines.append("}")
        blocks.append("\n".join(lines))
    for ctl in arch.controllers:
        orders = ", ".join(str(o) for o in ctl.orders)
        lines = [f"controller {ctl.id} {{"]
        lines += [f"  on push({sub}) do {orders};" for sub in ctl.subscriptions]
        lines.append("}")
        blocks.append("\n".join(lines))
    for act in arch.actuators:
        lines = [f"actuator {act.id} {{"]
        lines += [f"  action {a.name}({', '.join(a.param_types)});" for a in act.actions]
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
