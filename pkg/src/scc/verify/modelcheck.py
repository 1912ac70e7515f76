"""Explicit-state checking of interaction invariants over a flow model.

A state holds the program counter of every process, the fill level of every
channel and, for ``leadsto`` properties, one monitor bit recording that a
trigger is still waiting for its goal.  A ``leadsto`` property fails when a
reachable terminal state has the bit set, or when the pending states contain
a cycle that is fair to every process (weak fairness: a process enabled all
along the cycle must move somewhere on it).

Channels are bounded.  A component sending into a full channel does not
block, since the simulator's queues are unbounded: the path is cut and the
verdict is marked as bounded.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from ..model import Architecture
from ..runtime import Event
from .flow import Break, Choice, FlowModel, Recv, Send, Skip, Stmt, build_flow_model
from .invariants import Invariant, Never, Predicate, Response, event_atom, validate

DEFAULT_BOUND = 1_000_000

RECV, SEND, TAU = 0, 1, 2

FAIRNESS = "weak fairness: a process enabled along a whole cycle eventually moves"


@dataclass(frozen=True)
class _Edge:
    kind: int
    chan: int
    target: int
    note: Event | None
    decision: tuple[str, bool] | None


def _compile(branches, chan_index: dict[str, int]) -> list[list[_Edge]]:
    """Control-flow graph of one ``do/od`` process; node 0 is the loop head."""
    nodes: list[list[_Edge]] = [[]]

    def new() -> int:
        nodes.append([])
        return len(nodes) - 1

    def stmt(s: Stmt, src: int, dst: int, brk: int) -> None:
        if isinstance(s, Choice):
            for alt in s.alternatives:
                seq(alt, src, dst, brk)
        elif isinstance(s, Break):
            nodes[src].append(_Edge(TAU, -1, brk, None, None))
        elif isinstance(s, Recv):
            nodes[src].append(_Edge(RECV, chan_index[s.chan], dst, s.note, None))
        elif isinstance(s, Send):
            nodes[src].append(_Edge(SEND, chan_index[s.chan], dst, s.note, s.decision))
        else:
            nodes[src].append(_Edge(TAU, -1, dst, s.note, s.decision))

    def seq(stmts, src: int, dst: int, brk: int) -> None:
        if not stmts:
            nodes[src].append(_Edge(TAU, -1, dst, None, None))
            return
        cur = src
        for i, s in enumerate(stmts):
            nxt = dst if i == len(stmts) - 1 else new()
            stmt(s, cur, nxt, brk)
            cur = nxt

    exit_node = new()
    for branch in branches:
        seq(branch, 0, 0, exit_node)
    return nodes


@dataclass
class Step:
    process: str
    note: Event | None
    decision: tuple[str, bool] | None


@dataclass
class Verdict:
    invariant: Invariant
    holds: bool
    states_explored: int
    bounded: bool
    bound: int
    counterexample: list[Event] | None = None
    # index into ``counterexample`` where the repeating part of a lasso starts
    loop_start: int | None = None
    decisions: list[tuple[str, bool]] = field(default_factory=list)
    fairness: str = FAIRNESS
    semantics: str = "sequential"
    # some path needed more room than the channel capacity and was cut
    overflow: bool = False

    @property
    def status(self) -> str:
        if not self.holds:
            return "fails"
        return "holds (bounded)" if self.bounded else "holds"

    def render_text(self) -> str:
        lines = [f"{self.invariant}: {self.status}",
                 f"states explored: {self.states_explored} (bound {self.bound})",
                 f"assuming {self.fairness}; {self.semantics} semantics"]
        if self.bounded:
            cause = ("channel capacity was exceeded on some path" if self.overflow
                     else "the state bound was reached")
            lines.append(f"search truncated: {cause}; the verdict covers explored states only")
        if self.counterexample is not None:
            lines.append("counterexample:")
            for i, e in enumerate(self.counterexample):
                if i == self.loop_start:
                    lines.append("  -- repeats from here --")
                lines.append(f"  {e.line()}")
            if self.loop_start is not None and self.loop_start == len(self.counterexample):
                lines.append("  -- repeats: no further events --")
        return "\n".join(lines) + "\n"

    def records(self) -> list[dict]:
        head = {"record": "verdict", "invariant": str(self.invariant), "holds": self.holds,
                "states": self.states_explored, "bounded": self.bounded, "bound": self.bound,
                "overflow": self.overflow}
        out = [head]
        for i, e in enumerate(self.counterexample or []):
            out.append({"record": "step", "index": i, "loop": self.loop_start is not None
                        and i >= self.loop_start, **e.record()})
        return out


SEQUENTIAL = "sequential"
CONCURRENT = "concurrent"
SEMANTICS = (SEQUENTIAL, CONCURRENT)


class _Explorer:
    """Successor function over states ``(pcs..., fills..., owners)``.

    Under ``sequential`` semantics ``owners`` is a stack of processes: the
    activation on top runs until it finishes or blocks, a pull request hands
    control to the process serving it, and sensors publish only when nothing
    else can move.  This is how the simulator executes an architecture.
    Under ``concurrent`` semantics every enabled process may move at any
    time, as in the emitted Promela, and ``owners`` stays empty.
    """

    def __init__(self, model: FlowModel, semantics: str = SEQUENTIAL):
        if semantics not in SEMANTICS:
            raise ValueError(f"unknown semantics {semantics!r}")
        self.sequential = semantics == SEQUENTIAL
        self.chan_names = list(model.channels)
        chan_index = {c: i for i, c in enumerate(self.chan_names)}
        self.caps = [model.channels[c] for c in self.chan_names]
        self.procs = [p.name for p in model.processes]
        self.cfgs = [_compile(p.branches, chan_index) for p in model.processes]
        self.np = len(self.procs)
        self.generators = [i for i, p in enumerate(model.processes) if p.generator]
        self.workers = [i for i, p in enumerate(model.processes) if not p.generator]
        # pull-request channel -> the process that serves it
        self.server: dict[int, int] = {}
        get_chans = {chan_index[c] for (kind, _, _), c in model.edges.items() if kind == "pull"}
        for i, cfg in enumerate(self.cfgs):
            for e in cfg[0]:
                if e.kind == RECV and e.chan in get_chans:
                    self.server[e.chan] = i

    def initial(self) -> tuple:
        return (0,) * self.np + (0,) * len(self.caps) + ((),)

    def _moves(self, state: tuple, p: int):
        np = self.np
        for e in self.cfgs[p][state[p]]:
            if e.kind == RECV:
                if state[np + e.chan] == 0:
                    continue
                nxt = list(state)
                nxt[np + e.chan] -= 1
            elif e.kind == SEND:
                if state[np + e.chan] >= self.caps[e.chan]:
                    if p not in self.generators:
                        # the simulator's queues are unbounded: this path
                        # leaves the finite model rather than blocking
                        yield e, None
                    continue
                nxt = list(state)
                nxt[np + e.chan] += 1
            else:
                nxt = list(state)
            nxt[p] = e.target
            yield e, nxt

    def _owners_after(self, owners: tuple, e: _Edge) -> tuple:
        if e.target == 0 or not self.cfgs[owners[-1]][e.target]:
            return owners[:-1]  # back at the loop head, or stopped
        if e.kind == SEND and e.chan in self.server:
            return owners + (self.server[e.chan],)
        return owners

    def successors(self, state: tuple):
        """Yield (process index, edge, next state) for every enabled transition.

        The next state is None when the transition overflows a channel.
        """
        owners = state[-1]
        if not self.sequential:
            for p in range(self.np):
                for e, nxt in self._moves(state, p):
                    yield p, e, None if nxt is None else tuple(nxt)
            return
        while owners:
            top = owners[-1]
            moves = list(self._moves(state, top))
            if moves:
                for e, nxt in moves:
                    if nxt is not None:
                        nxt[-1] = self._owners_after(owners, e)
                    yield top, e, None if nxt is None else tuple(nxt)
                return
            owners = owners[:-1]  # blocked on an empty input: suspend
        moved = False
        for group in (self.workers, self.generators):
            for p in group:
                for e, nxt in self._moves(state, p):
                    moved = True
                    if nxt is not None:
                        nxt[-1] = () if p in self.generators else self._owners_after((p,), e)
                    yield p, e, None if nxt is None else tuple(nxt)
            if moved:
                return


def _atom(edge: _Edge) -> Predicate | None:
    return event_atom(edge.note) if edge.note is not None else None


def check_model(model: FlowModel, inv: Invariant, bound: int = DEFAULT_BOUND,
                semantics: str = SEQUENTIAL) -> Verdict:
    """Explore ``model`` breadth-first and decide ``inv``."""
    if bound <= 0:
        raise ValueError("state bound must be positive")
    ex = _Explorer(model, semantics)
    response = isinstance(inv, Response)
    start = ex.initial() + (0,)
    index = {start: 0}
    states = [start]
    parent: list[tuple[int, int, _Edge] | None] = [None]
    succ: list[list[tuple[int, int]]] = []  # per expanded state: (next id, process)
    enabled: list[frozenset] = []
    queue = deque([0])
    truncated = False
    overflow = False

    def path_to(sid: int) -> list[Step]:
        steps = []
        while parent[sid] is not None:
            prev, p, e = parent[sid]
            steps.append(Step(ex.procs[p], e.note, e.decision))
            sid = prev
        return steps[::-1]

    def verdict(steps=None, loop=None, holds=True) -> Verdict:
        v = Verdict(inv, holds, len(states), truncated, bound, semantics=semantics,
                    overflow=overflow)
        if steps is not None:
            events = [s.note for s in steps if s.note is not None]
            v.counterexample = events
            v.decisions = [s.decision for s in steps if s.decision is not None]
            if loop is not None:
                v.loop_start = sum(1 for s in steps[:loop] if s.note is not None)
        return v

    while queue:
        sid = queue.popleft()
        state = states[sid]
        pending = state[-1]
        out: list[tuple[int, int]] = []
        procs_enabled = set()
        for p, e, nxt in ex.successors(state[:-1]):
            procs_enabled.add(p)
            if nxt is None:
                overflow = truncated = True
                continue
            atom = _atom(e)
            if isinstance(inv, Never) and atom == inv.predicate:
                return verdict(path_to(sid) + [Step(ex.procs[p], e.note, e.decision)], holds=False)
            flag = 0
            if response:
                flag = int((pending or atom == inv.trigger) and atom != inv.goal)
            key = nxt + (flag,)
            nid = index.get(key)
            if nid is None:
                if len(states) >= bound:
                    truncated = True
                    continue
                nid = len(states)
                index[key] = nid
                states.append(key)
                parent.append((sid, p, e))
                queue.append(nid)
            out.append((nid, p))
        succ.append(out)
        enabled.append(frozenset(procs_enabled))
        if response and pending and not procs_enabled:
            return verdict(path_to(sid), holds=False)
        # ids are assigned in BFS order, so ``succ`` is indexed by state id
    if not response:
        return verdict()
    lasso = _fair_pending_cycle(states, succ, enabled, ex.np)
    if lasso is None:
        return verdict()
    entry, cycle = lasso
    steps = path_to(entry)
    loop = len(steps)
    for a, b, p in cycle:
        e = _edge_between(ex, states[a], states[b], p)
        steps.append(Step(ex.procs[p], e.note, e.decision))
    return verdict(steps, loop, holds=False)


def _edge_between(ex: _Explorer, a: tuple, b: tuple, p: int) -> _Edge:
    for q, e, nxt in ex.successors(a[:-1]):
        if q == p and nxt == b[:-1]:
            return e
    raise AssertionError("no edge between consecutive cycle states")


def _sccs(nodes: list[int], adj) -> Iterable[list[int]]:
    """Tarjan's algorithm, iterative."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(adj(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                yield comp


def _fair_pending_cycle(states, succ, enabled, n_procs):
    """Find a weakly fair cycle among expanded pending states.

    Returns ``(entry state, [(from, to, process), ...])`` or None.
    """
    expanded = len(succ)
    nodes = [i for i in range(expanded) if states[i][-1]]
    member = set(nodes)

    def adj(v):
        return [w for w, _ in succ[v] if w in member and w < expanded]

    for comp in _sccs(nodes, adj):
        cset = set(comp)
        inner = [(v, w, p) for v in comp for w, p in succ[v] if w in cset]
        if not inner:
            continue
        always_enabled = set(range(n_procs))
        for v in comp:
            always_enabled &= enabled[v]
        moving = {p for _, _, p in inner}
        if not always_enabled <= moving:
            continue
        entry = min(comp)
        required = [next(t for t in inner if t[2] == p) for p in sorted(always_enabled)]
        if not required:
            required = [inner[0]]
        cycle = []
        cur = entry
        for v, w, p in required:
            cycle.extend(_inner_path(cur, v, succ, cset))
            cycle.append((v, w, p))
            cur = w
        cycle.extend(_inner_path(cur, entry, succ, cset))
        return entry, cycle
    return None


def _inner_path(a: int, b: int, succ, cset) -> list[tuple[int, int, int]]:
    if a == b:
        return []
    prev = {a: None}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        for w, p in succ[v]:
            if w in cset and w not in prev:
                prev[w] = (v, p)
                if w == b:
                    path = []
                    while prev[w] is not None:
                        u, q = prev[w]
                        path.append((u, w, q))
                        w = u
                    return path[::-1]
                queue.append(w)
    raise AssertionError("strongly connected component is not connected")


def check_invariant(arch: Architecture, inv: Invariant, bound: int = DEFAULT_BOUND, *,
                    capacity: int = 1, optional_pulls: bool = False,
                    sensors_may_stop: bool = True, semantics: str = SEQUENTIAL) -> Verdict:
    """Check ``inv`` on the flow model of ``arch``, exploring at most ``bound`` states."""
    validate(inv, arch)
    model = build_flow_model(arch, capacity=capacity, optional_pulls=optional_pulls,
                             sensors_may_stop=sensors_may_stop)
    return check_model(model, inv, bound, semantics)
