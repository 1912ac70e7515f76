"""Random architectures for property tests and oracle comparisons."""

from __future__ import annotations

import random

from .model import (
    Action,
    Actuator,
    Architecture,
    BasicContract,
    ContextOperator,
    ControlOperator,
    Emission,
    Order,
    PullSelf,
    Push,
    Ref,
    Sensor,
    Source,
    SourceRef,
    TypeDecl,
)

TYPES = (TypeDecl("Datum"), TypeDecl("Reading", "Datum"), TypeDecl("Alert", "Reading"),
         TypeDecl("Count", "Datum"))


def random_architecture(rng: random.Random, *, max_components: int = 12,
                        cycles: bool = False) -> Architecture:
    """Draw a well-formed architecture with at most ``max_components`` components.

    Without ``cycles`` the result is consistent and deterministic: every
    pushed child emits, every required child can be pulled and the contracts
    of one operator never share an activation name.  No operator pulls a
    child whose pull contract publishes into that operator's own inputs, so
    runs terminate.  With ``cycles`` context operators may also refer to
    operators declared after them (and runs may then loop).
    """
    budget = rng.randint(3, max(3, max_components))
    type_names = [t.name for t in TYPES]

    n_sensors = rng.randint(1, min(2, budget - 2))
    sensors = []
    pushable: list[Ref] = []
    pullable: list[Ref] = []
    for s in range(n_sensors):
        sources = []
        for k in range(rng.randint(1, 2)):
            if rng.random() < 0.3:
                src = Source(f"q{k}", rng.choice(type_names), (rng.choice(type_names),))
                pullable.append(SourceRef(f"S{s}", src.name))
            else:
                src = Source(f"s{k}", rng.choice(type_names))
                pushable.append(SourceRef(f"S{s}", src.name))
                if rng.random() < 0.3:
                    pullable.append(SourceRef(f"S{s}", src.name))
            sources.append(src)
        sensors.append(Sensor(f"S{s}", tuple(sources)))
    if not pushable:
        sensors[0] = Sensor(sensors[0].id, sensors[0].sources + (Source("s9", "Datum"),))
        pushable.append(SourceRef(sensors[0].id, "s9"))

    remaining = budget - n_sensors
    n_ctx = rng.randint(max(1, remaining - 4), remaining)
    n_ctl = (remaining - n_ctx) // 2
    n_act = remaining - n_ctx - n_ctl
    if not (n_ctl and n_act):
        n_ctl = n_act = 0

    # decide the shape of every operator first so later ones can be referenced
    ids = [f"C{i}" for i in range(n_ctx)]
    has_pull = {cid: rng.random() < 0.35 for cid in ids}
    emits = {cid: rng.random() < 0.8 for cid in ids}
    contexts = []
    for i, cid in enumerate(ids):
        earlier = ids if cycles else ids[:i]
        candidates_push = pushable + [c for c in earlier if emits[c] and c != cid]
        activations = []
        used: set = set()
        n_push = rng.randint(1, 2) if not has_pull[cid] else rng.randint(0, 1)
        for _ in range(n_push):
            free = [c for c in candidates_push if c not in used]
            if not free:
                break
            terms = []
            for _ in range(rng.randint(1, min(2, len(free)))):
                pool = [c for c in free if c not in used]
                if not pool:
                    break
                term = tuple(rng.sample(pool, rng.randint(1, min(2, len(pool)))))
                used.update(term)
                terms.append(term)
            activations.append(Push(tuple(terms)))
        candidates_pull = pullable + [c for c in earlier if has_pull[c] and c != cid]
        contracts = [_contract(rng, act, candidates_pull, emits[cid]) for act in activations]
        if has_pull[cid] or not contracts:
            has_pull[cid] = True
            contracts.append(_contract(rng, PullSelf(), candidates_pull, emits[cid]))
        if emits[cid] and not any(c.emission is not Emission.NEVER for c in contracts):
            first = contracts[0]
            contracts[0] = BasicContract(first.activation, first.requirements, Emission.ALWAYS)
        if not emits[cid]:
            contracts = [BasicContract(c.activation, c.requirements, Emission.NEVER)
                         for c in contracts]
        pull_params = (rng.choice(type_names),) if has_pull[cid] else None
        contexts.append(ContextOperator(cid, rng.choice(type_names), tuple(contracts), pull_params))

    if cycles:
        # a later operator may have lost its pull contract or emission
        contexts = _repair(contexts)
    else:
        contexts = _break_activation_loops(contexts)

    actuators = [Actuator(f"A{k}", (Action("act", ("Datum",)),)) for k in range(n_act)]
    emitters = [c.id for c in contexts if c.emits]
    controllers = []
    for k in range(n_ctl if emitters else 0):
        subs = tuple(rng.sample(emitters, rng.randint(1, min(2, len(emitters)))))
        orders = tuple(Order(a.id, "act") for a in rng.sample(actuators, rng.randint(
            1, min(2, len(actuators)))))
        controllers.append(ControlOperator(f"K{k}", subs, orders))
    if not controllers:
        actuators = []
    else:
        ordered = {o.actuator for c in controllers for o in c.orders}
        actuators = [a for a in actuators if a.id in ordered]
    return Architecture("Random", TYPES, tuple(sensors), tuple(contexts), tuple(controllers),
                        tuple(actuators))


def _activation_edges(contexts: list[ContextOperator]) -> dict:
    """Which contract activations can cause which, as (operator, contract) nodes.

    Edges carry the requirement they come from, or None for push edges.
    """
    by_id = {op.id: op for op in contexts}
    edges: dict[tuple[str, int], list] = {}
    for op in contexts:
        for i, c in enumerate(op.contracts):
            out = edges.setdefault((op.id, i), [])
            for r in c.requirements:
                if r in by_id:
                    j = by_id[r].pull_contract_index()
                    if j is not None:
                        out.append(((r, j), r))
            if c.emission is Emission.NEVER:
                continue
            for parent in contexts:
                for j, pc in enumerate(parent.contracts):
                    if isinstance(pc.activation, Push) and any(
                            op.id in term for term in pc.activation.terms):
                        out.append(((parent.id, j), None))
    return edges


def _find_loop(edges: dict) -> list | None:
    state: dict = {}
    path: list = []

    def visit(node):
        state[node] = 1
        for nxt, req in edges.get(node, ()):
            path.append((node, req))
            if state.get(nxt) == 1:
                start = next(k for k, (n, _) in enumerate(path) if n == nxt)
                return path[start:]
            if nxt not in state:
                found = visit(nxt)
                if found:
                    return found
            path.pop()
        state[node] = 2
        return None

    for node in list(edges):
        if node not in state:
            found = visit(node)
            if found:
                return found
    return None


def _break_activation_loops(contexts: list[ContextOperator]) -> list[ContextOperator]:
    """Drop requirements until no activation can cause itself again.

    Pulling an operator whose pull contract publishes may feed our own inputs
    and re-activate us without end; the push graph alone is acyclic here.
    """
    while True:
        loop = _find_loop(_activation_edges(contexts))
        if loop is None:
            return contexts
        (op_id, idx), req = next((n, r) for n, r in loop if r is not None)
        out = []
        for op in contexts:
            if op.id == op_id:
                contracts = list(op.contracts)
                c = contracts[idx]
                contracts[idx] = BasicContract(
                    c.activation, tuple(r for r in c.requirements if r != req), c.emission)
                op = ContextOperator(op.id, op.value_type, tuple(contracts), op.pull_params)
            out.append(op)
        contexts = out


def _contract(rng: random.Random, activation, candidates_pull: list[Ref],
              emits: bool) -> BasicContract:
    reqs: tuple[Ref, ...] = ()
    if candidates_pull and rng.random() < 0.5:
        reqs = tuple(rng.sample(candidates_pull, rng.randint(1, min(2, len(candidates_pull)))))
    if not emits:
        emission = Emission.NEVER
    else:
        emission = rng.choice([Emission.ALWAYS, Emission.MAYBE, Emission.NEVER])
    return BasicContract(activation, reqs, emission)


def _repair(contexts: list[ContextOperator]) -> list[ContextOperator]:
    by_id = {c.id: c for c in contexts}
    out = []
    for op in contexts:
        contracts = []
        for c in op.contracts:
            reqs = tuple(r for r in c.requirements
                         if not isinstance(r, str) or by_id[r].pull_contract_index() is not None)
            contracts.append(BasicContract(c.activation, reqs, c.emission))
        out.append(ContextOperator(op.id, op.value_type, tuple(contracts), op.pull_params))
    return out
