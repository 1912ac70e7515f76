"""Data reachability over the child relation of an architecture."""

from __future__ import annotations

from collections import deque

from ..model import (
    SELF,
    Actuator,
    Architecture,
    ContextOperator,
    ControlOperator,
    Ref,
    names,
)


def _successors(node: Ref, arch: Architecture) -> list[Ref]:
    """Names whose data ``node`` may access directly."""
    if not isinstance(node, str):
        return []  # sensor sources are leaves
    comp = arch.component(node)
    out: list[Ref] = []
    if isinstance(comp, ContextOperator):
        for c in comp.contracts:
            for n in (*_ordered(c.activation), *c.requirements):
                if n is not SELF and n not in out:
                    out.append(n)
    elif isinstance(comp, ControlOperator):
        out.extend(s for s in comp.subscriptions if s not in out)
    elif isinstance(comp, Actuator):
        for ctl in arch.controllers:
            if any(o.actuator == node for o in ctl.orders) and ctl.id not in out:
                out.append(ctl.id)
    return out


def _ordered(activation) -> list:
    terms = getattr(activation, "terms", None)
    if terms is None:
        return sorted(names(activation), key=str)
    return [n for term in terms for n in term]


def reach_witness(component: str, name: Ref, arch: Architecture) -> list[Ref] | None:
    """Shortest child chain from ``component`` down to ``name``; None if unreachable."""
    if component == name:
        return [component]
    parent: dict = {component: None}
    queue = deque([component])
    while queue:
        node = queue.popleft()
        for nxt in _successors(node, arch):
            if nxt in parent:
                continue
            parent[nxt] = node
            if nxt == name:
                path = [nxt]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append(nxt)
    return None


def reachable(component: str, name: Ref, arch: Architecture) -> bool:
    """Whether the data of ``name`` may flow to ``component``."""
    return reach_witness(component, name, arch) is not None


def reachable_set(component: str, arch: Architecture) -> set:
    seen = {component}
    stack = [component]
    while stack:
        for nxt in _successors(stack.pop(), arch):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen
