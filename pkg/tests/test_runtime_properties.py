"""Simulator semantics as properties over random architectures and scenarios."""

from __future__ import annotations

import random
from collections import Counter

from hypothesis import given, settings
from hypothesis import strategies as st

from scc import load_fixture
from scc.handlers import passthrough_handlers
from scc.model import Emission, Push, SourceRef, parse_ref
from scc.randarch import random_architecture
from scc.runtime import (
    EXTERNAL,
    ActivationCompleted,
    GuardViolation,
    GuardViolationError,
    OperatorActivated,
    PullIssued,
    Simulator,
    SourcePublished,
    Stimulus,
    ValuePublished,
    integrity_violations,
)

CASES = 200


@st.composite
def runs(draw):
    """An architecture, a scenario over its sources and simulator options."""
    seed = draw(st.integers(0, 2**32 - 1))
    arch = random_architecture(random.Random(seed))
    sources = arch.all_sources()
    scenario = [Stimulus(src, i) for i, src in enumerate(
        draw(st.lists(st.sampled_from(sources), min_size=1, max_size=8)))]
    options = {
        "scheduler": draw(st.sampled_from(["fifo", "random"])),
        "seed": draw(st.integers(0, 1000)),
        "sync_policy": draw(st.sampled_from(["queue", "latest"])),
    }
    handler_seed = draw(st.integers(0, 1000))
    pull_all = draw(st.booleans())
    return arch, scenario, options, handler_seed, pull_all


def simulate(arch, scenario, options, handler_seed, pull_all):
    sim = Simulator(arch, **options)
    sim.bind_all(passthrough_handlers(sim.manifest, rng=random.Random(handler_seed),
                                      pull_all=pull_all))
    return sim, sim.run(scenario)


def activations(trace):
    """(operator, contract, status, published count) for every context activation."""
    out = []
    stack: list[list] = []
    for e in trace.events:
        if isinstance(e, OperatorActivated):
            stack.append([e.operator, e.contract, None, 0])
        elif isinstance(e, ValuePublished):
            for frame in reversed(stack):
                if frame[0] == e.operator:
                    frame[3] += 1
                    break
            else:
                raise AssertionError(f"{e.operator} published outside an activation")
        elif isinstance(e, ActivationCompleted):
            frame = stack.pop()
            assert frame[:2] == [e.operator, e.contract]
            frame[2] = e.status
            out.append(tuple(frame))
    assert stack == []
    return out


@settings(max_examples=CASES, deadline=None)
@given(runs())
def test_emission_fidelity(run):
    arch, *_ = run
    _, trace = simulate(*run)
    for op_id, idx, status, published in activations(trace):
        if not arch.is_context(op_id):
            assert published == 0
            continue
        emission = arch.context(op_id).contracts[idx].emission
        if emission is Emission.NEVER:
            assert published == 0
        elif emission is Emission.ALWAYS:
            assert published == (1 if status == "ok" else 0)
        else:
            assert published <= 1


@settings(max_examples=CASES, deadline=None)
@given(runs())
def test_joint_activation_consumes_one_value_per_queue(run):
    arch, scenario, options, *rest = run
    sim, trace = simulate(arch, scenario, {**options, "sync_policy": "queue"}, *rest)
    delivered: Counter = Counter()
    for e in trace.events:
        if isinstance(e, (SourcePublished, ValuePublished)):
            sender = parse_ref(e.source) if isinstance(e, SourcePublished) else e.operator
            delivered[sender] += 1
    fired = Counter((e.operator, e.contract) for e in trace.of(OperatorActivated)
                    if e.caller is None)
    for op in arch.contexts:
        for idx, c in enumerate(op.contracts):
            if not isinstance(c.activation, Push):
                continue
            per_term = [sum(delivered[n] for n in term) for term in c.activation.terms]
            assert fired[(op.id, idx)] == min(per_term)
            if len(per_term) > 1 and fired[(op.id, idx)]:
                assert sim.pending_values(op.id, idx) == [n - min(per_term) for n in per_term]


@settings(max_examples=CASES, deadline=None)
@given(st.integers(0, 3), st.booleans(), st.integers(1, 4))
def test_publish_guards(calls, reuse_stale, lines):
    arch = load_fixture("webserver")
    stored = []

    def detector(profile, publish) -> None:
        if reuse_stale and stored:
            try:
                stored[-1](profile)
            except GuardViolationError:
                pass
        stored.append(publish)
        for _ in range(calls):
            publish(profile)

    sim = Simulator(arch)
    sim.bind_all(passthrough_handlers(sim.manifest))
    sim.handlers[("IntrusionDetector", "onNewAccessingProfile")] = detector
    trace = sim.run([Stimulus(SourceRef("AccessLogReader", "line"), i) for i in range(lines)])
    reasons = Counter(v.reason for v in trace.of(GuardViolation))
    published = [e for e in trace.of(ValuePublished) if e.operator == "IntrusionDetector"]
    assert reasons["quota"] == (lines if calls > 1 else 0)
    assert reasons["stale"] == (lines - 1 if reuse_stale else 0)
    assert len(published) == lines * min(calls, 1)
    statuses = [e.status for e in trace.of(ActivationCompleted)
                if e.operator == "IntrusionDetector"]
    assert statuses == ["aborted" if calls > 1 else "ok"] * lines


@settings(max_examples=CASES, deadline=None)
@given(runs())
def test_communication_integrity(run):
    arch, *_ = run
    _, trace = simulate(*run)
    assert integrity_violations(arch, trace.events) == []
    assert not [f for f in trace.faults if "no matching contract" in f.reason]


@settings(max_examples=CASES, deadline=None)
@given(runs())
def test_determinism(run):
    first = simulate(*run)[1].render()
    second = simulate(*run)[1].render()
    assert first == second


@settings(max_examples=CASES, deadline=None)
@given(runs())
def test_sequential_and_reactive(run):
    arch, *_ = run
    _, trace = simulate(*run)
    active: list[str] = []
    seen_source = False
    for e in trace.events:
        if isinstance(e, SourcePublished):
            seen_source = True
        elif isinstance(e, PullIssued) and e.caller == EXTERNAL:
            seen_source = True
        elif isinstance(e, OperatorActivated):
            assert seen_source
            assert e.operator not in active
            active.append(e.operator)
        elif isinstance(e, ActivationCompleted):
            assert active.pop() == e.operator


def test_property_budget():
    # emission, sync, integrity, determinism and sequentiality each draw CASES runs;
    # the guard test covers its small input space exhaustively on top of that
    assert 5 * CASES >= 1000

