"""Agreement between the static analyses, the model checker and the simulator."""

from __future__ import annotations

import random

from scc.checker import check
from scc.handlers import passthrough_handlers
from scc.randarch import random_architecture
from scc.runtime import Simulator, Stimulus, integrity_violations
from scc.verify import check_invariant, holds_on_trace, replay
from scc.verify.invariants import Never, Predicate, Response

CHECKED_ARCHS = 50
VERDICT_ARCHS = 200


def pushed_sources(arch):
    """Sources that some operator subscribes to; the flow model publishes only these."""
    return [s for s in arch.all_sources() if arch.push_parents(s)]


def random_scenario(rng, sources, length):
    return [Stimulus(rng.choice(sources), i) for i in range(length)]


def random_invariant(rng, arch):
    goals = [Predicate("activated", c.id) for c in (*arch.contexts, *arch.controllers)]
    goals += [Predicate("invoked", f"{a.id}.{x.name}") for a in arch.actuators for x in a.actions]
    if rng.random() < 0.7:
        return Response(Predicate("publish", str(rng.choice(pushed_sources(arch)))),
                        rng.choice(goals))
    return Never(rng.choice(goals))


def test_checked_architectures_run_without_contract_or_integrity_faults():
    faults = []
    for seed in range(CHECKED_ARCHS):
        rng = random.Random(seed)
        arch = random_architecture(rng)
        assert check(arch).ok, seed
        sources = pushed_sources(arch) or arch.all_sources()
        for sync_policy in ("queue", "latest"):
            sim = Simulator(arch, sync_policy=sync_policy, scheduler="random", seed=seed)
            sim.bind_all(passthrough_handlers(sim.manifest, rng=random.Random(seed),
                                              pull_all=True))
            trace = sim.run(random_scenario(rng, sources, 10))
            faults += [(seed, f.reason) for f in trace.faults
                       if "no matching contract" in f.reason]
            faults += [(seed, p) for p in integrity_violations(arch, trace.events)]
    assert faults == []


def verdict_cases():
    for seed in range(VERDICT_ARCHS):
        rng = random.Random(seed)
        arch = random_architecture(rng, max_components=7)
        if not pushed_sources(arch):
            continue
        inv = random_invariant(rng, arch)
        verdict = check_invariant(arch, inv, bound=20_000)
        if not verdict.bounded:
            yield seed, rng, arch, inv, verdict


def test_holding_verdicts_hold_on_simulated_runs():
    checked = 0
    for seed, rng, arch, inv, verdict in verdict_cases():
        if not verdict.holds:
            continue
        for k in range(5):
            sim = Simulator(arch)
            sim.bind_all(passthrough_handlers(sim.manifest, rng=random.Random(k), pull_all=True))
            trace = sim.run(random_scenario(rng, pushed_sources(arch), rng.randint(1, 5)))
            assert holds_on_trace(inv, trace.events), (seed, str(inv), k)
            checked += 1
    assert checked >= 100


def test_counterexamples_replay_as_violations():
    replayed = 0
    for seed, _, arch, inv, verdict in verdict_cases():
        if verdict.holds:
            continue
        trace = replay(arch, verdict)
        assert trace.ok, seed
        assert not holds_on_trace(inv, trace.events), (seed, str(inv))
        replayed += 1
    assert replayed >= 30
