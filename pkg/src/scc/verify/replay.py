"""Replaying model-checker counterexamples in the simulator."""

from __future__ import annotations

from collections import defaultdict

from ..framework import FrameworkManifest
from ..handlers import passthrough_handlers
from ..model import Architecture, parse_ref
from ..runtime import SimTrace, Simulator, SourcePublished, Stimulus
from .modelcheck import Verdict


def counterexample_scenario(verdict: Verdict) -> list[Stimulus]:
    """One stimulus per source publication in the counterexample."""
    if verdict.counterexample is None:
        raise ValueError("verdict has no counterexample")
    return [Stimulus(parse_ref(e.source), f"token{i}")
            for i, e in enumerate(e for e in verdict.counterexample
                                  if isinstance(e, SourcePublished))]


def replay(arch: Architecture, verdict: Verdict,
           manifest: FrameworkManifest | None = None) -> SimTrace:
    """Run the counterexample's stimuli with handlers scripted by its choices.

    Each ``maybe`` operator publishes on its n-th activation exactly when the
    counterexample made it publish on its n-th activation.
    """
    choices: dict[str, list[bool]] = defaultdict(list)
    for op, published in verdict.decisions:
        choices[op].append(published)

    def decide(op: str, n: int) -> bool:
        seq = choices.get(op, [])
        return seq[n] if n < len(seq) else False

    sim = Simulator(arch, manifest)
    sim.bind_all(passthrough_handlers(sim.manifest, decide=decide))
    return sim.run(counterexample_scenario(verdict))
