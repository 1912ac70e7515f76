"""Acceptance criteria 1 to 9, one PASS/FAIL line each.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import random
import shutil
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import pytest

from scc import fixture_path, load_fixture
from scc.checker import check
from scc.denotation import denote
from scc.handlers import passthrough_handlers
from scc.model import Emission
from scc.parser import parse_file
from scc.randarch import random_architecture
from scc.runtime import (
    ActivationCompleted,
    EXTERNAL,
    OperatorActivated,
    PullIssued,
    Simulator,
    SourcePublished,
    Stimulus,
    integrity_violations,
)
from scc.verify import (
    check_invariant,
    emit_promela,
    holds_on_trace,
    parse_invariant,
    reachable,
    replay,
)

import test_checker
import test_denotation
import test_reach
import test_runtime_properties

GOLDEN = Path(__file__).parent / "golden"
LINE = "publish(AccessLogReader.line)"


def criterion_1():
    start = time.perf_counter()
    report = check(parse_file(fixture_path("webserver.adl")))
    elapsed = time.perf_counter() - start
    ok = report.verdict == "pass" and not report.findings and elapsed < 1.0
    return ok, f"verdict {report.verdict}, {len(report.findings)} findings, {elapsed:.3f} s"


def criterion_2():
    flagged = []
    for name, base, old, new, rule, subject, witness, _severity in test_checker.MUTATIONS:
        report = check(test_checker.mutate(base, old, new))
        for f in report.findings:
            if f.rule != rule or not f.subject:
                continue
            if subject is not None and f.subject != subject:
                continue
            if witness is not None and f.witness != witness:
                continue
            flagged.append(name)
            break
    clean = [load_fixture(n) for n in
             ("webserver", "webserver_danger", "webserver_stats", "webserver_topfive")]
    clean += [random_architecture(random.Random(seed)) for seed in range(100)]
    false_positives = sum(len(check(a).findings) for a in clean)
    ok = len(flagged) >= 10 and len(flagged) == len(test_checker.MUTATIONS) \
        and false_positives == 0
    return ok, (f"{len(flagged)}/{len(test_checker.MUTATIONS)} mutations flagged, "
                f"{false_positives} findings on {len(clean)} clean architectures")


ROWS = [
    ("push, always", "Row1", "U × (U → V) → T"),
    ("push, maybe", "Row2", "U × (U → V) × publish(T) → ()"),
    ("push, no", "Row3", "U × (U → V) → ()"),
    ("pull, always", "Row4a", "U × V × (U → V) → T"),
    ("pull, no", "Row4b", "U × (U → V) → T"),
    ("pull, maybe", "Row5", "U × (U → V) × publish(T) → T"),
]


def criterion_3():
    arch = load_fixture("webserver")
    [desc] = denote(arch.context("AccessingProfile"), arch)
    wrong = [] if desc.type_string() == "Access × (IPAddress → Profile) → Profile" \
        else ["AccessingProfile"]
    rows = test_denotation.ROW_ARCH
    for label, op, expected in ROWS:
        [d] = denote(rows.context(op), rows)
        if d.type_string() != expected:
            wrong.append(label)
    composite = [d.type_string() for d in denote(rows.context("Row6"), rows)]
    if composite != ["U × publish(T) → ()", "V → T"]:
        wrong.append("composition")
    return not wrong, f"AccessingProfile: {desc.type_string()}; {len(ROWS) + 1} rows" + (
        f"; wrong: {', '.join(wrong)}" if wrong else "")


def criterion_4():
    expected = [("webserver", "AccessingProfile", "onNewAccessLogParser"),
                ("webserver", "IP2Profile", "get"),
                ("webserver", "IntrusionDetector", "onNewAccessingProfile"),
                ("webserver_stats", "InfoCalc", "onNewWebBrowserCalcAndLocalizationCalc"),
                ("webserver_danger", "DangerDetection", "onNewDisjunction")]
    got = []
    for fixture, op, _ in expected:
        arch = load_fixture(fixture)
        got.append(denote(arch.context(op), arch)[0].name)
    return got == [e[2] for e in expected], ", ".join(got)


def criterion_5():
    pairs = 0
    disagreements = 0
    for seed in range(100):
        arch = random_architecture(random.Random(seed), max_components=12, cycles=seed % 2 == 1)
        nodes, index, closure = test_reach.closure_oracle(arch)
        for c in arch.component_ids:
            for n in nodes:
                pairs += 1
                disagreements += reachable(c, n, arch) != closure[index[c]][index[n]]
    topfive = load_fixture("webserver_topfive")
    blocked = not reachable("WebPageUpdater", "AccessingProfile", topfive)
    return disagreements == 0 and blocked, (
        f"{pairs} pairs on 100 architectures, {disagreements} disagreements; "
        f"WebPageUpdater reaches AccessingProfile: {not blocked}")


def criterion_6():
    arch = load_fixture("webserver")
    logged = check_invariant(arch, parse_invariant(f"always {LINE} leadsto activated(ProfileLogger)"))
    inv = parse_invariant(f"always {LINE} leadsto activated(IntrusionInformer)")
    start = time.perf_counter()
    informed = check_invariant(arch, inv)
    elapsed = time.perf_counter() - start
    replayed = not informed.holds and not holds_on_trace(inv, replay(arch, informed).events)
    ok = (logged.holds and not logged.bounded and not informed.holds and replayed
          and elapsed < 10 and informed.states_explored <= 10**6)
    return ok, (f"ProfileLogger {logged.status}; IntrusionInformer {informed.status} after "
                f"{informed.states_explored} states in {elapsed:.3f} s; "
                f"counterexample replays: {replayed}")


def _random_run(seed):
    rng = random.Random(seed)
    arch = random_architecture(rng)
    scenario = [Stimulus(rng.choice(arch.all_sources()), i) for i in range(rng.randint(1, 8))]
    options = {"scheduler": rng.choice(["fifo", "random"]), "seed": rng.randint(0, 1000),
               "sync_policy": rng.choice(["queue", "latest"])}
    return arch, scenario, options, rng.randint(0, 1000), rng.random() < 0.5


def _run_properties(run) -> list[str]:
    arch = run[0]
    _, trace = test_runtime_properties.simulate(*run)
    problems = []
    for op_id, idx, status, published in test_runtime_properties.activations(trace):
        if not arch.is_context(op_id):
            continue
        emission = arch.context(op_id).contracts[idx].emission
        limit = {Emission.NEVER: 0, Emission.MAYBE: 1,
                 Emission.ALWAYS: 1 if status == "ok" else 0}[emission]
        if published > limit or (emission is Emission.ALWAYS and published != limit):
            problems.append(f"emission of {op_id}")
    problems += integrity_violations(arch, trace.events)
    problems += [f.reason for f in trace.faults if "no matching contract" in f.reason]
    if test_runtime_properties.simulate(*run)[1].render() != trace.render():
        problems.append("nondeterministic")
    started = False
    for e in trace.events:
        if isinstance(e, SourcePublished) or (isinstance(e, PullIssued) and e.caller == EXTERNAL):
            started = True
        elif isinstance(e, (OperatorActivated, ActivationCompleted)) and not started:
            problems.append("activation without a stimulus")
    return problems


def criterion_7():
    cases = 1000
    failing = [seed for seed in range(cases) if _run_properties(_random_run(seed))]
    return not failing, f"{cases} random runs, {len(failing)} violating" + (
        f" (first seed {failing[0]})" if failing else "")


def criterion_8():
    text = emit_promela(load_fixture("webserver"))
    exact = text.encode("utf-8") == (GOLDEN / "webserver.pml").read_bytes()
    spin = shutil.which("spin")
    spin_note = "spin not installed"
    if spin:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "webserver.pml"
            path.write_text(text, encoding="utf-8")
            result = subprocess.run([spin, "-a", str(path)], cwd=tmp, capture_output=True,
                                    check=False)
            spin_note = f"spin -a exit {result.returncode}"
            exact = exact and result.returncode == 0
    return exact, f"golden file byte-exact: {exact}; {spin_note}"


def criterion_9():
    bad = []
    for seed in range(50):
        rng = random.Random(seed)
        arch = random_architecture(rng)
        if not check(arch).ok:
            bad.append(f"{seed}: check failed")
            continue
        sim = Simulator(arch, scheduler="random", seed=seed)
        sim.bind_all(passthrough_handlers(sim.manifest, rng=random.Random(seed), pull_all=True))
        trace = sim.run([Stimulus(rng.choice(arch.all_sources()), i) for i in range(10)])
        bad += [f"{seed}: {f.reason}" for f in trace.faults if "no matching contract" in f.reason]
        bad += [f"{seed}: {p}" for p in integrity_violations(arch, trace.events)]
    return not bad, f"50 checked architectures, {len(bad)} faults" + (
        f" (first: {bad[0]})" if bad else "")


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 10)}


def evaluate(n: int) -> tuple[bool, str]:
    ok, detail = CRITERIA[n]()
    return ok, f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n, capsys):
    ok, line = evaluate(n)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n) for n in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
