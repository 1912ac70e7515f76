from __future__ import annotations

import time

import pytest

from scc import fixture_path
from scc.model import SourceRef
from scc.parser import parse
from scc.runtime import ActionInvoked, OperatorActivated, SourcePublished
from scc.verify import (
    Never,
    Predicate,
    Response,
    build_flow_model,
    check_invariant,
    check_model,
    holds_on_trace,
    parse_invariant,
    replay,
)
from scc.verify.invariants import InvariantError, load_invariants, validate
from scc.verify.modelcheck import CONCURRENT
from scc.verify.replay import counterexample_scenario

WEBSERVER = fixture_path("webserver.adl").read_text(encoding="utf-8")
LOGGED = parse_invariant("always publish(AccessLogReader.line) leadsto activated(ProfileLogger)")
INFORMED = parse_invariant(
    "always publish(AccessLogReader.line) leadsto activated(IntrusionInformer)")


# -- invariant syntax --------------------------------------------------------


def test_parse_response():
    assert LOGGED == Response(Predicate("publish", "AccessLogReader.line"),
                              Predicate("activated", "ProfileLogger"))
    assert str(LOGGED) == \
        "always publish(AccessLogReader.line) leadsto activated(ProfileLogger)"


def test_parse_never():
    assert parse_invariant("  never invoked( Mailer.send )") == \
        Never(Predicate("invoked", "Mailer.send"))


@pytest.mark.parametrize("text", [
    "", "always publish(A.b)", "eventually activated(X)", "never fired(X)",
    "always publish(A.b) leadsto", "never activated(X) extra",
])
def test_malformed_invariants_are_rejected(text):
    with pytest.raises(InvariantError):
        parse_invariant(text)


@pytest.mark.parametrize("text", [
    "never publish(AccessLogReader.nothing)",
    "never publish(AccessLogParser)",
    "never activated(Logger)",
    "never activated(Nobody)",
    "never invoked(Mailer.fax)",
    "never invoked(Logger)",
])
def test_predicates_must_name_declared_things(text, webserver):
    with pytest.raises(InvariantError):
        validate(parse_invariant(text), webserver)


def test_invariant_files(tmp_path):
    path = tmp_path / "inv.txt"
    path.write_text("// requirements\n"
                    "always publish(AccessLogReader.line) leadsto activated(ProfileLogger)\n"
                    "\n"
                    "never invoked(Mailer.send) // should fail\n", encoding="utf-8")
    assert load_invariants(path) == [LOGGED, Never(Predicate("invoked", "Mailer.send"))]


def test_trace_semantics():
    line = SourcePublished("AccessLogReader.line", 1)
    logger = OperatorActivated("ProfileLogger", 0, "forward", (), None)
    assert holds_on_trace(LOGGED, [])
    assert holds_on_trace(LOGGED, [line, logger])
    assert not holds_on_trace(LOGGED, [line, logger, line])
    assert holds_on_trace(Never(Predicate("activated", "Mailer")), [line, logger])
    assert not holds_on_trace(Never(Predicate("activated", "ProfileLogger")), [logger])


# -- verdicts on the fixture -------------------------------------------------


def test_logging_response_holds(webserver):
    v = check_invariant(webserver, LOGGED)
    assert v.holds and v.status == "holds"
    assert not v.bounded and not v.overflow
    assert v.counterexample is None


def test_informer_response_fails_quickly(webserver):
    start = time.perf_counter()
    v = check_invariant(webserver, INFORMED)
    elapsed = time.perf_counter() - start
    assert not v.holds and v.status == "fails"
    assert elapsed < 10
    assert v.states_explored <= 10**6
    assert v.decisions == [("IntrusionDetector", False)]
    assert v.counterexample[0] == SourcePublished("AccessLogReader.line", 1)
    assert not any(isinstance(e, OperatorActivated) and e.operator == "IntrusionInformer"
                   for e in v.counterexample)


def test_counterexample_replays_in_the_simulator(webserver):
    v = check_invariant(webserver, INFORMED)
    assert [s.source for s in counterexample_scenario(v)] == \
        [SourceRef("AccessLogReader", "line")]
    trace = replay(webserver, v)
    assert trace.ok
    assert not holds_on_trace(INFORMED, trace.events)
    assert holds_on_trace(LOGGED, trace.events)


def test_verdict_without_counterexample_cannot_replay(webserver):
    with pytest.raises(ValueError):
        counterexample_scenario(check_invariant(webserver, LOGGED))


def test_never_fails_with_a_path_ending_in_the_event(webserver):
    v = check_invariant(webserver, parse_invariant("never invoked(Mailer.send)"))
    assert not v.holds
    last = v.counterexample[-1]
    assert isinstance(last, ActionInvoked) and (last.actuator, last.action) == ("Mailer", "send")
    assert v.decisions[-1] == ("IntrusionDetector", True)
    assert not holds_on_trace(v.invariant, replay(webserver, v).events)


def test_never_holds_for_an_action_no_controller_orders():
    arch = parse(WEBSERVER.replace("action send(IdentifiedAccess);",
                                   "action send(IdentifiedAccess);\n  action page(Profile);"))
    v = check_invariant(arch, parse_invariant("never invoked(Mailer.page)"))
    assert v.holds and not v.bounded


def test_a_small_bound_truncates(webserver):
    v = check_invariant(webserver, LOGGED, bound=10)
    assert v.holds and v.bounded and v.states_explored == 10
    assert v.status == "holds (bounded)"
    assert "the state bound was reached" in v.render_text()
    with pytest.raises(ValueError):
        check_invariant(webserver, LOGGED, bound=0)


def test_concurrent_semantics_reports_overflow(webserver):
    v = check_invariant(webserver, LOGGED, bound=5000, semantics=CONCURRENT)
    assert v.semantics == CONCURRENT
    assert v.bounded and v.overflow
    assert "channel capacity was exceeded" in v.render_text()


def test_concurrent_semantics_still_finds_the_counterexample(webserver):
    v = check_invariant(webserver, INFORMED, semantics=CONCURRENT)
    assert not v.holds


@pytest.mark.parametrize("options", [
    {"capacity": 2}, {"optional_pulls": True}, {"sensors_may_stop": False}])
def test_verdicts_are_stable_under_model_options(webserver, options):
    assert check_invariant(webserver, LOGGED, **options).holds
    assert not check_invariant(webserver, INFORMED, **options).holds


def test_check_model_matches_check_invariant(webserver):
    model = build_flow_model(webserver)
    a, b = check_model(model, INFORMED), check_invariant(webserver, INFORMED)
    assert (a.holds, a.states_explored, a.counterexample) == \
        (b.holds, b.states_explored, b.counterexample)


def test_machine_records(webserver):
    records = check_invariant(webserver, INFORMED).records()
    assert records[0]["record"] == "verdict" and records[0]["holds"] is False
    assert [r["index"] for r in records[1:]] == list(range(len(records) - 1))
    assert all(r["record"] == "step" for r in records[1:])


def test_danger_extension_keeps_logging(danger):
    assert check_invariant(danger, LOGGED).holds
    assert not check_invariant(danger, INFORMED).holds
