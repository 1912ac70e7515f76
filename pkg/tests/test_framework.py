from __future__ import annotations

import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scc import fixture_path
from scc.denotation import denote
from scc.framework import (
    PUBLISH_ALWAYS,
    PUBLISH_ON_CALLBACK,
    RETURN_TO_CALLER,
    GenerationError,
    GuardConfig,
    GuardPolicy,
    diff_manifests,
    dumps,
    generate_manifest,
    loads,
    render_stubs,
)
from scc.parser import parse
from scc.randarch import random_architecture

GOLDEN = Path(__file__).parent / "golden"
WEBSERVER = fixture_path("webserver.adl").read_text(encoding="utf-8")


@pytest.fixture(scope="module")
def manifest(webserver):
    return generate_manifest(webserver)


def test_one_entry_per_operator(manifest):
    assert [e.operator_id for e in manifest.operators] == [
        "AccessLogParser", "AccessingProfile", "IP2Profile", "IntrusionDetector"]


def test_every_component_has_an_entry(manifest, webserver):
    assert manifest.component_ids() == set(webserver.component_ids)


def test_accessing_profile_entry(manifest):
    entry = manifest.operator("AccessingProfile")
    assert [m.name for m in entry.abstract_methods] == ["onNewAccessLogParser"]
    [cb] = entry.callbacks
    assert (cb.name, cb.kind, cb.target) == ("PullFromIP2Profile", "pull", "IP2Profile")
    assert cb.guard == GuardPolicy(None)
    assert entry.calling("onNewAccessLogParser").post_actions == (PUBLISH_ALWAYS,)


def test_intrusion_detector_entry(manifest):
    entry = manifest.operator("IntrusionDetector")
    [cb] = entry.callbacks
    assert cb.kind == "publish"
    assert cb.guard.max_invocations == 1
    assert entry.calling("onNewAccessingProfile").post_actions == (PUBLISH_ON_CALLBACK,)


def test_pull_contract_returns_to_caller(manifest):
    cm = manifest.operator("IP2Profile").calling("get")
    assert cm.post_actions == (RETURN_TO_CALLER,)
    assert cm.triggers == "pull"


def test_callback_exists_only_for_optional_interactions(manifest):
    for entry in manifest.operators:
        for cm in entry.calling_methods:
            publish_cbs = [cb for cb in entry.callbacks_of(cm.invokes) if cb.kind == "publish"]
            assert bool(publish_cbs) == (PUBLISH_ON_CALLBACK in cm.post_actions)
            assert not (publish_cbs and PUBLISH_ALWAYS in cm.post_actions)


def test_one_calling_method_per_abstract_method(manifest):
    for entry in manifest.operators:
        assert sorted(cm.invokes for cm in entry.calling_methods) == \
            sorted(m.name for m in entry.abstract_methods)


@pytest.mark.parametrize("fixture", ["webserver", "danger", "stats", "topfive"])
def test_abstract_methods_equal_denotations(fixture, request):
    arch = request.getfixturevalue(fixture)
    m = generate_manifest(arch)
    for op in arch.contexts:
        assert list(m.operator(op.id).abstract_methods) == denote(op, arch)


def test_empty_architecture():
    m = generate_manifest(parse("architecture Empty;"))
    assert m.operators == ()
    assert render_stubs(m) == "// framework for architecture Empty\n"


def test_failed_checks_abort_generation():
    arch = parse(WEBSERVER.replace("contract on push(AccessingProfile) maybe publish;",
                                   "contract on push(AccessingProfile) no publish;"))
    with pytest.raises(GenerationError) as info:
        generate_manifest(arch)
    assert "subscription-needs-emission" in info.value.report.rules()


def test_guard_policy_validation():
    with pytest.raises(ValueError):
        GuardPolicy(0)
    assert str(GuardPolicy(None)) == "handler-lifetime, unlimited"
    assert str(GuardPolicy(3)) == "handler-lifetime, max 3"


def test_custom_guards(webserver):
    m = generate_manifest(webserver, GuardConfig(pull=GuardPolicy(2), publish=GuardPolicy(4)))
    assert m.operator("AccessingProfile").callbacks[0].guard.max_invocations == 2
    assert m.operator("IntrusionDetector").callbacks[0].guard.max_invocations == 4


# -- serialization -----------------------------------------------------------


def test_serialization_is_canonical(manifest):
    text = dumps(manifest)
    data = json.loads(text)
    assert data["manifestVersion"] == 1
    assert text == json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


@pytest.mark.parametrize("fixture", ["webserver", "danger", "stats", "topfive"])
def test_round_trip(fixture, request):
    m = generate_manifest(request.getfixturevalue(fixture), GuardConfig(publish=GuardPolicy(2)))
    assert loads(dumps(m)) == m


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000))
def test_round_trip_random(seed):
    m = generate_manifest(random_architecture(random.Random(seed)))
    assert loads(dumps(m)) == m


def test_unknown_version_is_rejected(manifest):
    data = json.loads(dumps(manifest))
    data["manifestVersion"] = 99
    with pytest.raises(ValueError):
        loads(json.dumps(data))


# -- stubs -------------------------------------------------------------------


def test_stubs_golden(manifest):
    assert render_stubs(manifest) == (GOLDEN / "webserver.stubs").read_text(encoding="utf-8")


def test_stubs_are_deterministic(webserver):
    assert render_stubs(generate_manifest(webserver)) == render_stubs(generate_manifest(webserver))


def test_ip2profile_stub(manifest):
    assert ("  abstract get(newIPAddress: IPAddress, ip2Host: IPAddress -> String, "
            "host2Profile: String -> Profile) -> Profile") in render_stubs(manifest).splitlines()


def test_always_emission_has_no_publish_callback_line(manifest):
    text = render_stubs(manifest)
    block = text.split("context operator AccessLogParser")[1].split("\n\n")[0]
    assert "callback" not in block
    assert "publish-always" in block


# -- diffing -----------------------------------------------------------------


def test_identical_manifests_have_empty_diff(manifest, webserver):
    assert diff_manifests(manifest, generate_manifest(webserver)) == []


def test_diff_against_danger_extension(manifest, danger):
    entries = diff_manifests(manifest, generate_manifest(danger))
    assert {e.kind for e in entries} == {"added"}
    paths = {e.path for e in entries}
    assert "operators/SQLInjDetector" in paths
    assert "operators/DangerDetection/methods/onNewDisjunction" in paths


def test_diff_flags_new_publish_callback(manifest):
    arch = parse(WEBSERVER.replace(
        "contract on push(AccessLogReader.line) always publish;",
        "contract on push(AccessLogReader.line) maybe publish;"))
    entries = {(e.kind, e.path) for e in diff_manifests(manifest, generate_manifest(arch))}
    assert ("changed", "operators/AccessLogParser/methods/onNewLine") in entries
    assert ("added", "operators/AccessLogParser/callbacks/onNewLine/Publish") in entries
    assert ("changed", "operators/AccessLogParser/calling/onNewLine") in entries


def test_diff_is_antisymmetric(manifest, danger):
    forward = diff_manifests(manifest, generate_manifest(danger))
    backward = diff_manifests(generate_manifest(danger), manifest)
    assert [e.path for e in forward] == [e.path for e in backward]
    assert {e.kind for e in backward} == {"removed"}
