"""Built-in handler packs so architectures can be simulated out of the box."""

from __future__ import annotations

import random
from collections import Counter
from typing import Any, Callable

from .denotation import PUBLISH_CALLBACK, PULL_ARGS, PULL_CALLBACK, SignatureDescriptor
from .framework import FrameworkManifest
from .model import Architecture
from .runtime import LATEST, Simulator

Decide = Callable[[str, int], bool]


def _passthrough(op: str, desc: SignatureDescriptor, decide: Decide, counts: Counter,
                 pull_all: bool, rng: random.Random):
    n_values = sum(1 for p in desc.params if p.role not in (PULL_CALLBACK, PUBLISH_CALLBACK))
    pulls = [i for i, p in enumerate(desc.params) if p.role == PULL_CALLBACK]
    publish = next((i for i, p in enumerate(desc.params) if p.role == PUBLISH_CALLBACK), None)
    arities = {i: len(desc.params[i].type.params) for i in pulls}

    def body(*args):
        values = args[:n_values]
        seed = values[0] if values else f"{op}.get"
        pulled = []
        for i in pulls:
            if pull_all or rng.random() < 0.5:
                pulled.append(args[i](*([seed] * arities[i])))
        result = pulled[-1] if pulled else (values[0] if len(values) == 1 else
                                            list(values) if values else seed)
        result = {"from": op, "value": result}
        if publish is not None:
            k = counts[op]
            counts[op] += 1
            if decide(op, k):
                args[publish](result)
        return result if desc.returns_value else None

    return body


def passthrough_handlers(manifest: FrameworkManifest, *, decide: Decide | None = None,
                         rng: random.Random | None = None, publish_probability: float = 0.5,
                         pull_all: bool = True) -> dict[tuple[str, str], Callable]:
    """Handlers that forward their input, pull every requirement and wrap the result.

    ``decide(operator, n)`` chooses whether the n-th activation of a ``maybe``
    contract publishes; by default a coin flip from ``rng``.
    """
    rng = rng or random.Random(0)
    if decide is None:
        decide = lambda op, n: rng.random() < publish_probability  # noqa: E731
    counts: Counter = Counter()
    out = {}
    for entry in manifest.operators:
        for desc in entry.abstract_methods:
            out[(entry.operator_id, desc.name)] = _passthrough(
                entry.operator_id, desc, decide, counts, pull_all, rng)
    return out


# -- web server monitor -----------------------------------------------------

NSLOOKUP = {
    "10.0.0.1": "alice.example.org",
    "10.0.0.2": "bob.example.org",
    "192.168.6.66": "mallory.example.net",
}

LDAP = {
    "alice.example.org": {"name": "Alice", "role": "staff"},
    "bob.example.org": {"name": "Bob", "role": "customer"},
}

GEO = {"10.0.0.1": "Bordeaux", "10.0.0.2": "Copenhagen"}


def parse_access(line: str) -> dict:
    ip, method, page, *rest = (line.split() + ["-", "-"])[:4]
    return {"ip": ip, "method": method, "page": page, "agent": rest[0] if rest else "-"}


def webserver_handlers(arch: Architecture) -> dict[tuple[str, str], Any]:
    """Application logic for the web server monitor fixtures."""
    top_pages: Counter = Counter()
    last_top: list = []

    def on_new_line(line):
        return parse_access(line)

    def on_new_access_log_parser(access, ip2profile):
        profile = ip2profile(access["ip"])
        return {**profile, "ip": access["ip"], "page": access["page"]}

    def get_profile(ip, ip2host, host2profile):
        host = ip2host(ip)
        return {"host": host, **host2profile(host)}

    def on_new_accessing_profile(profile, publish) -> None:
        if profile.get("role") == "unknown" or "/admin" in profile.get("page", ""):
            publish({"ip": profile["ip"], "page": profile["page"], "host": profile["host"]})

    def on_new_sql_injection(access, publish) -> None:
        page = access["page"].lower()
        if "'" in page or "union" in page:
            publish({"ip": access["ip"], "page": access["page"], "host": "?"})

    def on_new_danger(danger):
        return danger

    def on_new_browser(access):
        return {"browser": access["agent"]}

    def on_new_localization(access, ip2host, publish) -> None:
        if access["ip"] in GEO:
            publish({"host": ip2host(access["ip"]), "city": GEO[access["ip"]]})

    def on_new_info(browser, localization):
        return {**browser, **localization}

    def on_new_top_five(access, publish) -> None:
        top_pages[access["page"]] += 1
        top = [page for page, _ in top_pages.most_common(5)]
        if top != last_top:
            last_top[:] = top
            publish(top)

    table = {
        ("AccessLogParser", "onNewLine"): on_new_line,
        ("AccessingProfile", "onNewAccessLogParser"): on_new_access_log_parser,
        ("AccessingProfile", "get"): LATEST,
        ("IP2Profile", "get"): get_profile,
        ("IntrusionDetector", "onNewAccessingProfile"): on_new_accessing_profile,
        ("SQLInjDetector", "onNewAccessLogParser"): on_new_sql_injection,
        ("DangerDetection", "onNewDisjunction"): on_new_danger,
        ("WebBrowserCalc", "onNewAccessLogParser"): on_new_browser,
        ("LocalizationCalc", "onNewAccessLogParser"): on_new_localization,
        ("InfoCalc", "onNewWebBrowserCalcAndLocalizationCalc"): on_new_info,
        ("TopFiveCalc", "onNewAccessLogParser"): on_new_top_five,
    }
    wanted = {(op.id, m) for op in arch.contexts for m in _methods(arch, op.id)}
    return {k: v for k, v in table.items() if k in wanted}


def _methods(arch: Architecture, op_id: str) -> list[str]:
    from .denotation import denote

    return [d.name for d in denote(arch.context(op_id), arch)]


def install_webserver_sensors(sim: Simulator) -> None:
    names = {s.id for s in sim.arch.sensors}
    if "NSLookup" in names:
        sim.register_source("NSLookup.ip2host", lambda ip: NSLOOKUP.get(ip, "unknown.host"))
    if "LDAPServer" in names:
        sim.register_source("LDAPServer.host2profile",
                            lambda host: LDAP.get(host, {"name": "?", "role": "unknown"}))


HANDLER_PACKS = ("passthrough", "webserver")


def install_pack(sim: Simulator, pack: str, *, seed: int = 0) -> None:
    """Bind every abstract method of ``sim`` using a named handler pack."""
    if pack == "passthrough":
        sim.bind_all(passthrough_handlers(sim.manifest, rng=random.Random(seed)))
    elif pack == "webserver":
        sim.bind_all(webserver_handlers(sim.arch))
        install_webserver_sensors(sim)
        missing = sim.missing_handlers()
        if missing:
            # operators unknown to the pack fall back to pass-through behaviour
            generic = passthrough_handlers(sim.manifest, rng=random.Random(seed))
            for name in missing:
                op, method = name.split(".")
                sim.bind(op, method, generic[(op, method)])
    else:
        raise ValueError(f"unknown handler pack {pack!r} (choose from {', '.join(HANDLER_PACKS)})")
