"""Design-time analyses: reachability, flow models, Promela and invariant checking."""

from .flow import FlowModel, build_flow_model, emit_promela, render_promela
from .invariants import Never, Predicate, Response, holds_on_trace, parse_invariant
from .modelcheck import Verdict, check_invariant, check_model
from .reach import reach_witness, reachable, reachable_set
from .replay import replay

__all__ = [
    "FlowModel", "Never", "Predicate", "Response", "Verdict", "build_flow_model",
    "check_invariant", "check_model", "emit_promela", "holds_on_trace", "parse_invariant",
    "reach_witness", "reachable", "reachable_set", "render_promela", "replay",
]
