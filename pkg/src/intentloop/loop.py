"""Update mechanism and iterative refinement controller.

Feedback items are converted into update signals (by pre-defined rules
or by a human), the signals are applied to the session state, and the
scene is regenerated and re-checked until the report is satisfied or
the iteration budget runs out. Pins accumulate monotonically: once an
instance or attribute is pinned it stays pinned with its conditioning
unchanged for the rest of the session.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable

from .errors import InvalidUpdate
from .evaluation import evaluate_prompt
from .feedback import DetectorConfig, FeedbackItem, FeedbackReport, compose_feedback
from .generator import (
    ErrorModelConfig,
    GenerationTrace,
    GeneratorInput,
    RenderedScene,
    edit_content,
    generate,
)
from .layout import Layout, SceneGraph, apply_layout_update, expand_instances, solve_layout
from .prompts import (
    DefaultsRule,
    DefaultsTable,
    SceneSpec,
    enrich_spec,
    parse_prompt,
    spec_to_canonical_text,
)
from .seeding import mix
from .updates import UpdateSignal, add_instance_constraint, attribute_pin, layout_pin, reroll
from .vocab import Vocabulary, load_vocabulary


@dataclass(frozen=True)
class PolicyContext:
    """What a policy rule may consult when expanding an item."""

    graph: SceneGraph
    pinned: frozenset[str] = frozenset()
    required: frozenset[str] = frozenset()
    attribute_pins: frozenset[tuple[str, str]] = frozenset()


@dataclass(frozen=True)
class PolicyRule:
    name: str
    matches: Callable[[FeedbackItem], bool]
    expand: Callable[[FeedbackItem, PolicyContext], list[UpdateSignal]]


@dataclass(frozen=True)
class UpdatePolicy:
    rules: tuple[PolicyRule, ...]
    max_signals_per_iteration: int = 16

    def first_match(self, item: FeedbackItem) -> PolicyRule | None:
        for rule in self.rules:
            if rule.matches(item):
                return rule
        return None


def _expand_numeracy_surplus(item: FeedbackItem, ctx: PolicyContext):
    members = ctx.graph.group_instances(item.target["group_id"])
    return [layout_pin(m.instance_id) for m in members
            if m.instance_id not in ctx.pinned] + [reroll()]


def _expand_numeracy_deficit(item: FeedbackItem, ctx: PolicyContext):
    delta = item.expected - item.observed
    return [add_instance_constraint(item.target["group_id"], delta), reroll()]


def _expand_attribute(item: FeedbackItem, ctx: PolicyContext):
    members = ctx.graph.group_instances(item.target["group_id"])
    return [attribute_pin(m.instance_id, item.expected) for m in members
            if (m.instance_id, item.expected) not in ctx.attribute_pins]


def _expand_spatial(item: FeedbackItem, ctx: PolicyContext):
    return [layout_pin(iid)
            for iid in (item.target["subject"], item.target["object"])
            if iid not in ctx.pinned]


def default_policy(max_signals_per_iteration: int = 16) -> UpdatePolicy:
    """Each feedback kind maps to the conditioning channel that
    suppresses it: count errors pin the group's instances, attribute
    errors pin the expected attribute, spatial errors pin both
    endpoints at their solved boxes. Expansion skips targets already
    covered, so a capped iteration always makes progress."""
    rules = (
        PolicyRule(
            "numeracy-surplus",
            lambda i: i.kind == "numeracy" and i.observed > i.expected,
            _expand_numeracy_surplus,
        ),
        PolicyRule(
            "numeracy-deficit",
            lambda i: i.kind == "numeracy" and i.observed < i.expected,
            _expand_numeracy_deficit,
        ),
        PolicyRule("attribute", lambda i: i.kind == "attribute", _expand_attribute),
        PolicyRule("spatial", lambda i: i.kind == "spatial", _expand_spatial),
        PolicyRule("fidelity", lambda i: i.kind == "fidelity",
                   lambda i, ctx: [reroll()]),
    )
    return UpdatePolicy(rules, max_signals_per_iteration)


@dataclass(frozen=True)
class RefinementConfig:
    generator: ErrorModelConfig
    detector: DetectorConfig
    max_iterations: int = 3
    policy: UpdatePolicy = field(default_factory=default_policy)
    defaults_table: DefaultsTable | None = None
    vocab: Vocabulary | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.vocab is None:
            object.__setattr__(self, "vocab", load_vocabulary())


@dataclass
class SessionState:
    prompt: str
    canonical_prompt: str
    spec: SceneSpec
    graph: SceneGraph
    layout: Layout
    attribute_pins: set[tuple[str, str]]
    required_instances: set[str]
    scene: RenderedScene
    generation: GenerationTrace
    report: FeedbackReport
    base_seed: int
    k: int = 0
    content_edits: list[UpdateSignal] = field(default_factory=list)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    prompt: str
    layout: list[dict]
    scene: RenderedScene
    report: FeedbackReport
    updates: tuple[UpdateSignal, ...]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "prompt": self.prompt,
            "layout": self.layout,
            "scene": self.scene.to_dict(),
            "feedback": self.report.to_dict(),
            "updates": [u.to_dict() for u in self.updates],
        }


@dataclass
class SessionTrace:
    prompt: str
    iterations: list[IterationRecord]
    status: str  # "satisfied" | "budget_exhausted"
    final_state: SessionState | None = None

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]

    def to_document(self, spec: SceneSpec, graph: SceneGraph,
                    config_digest: str) -> dict:
        final_eval = evaluate_prompt(spec, graph, self.final.scene)
        return {
            "schema": "trace_v1",
            "prompt": self.prompt,
            "canonical_prompt": self.final.prompt,
            "config_digest": config_digest,
            "iterations": [rec.to_dict() for rec in self.iterations],
            "status": self.status,
            "final_eval": {
                "numeracy": final_eval["numeracy"],
                "attribute": final_eval["attribute"],
                "spatial": final_eval["spatial"],
            },
        }


def config_digest(cfg: RefinementConfig, seed: int) -> str:
    blob = json.dumps({
        "generator": cfg.generator.to_dict(),
        "detector": cfg.detector.to_dict(),
        "max_iterations": cfg.max_iterations,
        "max_signals": cfg.policy.max_signals_per_iteration,
        "seed": seed,
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def derive_updates(report: FeedbackReport, policy: UpdatePolicy,
                   ctx: PolicyContext | SceneGraph) -> list[UpdateSignal]:
    """First matching rule per error item, deduplicated, capped; a
    satisfied report derives nothing."""
    if isinstance(ctx, SceneGraph):
        ctx = PolicyContext(graph=ctx)
    signals: list[UpdateSignal] = []
    seen: set[str] = set()
    want_reroll = False
    for item in report.errors():
        rule = policy.first_match(item)
        if rule is None:
            continue
        for signal in rule.expand(item, ctx):
            if signal.kind == "reroll":
                want_reroll = True
                continue
            key = json.dumps(signal.to_dict(), sort_keys=True)
            if key in seen:
                continue
            if len(signals) >= policy.max_signals_per_iteration:
                break
            seen.add(key)
            signals.append(signal)
    if want_reroll:
        signals.append(reroll())
    return signals


def _apply_prompt_edit(state: SessionState, signal: UpdateSignal,
                       cfg: RefinementConfig, index: int):
    payload = signal.payload
    categories = {g.category for g in state.spec.groups}
    referenced = {c for r in payload.get("add_relations", []) for c in (r[0], r[2])}
    referenced |= {a[0] for a in payload.get("add_attributes", [])}
    missing = referenced - categories
    if missing:
        raise InvalidUpdate(f"prompt edit references absent {sorted(missing)}", index)
    rule = DefaultsRule(
        match_categories=frozenset(referenced),
        add_attributes=tuple(tuple(a) for a in payload.get("add_attributes", [])),
        add_relations=tuple(tuple(r) for r in payload.get("add_relations", [])),
    )
    state.spec = enrich_spec(state.spec, DefaultsTable((rule,)))
    state.canonical_prompt = spec_to_canonical_text(state.spec, cfg.vocab)
    state.graph = expand_instances(state.spec)
    fixed = {iid: state.layout.boxes[iid] for iid in state.layout.pinned}
    state.layout = solve_layout(
        state.graph, mix(state.base_seed, "layout", state.k + 1), cfg.vocab,
        fixed=fixed,
    )


def apply_updates(state: SessionState, updates: list[UpdateSignal],
                  cfg: RefinementConfig) -> SessionState:
    """Apply signals in order, human-origin first. Raises InvalidUpdate
    with the failing index."""
    ordered = sorted(enumerate(updates),
                     key=lambda iu: (0 if iu[1].origin == "human" else 1, iu[0]))
    for index, signal in ordered:
        try:
            if signal.kind == "prompt_edit":
                _apply_prompt_edit(state, signal, cfg, index)
            elif signal.kind == "layout_pin":
                if ("box" in signal.payload
                        and signal.payload["instance_id"] in state.layout.pinned):
                    raise InvalidUpdate(
                        f"{signal.payload['instance_id']} is pinned; its box "
                        "cannot move", index)
                state.layout = apply_layout_update(state.layout, signal, state.graph)
            elif signal.kind == "add_instance_constraint":
                members = state.graph.group_instances(signal.payload["group_id"])
                if not members:
                    raise InvalidUpdate(
                        f"no group {signal.payload['group_id']}", index)
                state.required_instances.update(m.instance_id for m in members)
            elif signal.kind == "attribute_pin":
                iid = signal.payload["instance_id"]
                attr = signal.payload["attribute"]
                instance = state.graph.instance(iid)
                if attr not in instance.attributes:
                    raise InvalidUpdate(
                        f"{iid} does not declare attribute {attr!r}", index)
                state.attribute_pins.add((iid, attr))
            elif signal.kind == "content_edit":
                state.scene = edit_content(state.scene, signal)
                state.content_edits.append(signal)
            elif signal.kind == "reroll":
                pass
        except InvalidUpdate:
            raise
        except Exception as exc:
            raise InvalidUpdate(str(exc), index) from exc
    return state


def iterate_once(state: SessionState, cfg: RefinementConfig,
                 updates: list[UpdateSignal]) -> SessionState:
    """One refinement round: apply updates, regenerate with the next
    derived seed, recompose feedback, bump k."""
    state = apply_updates(state, updates, cfg)
    k = state.k + 1
    gen_input = GeneratorInput(
        spec=state.spec, graph=state.graph, seed=mix(state.base_seed, "gen", k),
        layout=state.layout, attribute_pins=frozenset(state.attribute_pins),
        required_instances=frozenset(state.required_instances),
    )
    scene, generation = generate(gen_input, cfg.generator, cfg.vocab)
    for edit in state.content_edits:
        try:
            scene = edit_content(scene, edit)
        except Exception:
            continue  # sticky edit whose target vanished this round
    detector = cfg.detector.with_seed(mix(state.base_seed, "det", k))
    report = compose_feedback(state.spec, state.graph, scene, detector, cfg.vocab)
    state.scene = scene
    state.generation = generation
    state.report = report
    state.k = k
    return state


def start_session(prompt: str, cfg: RefinementConfig, seed: int) -> SessionState:
    """Iteration 0: parse, enrich, lay out, generate, compose feedback."""
    spec = parse_prompt(prompt, cfg.vocab)
    if cfg.defaults_table is not None:
        spec = enrich_spec(spec, cfg.defaults_table)
    canonical = spec_to_canonical_text(spec, cfg.vocab)
    graph = expand_instances(spec)
    layout = solve_layout(graph, mix(seed, "layout", 0), cfg.vocab)
    gen_input = GeneratorInput(
        spec=spec, graph=graph, seed=mix(seed, "gen", 0), layout=layout,
    )
    scene, generation = generate(gen_input, cfg.generator, cfg.vocab)
    detector = cfg.detector.with_seed(mix(seed, "det", 0))
    report = compose_feedback(spec, graph, scene, detector, cfg.vocab)
    return SessionState(
        prompt=prompt, canonical_prompt=canonical, spec=spec, graph=graph,
        layout=layout, attribute_pins=set(), required_instances=set(),
        scene=scene, generation=generation, report=report, base_seed=seed, k=0,
    )


def policy_context(state: SessionState) -> PolicyContext:
    return PolicyContext(
        graph=state.graph,
        pinned=frozenset(state.layout.pinned),
        required=frozenset(state.required_instances),
        attribute_pins=frozenset(state.attribute_pins),
    )


def record_iteration(state: SessionState,
                     updates: list[UpdateSignal]) -> IterationRecord:
    return IterationRecord(
        k=state.k,
        prompt=state.canonical_prompt,
        layout=state.layout.to_records(state.graph),
        scene=state.scene,
        report=state.report,
        updates=tuple(updates),
    )


def run_refinement(prompt: str, cfg: RefinementConfig, seed: int) -> SessionTrace:
    """Drive the full loop under the pre-defined update policy."""
    state = start_session(prompt, cfg, seed)
    records = [record_iteration(state, [])]
    while not state.report.satisfied and state.k < cfg.max_iterations:
        updates = derive_updates(state.report, cfg.policy, policy_context(state))
        state = iterate_once(state, cfg, updates)
        records.append(record_iteration(state, updates))
    status = "satisfied" if state.report.satisfied else "budget_exhausted"
    trace = SessionTrace(prompt=prompt, iterations=records, status=status)
    trace.final_state = state
    return trace
