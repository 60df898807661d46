"""Simulated scene generator with stochastic, ledgered error channels.

Rendering a scene graph faithfully would copy every instance to an
entity at its layout box with its declared attributes. This generator
deviates from that faithful render through five channels — omission,
duplication, attribute swap, attribute drop, and ignored spatial
constraints — plus centroid jitter, and records every deviation in a
trace. Conditioning attenuates channels: a provided layout scales the
count/position channels by ``cond_factors``, attribute pins scale the
attribute channels, and pinned instances or attributes are exempt
entirely.

Every random draw is keyed by purpose and target id, so changing one
probability never shifts the draws of an unrelated channel, and a
zero-probability replay reproduces the faithful geometry exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidTarget, InvariantViolation
from .layout import AXIS, CANVAS, BoundingBox, Layout, SceneGraph, _shrink_to_fit
from .prompts import PREDICATES, SceneSpec
from .seeding import normal, pick, pick_weighted, u01, uniform
from .vocab import Vocabulary

CHANNELS = ("omit", "duplicate", "attr_swap", "attr_drop", "rel_ignore")
_LAYOUT_CHANNELS = ("omit", "dup", "rel_ignore", "jitter")
_ATTR_CHANNELS = ("attr_swap", "attr_drop")
_REL_GAP_RANGE = (40.0, 140.0)

DEFAULT_BIAS_PRIOR = {"above": 0.6, "below": 0.1, "left_of": 0.15, "right_of": 0.15}


def _default_factors() -> dict[str, float]:
    return {"omit": 1.0, "dup": 1.0, "attr_swap": 1.0, "attr_drop": 1.0,
            "rel_ignore": 1.0, "jitter": 1.0, "dup_required": 1.0}


@dataclass(frozen=True)
class ErrorModelConfig:
    p_omit: float = 0.0
    p_dup: float = 0.0
    p_attr_swap: float = 0.0
    p_attr_drop: float = 0.0
    p_rel_ignore: float = 0.0
    jitter_sigma: float = 0.0
    cond_factors: dict[str, float] = field(default_factory=_default_factors)
    bias_prior: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_BIAS_PRIOR))

    def __post_init__(self):
        for name in ("p_omit", "p_dup", "p_attr_swap", "p_attr_drop",
                     "p_rel_ignore"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if self.p_omit + self.p_dup > 1.0:
            raise ValueError("p_omit + p_dup exceeds 1")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        factors = _default_factors() | dict(self.cond_factors)
        for name, value in factors.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"cond_factors[{name}]={value} outside [0, 1]")
        object.__setattr__(self, "cond_factors", factors)
        prior = dict(self.bias_prior)
        total = sum(prior.values())
        if total <= 0 or any(p not in PREDICATES for p in prior):
            raise ValueError(f"bad bias prior {prior}")
        object.__setattr__(
            self, "bias_prior", {p: prior[p] / total for p in PREDICATES if p in prior}
        )

    def to_dict(self) -> dict:
        return {
            "p_omit": self.p_omit, "p_dup": self.p_dup,
            "p_attr_swap": self.p_attr_swap, "p_attr_drop": self.p_attr_drop,
            "p_rel_ignore": self.p_rel_ignore, "jitter_sigma": self.jitter_sigma,
            "cond_factors": dict(self.cond_factors),
            "bias_prior": dict(self.bias_prior),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorModelConfig":
        return cls(**d)

    @classmethod
    def zero(cls) -> "ErrorModelConfig":
        return cls()


@dataclass(frozen=True)
class GeneratorInput:
    spec: SceneSpec
    graph: SceneGraph
    seed: int
    layout: Layout | None = None
    attribute_pins: frozenset[tuple[str, str]] = frozenset()
    required_instances: frozenset[str] = frozenset()  # presence forced, position free

    def __post_init__(self):
        object.__setattr__(self, "attribute_pins", frozenset(self.attribute_pins))
        object.__setattr__(self, "required_instances",
                           frozenset(self.required_instances))
        if self.layout is not None:
            self.layout.validate(self.graph)

    @property
    def pinned_instances(self) -> set[str]:
        return set(self.layout.pinned) if self.layout is not None else set()


@dataclass(frozen=True)
class RenderedEntity:
    entity_id: str
    category: str
    attributes: frozenset[str]
    box: BoundingBox

    @property
    def fill(self) -> str:
        colors = sorted(self.attributes)
        return colors[0] if colors else "gray"

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id, "category": self.category,
            "attributes": sorted(self.attributes), "box": self.box.to_dict(),
            "fill": self.fill,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RenderedEntity":
        return cls(d["entity_id"], d["category"], frozenset(d["attributes"]),
                   BoundingBox.from_dict(d["box"]))


@dataclass(frozen=True)
class RenderedScene:
    entities: tuple[RenderedEntity, ...]
    canvas: tuple[int, int] = CANVAS

    def __post_init__(self):
        ids = [e.entity_id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("duplicate entity ids")
        for e in self.entities:
            if not e.box.inside(self.canvas):
                raise InvariantViolation(f"{e.entity_id} outside canvas")

    def entity(self, entity_id: str) -> RenderedEntity:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise InvalidTarget(f"no entity {entity_id!r}")

    def to_dict(self) -> dict:
        return {"canvas": list(self.canvas),
                "entities": [e.to_dict() for e in self.entities]}

    @classmethod
    def from_dict(cls, d: dict) -> "RenderedScene":
        return cls(tuple(RenderedEntity.from_dict(e) for e in d["entities"]),
                   tuple(d["canvas"]))


@dataclass(frozen=True)
class InjectedError:
    channel: str
    targets: tuple[str, ...]
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}")

    def to_dict(self) -> dict:
        return {"channel": self.channel, "targets": list(self.targets),
                "details": self.details}


@dataclass(frozen=True)
class GenerationTrace:
    """Complete deviation ledger: semantic errors plus the final box of
    every entity the noise moved. Faithful render + this trace rebuilds
    the returned scene exactly."""

    injected: tuple[InjectedError, ...]
    box_overrides: dict[str, BoundingBox] = field(default_factory=dict)

    def by_channel(self, channel: str) -> list[InjectedError]:
        return [e for e in self.injected if e.channel == channel]

    def to_dict(self) -> dict:
        return {
            "injected": [e.to_dict() for e in self.injected],
            "box_overrides": {k: v.to_dict()
                              for k, v in sorted(self.box_overrides.items())},
        }


def _self_placed_boxes(graph: SceneGraph, seed: int,
                       vocab: Vocabulary) -> dict[str, BoundingBox]:
    """Unconditioned placement baseline: seeded free boxes, constraints
    honored by repositioning subjects (the honest variant)."""
    boxes: dict[str, BoundingBox] = {}
    for inst in graph.instances:
        iid = inst.instance_id
        nominal_w, nominal_h = vocab.nominal_size(inst.category)
        w = nominal_w * (1 + uniform(-0.2, 0.2, seed, "selfsize-w", iid))
        h = nominal_h * (1 + uniform(-0.2, 0.2, seed, "selfsize-h", iid))
        cx = uniform(24, CANVAS[0] - 24, seed, "selfplace-x", iid)
        cy = uniform(24, CANVAS[1] - 24, seed, "selfplace-y", iid)
        boxes[iid] = _shrink_to_fit(cx, cy, w, h, CANVAS)
    return boxes


def _reposition(boxes: dict[str, BoundingBox], mover: str, anchor: str,
                predicate: str, gap: float, cross: float | None = None):
    """Move ``mover`` so that eval_predicate(mover, anchor, predicate)
    holds by at least ``gap`` between centroids. ``cross`` replaces the
    off-axis coordinate (a placement that disregards the asked relation
    controls only the axis it sampled)."""
    mbox, abox = boxes[mover], boxes[anchor]
    cx, cy = mbox.cx, mbox.cy
    if predicate == "left_of":
        cx = abox.cx - gap
        cy = cross if cross is not None else cy
    elif predicate == "right_of":
        cx = abox.cx + gap
        cy = cross if cross is not None else cy
    elif predicate == "above":
        cy = abox.cy - gap
        cx = cross if cross is not None else cx
    else:
        cy = abox.cy + gap
        cx = cross if cross is not None else cx
    cx = min(max(cx, 12.0), CANVAS[0] - 12.0)
    cy = min(max(cy, 12.0), CANVAS[1] - 12.0)
    boxes[mover] = _shrink_to_fit(cx, cy, mbox.w, mbox.h, CANVAS)


def _apply_constraint_pass(graph: SceneGraph, boxes: dict[str, BoundingBox],
                           pinned: set[str], seed: int, honor_all: bool,
                           eff_p_ignore: float, bias_prior: dict[str, float],
                           has_layout: bool, ledger: list[InjectedError]):
    for idx, constraint in enumerate(graph.constraints):
        subject, obj = constraint.subject, constraint.object
        gap = uniform(*_REL_GAP_RANGE, seed, "relgap", idx)
        ignored = (
            not honor_all
            and not (subject in pinned and obj in pinned)
            and u01(seed, "rel", idx) < eff_p_ignore
        )
        if ignored:
            predicates = sorted(bias_prior)
            weights = [bias_prior[p] for p in predicates]
            drawn = predicates[
                pick_weighted(weights, seed, "relpick", idx)
            ]
            ledger.append(InjectedError(
                "rel_ignore", (subject, obj),
                {"expected": constraint.predicate, "sampled": drawn},
            ))
            span = CANVAS[1] if AXIS[drawn] == "x" else CANVAS[0]
            cross = uniform(24, span - 24, seed, "relcross", idx)
            if subject not in pinned:
                _reposition(boxes, subject, obj, drawn, gap, cross)
            else:
                _reposition(boxes, obj, subject, _inverse(drawn), gap, cross)
        elif not has_layout:
            # self-placement must realize the constraint it honors
            if subject not in pinned:
                _reposition(boxes, subject, obj, constraint.predicate, gap)
            elif obj not in pinned:
                _reposition(boxes, obj, subject, _inverse(constraint.predicate), gap)


def _inverse(predicate: str) -> str:
    return {"left_of": "right_of", "right_of": "left_of",
            "above": "below", "below": "above"}[predicate]


def faithful_boxes(input: GeneratorInput, vocab: Vocabulary) -> dict[str, BoundingBox]:
    """Error-free geometry: layout boxes, or honest self-placement."""
    if input.layout is not None:
        return dict(input.layout.boxes)
    boxes = _self_placed_boxes(input.graph, input.seed, vocab)
    _apply_constraint_pass(
        input.graph, boxes, set(), input.seed, honor_all=True,
        eff_p_ignore=0.0, bias_prior=DEFAULT_BIAS_PRIOR, has_layout=False,
        ledger=[],
    )
    return boxes


def faithful_render(input: GeneratorInput, vocab: Vocabulary) -> RenderedScene:
    """The scene a perfect generator would return for this input."""
    boxes = faithful_boxes(input, vocab)
    entities = tuple(
        RenderedEntity(i.instance_id, i.category, i.attributes,
                       boxes[i.instance_id])
        for i in input.graph.instances
    )
    return RenderedScene(entities)


def generate(input: GeneratorInput, cfg: ErrorModelConfig,
             vocab: Vocabulary) -> tuple[RenderedScene, GenerationTrace]:
    """Render the scene graph, injecting errors per the config.

    Channel order: constraint pass, keep/omit/duplicate, attribute
    swap/drop, duplicate materialization, centroid jitter. Effective
    probabilities are the base values scaled by the conditioning
    factors that apply; pinned instances and pinned attributes are
    exempt from every channel.
    """
    graph, seed = input.graph, input.seed
    has_layout = input.layout is not None
    has_attr_pins = bool(input.attribute_pins)
    pinned = input.pinned_instances

    def eff(p: float, channel: str) -> float:
        if channel in _LAYOUT_CHANNELS and has_layout:
            return p * cfg.cond_factors[channel]
        if channel in _ATTR_CHANNELS and has_attr_pins:
            return p * cfg.cond_factors[channel]
        return p

    ledger: list[InjectedError] = []
    base = faithful_boxes(input, vocab)
    boxes = dict(base)

    _apply_constraint_pass(
        graph, boxes, pinned, seed, honor_all=False,
        eff_p_ignore=eff(cfg.p_rel_ignore, "rel_ignore"),
        bias_prior=cfg.bias_prior, has_layout=has_layout, ledger=ledger,
    )

    kept: list[str] = []
    duplicated: list[str] = []
    p_omit, p_dup = eff(cfg.p_omit, "omit"), eff(cfg.p_dup, "dup")
    required = set(input.required_instances)
    for inst in graph.instances:
        iid = inst.instance_id
        if iid in pinned:
            kept.append(iid)
            continue
        # roster conditioning: a required instance cannot be omitted and
        # duplicates only at the attenuated rate
        if iid not in required and u01(seed, "omit", iid) < p_omit:
            ledger.append(InjectedError("omit", (iid,)))
            continue
        kept.append(iid)
        p_dup_here = p_dup * (cfg.cond_factors["dup_required"]
                              if iid in required else 1.0)
        if u01(seed, "dup", iid) < p_dup_here:
            duplicated.append(iid)

    attrs = {i.instance_id: set(i.attributes) for i in graph.instances}
    p_swap = eff(cfg.p_attr_swap, "attr_swap")
    p_drop = eff(cfg.p_attr_drop, "attr_drop")
    pins = input.attribute_pins
    for inst in graph.instances:
        iid = inst.instance_id
        if iid not in kept:
            continue
        for attr in sorted(inst.attributes):
            if (iid, attr) in pins or attr not in attrs[iid]:
                continue
            if u01(seed, "swap", iid, attr) >= p_swap:
                continue
            partners = [
                other for other in kept
                if other != iid and any(
                    (other, a) not in pins for a in attrs[other]
                )
            ]
            if not partners:
                continue
            partner = partners[pick(len(partners), seed, "swap-partner", iid, attr)]
            choices = sorted(a for a in attrs[partner] if (partner, a) not in pins)
            partner_attr = choices[pick(len(choices), seed, "swap-attr", iid, attr)]
            attrs[iid].discard(attr)
            attrs[iid].add(partner_attr)
            attrs[partner].discard(partner_attr)
            attrs[partner].add(attr)
            ledger.append(InjectedError(
                "attr_swap", (iid, partner),
                {"gave": attr, "took": partner_attr},
            ))
    for inst in graph.instances:
        iid = inst.instance_id
        if iid not in kept:
            continue
        for attr in sorted(attrs[iid]):
            if (iid, attr) in pins:
                continue
            if u01(seed, "drop", iid, attr) < p_drop:
                attrs[iid].discard(attr)
                ledger.append(InjectedError("attr_drop", (iid,), {"attribute": attr}))

    entities: list[RenderedEntity] = []
    instance_by_id = {i.instance_id: i for i in graph.instances}
    for iid in kept:
        inst = instance_by_id[iid]
        box = boxes[iid]
        if iid not in pinned and cfg.jitter_sigma > 0:
            sigma = cfg.jitter_sigma * (cfg.cond_factors["jitter"] if has_layout else 1.0)
            cx = box.cx + normal(sigma, seed, "jitter-x", iid)
            cy = box.cy + normal(sigma, seed, "jitter-y", iid)
            cx = min(max(cx, box.w / 2), CANVAS[0] - box.w / 2)
            cy = min(max(cy, box.h / 2), CANVAS[1] - box.h / 2)
            box = BoundingBox.from_center(cx, cy, box.w, box.h)
        entities.append(RenderedEntity(iid, inst.category,
                                       frozenset(attrs[iid]), box))
        boxes[iid] = box
    for iid in duplicated:
        inst = instance_by_id[iid]
        src = boxes[iid]
        cx = min(max(src.cx + uniform(-128, 128, seed, "dupbox-x", iid), src.w / 2),
                 CANVAS[0] - src.w / 2)
        cy = min(max(src.cy + uniform(-128, 128, seed, "dupbox-y", iid), src.h / 2),
                 CANVAS[1] - src.h / 2)
        dup_box = BoundingBox.from_center(cx, cy, src.w, src.h)
        dup_id = f"{iid}+dup"
        entities.append(RenderedEntity(dup_id, inst.category,
                                       frozenset(attrs[iid]), dup_box))
        ledger.append(InjectedError(
            "duplicate", (iid,),
            # exact coordinates: the ledger must rebuild the scene bit-for-bit
            {"entity_id": dup_id,
             "box": {"x": dup_box.x, "y": dup_box.y,
                     "w": dup_box.w, "h": dup_box.h}},
        ))

    overrides = {
        e.entity_id: e.box for e in entities
        if e.entity_id in base and _differs(e.box, base[e.entity_id])
    }
    return RenderedScene(tuple(entities)), GenerationTrace(tuple(ledger), overrides)


def _differs(a: BoundingBox, b: BoundingBox) -> bool:
    return (a.x, a.y, a.w, a.h) != (b.x, b.y, b.w, b.h)


def replay_trace(faithful: RenderedScene, trace: GenerationTrace) -> RenderedScene:
    """Rebuild a generated scene from the faithful render and its trace.

    Independent oracle for ledger completeness: applies box overrides,
    swaps, drops, omissions, then duplicates.
    """
    state = {e.entity_id: [e.category, set(e.attributes), e.box]
             for e in faithful.entities}
    order = [e.entity_id for e in faithful.entities]
    for eid, box in trace.box_overrides.items():
        state[eid][2] = box
    for err in trace.injected:
        if err.channel == "attr_swap":
            a, b = err.targets
            state[a][1].discard(err.details["gave"])
            state[a][1].add(err.details["took"])
            state[b][1].discard(err.details["took"])
            state[b][1].add(err.details["gave"])
        elif err.channel == "attr_drop":
            state[err.targets[0]][1].discard(err.details["attribute"])
    for err in trace.injected:
        if err.channel == "omit":
            state.pop(err.targets[0])
            order.remove(err.targets[0])
    for err in trace.injected:
        if err.channel == "duplicate":
            src = state[err.targets[0]]
            dup_id = err.details["entity_id"]
            state[dup_id] = [src[0], set(src[1]),
                             BoundingBox.from_dict(err.details["box"])]
            order.append(dup_id)
    entities = tuple(
        RenderedEntity(eid, state[eid][0], frozenset(state[eid][1]), state[eid][2])
        for eid in order
    )
    return RenderedScene(entities)


def edit_content(scene: RenderedScene, edit) -> RenderedScene:
    """Apply one directed mutation: remove / set_attribute / move / add."""
    payload = edit.payload if hasattr(edit, "payload") else dict(edit)
    action = payload.get("action")
    entities = list(scene.entities)

    def index_of(entity_id: str) -> int:
        for i, e in enumerate(entities):
            if e.entity_id == entity_id:
                return i
        raise InvalidTarget(f"no entity {entity_id!r}")

    if action == "remove":
        entities.pop(index_of(payload["entity_id"]))
    elif action == "set_attribute":
        i = index_of(payload["entity_id"])
        e = entities[i]
        entities[i] = RenderedEntity(e.entity_id, e.category,
                                     frozenset({payload["attribute"]}), e.box)
    elif action == "move":
        i = index_of(payload["entity_id"])
        e = entities[i]
        box = BoundingBox.from_dict(payload["box"])
        if not box.inside(scene.canvas):
            raise InvariantViolation(f"move puts {e.entity_id!r} outside canvas")
        entities[i] = RenderedEntity(e.entity_id, e.category, e.attributes, box)
    elif action == "add":
        box = BoundingBox.from_dict(payload["box"])
        entity = RenderedEntity(payload["entity_id"], payload["category"],
                                frozenset(payload.get("attributes", [])), box)
        if any(e.entity_id == entity.entity_id for e in entities):
            raise InvariantViolation(f"entity id {entity.entity_id!r} taken")
        entities.append(entity)
    else:
        raise InvalidTarget(f"unknown edit action {action!r}")
    return RenderedScene(tuple(entities), scene.canvas)


_SVG_COLORS = {
    "black": "#2b2b2b", "white": "#f5f5f5", "red": "#d64541",
    "yellow": "#f4d03f", "blue": "#3867d6", "green": "#26a65b",
    "brown": "#8e6a3f", "gray": "#95a5a6",
}


def render_svg(scene: RenderedScene) -> str:
    """Standalone SVG document: one labeled rectangle per entity,
    ordered by entity id."""
    w, h = scene.canvas
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="#fbfaf7" '
        f'stroke="#d0ccc4"/>',
    ]
    for e in sorted(scene.entities, key=lambda e: e.entity_id):
        fill = _SVG_COLORS.get(e.fill, "#95a5a6")
        b = e.box
        label = " ".join(sorted(e.attributes) + [e.category])
        parts.append(
            f'<rect x="{b.x:.1f}" y="{b.y:.1f}" width="{b.w:.1f}" '
            f'height="{b.h:.1f}" fill="{fill}" fill-opacity="0.75" '
            f'stroke="#444" rx="4"/>'
        )
        parts.append(
            f'<text x="{b.cx:.1f}" y="{b.cy:.1f}" font-size="13" '
            f'font-family="sans-serif" text-anchor="middle" fill="#222">'
            f'{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
