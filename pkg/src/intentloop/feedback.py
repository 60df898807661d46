"""Knowledge-based feedback: simulated detection plus rule checkers.

A configurable detector reads the rendered scene (imperfectly: misses,
spurious detections, attribute misreads). Checkers then compare what
was detected against the parsed intention and emit typed feedback
items: numeracy (count mismatches), attribute (missing or wrong
attributes), spatial (violated relations). The checker registry is the
extension point for further feedback families.

Detector noise exists only on this path; benchmark evaluation reads
scene entities directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .generator import RenderedScene
from .layout import AXIS, BoundingBox, SceneGraph, eval_predicate
from .prompts import SceneSpec
from .seeding import pick, poisson, u01, uniform
from .updates import UpdateSignal, add_instance_constraint, attribute_pin, layout_pin
from .vocab import Vocabulary

KIND_ORDER = ("numeracy", "attribute", "spatial", "fidelity")


@dataclass(frozen=True)
class DetectorConfig:
    p_miss: float = 0.0
    p_false: float = 0.0  # Poisson mean of spurious detections per scene
    attr_confusion: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_miss <= 1.0:
            raise ValueError(f"p_miss={self.p_miss} outside [0, 1]")
        if not 0.0 <= self.attr_confusion <= 1.0:
            raise ValueError(f"attr_confusion={self.attr_confusion} outside [0, 1]")
        if self.p_false < 0:
            raise ValueError("p_false must be non-negative")

    def to_dict(self) -> dict:
        return {"p_miss": self.p_miss, "p_false": self.p_false,
                "attr_confusion": self.attr_confusion}

    def with_seed(self, seed: int) -> "DetectorConfig":
        return DetectorConfig(self.p_miss, self.p_false, self.attr_confusion, seed)


@dataclass(frozen=True)
class Detection:
    category: str
    attributes: frozenset[str]
    box: BoundingBox
    source_entity: str | None = None  # oracle bookkeeping; checkers never read it


@dataclass(frozen=True)
class FeedbackItem:
    item_id: str
    kind: str
    target: dict
    expected: object
    observed: object
    severity: str = "error"
    suggested_update: UpdateSignal | None = None

    def __post_init__(self):
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown feedback kind {self.kind!r}")
        if self.severity not in ("error", "warning"):
            raise ValueError(f"unknown severity {self.severity!r}")
        if self.kind != "fidelity" and self.expected == self.observed:
            raise ValueError("feedback item without a discrepancy")

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id, "kind": self.kind, "target": self.target,
            "expected": self.expected, "observed": self.observed,
            "severity": self.severity,
            "suggested_update": (
                self.suggested_update.to_dict() if self.suggested_update else None
            ),
        }


@dataclass(frozen=True)
class FeedbackReport:
    items: tuple[FeedbackItem, ...]

    @property
    def satisfied(self) -> bool:
        return not any(i.severity == "error" for i in self.items)

    def errors(self) -> list[FeedbackItem]:
        return [i for i in self.items if i.severity == "error"]

    def item(self, item_id: str) -> FeedbackItem | None:
        for i in self.items:
            if i.item_id == item_id:
                return i
        return None

    def to_dict(self) -> dict:
        return {"items": [i.to_dict() for i in self.items],
                "satisfied": self.satisfied}


def detect(scene: RenderedScene, cfg: DetectorConfig,
           vocab: Vocabulary) -> list[Detection]:
    """Simulated detector pass, deterministic for the config seed."""
    detections: list[Detection] = []
    others = list(vocab.attributes)
    for entity in sorted(scene.entities, key=lambda e: e.entity_id):
        eid = entity.entity_id
        if u01(cfg.seed, "miss", eid) < cfg.p_miss:
            continue
        attrs = set()
        for attr in sorted(entity.attributes):
            if u01(cfg.seed, "confuse", eid, attr) < cfg.attr_confusion:
                pool = [a for a in others if a != attr]
                attrs.add(pool[pick(len(pool), cfg.seed, "confuse-pick", eid, attr)])
            else:
                attrs.add(attr)
        detections.append(Detection(entity.category, frozenset(attrs),
                                    entity.box, eid))
    n_spurious = poisson(cfg.p_false, cfg.seed)
    w, h = scene.canvas
    for k in range(n_spurious):
        category = vocab.categories[
            pick(len(vocab.categories), cfg.seed, "spurious-cat", k)]
        bw = uniform(40, 160, cfg.seed, "spurious-w", k)
        bh = uniform(40, 160, cfg.seed, "spurious-h", k)
        cx = uniform(bw / 2, w - bw / 2, cfg.seed, "spurious-x", k)
        cy = uniform(bh / 2, h - bh / 2, cfg.seed, "spurious-y", k)
        detections.append(Detection(
            category, frozenset(), BoundingBox.from_center(cx, cy, bw, bh), None
        ))
    return detections


@dataclass(frozen=True)
class Assignment:
    by_group: dict[int, tuple[Detection, ...]]
    unassigned: tuple[Detection, ...]


def _position_key(d: Detection):
    return (d.box.cx, d.box.cy, d.category, d.source_entity or "")


def match_detections(spec: SceneSpec, graph: SceneGraph,
                     detections: list[Detection]) -> Assignment:
    """Assign detections to groups by exact category, position-sorted.

    Each group takes up to its count; a category's leftovers land on its
    last group (surfacing the surplus there). Detections matching no
    group are unassigned.
    """
    by_category: dict[str, list[Detection]] = {}
    for det in sorted(detections, key=_position_key):
        by_category.setdefault(det.category, []).append(det)
    by_group: dict[int, list[Detection]] = {g.group_id: [] for g in spec.groups}
    for category, dets in by_category.items():
        groups = [g for g in spec.groups if g.category == category]
        if not groups:
            continue
        cursor = 0
        for g in groups:
            take = dets[cursor:cursor + g.count]
            by_group[g.group_id].extend(take)
            cursor += len(take)
        by_group[groups[-1].group_id].extend(dets[cursor:])
    assigned_ids = {id(d) for dets in by_group.values() for d in dets}
    unassigned = tuple(
        d for d in sorted(detections, key=_position_key)
        if id(d) not in assigned_ids
    )
    return Assignment({g: tuple(d) for g, d in by_group.items()}, unassigned)


def check_numeracy(spec: SceneSpec, graph: SceneGraph,
                   assignment: Assignment) -> list[FeedbackItem]:
    """One error item per group whose detected count is off."""
    items = []
    for group in spec.groups:
        observed = len(assignment.by_group.get(group.group_id, ()))
        if observed == group.count:
            continue
        members = graph.group_instances(group.group_id)
        if observed > group.count:
            update = layout_pin(members[0].instance_id)
        else:
            update = add_instance_constraint(group.group_id,
                                             group.count - observed)
        items.append(FeedbackItem(
            item_id=f"numeracy:g{group.group_id}",
            kind="numeracy",
            target={"group_id": group.group_id, "category": group.category},
            expected=group.count,
            observed=observed,
            suggested_update=update,
        ))
    return items


def check_attributes(spec: SceneSpec, graph: SceneGraph,
                     assignment: Assignment) -> list[FeedbackItem]:
    """Every detection assigned to a group must carry all its attributes."""
    items = []
    for group in spec.groups:
        if not group.attributes:
            continue
        members = graph.group_instances(group.group_id)
        for j, det in enumerate(assignment.by_group.get(group.group_id, ())):
            foreign = sorted(det.attributes - group.attributes)
            for attr in sorted(group.attributes):
                if attr in det.attributes:
                    continue
                observed = "+".join(foreign) if foreign else "absent"
                instance = members[min(j, len(members) - 1)]
                items.append(FeedbackItem(
                    item_id=f"attribute:g{group.group_id}:d{j}:{attr}",
                    kind="attribute",
                    target={"group_id": group.group_id,
                            "category": group.category,
                            "instance_id": instance.instance_id,
                            "detection_index": j},
                    expected=attr,
                    observed=observed,
                    suggested_update=attribute_pin(instance.instance_id, attr),
                ))
    return items


def _observed_predicate(a: BoundingBox, b: BoundingBox, expected: str) -> str:
    if AXIS[expected] == "x":
        if a.cx < b.cx:
            return "left_of"
        if a.cx > b.cx:
            return "right_of"
    else:
        if a.cy < b.cy:
            return "above"
        if a.cy > b.cy:
            return "below"
    return "unordered"


def check_spatial(spec: SceneSpec, graph: SceneGraph, assignment: Assignment,
                  margin: float = 0.0) -> list[FeedbackItem]:
    """Evaluate every expanded constraint over position-paired detections.

    Undetected endpoints degrade to a warning; the numeracy checker owns
    that root cause.
    """
    items = []
    instance_index: dict[str, tuple[int, int]] = {}
    for group in spec.groups:
        for k, inst in enumerate(graph.group_instances(group.group_id)):
            instance_index[inst.instance_id] = (group.group_id, k)
    for c_idx, constraint in enumerate(graph.constraints):
        s_group, s_k = instance_index[constraint.subject]
        o_group, o_k = instance_index[constraint.object]
        s_dets = assignment.by_group.get(s_group, ())
        o_dets = assignment.by_group.get(o_group, ())
        target = {"subject": constraint.subject,
                  "predicate": constraint.predicate,
                  "object": constraint.object}
        if s_k >= len(s_dets) or o_k >= len(o_dets):
            items.append(FeedbackItem(
                item_id=f"spatial:c{c_idx}",
                kind="spatial",
                target=target,
                expected=constraint.predicate,
                observed="undetected",
                severity="warning",
                suggested_update=None,
            ))
            continue
        s_box, o_box = s_dets[s_k].box, o_dets[o_k].box
        if eval_predicate(s_box, o_box, constraint.predicate, margin):
            continue
        items.append(FeedbackItem(
            item_id=f"spatial:c{c_idx}",
            kind="spatial",
            target=target,
            expected=constraint.predicate,
            observed=_observed_predicate(s_box, o_box, constraint.predicate),
            suggested_update=layout_pin(constraint.subject),
        ))
    return items


def default_registry() -> dict[str, object]:
    return {
        "numeracy": check_numeracy,
        "attribute": check_attributes,
        "spatial": lambda spec, graph, assignment: check_spatial(
            spec, graph, assignment, margin=0.0
        ),
    }


def compose_feedback(spec: SceneSpec, graph: SceneGraph, scene: RenderedScene,
                     detector: DetectorConfig, vocab: Vocabulary,
                     registry: dict | None = None) -> FeedbackReport:
    """Run detect, match, and every registered checker; items come back
    in kind order then id order."""
    if registry is None:
        registry = default_registry()
    detections = detect(scene, detector, vocab)
    assignment = match_detections(spec, graph, detections)
    items: list[FeedbackItem] = []
    for kind in KIND_ORDER:
        checker = registry.get(kind)
        if checker is None:
            continue
        items.extend(checker(spec, graph, assignment))
    items.sort(key=lambda i: (KIND_ORDER.index(i.kind), i.item_id))
    return FeedbackReport(tuple(items))
