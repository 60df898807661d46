"""Perfect-reader scene evaluation against the parsed intention.

Unlike the feedback path, evaluation reads scene entities directly, so
scores are deterministic. A prompt counts as matched only when every
dimension passes: per-category counts, attribute coverage, and all
expanded spatial constraints at margin 0.
"""

from __future__ import annotations

from collections import Counter

from .generator import RenderedScene
from .layout import SceneGraph, eval_predicate
from .prompts import SceneSpec


def evaluate_prompt(spec: SceneSpec, graph: SceneGraph,
                    scene: RenderedScene) -> dict:
    """Pass/fail per dimension plus the conjunction under ``matches``."""
    expected_counts = Counter()
    for group in spec.groups:
        expected_counts[group.category] += group.count
    observed_counts = Counter(e.category for e in scene.entities)
    numeracy = expected_counts == observed_counts

    # entities pair to groups by category in position order
    by_category: dict[str, list] = {}
    for entity in sorted(scene.entities,
                         key=lambda e: (e.box.cx, e.box.cy, e.entity_id)):
        by_category.setdefault(entity.category, []).append(entity)
    attribute = True
    for group in spec.groups:
        if not group.attributes:
            continue
        pool = by_category.get(group.category, [])
        same = [g for g in spec.groups if g.category == group.category]
        if len(same) == 1:
            assigned = pool
        else:
            offset = sum(g.count for g in same[:same.index(group)])
            assigned = pool[offset:offset + group.count]
        if not assigned:
            attribute = False
            continue
        for entity in assigned:
            if not group.attributes <= entity.attributes:
                attribute = False

    entity_ids = {e.entity_id: e for e in scene.entities}
    spatial = True
    for constraint in graph.constraints:
        subject = entity_ids.get(constraint.subject)
        obj = entity_ids.get(constraint.object)
        if subject is None or obj is None:
            spatial = False
            continue
        if not eval_predicate(subject.box, obj.box, constraint.predicate, 0.0):
            spatial = False

    return {
        "numeracy": numeracy,
        "attribute": attribute,
        "spatial": spatial,
        "matches": numeracy and attribute and spatial,
    }
