"""Scene graphs and constraint-based bounding-box layout.

A SceneSpec expands into per-instance nodes with pairwise spatial
constraints. The solver orders instances per axis (left/right
constraints act on x, above/below on y), places constrained instances
in separated bands with seeded jitter, scatters free instances, and
runs a bounded overlap-repair pass. Coordinates: origin top-left,
y grows downward, canvas 512x512 units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    InvalidTarget,
    InvariantViolation,
    TooManyInstances,
    UnsatisfiableConstraints,
)
from .prompts import AXIS, SceneSpec
from .seeding import uniform
from .updates import UpdateSignal
from .vocab import Vocabulary

CANVAS = (512, 512)
SOLVE_MARGIN = 8  # constraints are solved with this slack, evaluated at 0
MAX_SOLVER_INSTANCES = 16
IOU_LIMIT = 0.3
_MIN_CENTER_GAP = 24
_MIN_EDGE = 16  # centers stay this far from canvas edges
_REPAIR_ROUNDS = 64


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise InvariantViolation(f"degenerate box {self}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2

    @property
    def cy(self) -> float:
        return self.y + self.h / 2

    def inside(self, canvas: tuple[int, int]) -> bool:
        return (
            self.x >= 0 and self.y >= 0
            and self.x + self.w <= canvas[0]
            and self.y + self.h <= canvas[1]
        )

    def to_dict(self) -> dict:
        return {"x": round(self.x, 3), "y": round(self.y, 3),
                "w": round(self.w, 3), "h": round(self.h, 3)}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(d["x"], d["y"], d["w"], d["h"])

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2, cy - h / 2, w, h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter == 0:
        return 0.0
    return inter / (a.w * a.h + b.w * b.h - inter)


def eval_predicate(a: BoundingBox, b: BoundingBox, predicate: str,
                   margin: float = 0.0) -> bool:
    """Centroid-comparison truth of a spatial predicate."""
    if predicate == "left_of":
        return a.cx + margin < b.cx
    if predicate == "right_of":
        return a.cx > b.cx + margin
    if predicate == "above":
        return a.cy + margin < b.cy
    if predicate == "below":
        return a.cy > b.cy + margin
    raise ValueError(f"unknown predicate {predicate!r}")


@dataclass(frozen=True)
class Instance:
    instance_id: str
    group_id: int
    category: str
    attributes: frozenset[str]


@dataclass(frozen=True)
class InstanceConstraint:
    subject: str
    predicate: str
    object: str

    def to_dict(self) -> dict:
        return {"subject": self.subject, "predicate": self.predicate,
                "object": self.object}


@dataclass(frozen=True)
class SceneGraph:
    instances: tuple[Instance, ...]
    constraints: tuple[InstanceConstraint, ...]

    def instance(self, instance_id: str) -> Instance:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise InvalidTarget(f"no instance {instance_id!r}")

    def group_instances(self, group_id: int) -> list[Instance]:
        return [i for i in self.instances if i.group_id == group_id]


def expand_instances(spec: SceneSpec) -> SceneGraph:
    """Expand groups into instances (ids ``category#k`` in group order)
    and relations into pairwise instance constraints."""
    instances: list[Instance] = []
    per_category: dict[str, int] = {}
    for group in spec.groups:
        for _ in range(group.count):
            k = per_category.get(group.category, 0)
            per_category[group.category] = k + 1
            instances.append(Instance(
                f"{group.category}#{k}", group.group_id,
                group.category, group.attributes,
            ))
    constraints: list[InstanceConstraint] = []
    for rel in spec.relations:
        subjects = [i for i in instances if i.group_id == rel.subject]
        objects = [i for i in instances if i.group_id == rel.object]
        for s in subjects:
            for o in objects:
                constraints.append(
                    InstanceConstraint(s.instance_id, rel.predicate, o.instance_id)
                )
    return SceneGraph(tuple(instances), tuple(constraints))


@dataclass
class Layout:
    boxes: dict[str, BoundingBox]
    pinned: set[str] = field(default_factory=set)
    canvas: tuple[int, int] = CANVAS

    def validate(self, graph: SceneGraph | None = None):
        for iid, box in self.boxes.items():
            if not box.inside(self.canvas):
                raise InvariantViolation(f"{iid} box outside canvas: {box}")
        for iid in self.pinned:
            if iid not in self.boxes:
                raise InvalidTarget(f"pinned id {iid!r} has no box")
        if graph is not None:
            missing = [i.instance_id for i in graph.instances
                       if i.instance_id not in self.boxes]
            if missing:
                raise InvariantViolation(f"instances without boxes: {missing}")

    def copy(self) -> "Layout":
        return Layout(dict(self.boxes), set(self.pinned), self.canvas)

    def to_records(self, graph: SceneGraph) -> list[dict]:
        records = []
        for inst in graph.instances:
            box = self.boxes[inst.instance_id]
            records.append({
                "instance_id": inst.instance_id,
                "category": inst.category,
                **box.to_dict(),
                "pinned": inst.instance_id in self.pinned,
            })
        return records


def _axis_edges(graph: SceneGraph, axis: str) -> list[tuple[str, str]]:
    """Directed precedence edges: (a, b) means center(a) must precede
    center(b) on the axis."""
    edges = []
    for c in graph.constraints:
        if AXIS[c.predicate] != axis:
            continue
        if c.predicate in ("left_of", "above"):
            edges.append((c.subject, c.object))
        else:
            edges.append((c.object, c.subject))
    return edges


def find_axis_cycle(graph: SceneGraph, axis: str) -> list[str] | None:
    """Depth-first cycle search over one axis's precedence edges."""
    adjacency: dict[str, list[str]] = {}
    for a, b in _axis_edges(graph, axis):
        adjacency.setdefault(a, []).append(b)
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(node: str) -> list[str] | None:
        state[node] = 1
        stack.append(node)
        for nxt in adjacency.get(node, []):
            if state.get(nxt) == 1:
                return stack[stack.index(nxt):] + [nxt]
            if state.get(nxt, 0) == 0:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        state[node] = 2
        return None

    for node in sorted(adjacency):
        if state.get(node, 0) == 0:
            found = visit(node)
            if found:
                return found
    return None


def _topo_depth(nodes: list[str], edges: list[tuple[str, str]]) -> dict[str, int]:
    """Longest-path layer index per node (constrained nodes only)."""
    preds: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        preds[b].append(a)
    depth: dict[str, int] = {}

    def resolve(node: str) -> int:
        if node in depth:
            return depth[node]
        depth[node] = 0  # placeholder; graph is acyclic here
        depth[node] = max((resolve(p) + 1 for p in preds[node]), default=0)
        return depth[node]

    for n in nodes:
        resolve(n)
    return depth


def _place_axis(graph: SceneGraph, axis: str, span: int, seed: int,
                fixed_centers: dict[str, float]) -> dict[str, float]:
    edges = _axis_edges(graph, axis)
    constrained = sorted({n for e in edges for n in e})
    centers: dict[str, float] = dict(fixed_centers)

    if constrained:
        movable = [n for n in constrained if n not in fixed_centers]
        depth = _topo_depth(constrained, edges)
        n_layers = max(depth.values()) + 1
        band = span / n_layers
        for node in movable:
            base = (depth[node] + 0.5) * band
            slack = max(0.0, band / 2 - SOLVE_MARGIN - 4)
            centers[node] = base + uniform(-slack, slack, seed, "band", axis, node)

        # settle ordering violations; fixed centers never move
        order = sorted(constrained, key=lambda n: (depth[n], n))
        for _ in range(len(constrained) + 2):
            dirty = False
            for a, b in edges:
                if centers[a] + _MIN_CENTER_GAP <= centers[b]:
                    continue
                if b not in fixed_centers:
                    centers[b] = centers[a] + _MIN_CENTER_GAP
                elif a not in fixed_centers:
                    centers[a] = centers[b] - _MIN_CENTER_GAP
                else:
                    raise UnsatisfiableConstraints(axis, [a, b])
                dirty = True
            if not dirty:
                break
        del order
        for node in movable:
            centers[node] = min(max(centers[node], _MIN_EDGE), span - _MIN_EDGE)
        for a, b in edges:
            if centers[a] + SOLVE_MARGIN >= centers[b]:
                raise UnsatisfiableConstraints(axis, [a, b])

    for inst in graph.instances:
        iid = inst.instance_id
        if iid not in centers:
            centers[iid] = uniform(_MIN_EDGE, span - _MIN_EDGE,
                                   seed, "free", axis, iid)
    return centers


def _shrink_to_fit(cx: float, cy: float, w: float, h: float,
                   canvas: tuple[int, int]) -> BoundingBox:
    """Keep the center exact; reduce extent if the canvas edge demands it."""
    w = min(w, 2 * cx, 2 * (canvas[0] - cx))
    h = min(h, 2 * cy, 2 * (canvas[1] - cy))
    return BoundingBox.from_center(cx, cy, max(w, 8.0), max(h, 8.0))


def solve_layout(graph: SceneGraph, seed: int, vocab: Vocabulary,
                 fixed: dict[str, BoundingBox] | None = None,
                 pinned: set[str] | None = None) -> Layout:
    """Deterministic constraint-satisfying layout.

    ``fixed`` boxes (pins carried across re-solves) are honored exactly;
    everything else is placed to satisfy every constraint with margin 8
    and pairwise IoU at most 0.3.
    """
    if len(graph.instances) > MAX_SOLVER_INSTANCES:
        raise TooManyInstances(
            f"{len(graph.instances)} instances exceed {MAX_SOLVER_INSTANCES}"
        )
    for axis in ("x", "y"):
        cycle = find_axis_cycle(graph, axis)
        if cycle:
            raise UnsatisfiableConstraints(axis, cycle)

    fixed = fixed or {}
    canvas = CANVAS
    xs = _place_axis(graph, "x", canvas[0], seed,
                     {i: b.cx for i, b in fixed.items()})
    ys = _place_axis(graph, "y", canvas[1], seed,
                     {i: b.cy for i, b in fixed.items()})

    boxes: dict[str, BoundingBox] = {}
    for inst in graph.instances:
        iid = inst.instance_id
        if iid in fixed:
            boxes[iid] = fixed[iid]
            continue
        nominal_w, nominal_h = vocab.nominal_size(inst.category)
        w = nominal_w * (1 + uniform(-0.2, 0.2, seed, "size-w", iid))
        h = nominal_h * (1 + uniform(-0.2, 0.2, seed, "size-h", iid))
        boxes[iid] = _shrink_to_fit(xs[iid], ys[iid], w, h, canvas)

    _repair_overlaps(graph, boxes, set(fixed), seed, canvas)

    layout = Layout(boxes, set(pinned or fixed.keys()), canvas)
    layout.validate(graph)
    return layout


def _free_axes(graph: SceneGraph, iid: str) -> set[str]:
    taken = set()
    for c in graph.constraints:
        if iid in (c.subject, c.object):
            taken.add(AXIS[c.predicate])
    return {"x", "y"} - taken


def _repair_overlaps(graph: SceneGraph, boxes: dict[str, BoundingBox],
                     immovable: set[str], seed: int, canvas: tuple[int, int]):
    ids = [i.instance_id for i in graph.instances]
    for round_no in range(_REPAIR_ROUNDS):
        worst = None
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                overlap = iou(boxes[a], boxes[b])
                if overlap > IOU_LIMIT and (worst is None or overlap > worst[0]):
                    worst = (overlap, a, b)
        if worst is None:
            return
        _, a, b = worst
        mover = next(
            (m for m in (b, a) if m not in immovable and _free_axes(graph, m)),
            None,
        )
        if mover is None:
            break
        box = boxes[mover]
        cx, cy = box.cx, box.cy
        for axis in sorted(_free_axes(graph, mover)):
            span = canvas[0] if axis == "x" else canvas[1]
            coord = uniform(_MIN_EDGE, span - _MIN_EDGE,
                            seed, "repair", round_no, mover, axis)
            if axis == "x":
                cx = coord
            else:
                cy = coord
        boxes[mover] = _shrink_to_fit(cx, cy, box.w, box.h, canvas)
    _grid_fallback(graph, boxes, immovable, canvas)


def _grid_fallback(graph: SceneGraph, boxes: dict[str, BoundingBox],
                   immovable: set[str], canvas: tuple[int, int]):
    """Deterministic disjoint placement preserving per-axis center order."""
    ids = [i.instance_id for i in graph.instances if i.instance_id not in immovable]
    if not ids:
        return
    all_ids = [i.instance_id for i in graph.instances]
    n = len(all_ids)
    x_rank = {iid: r for r, iid in enumerate(
        sorted(all_ids, key=lambda i: (boxes[i].cx, i)))}
    y_rank = {iid: r for r, iid in enumerate(
        sorted(all_ids, key=lambda i: (boxes[i].cy, i)))}
    cell_w, cell_h = canvas[0] / n, canvas[1] / n
    for iid in ids:
        cx = (x_rank[iid] + 0.5) * cell_w
        cy = (y_rank[iid] + 0.5) * cell_h
        w = min(boxes[iid].w, cell_w - 2)
        h = min(boxes[iid].h, cell_h - 2)
        boxes[iid] = _shrink_to_fit(cx, cy, max(w, 8.0), max(h, 8.0), canvas)


def apply_layout_update(layout: Layout, update: UpdateSignal,
                        graph: SceneGraph | None = None) -> Layout:
    """Apply a layout-targeted signal (pin / move / instance roster),
    re-validating the result."""
    out = layout.copy()
    if update.kind == "layout_pin":
        iid = update.payload["instance_id"]
        if iid not in out.boxes:
            raise InvalidTarget(f"no instance {iid!r} in layout")
        if "box" in update.payload:
            box = BoundingBox.from_dict(update.payload["box"])
            if not box.inside(out.canvas):
                raise InvariantViolation(f"box for {iid!r} outside canvas")
            out.boxes[iid] = box
        out.pinned.add(iid)
    else:
        raise InvalidTarget(f"not a layout update: {update.kind}")
    out.validate(graph)
    return out
