"""Update signals: the typed instructions a feedback round turns into.

Each signal carries exactly one variant. ``origin`` records whether a
pre-defined rule or a human produced it; human signals are applied
first within an iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

KINDS = (
    "prompt_edit",
    "layout_pin",
    "add_instance_constraint",
    "attribute_pin",
    "content_edit",
    "reroll",
)


@dataclass(frozen=True)
class UpdateSignal:
    kind: str
    origin: str = "rule"  # "rule" | "human"
    payload: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown update kind {self.kind!r}")
        if self.origin not in ("rule", "human"):
            raise ValueError(f"unknown origin {self.origin!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "origin": self.origin, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict) -> "UpdateSignal":
        return cls(d["kind"], d.get("origin", "rule"), d.get("payload", {}))


def prompt_edit(additions: dict, origin: str = "human") -> UpdateSignal:
    """Spec additions: {"add_relations": [[subj_cat, pred, obj_cat], ...],
    "add_attributes": [[category, attribute], ...]}."""
    return UpdateSignal("prompt_edit", origin, dict(additions))


def layout_pin(instance_id: str, box: dict | None = None,
               origin: str = "rule") -> UpdateSignal:
    """Pin an instance; ``box`` (x/y/w/h dict) moves it first, otherwise
    the current layout box is frozen."""
    payload: dict[str, Any] = {"instance_id": instance_id}
    if box is not None:
        payload["box"] = box
    return UpdateSignal("layout_pin", origin, payload)


def add_instance_constraint(group_id: int, delta: int,
                            origin: str = "rule") -> UpdateSignal:
    """Require a group's full instance roster in the next generation."""
    return UpdateSignal(
        "add_instance_constraint", origin, {"group_id": group_id, "delta": delta}
    )


def attribute_pin(instance_id: str, attribute: str,
                  origin: str = "rule") -> UpdateSignal:
    return UpdateSignal(
        "attribute_pin", origin, {"instance_id": instance_id, "attribute": attribute}
    )


def content_edit(action: str, origin: str = "human", **kwargs) -> UpdateSignal:
    """Direct scene mutation: action in {remove, set_attribute, move, add}."""
    return UpdateSignal("content_edit", origin, {"action": action, **kwargs})


def reroll(origin: str = "rule") -> UpdateSignal:
    return UpdateSignal("reroll", origin)
