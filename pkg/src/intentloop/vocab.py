"""Vocabulary of object categories, attributes, plurals, and nominal sizes."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

DEFAULT_SIZE = (100, 100)


@dataclass(frozen=True)
class Vocabulary:
    categories: tuple[str, ...]
    attributes: tuple[str, ...]
    plurals: dict[str, str] = field(default_factory=dict)
    sizes: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        # fill default "+s" plurals for categories without an exception
        plurals = dict(self.plurals)
        for cat in self.categories:
            plurals.setdefault(cat, cat + "s")
        object.__setattr__(self, "plurals", plurals)
        object.__setattr__(
            self, "_singulars", {p: s for s, p in plurals.items()}
        )

    def is_category(self, token: str) -> bool:
        return token in self.categories

    def is_attribute(self, token: str) -> bool:
        return token in self.attributes

    def plural(self, category: str) -> str:
        return self.plurals[category]

    def singular(self, token: str) -> str | None:
        """Map a singular or plural surface form to its category, or None."""
        if token in self.categories:
            return token
        return self._singulars.get(token)

    def nominal_size(self, category: str) -> tuple[int, int]:
        return self.sizes.get(category, DEFAULT_SIZE)


def parse_vocabulary(text: str) -> Vocabulary:
    categories: list[str] = []
    attributes: list[str] = []
    plurals: dict[str, str] = {}
    sizes: dict[str, tuple[int, int]] = {}
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        if section == "categories":
            categories.append(line)
        elif section == "attributes":
            attributes.append(line)
        elif section == "plural-exceptions":
            singular, plural = line.split()
            plurals[singular] = plural
        elif section == "sizes":
            cat, w, h = line.split()
            sizes[cat] = (int(w), int(h))
    return Vocabulary(tuple(categories), tuple(attributes), plurals, sizes)


def load_vocabulary(path=None) -> Vocabulary:
    """Load a vocabulary file; defaults to the packaged one."""
    if path is None:
        text = (
            resources.files("intentloop").joinpath("data/vocabulary.txt").read_text()
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_vocabulary(text)
