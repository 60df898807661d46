"""Restricted-grammar prompt parsing and canonical text generation.

The surface language covers prompts like::

    a black laptop and a yellow chair
    three apples
    a cup under a chair
    two dogs and a cat where the cat above the first dog

Grammar (surface synonyms normalized before parsing)::

    prompt   := phrase { "and" phrase } [ relpred phrase ] [ "where" clauses ]
    phrase   := article [count] {attribute} category
    clauses  := clause { "and" clause }
    clause   := ref relpred ref
    ref      := "the" [ordinal] category
    relpred  := "left_of" | "right_of" | "above" | "below"
    article  := "a" | "an" | "the" | nothing
    count    := digit 1-9 or number word one-nine

The bare ``relpred phrase`` form relates the last listed phrase to a new
trailing one ("a cup under a chair").  ``where``-clauses reference
already-listed groups by category (with an ordinal when the category
repeats), which lets any valid spec round-trip through text.  Surface
synonyms: "to the left of"/"to the right of", "over"/"on top of" for
above, "under"/"beneath" for below.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

from .errors import (
    EmptyPrompt,
    GrammarError,
    RuleConflict,
    UnknownAttribute,
    UnknownCategory,
)
from .vocab import Vocabulary

PREDICATES = ("left_of", "right_of", "above", "below")
MAX_PROMPT_CHARS = 1024
MAX_COUNT = 9

INVERSE = {
    "left_of": "right_of",
    "right_of": "left_of",
    "above": "below",
    "below": "above",
}
AXIS = {"left_of": "x", "right_of": "x", "above": "y", "below": "y"}

NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9,
}
WORD_FOR_NUMBER = {v: k for k, v in NUMBER_WORDS.items()}
ORDINALS = {
    "first": 0, "second": 1, "third": 2, "fourth": 3, "fifth": 4,
    "sixth": 5, "seventh": 6, "eighth": 7, "ninth": 8,
}
ORDINAL_FOR_INDEX = {v: k for k, v in ORDINALS.items()}

ARTICLES = ("a", "an", "the")

# longest-match-first synonym spans, applied to the token stream
_SYNONYM_SPANS = [
    (("to", "the", "left", "of"), "left_of"),
    (("to", "the", "right", "of"), "right_of"),
    (("on", "top", "of"), "above"),
    (("over",), "above"),
    (("under",), "below"),
    (("beneath",), "below"),
]

_STRIP = str.maketrans("", "", string.punctuation.replace("_", ""))


@dataclass(frozen=True)
class ObjectGroup:
    """One noun phrase: a category with a count and attribute set."""

    group_id: int
    category: str
    count: int = 1
    attributes: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not 1 <= self.count <= MAX_COUNT:
            raise ValueError(f"count {self.count} outside [1, {MAX_COUNT}]")
        object.__setattr__(self, "attributes", frozenset(self.attributes))

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "category": self.category,
            "count": self.count,
            "attributes": sorted(self.attributes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectGroup":
        return cls(d["group_id"], d["category"], d["count"],
                   frozenset(d["attributes"]))


@dataclass(frozen=True)
class Relation:
    """Directed spatial relation between two groups."""

    subject: int
    predicate: str
    object: int

    def __post_init__(self):
        if self.predicate not in PREDICATES:
            raise ValueError(f"unknown predicate {self.predicate!r}")
        if self.subject == self.object:
            raise ValueError("relation relates a group to itself")

    def normalized(self) -> "Relation":
        """Flip so subject < object, inverting the predicate."""
        if self.subject <= self.object:
            return self
        return Relation(self.object, INVERSE[self.predicate], self.subject)

    def to_dict(self) -> dict:
        return {"subject": self.subject, "predicate": self.predicate,
                "object": self.object}

    @classmethod
    def from_dict(cls, d: dict) -> "Relation":
        return cls(d["subject"], d["predicate"], d["object"])


@dataclass(frozen=True)
class SceneSpec:
    """Parsed user intention: object groups plus spatial relations."""

    groups: tuple[ObjectGroup, ...]
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "relations", tuple(self.relations))
        self.validate()

    def validate(self):
        if not self.groups:
            raise ValueError("spec needs at least one group")
        ids = [g.group_id for g in self.groups]
        if ids != list(range(len(ids))):
            raise ValueError("group ids must be 0-based and contiguous")
        for rel in self.relations:
            if rel.subject not in ids or rel.object not in ids:
                raise ValueError(f"relation references missing group: {rel}")

    def group(self, group_id: int) -> ObjectGroup:
        return self.groups[group_id]

    def to_dict(self) -> dict:
        return {
            "groups": [g.to_dict() for g in self.groups],
            "relations": [r.to_dict() for r in self.relations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            tuple(ObjectGroup.from_dict(g) for g in d["groups"]),
            tuple(Relation.from_dict(r) for r in d["relations"]),
        )


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens with punctuation stripped and number words
    mapped to digits."""
    if len(text) > MAX_PROMPT_CHARS:
        raise ValueError(f"prompt exceeds {MAX_PROMPT_CHARS} characters")
    tokens = []
    for word in text.lower().split():
        word = word.translate(_STRIP)
        if not word:
            continue
        if word in NUMBER_WORDS:
            word = str(NUMBER_WORDS[word])
        tokens.append(word)
    if not tokens:
        raise EmptyPrompt("prompt is empty")
    return tokens


def _normalize_synonyms(tokens: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(tokens):
        for span, canon in _SYNONYM_SPANS:
            if tuple(tokens[i:i + len(span)]) == span:
                out.append(canon)
                i += len(span)
                break
        else:
            out.append(tokens[i])
            i += 1
    return out


class _Parser:
    def __init__(self, tokens: list[str], vocab: Vocabulary):
        self.tokens = tokens
        self.vocab = vocab
        self.pos = 0
        self.groups: list[ObjectGroup] = []
        self.relations: list[Relation] = []

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, offset: int = 0):
        raise GrammarError(message, self.pos + offset)

    def parse(self) -> SceneSpec:
        self.parse_phrase()
        while self.peek() == "and":
            self.take()
            self.parse_phrase()
        if self.peek() in PREDICATES:
            pred = self.take()
            subject = self.groups[-1].group_id
            self.parse_phrase()
            self.relations.append(Relation(subject, pred, self.groups[-1].group_id))
        if self.peek() == "where":
            self.take()
            self.parse_clause()
            while self.peek() == "and":
                self.take()
                self.parse_clause()
        if self.peek() is not None:
            self.fail(f"unexpected token {self.peek()!r}")
        return SceneSpec(tuple(self.groups), tuple(self.relations))

    def parse_phrase(self):
        if self.peek() in ARTICLES:
            self.take()
        count = None
        tok = self.peek()
        if tok is not None and tok.isdigit():
            count = int(self.take())
            if not 1 <= count <= MAX_COUNT:
                self.fail(f"count {count} outside [1, {MAX_COUNT}]", -1)
        attrs: list[str] = []
        while True:
            tok = self.peek()
            if tok is None:
                self.fail("expected a category")
            if self.vocab.is_attribute(tok):
                if tok in attrs:
                    self.fail(f"duplicate attribute {tok!r}")
                attrs.append(self.take())
                continue
            category = self.vocab.singular(tok)
            if category is None:
                # an unknown word followed by more phrase material reads as
                # an attribute; otherwise as the missing category
                nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
                if nxt is not None and (
                    self.vocab.is_attribute(nxt) or self.vocab.singular(nxt)
                ):
                    raise UnknownAttribute(f"unknown attribute {tok!r}", self.pos)
                raise UnknownCategory(f"unknown category {tok!r}", self.pos)
            singular_surface = tok == category
            plural_surface = tok == self.vocab.plural(category)
            self.take()
            if count is not None and count > 1:
                if not plural_surface:
                    self.fail(f"count {count} requires the plural form", -1)
            elif not singular_surface:
                self.fail(f"plural {tok!r} requires a count of 2 or more", -1)
            break
        self.groups.append(
            ObjectGroup(len(self.groups), category, count or 1, frozenset(attrs))
        )

    def parse_clause(self):
        subject = self.parse_ref()
        tok = self.peek()
        if tok not in PREDICATES:
            self.fail(f"expected a relation, got {tok!r}")
        pred = self.take()
        obj = self.parse_ref()
        self.relations.append(Relation(subject, pred, obj))

    def parse_ref(self) -> int:
        if self.peek() != "the":
            self.fail(f"expected a reference, got {self.peek()!r}")
        self.take()
        ordinal = None
        tok = self.peek()
        if tok in ORDINALS:
            ordinal = ORDINALS[self.take()]
        tok = self.peek()
        category = self.vocab.singular(tok) if tok else None
        if category is None:
            raise UnknownCategory(f"unknown category {tok!r}", self.pos)
        self.take()
        matches = [g for g in self.groups if g.category == category]
        if not matches:
            self.fail(f"reference to unlisted category {category!r}", -1)
        if ordinal is None:
            if len(matches) > 1:
                self.fail(f"ambiguous reference to {category!r}", -1)
            return matches[0].group_id
        if ordinal >= len(matches):
            self.fail(f"no {ORDINAL_FOR_INDEX[ordinal]} {category!r}", -1)
        return matches[ordinal].group_id


def parse_prompt(text: str, vocab: Vocabulary) -> SceneSpec:
    """Parse a prompt into a SceneSpec. Deterministic; unknown words are
    hard errors."""
    tokens = _normalize_synonyms(tokenize(text))
    return _Parser(tokens, vocab).parse()


def _phrase_text(group: ObjectGroup, vocab: Vocabulary) -> str:
    words = sorted(group.attributes)
    if group.count == 1:
        words.append(group.category)
        article = "an" if words[0][0] in "aeiou" else "a"
        return " ".join([article] + words)
    words.append(vocab.plural(group.category))
    return " ".join([WORD_FOR_NUMBER[group.count]] + words)


def _ref_text(spec: SceneSpec, group_id: int, vocab: Vocabulary) -> str:
    group = spec.group(group_id)
    same = [g.group_id for g in spec.groups if g.category == group.category]
    noun = group.category if group.count == 1 else vocab.plural(group.category)
    if len(same) == 1:
        return f"the {noun}"
    index = same.index(group_id)
    if index not in ORDINAL_FOR_INDEX:
        raise ValueError(f"too many {group.category!r} groups to reference")
    return f"the {ORDINAL_FOR_INDEX[index]} {noun}"


def spec_to_canonical_text(spec: SceneSpec, vocab: Vocabulary) -> str:
    """Deterministic canonical surface form; re-parsing yields the spec."""
    phrases = [_phrase_text(g, vocab) for g in spec.groups]
    n = len(spec.groups)
    if len(spec.relations) == 1 and n >= 2:
        rel = spec.relations[0]
        last_cat = spec.groups[n - 1].category
        unique_last = sum(g.category == last_cat for g in spec.groups) == 1
        if rel.subject == n - 2 and rel.object == n - 1 and unique_last:
            head = " and ".join(phrases[:-1])
            return f"{head} {rel.predicate} {phrases[-1]}"
    text = " and ".join(phrases)
    if spec.relations:
        clauses = " and ".join(
            f"{_ref_text(spec, r.subject, vocab)} {r.predicate} "
            f"{_ref_text(spec, r.object, vocab)}"
            for r in spec.relations
        )
        text = f"{text} where {clauses}"
    return text


@dataclass(frozen=True)
class DefaultsRule:
    """Adds attributes/relations when all match categories are present.

    Category names stand in for groups; each resolves to the first group
    of that category.
    """

    match_categories: frozenset[str]
    add_attributes: tuple[tuple[str, str], ...] = ()  # (category, attribute)
    add_relations: tuple[tuple[str, str, str], ...] = ()  # (subject, pred, object)


@dataclass(frozen=True)
class DefaultsTable:
    """Ordered enrichment rules; applying the table is idempotent."""

    rules: tuple[DefaultsRule, ...] = ()


def _first_group(spec: SceneSpec, category: str) -> ObjectGroup | None:
    for g in spec.groups:
        if g.category == category:
            return g
    return None


def _contradicts(existing: Relation, new: Relation) -> bool:
    a, b = existing.normalized(), new.normalized()
    return (
        (a.subject, a.object) == (b.subject, b.object)
        and AXIS[a.predicate] == AXIS[b.predicate]
        and a.predicate != b.predicate
    )


def enrich_spec(spec: SceneSpec, table: DefaultsTable) -> SceneSpec:
    """Apply defaults rules: groups preserved, attributes/relations only
    added. Raises RuleConflict on a contradictory relation."""
    attrs = {g.group_id: set(g.attributes) for g in spec.groups}
    relations = list(spec.relations)
    for rule in table.rules:
        if not all(_first_group(spec, c) for c in rule.match_categories):
            continue
        for category, attribute in rule.add_attributes:
            group = _first_group(spec, category)
            if group is not None:
                attrs[group.group_id].add(attribute)
        for subj_cat, pred, obj_cat in rule.add_relations:
            subj = _first_group(spec, subj_cat)
            obj = _first_group(spec, obj_cat)
            if subj is None or obj is None or subj.group_id == obj.group_id:
                continue
            new = Relation(subj.group_id, pred, obj.group_id)
            if any(r.normalized() == new.normalized() for r in relations):
                continue
            conflict = next((r for r in relations if _contradicts(r, new)), None)
            if conflict is not None:
                raise RuleConflict(
                    f"rule adds {new} contradicting existing {conflict}"
                )
            relations.append(new)
    groups = tuple(
        ObjectGroup(g.group_id, g.category, g.count, frozenset(attrs[g.group_id]))
        for g in spec.groups
    )
    return SceneSpec(groups, tuple(relations))


def load_defaults_table(path) -> DefaultsTable:
    """Load enrichment rules from a TOML file with [[rule]] entries."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python 3.10
        import tomli as tomllib
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    rules = []
    for entry in doc.get("rule", []):
        rules.append(DefaultsRule(
            match_categories=frozenset(entry["match_categories"]),
            add_attributes=tuple(
                (a["category"], a["attribute"])
                for a in entry.get("add_attributes", [])
            ),
            add_relations=tuple(
                (r["subject"], r["predicate"], r["object"])
                for r in entry.get("add_relations", [])
            ),
        ))
    return DefaultsTable(tuple(rules))
