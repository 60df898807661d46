# Parsing prompts into scene specs, and back.
#
# The restricted grammar covers counted, attributed noun phrases with
# an optional spatial relation. Every parsed spec has a canonical text
# form that parses back to the same spec.

from intentloop import (
    DefaultsRule,
    DefaultsTable,
    enrich_spec,
    parse_prompt,
    spec_to_canonical_text,
    tokenize,
)
from intentloop.vocab import load_vocabulary

vocab = load_vocabulary()

# %% Tokens: lowercase words, punctuation stripped, number words to digits

print(tokenize("A black laptop and a yellow chair"))
print(tokenize("Three apples!"))

# %% Parsing builds object groups plus relations

spec = parse_prompt("a black laptop and a yellow chair", vocab)
for group in spec.groups:
    print(group.group_id, group.category, group.count, sorted(group.attributes))

spec = parse_prompt("a cup under a chair", vocab)
print("relation:", spec.relations[0])  # "under" normalizes to below

# %% Canonical text round-trips

for text in ("three red apples", "a cup below a chair",
             "a dog and a cat where the cat above the dog"):
    spec = parse_prompt(text, vocab)
    canonical = spec_to_canonical_text(spec, vocab)
    assert parse_prompt(canonical, vocab) == spec
    print(f"{text!r:55} -> {canonical!r}")

# %% Knowledge enrichment fills in unstated intent

table = DefaultsTable((DefaultsRule(
    match_categories=frozenset({"girl", "dog"}),
    add_relations=(("girl", "right_of", "dog"),),
),))
vague = parse_prompt("a girl and a dog", vocab)
enriched = enrich_spec(vague, table)
print("before:", spec_to_canonical_text(vague, vocab))
print("after: ", spec_to_canonical_text(enriched, vocab))
assert enrich_spec(enriched, table) == enriched  # idempotent
