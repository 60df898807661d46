"""Simulated generator tests: error channels, ledger, rendering, edits.

The deviation ledger is verified with an independent replay oracle:
rebuild the scene from the faithful render plus the trace and require
exact equality.
"""

import random

import pytest

from intentloop.errors import InvalidTarget, InvariantViolation
from intentloop.generator import (
    ErrorModelConfig,
    GeneratorInput,
    edit_content,
    faithful_render,
    generate,
    render_svg,
    replay_trace,
)
from intentloop.layout import expand_instances, solve_layout
from intentloop.prompts import ObjectGroup, Relation, SceneSpec
from intentloop.updates import content_edit
from intentloop.vocab import load_vocabulary

VOCAB = load_vocabulary()


def spec_of(*groups, relations=()):
    return SceneSpec(
        tuple(ObjectGroup(i, c, n, frozenset(a)) for i, (c, n, a) in enumerate(groups)),
        tuple(Relation(*r) for r in relations),
    )


def conditioned_input(spec, seed):
    graph = expand_instances(spec)
    layout = solve_layout(graph, seed, VOCAB)
    return GeneratorInput(spec=spec, graph=graph, seed=seed, layout=layout)


def scene_key(scene):
    return sorted((e.entity_id, e.category, tuple(sorted(e.attributes)),
                   round(e.box.x, 6), round(e.box.y, 6),
                   round(e.box.w, 6), round(e.box.h, 6))
                  for e in scene.entities)


class TestZeroError:
    def test_faithful_render_with_layout(self):
        spec = spec_of(("cup", 1, set()), ("chair", 1, set()),
                       relations=[(0, "below", 1)])
        gen_input = conditioned_input(spec, 4)
        scene, trace = generate(gen_input, ErrorModelConfig.zero(), VOCAB)
        assert [e.entity_id for e in scene.entities] == ["cup#0", "chair#0"]
        assert scene.entities[0].box == gen_input.layout.boxes["cup#0"]
        assert trace.injected == ()
        assert trace.box_overrides == {}

    def test_unconditioned_zero_error_honors_constraints(self):
        from intentloop.layout import eval_predicate

        spec = spec_of(("cup", 1, set()), ("chair", 1, set()),
                       relations=[(0, "below", 1)])
        graph = expand_instances(spec)
        gen_input = GeneratorInput(spec=spec, graph=graph, seed=11)
        scene, trace = generate(gen_input, ErrorModelConfig.zero(), VOCAB)
        cup = scene.entity("cup#0").box
        chair = scene.entity("chair#0").box
        assert eval_predicate(cup, chair, "below", 0)
        assert trace.injected == ()


class TestChannels:
    def test_forced_duplicate(self):
        spec = spec_of(("dog", 1, set()))
        gen_input = conditioned_input(spec, 5)
        scene, trace = generate(gen_input, ErrorModelConfig(p_dup=1.0), VOCAB)
        assert sorted(e.entity_id for e in scene.entities) == ["dog#0", "dog#0+dup"]
        assert [e.channel for e in trace.injected] == ["duplicate"]

    def test_forced_omission(self):
        spec = spec_of(("dog", 1, set()), ("cat", 1, set()))
        gen_input = conditioned_input(spec, 5)
        scene, trace = generate(gen_input, ErrorModelConfig(p_omit=1.0), VOCAB)
        assert scene.entities == ()
        assert sorted(e.targets[0] for e in trace.injected) == ["cat#0", "dog#0"]

    def test_forced_swap_exchanges_attributes(self):
        spec = spec_of(("laptop", 1, {"black"}), ("chair", 1, {"yellow"}))
        gen_input = conditioned_input(spec, 6)
        scene, trace = generate(gen_input, ErrorModelConfig(p_attr_swap=1.0), VOCAB)
        attrs = {e.entity_id: set(e.attributes) for e in scene.entities}
        assert attrs == {"laptop#0": {"yellow"}, "chair#0": {"black"}}
        assert all(e.channel == "attr_swap" for e in trace.injected)

    def test_forced_drop(self):
        spec = spec_of(("chair", 1, {"yellow"}))
        gen_input = conditioned_input(spec, 6)
        scene, trace = generate(gen_input, ErrorModelConfig(p_attr_drop=1.0), VOCAB)
        assert scene.entity("chair#0").attributes == frozenset()
        assert trace.injected[0].channel == "attr_drop"

    def test_rel_ignore_is_ledgered(self):
        spec = spec_of(("cup", 1, set()), ("chair", 1, set()),
                       relations=[(0, "below", 1)])
        gen_input = conditioned_input(spec, 7)
        scene, trace = generate(gen_input, ErrorModelConfig(p_rel_ignore=1.0), VOCAB)
        entries = trace.by_channel("rel_ignore")
        assert len(entries) == 1
        assert entries[0].details["expected"] == "below"

    def test_omit_dup_mutually_exclusive(self):
        spec = spec_of(("apple", 9, set()))
        gen_input = conditioned_input(spec, 8)
        cfg = ErrorModelConfig(p_omit=0.5, p_dup=0.5)
        scene, trace = generate(gen_input, cfg, VOCAB)
        omitted = {e.targets[0] for e in trace.by_channel("omit")}
        duplicated = {e.targets[0] for e in trace.by_channel("duplicate")}
        assert not (omitted & duplicated)


class TestPinning:
    def test_pinned_instances_untouched(self):
        spec = spec_of(("dog", 1, set()), ("cat", 1, set()))
        graph = expand_instances(spec)
        layout = solve_layout(graph, 9, VOCAB)
        layout.pinned.add("dog#0")
        cfg = ErrorModelConfig(p_omit=0.5, p_dup=0.5, jitter_sigma=40.0)
        for seed in range(40):
            gen_input = GeneratorInput(spec=spec, graph=graph, seed=seed,
                                       layout=layout)
            scene, _ = generate(gen_input, cfg, VOCAB)
            dogs = [e for e in scene.entities if e.category == "dog"]
            assert len(dogs) == 1
            assert dogs[0].box == layout.boxes["dog#0"]

    def test_pinned_attributes_untouched(self):
        spec = spec_of(("laptop", 1, {"black"}), ("chair", 1, {"yellow"}))
        graph = expand_instances(spec)
        layout = solve_layout(graph, 9, VOCAB)
        cfg = ErrorModelConfig(p_attr_swap=1.0, p_attr_drop=1.0)
        pins = frozenset({("laptop#0", "black"), ("chair#0", "yellow")})
        gen_input = GeneratorInput(spec=spec, graph=graph, seed=3, layout=layout,
                                   attribute_pins=pins)
        scene, trace = generate(gen_input, cfg, VOCAB)
        assert scene.entity("laptop#0").attributes == frozenset({"black"})
        assert scene.entity("chair#0").attributes == frozenset({"yellow"})
        assert trace.injected == ()

    def test_required_blocks_omission_not_duplication(self):
        spec = spec_of(("dog", 1, set()))
        graph = expand_instances(spec)
        layout = solve_layout(graph, 2, VOCAB)
        gen_input = GeneratorInput(spec=spec, graph=graph, seed=1, layout=layout,
                                   required_instances=frozenset({"dog#0"}))
        scene, _ = generate(gen_input, ErrorModelConfig(p_omit=1.0), VOCAB)
        assert [e.entity_id for e in scene.entities] == ["dog#0"]
        scene, _ = generate(gen_input, ErrorModelConfig(p_dup=1.0), VOCAB)
        assert len(scene.entities) == 2


class TestDeterminism:
    def test_same_input_same_output(self):
        spec = spec_of(("dog", 2, {"black"}), ("cat", 1, set()),
                       relations=[(0, "left_of", 1)])
        gen_input = conditioned_input(spec, 77)
        cfg = ErrorModelConfig(p_omit=0.2, p_dup=0.2, p_attr_swap=0.2,
                               p_attr_drop=0.1, p_rel_ignore=0.5,
                               jitter_sigma=10.0)
        a_scene, a_trace = generate(gen_input, cfg, VOCAB)
        b_scene, b_trace = generate(gen_input, cfg, VOCAB)
        assert scene_key(a_scene) == scene_key(b_scene)
        assert a_trace.to_dict() == b_trace.to_dict()


def random_case(rng):
    cats = rng.sample(["dog", "cat", "chair", "cup", "apple", "laptop"],
                      rng.randint(1, 3))
    groups = [(c, rng.randint(1, 3),
               set(rng.sample(["red", "blue", "yellow", "black"],
                              rng.randint(0, 2)))) for c in cats]
    relations = []
    if len(cats) >= 2 and rng.random() < 0.5:
        a, b = rng.sample(range(len(cats)), 2)
        relations.append((a, rng.choice(
            ["left_of", "right_of", "above", "below"]), b))
    spec = spec_of(*groups, relations=relations)
    graph = expand_instances(spec)
    seed = rng.getrandbits(32)
    layout = solve_layout(graph, seed, VOCAB) if rng.random() < 0.7 else None
    cfg = ErrorModelConfig(
        p_omit=rng.uniform(0, 0.4), p_dup=rng.uniform(0, 0.4),
        p_attr_swap=rng.uniform(0, 0.5), p_attr_drop=rng.uniform(0, 0.5),
        p_rel_ignore=rng.uniform(0, 1), jitter_sigma=rng.uniform(0, 20),
    )
    return GeneratorInput(spec=spec, graph=graph, seed=seed, layout=layout), cfg


class TestLedgerCompleteness:
    def test_replay_reproduces_scene(self):
        rng = random.Random(20240)
        for _ in range(1000):
            gen_input, cfg = random_case(rng)
            scene, trace = generate(gen_input, cfg, VOCAB)
            faithful = faithful_render(gen_input, VOCAB)
            rebuilt = replay_trace(faithful, trace)
            assert scene_key(rebuilt) == scene_key(scene)


class TestMonotoneConditioning:
    def test_zeroing_a_factor_never_hurts(self):
        """On a fixed 500-prompt corpus, killing one conditioned channel
        never lowers that configuration's measured accuracy."""
        from intentloop.bench import BenchConfig, run_benchmark
        from intentloop.presets import PresetBundle

        base = ErrorModelConfig(
            p_omit=0.05, p_dup=0.25, p_attr_swap=0.03, p_attr_drop=0.03,
            p_rel_ignore=1.0, jitter_sigma=8.0,
            cond_factors={"omit": 0.5, "dup": 0.5, "attr_swap": 1.0,
                          "attr_drop": 1.0, "rel_ignore": 0.4, "jitter": 0.6},
        )

        def accuracy(cfg):
            bundle = PresetBundle(presets={"conditioned": cfg,
                                           "unconditioned": cfg,
                                           "refined": cfg})
            bench = BenchConfig(n_prompts=500, seed=99, arms=("conditioned",),
                                bundle=bundle, vocab=VOCAB)
            cells = run_benchmark(bench).cells["conditioned"]
            return {t: cells[t]["accuracy"] for t in cells}

        baseline = accuracy(base)
        for channel in ("omit", "dup", "rel_ignore"):
            zeroed = ErrorModelConfig.from_dict(
                base.to_dict() | {"cond_factors": dict(base.cond_factors,
                                                       **{channel: 0.0})})
            for task, acc in accuracy(zeroed).items():
                assert acc >= baseline[task] - 1e-9, (channel, task)


class TestRenderSvg:
    def test_empty_scene(self):
        from intentloop.generator import RenderedScene

        svg = render_svg(RenderedScene(()))
        assert svg.startswith("<svg")
        assert svg.count("<rect") == 1  # background only

    def test_single_red_apple(self):
        from intentloop.generator import RenderedEntity, RenderedScene
        from intentloop.layout import BoundingBox

        scene = RenderedScene((RenderedEntity(
            "apple#0", "apple", frozenset({"red"}),
            BoundingBox(100, 100, 45, 45)),))
        svg = render_svg(scene)
        assert "apple" in svg
        assert "#d64541" in svg  # the red fill

    def test_deterministic_element_order(self):
        from intentloop.generator import RenderedEntity, RenderedScene
        from intentloop.layout import BoundingBox

        a = RenderedEntity("a#0", "apple", frozenset(), BoundingBox(0, 0, 10, 10))
        b = RenderedEntity("b#0", "cup", frozenset(), BoundingBox(20, 20, 10, 10))
        assert render_svg(RenderedScene((a, b)))

        assert render_svg(RenderedScene((b, a))) == render_svg(RenderedScene((a, b)))


class TestEditContent:
    def scene(self):
        spec = spec_of(("dog", 1, set()))
        gen_input = conditioned_input(spec, 5)
        scene, _ = generate(gen_input, ErrorModelConfig(p_dup=1.0), VOCAB)
        return scene

    def test_remove_duplicate(self):
        scene = self.scene()
        out = edit_content(scene, content_edit("remove", entity_id="dog#0+dup"))
        assert [e.entity_id for e in out.entities] == ["dog#0"]

    def test_set_attribute_idempotent(self):
        spec = spec_of(("chair", 1, {"yellow"}))
        scene, _ = generate(conditioned_input(spec, 5),
                            ErrorModelConfig.zero(), VOCAB)
        out = edit_content(scene, content_edit("set_attribute",
                                               entity_id="chair#0",
                                               attribute="yellow"))
        assert scene_key(out) == scene_key(scene)

    def test_move_outside_canvas_rejected(self):
        scene = self.scene()
        with pytest.raises(InvariantViolation):
            edit_content(scene, content_edit(
                "move", entity_id="dog#0",
                box={"x": 500.0, "y": 500.0, "w": 100.0, "h": 100.0}))

    def test_unknown_target_rejected(self):
        with pytest.raises(InvalidTarget):
            edit_content(self.scene(), content_edit("remove", entity_id="cat#9"))
