"""Three-task benchmark: corpus generation, arm execution, reporting.

Tasks mirror detection-style evaluation of generated scenes: exact
object counts (numeracy), color-to-object assignment (attribute
binding), and relative placement (spatial). Each task gets a seeded
prompt corpus; each arm runs the pipeline with a different level of
conditioning:

- unconditioned: generate straight from the prompt, no layout.
- conditioned: solve a layout first and generate against it.
- refined: full feedback loop on top of the conditioned path.

Accuracy is the fraction of prompts whose final scene matches the
prompt on every dimension.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

from .errors import UnsupportedFormat
from .evaluation import evaluate_prompt
from .generator import GeneratorInput, generate
from .layout import expand_instances, solve_layout
from .loop import RefinementConfig, default_policy, run_refinement
from .presets import PresetBundle
from .prompts import PREDICATES, parse_prompt
from .seeding import mix, rng_for
from .vocab import Vocabulary, load_vocabulary

TASKS = ("numeracy", "attribute_binding", "spatial")
ARMS = ("unconditioned", "conditioned", "refined")
TASK_LABELS = {
    "numeracy": "Numeracy",
    "attribute_binding": "Attribute Binding",
    "spatial": "Spatial Relationships",
}
NUMERACY_COUNTS = (2, 3, 4, 5)

_SURFACES = {
    "left_of": ("to the left of", "left_of"),
    "right_of": ("to the right of", "right_of"),
    "above": ("above", "over", "on top of"),
    "below": ("below", "under", "beneath"),
}


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def generate_corpus(task: str, n: int, seed: int,
                    vocab: Vocabulary) -> list[str]:
    """Seeded template prompts; duplicates only after the template space
    is exhausted."""
    if n < 1:
        raise ValueError("corpus size must be at least 1")
    rng = rng_for(seed, "corpus", task)
    prompts: list[str] = []
    if task == "numeracy":
        space = [(c, cat) for c in NUMERACY_COUNTS for cat in vocab.categories]
        order = rng.permutation(len(space))
        words = {2: "two", 3: "three", 4: "four", 5: "five"}
        for i in range(n):
            count, cat = space[order[i % len(space)]]
            prompts.append(f"{words[count]} {vocab.plural(cat)}")
        return prompts
    if task == "attribute_binding":
        seen: set[tuple] = set()
        space_size = (len(vocab.categories) * (len(vocab.categories) - 1)
                      * len(vocab.attributes) * (len(vocab.attributes) - 1))
        while len(prompts) < n:
            cat_a, cat_b = (vocab.categories[i]
                            for i in rng.choice(len(vocab.categories), 2,
                                                replace=False))
            col_a, col_b = (vocab.attributes[i]
                            for i in rng.choice(len(vocab.attributes), 2,
                                                replace=False))
            key = (cat_a, col_a, cat_b, col_b)
            if key in seen and len(seen) < space_size:
                continue
            seen.add(key)
            prompts.append(
                f"{_article(col_a)} {col_a} {cat_a} and "
                f"{_article(col_b)} {col_b} {cat_b}"
            )
        return prompts
    if task == "spatial":
        seen = set()
        space_size = (len(vocab.categories) * (len(vocab.categories) - 1)
                      * len(PREDICATES))
        while len(prompts) < n:
            cat_a, cat_b = (vocab.categories[i]
                            for i in rng.choice(len(vocab.categories), 2,
                                                replace=False))
            predicate = PREDICATES[rng.choice(len(PREDICATES))]
            key = (cat_a, predicate, cat_b)
            if key in seen and len(seen) < space_size:
                continue
            seen.add(key)
            surfaces = _SURFACES[predicate]
            surface = surfaces[rng.choice(len(surfaces))]
            prompts.append(
                f"{_article(cat_a)} {cat_a} {surface} {_article(cat_b)} {cat_b}"
            )
        return prompts
    raise ValueError(f"unknown task {task!r}")


@dataclass(frozen=True)
class BenchConfig:
    tasks: tuple[str, ...] = TASKS
    n_prompts: int = 100
    seed: int = 42
    arms: tuple[str, ...] = ARMS
    bundle: PresetBundle = None
    vocab: Vocabulary = None

    def __post_init__(self):
        if self.n_prompts < 1:
            raise ValueError("n_prompts must be at least 1")
        if not self.arms:
            raise ValueError("at least one arm required")
        for task in self.tasks:
            if task not in TASKS:
                raise ValueError(f"unknown task {task!r}")
        for arm in self.arms:
            if arm not in ARMS:
                raise ValueError(f"unknown arm {arm!r}")
        if self.vocab is None:
            object.__setattr__(self, "vocab", load_vocabulary())

    def digest(self) -> str:
        blob = json.dumps({
            "tasks": list(self.tasks), "n": self.n_prompts, "seed": self.seed,
            "arms": list(self.arms),
            "presets": {n: p.to_dict() for n, p in sorted(self.bundle.presets.items())},
            "detectors": {n: d.to_dict()
                          for n, d in sorted(self.bundle.detectors.items())},
            "max_iterations": self.bundle.max_iterations,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class BenchResult:
    config_digest: str
    n_prompts: int
    cells: dict[str, dict[str, dict]] = field(default_factory=dict)
    # cells[arm][task] = {"accuracy", "passes", "iterations_histogram"?}

    def accuracy(self, arm: str, task: str) -> float:
        return self.cells[arm][task]["accuracy"]

    def average(self, arm: str) -> float:
        tasks = self.cells[arm]
        return sum(c["accuracy"] for c in tasks.values()) / len(tasks)

    def to_dict(self) -> dict:
        return {"config_digest": self.config_digest,
                "n_prompts": self.n_prompts, "cells": self.cells}

    @classmethod
    def from_dict(cls, d: dict) -> "BenchResult":
        return cls(d["config_digest"], d["n_prompts"], d["cells"])


def _run_arm(arm: str, prompt: str, prompt_seed: int, cfg: BenchConfig):
    """One prompt through one arm; returns (eval dict, iteration count)."""
    bundle, vocab = cfg.bundle, cfg.vocab
    if arm == "refined":
        refinement = RefinementConfig(
            generator=bundle.preset("refined"),
            detector=bundle.detector("refined"),
            max_iterations=bundle.max_iterations,
            policy=default_policy(bundle.max_signals_per_iteration),
            vocab=vocab,
        )
        trace = run_refinement(prompt, refinement, prompt_seed)
        state = trace.final_state
        return (evaluate_prompt(state.spec, state.graph, state.scene),
                len(trace.iterations))
    spec = parse_prompt(prompt, vocab)
    graph = expand_instances(spec)
    layout = None
    if arm == "conditioned":
        layout = solve_layout(graph, mix(prompt_seed, "layout", 0), vocab)
    gen_input = GeneratorInput(
        spec=spec, graph=graph, seed=mix(prompt_seed, "gen", 0), layout=layout,
    )
    scene, _ = generate(gen_input, bundle.preset(arm), vocab)
    return evaluate_prompt(spec, graph, scene), 1


def run_benchmark(cfg: BenchConfig) -> BenchResult:
    """Run every (arm, task) cell; deterministic for the config."""
    result = BenchResult(cfg.digest(), cfg.n_prompts)
    for arm in cfg.arms:
        result.cells[arm] = {}
        for task in cfg.tasks:
            prompts = generate_corpus(task, cfg.n_prompts, cfg.seed, cfg.vocab)
            passes: list[bool] = []
            histogram: dict[str, int] = {}
            for index, prompt in enumerate(prompts):
                prompt_seed = mix(cfg.seed, task, index)
                try:
                    verdict, n_iter = _run_arm(arm, prompt, prompt_seed, cfg)
                except Exception as exc:
                    raise RuntimeError(
                        f"{arm}/{task} prompt {index} ({prompt!r}) failed"
                    ) from exc
                passes.append(bool(verdict["matches"]))
                if arm == "refined":
                    key = str(n_iter)
                    histogram[key] = histogram.get(key, 0) + 1
            cell = {
                "accuracy": sum(passes) / len(passes),
                "passes": passes,
            }
            if arm == "refined":
                cell["iterations_histogram"] = dict(sorted(histogram.items()))
            result.cells[arm][task] = cell
    return result


def emit_report(result: BenchResult, format: str) -> str:
    """Render a result as json (full detail), csv (one row per cell), or
    md (arms-by-tasks grid with averages)."""
    if format == "json":
        return json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    if format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["arm", "task", "accuracy"])
        for arm, tasks in result.cells.items():
            for task, cell in tasks.items():
                writer.writerow([arm, task, f"{cell['accuracy']:.4f}"])
        return buffer.getvalue()
    if format == "md":
        tasks = list(next(iter(result.cells.values())).keys())
        header = ["Arm"] + [TASK_LABELS.get(t, t) for t in tasks] + ["Average"]
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "---|" * len(header)]
        for arm, cells in result.cells.items():
            row = [arm]
            for task in tasks:
                row.append(f"{cells[task]['accuracy'] * 100:.0f}%")
            row.append(f"{result.average(arm) * 100:.1f}%")
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
        lines.append(f"config digest: `{result.config_digest}`, "
                     f"n={result.n_prompts} prompts/task")
        return "\n".join(lines) + "\n"
    raise UnsupportedFormat(f"unknown format {format!r}")
