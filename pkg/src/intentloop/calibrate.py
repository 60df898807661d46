"""Monte-Carlo calibration of error-model presets against accuracy targets.

The three benchmark arms are fit in stages, each with its own knobs:

1. unconditioned — base channel rates. The total count-error mass is
   bisected against the numeracy target (split between omission and
   duplication by ``dup_share``), then the attribute-error mass against
   the attribute target. Constrained pairs are placed from the bias
   prior (`p_rel_ignore` = 1), which fixes unconditioned spatial
   accuracy near half the pair-presence rate; it is verified, not fit.
2. conditioned — the layout conditioning factors. The count factor is
   bisected against the conditioned numeracy target and the relation
   factor against conditioned spatial; conditioned attribute accuracy
   follows from stage 1 and is verified.
3. refined — detector noise on the feedback path. Coordinate descent
   over miss rate, spurious rate, and attribute confusion minimizes the
   worst deviation from the refined targets.

Targets are accuracies in [0, 1] per task, ordered (numeracy,
attribute_binding, spatial).
"""

from __future__ import annotations

from dataclasses import dataclass

from .bench import TASKS, BenchConfig, run_benchmark
from .errors import CalibrationFailed
from .feedback import DetectorConfig
from .generator import DEFAULT_BIAS_PRIOR, ErrorModelConfig
from .presets import PresetBundle
from .vocab import Vocabulary, load_vocabulary

MIN_BUDGET = 2000


@dataclass(frozen=True)
class CalibrationResult:
    arm: str
    config: ErrorModelConfig
    achieved: dict[str, float]
    detector: DetectorConfig | None = None
    max_signals_per_iteration: int = 16

    def worst_deviation(self, targets: dict[str, float]) -> float:
        return max(abs(self.achieved[t] - targets[t]) for t in targets)


def measure_accuracies(generator: ErrorModelConfig, arm: str, n: int, seed: int,
                       vocab: Vocabulary,
                       detector: DetectorConfig | None = None,
                       max_iterations: int = 3,
                       max_signals: int = 16) -> dict[str, float]:
    """Per-task accuracy of one arm under a candidate configuration."""
    bundle = PresetBundle(
        presets={name: generator for name in
                 ("unconditioned", "conditioned", "refined")},
        detectors={"refined": detector or DetectorConfig()},
        max_iterations=max_iterations,
        max_signals_per_iteration=max_signals,
    )
    cfg = BenchConfig(tasks=TASKS, n_prompts=n, seed=seed, arms=(arm,),
                      bundle=bundle, vocab=vocab)
    result = run_benchmark(cfg)
    return {task: result.cells[arm][task]["accuracy"] for task in TASKS}


def _bisect(probe, target: float, lo: float, hi: float, steps: int = 8) -> float:
    """Find the knob value where the (decreasing) probe crosses target."""
    for _ in range(steps):
        mid = (lo + hi) / 2
        if probe(mid) > target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _as_target_dict(targets) -> dict[str, float]:
    if isinstance(targets, dict):
        return dict(targets)
    return dict(zip(TASKS, targets))


def _check_budget(budget: int):
    if budget < MIN_BUDGET:
        raise ValueError(f"budget {budget} below the minimum {MIN_BUDGET} "
                         "prompts per task per candidate")


def calibrate_unconditioned(targets, tol_pts: float, budget: int, seed: int,
                            vocab: Vocabulary | None = None,
                            dup_share: float = 0.6,
                            swap_share: float = 0.5,
                            jitter_sigma: float = 8.0,
                            cond_factors: dict | None = None,
                            bias_prior: dict | None = None,
                            aims: dict | None = None) -> CalibrationResult:
    """Stage 1: fit base channel rates to the unconditioned targets."""
    _check_budget(budget)
    targets = _as_target_dict(targets)
    set_points = dict(targets) | (aims or {})
    vocab = vocab or load_vocabulary()
    factors = cond_factors or {}
    prior = bias_prior or dict(DEFAULT_BIAS_PRIOR)

    def make(tau: float, attr_mass: float) -> ErrorModelConfig:
        return ErrorModelConfig(
            p_omit=tau * (1 - dup_share), p_dup=tau * dup_share,
            p_attr_swap=attr_mass * swap_share,
            p_attr_drop=attr_mass * (1 - swap_share),
            p_rel_ignore=1.0, jitter_sigma=jitter_sigma,
            cond_factors=factors, bias_prior=prior,
        )

    if all(t >= 1.0 for t in targets.values()):
        config = ErrorModelConfig()
        achieved = measure_accuracies(config, "unconditioned", budget, seed, vocab)
        return CalibrationResult("unconditioned", config, achieved)

    tau = _bisect(
        lambda t: measure_accuracies(make(t, 0.0), "unconditioned", budget,
                                     seed, vocab)["numeracy"],
        set_points["numeracy"], 0.0, 0.6,
    )
    attr_mass = _bisect(
        lambda s: measure_accuracies(make(tau, s), "unconditioned", budget,
                                     seed, vocab)["attribute_binding"],
        set_points["attribute_binding"], 0.0, 0.4,
    )
    config = make(tau, attr_mass)
    achieved = measure_accuracies(config, "unconditioned", budget, seed, vocab)
    result = CalibrationResult("unconditioned", config, achieved)
    if result.worst_deviation(targets) > tol_pts / 100:
        raise CalibrationFailed(
            f"unconditioned deviations {achieved} vs {targets} exceed "
            f"{tol_pts} pts")
    return result


def calibrate_conditioned(targets, tol_pts: float, budget: int, seed: int,
                          base: ErrorModelConfig,
                          vocab: Vocabulary | None = None,
                          attr_factor: float = 0.5,
                          jitter_factor: float = 0.6,
                          aims: dict | None = None) -> CalibrationResult:
    """Stage 2: fit the layout conditioning factors, keeping stage-1
    base rates.

    ``aims`` optionally shifts the bisection set-points within the
    tolerance band (the verification still runs against ``targets``);
    useful when a dependent dimension needs headroom.
    """
    _check_budget(budget)
    targets = _as_target_dict(targets)
    set_points = dict(targets) | (aims or {})
    vocab = vocab or load_vocabulary()

    def make(f_count: float, f_rel: float) -> ErrorModelConfig:
        return ErrorModelConfig(
            p_omit=base.p_omit, p_dup=base.p_dup,
            p_attr_swap=base.p_attr_swap, p_attr_drop=base.p_attr_drop,
            p_rel_ignore=base.p_rel_ignore, jitter_sigma=base.jitter_sigma,
            cond_factors={
                "omit": f_count, "dup": f_count,
                "attr_swap": attr_factor, "attr_drop": attr_factor,
                "rel_ignore": f_rel, "jitter": jitter_factor,
            },
            bias_prior=base.bias_prior,
        )

    f_count = _bisect(
        lambda f: measure_accuracies(make(f, 0.5), "conditioned", budget,
                                     seed, vocab)["numeracy"],
        set_points["numeracy"], 0.0, 1.0,
    )
    f_rel = _bisect(
        lambda f: measure_accuracies(make(f_count, f), "conditioned", budget,
                                     seed, vocab)["spatial"],
        set_points["spatial"], 0.0, 1.0,
    )
    config = make(f_count, f_rel)
    achieved = measure_accuracies(config, "conditioned", budget, seed, vocab)
    result = CalibrationResult("conditioned", config, achieved)
    if result.worst_deviation(targets) > tol_pts / 100:
        raise CalibrationFailed(
            f"conditioned deviations {achieved} vs {targets} exceed "
            f"{tol_pts} pts")
    return result


def calibrate_refined(targets, tol_pts: float, budget: int, seed: int,
                      conditioned: ErrorModelConfig,
                      vocab: Vocabulary | None = None,
                      max_iterations: int = 3,
                      max_signals: int = 16,
                      passes: int = 2,
                      start: dict | None = None) -> CalibrationResult:
    """Stage 3: fit feedback-path detector noise by coordinate descent."""
    _check_budget(budget)
    targets = _as_target_dict(targets)
    vocab = vocab or load_vocabulary()

    def score(acc: dict[str, float]) -> float:
        # squared deviation beyond a 2-pt grace band, tie-broken toward center
        total = 0.0
        for task in TASKS:
            dev = abs(acc[task] - targets[task]) * 100
            total += max(0.0, dev - 2.0) ** 2 + 0.01 * dev
        return total

    grids = {
        "p_miss": [0.10, 0.15, 0.20, 0.25, 0.28, 0.32, 0.36, 0.40],
        "attr_confusion": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        "p_false": [0.0, 0.25, 0.5, 1.0],
        "dup_required": [1.0, 0.7, 0.5, 0.3, 0.15, 0.0],
    }
    current = start or {"p_miss": 0.28, "attr_confusion": 0.3, "p_false": 0.5,
                        "dup_required": 0.3}
    cache: dict[tuple, dict[str, float]] = {}

    def evaluate(params: dict) -> dict[str, float]:
        key = tuple(sorted(params.items()))
        if key not in cache:
            det = DetectorConfig(**{k: v for k, v in params.items()
                                    if k != "dup_required"})
            gen = ErrorModelConfig.from_dict(
                conditioned.to_dict() | {"cond_factors": dict(
                    conditioned.cond_factors,
                    dup_required=params["dup_required"])})
            cache[key] = measure_accuracies(
                gen, "refined", budget, seed, vocab, detector=det,
                max_iterations=max_iterations, max_signals=max_signals)
        return cache[key]

    for _ in range(passes):
        for knob, grid in grids.items():
            best_value, best_score = current[knob], score(evaluate(current))
            for value in grid:
                trial = dict(current, **{knob: value})
                trial_score = score(evaluate(trial))
                if trial_score < best_score:
                    best_value, best_score = value, trial_score
            current[knob] = best_value

    detector = DetectorConfig(**{k: v for k, v in current.items()
                                 if k != "dup_required"})
    refined_cfg = ErrorModelConfig.from_dict(
        conditioned.to_dict() | {"cond_factors": dict(
            conditioned.cond_factors, dup_required=current["dup_required"])})
    achieved = evaluate(current)
    result = CalibrationResult("refined", refined_cfg, achieved,
                               detector=detector,
                               max_signals_per_iteration=max_signals)
    if result.worst_deviation(targets) > tol_pts / 100:
        raise CalibrationFailed(
            f"refined deviations {achieved} vs {targets} exceed {tol_pts} pts")
    return result


def calibrate(targets, tol_pts: float, budget: int, seed: int,
              arm: str = "unconditioned", base: ErrorModelConfig | None = None,
              **kwargs) -> CalibrationResult:
    """Fit one arm's preset to its targets; raises CalibrationFailed when
    the search budget cannot reach them."""
    if arm == "unconditioned":
        return calibrate_unconditioned(targets, tol_pts, budget, seed, **kwargs)
    if arm == "conditioned":
        if base is None:
            raise ValueError("conditioned calibration needs the base preset")
        return calibrate_conditioned(targets, tol_pts, budget, seed, base, **kwargs)
    if arm == "refined":
        if base is None:
            raise ValueError("refined calibration needs the conditioned preset")
        return calibrate_refined(targets, tol_pts, budget, seed, base, **kwargs)
    raise ValueError(f"unknown arm {arm!r}")


def calibrate_bundle(table_targets: dict, tol_pts: float, budget: int, seed: int,
                     vocab: Vocabulary | None = None,
                     dup_share: float = 0.82,
                     aims: dict | None = None,
                     detector_start: dict | None = None,
                     max_signals: int = 16,
                     max_iterations: int = 3,
                     passes: int = 2) -> tuple[PresetBundle, dict]:
    """Run all three stages and assemble a shipped-preset bundle.

    ``table_targets``: {"unconditioned": (n, a, s), "conditioned": ...,
    "refined": ...} accuracies in [0, 1]. ``aims`` optionally shifts
    bisection set-points per arm, e.g. {"conditioned": {"numeracy": 0.64}}.
    Returns the bundle and a per-arm report of achieved accuracies.
    """
    vocab = vocab or load_vocabulary()
    aims = aims or {}
    stage1 = calibrate_unconditioned(
        table_targets["unconditioned"], tol_pts, budget, seed, vocab=vocab,
        dup_share=dup_share, aims=aims.get("unconditioned"))
    stage2 = calibrate_conditioned(
        table_targets["conditioned"], tol_pts, budget, seed, stage1.config,
        vocab=vocab, aims=aims.get("conditioned"))
    stage3 = calibrate_refined(
        table_targets["refined"], tol_pts, budget, seed, stage2.config,
        vocab=vocab, max_iterations=max_iterations, max_signals=max_signals,
        passes=passes, start=detector_start)
    bundle = PresetBundle(
        presets={
            "unconditioned": stage1.config,
            "conditioned": stage2.config,
            "refined": stage3.config,
        },
        detectors={"refined": stage3.detector},
        max_iterations=max_iterations,
        max_signals_per_iteration=stage3.max_signals_per_iteration,
    )
    report = {
        "unconditioned": stage1.achieved,
        "conditioned": stage2.achieved,
        "refined": stage3.achieved,
    }
    return bundle, report
