"""intentloop: iterative refinement for layout-grounded scene generation.

A deterministic simulation of the full loop: parse a prompt into a
scene spec, solve a bounding-box layout, render through a generator
with configurable error channels, check the result with detector-based
feedback, and refine until satisfied. Includes a three-task benchmark
and an interactive session service.
"""

from .errors import (
    CalibrationFailed,
    EmptyPrompt,
    GrammarError,
    IntentLoopError,
    InvalidTarget,
    InvalidUpdate,
    InvariantViolation,
    RuleConflict,
    TooManyInstances,
    UnknownAttribute,
    UnknownCategory,
    UnsatisfiableConstraints,
    UnsupportedFormat,
)
from .evaluation import evaluate_prompt
from .feedback import (
    DetectorConfig,
    Detection,
    FeedbackItem,
    FeedbackReport,
    check_attributes,
    check_numeracy,
    check_spatial,
    compose_feedback,
    detect,
    match_detections,
)
from .generator import (
    ErrorModelConfig,
    GenerationTrace,
    GeneratorInput,
    RenderedEntity,
    RenderedScene,
    edit_content,
    faithful_render,
    generate,
    render_svg,
    replay_trace,
)
from .layout import (
    BoundingBox,
    Instance,
    InstanceConstraint,
    Layout,
    SceneGraph,
    apply_layout_update,
    eval_predicate,
    expand_instances,
    iou,
    solve_layout,
)
from .loop import (
    RefinementConfig,
    SessionState,
    SessionTrace,
    UpdatePolicy,
    apply_updates,
    default_policy,
    derive_updates,
    iterate_once,
    run_refinement,
    start_session,
)
from .prompts import (
    DefaultsRule,
    DefaultsTable,
    ObjectGroup,
    Relation,
    SceneSpec,
    enrich_spec,
    parse_prompt,
    spec_to_canonical_text,
    tokenize,
)
from .presets import PresetBundle, load_presets, save_presets
from .bench import (
    BenchConfig,
    BenchResult,
    emit_report,
    generate_corpus,
    run_benchmark,
)
from .updates import UpdateSignal
from .vocab import Vocabulary, load_vocabulary

__version__ = "0.1.0"
