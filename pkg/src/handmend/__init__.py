"""Detection-guided restoration of non-standard hands in generated images.

The package is organized around a five-step session pipeline (detect,
pose, control, controlnet, ip2p) with pluggable model backends, plus a
dataset protocol, an evaluation harness, an HTTP service, and a CLI.
"""

from .geometry import (
    Chirality,
    DegenerateBaseVector,
    HandLandmarkSet,
    IndeterminateChirality,
    PlacementTransform,
    Point2,
    RotationDirection,
    apply_placement,
    compute_chirality,
    identity_transform,
    placement_matrix,
    scale_about_pivot,
    solve_placement,
)
from .masking import (
    BoundingBox,
    ControlImage,
    DimensionMismatch,
    EmptyAfterClamp,
    MaskLayer,
    TemplateFullyOutside,
    expand_box,
    rasterize_box,
    rasterize_template,
    union_masks,
)
from .templates import (
    TemplateRegistry,
    TemplateSpec,
    UnknownTemplate,
    load_template,
    write_template,
)
from .prompts import (
    DEFAULT_PROMPTS,
    INSTRUCTION_PROMPT,
    INSTRUCTION_VARIANTS,
    NEGATIVE_PROMPT,
    POSITIVE_PROMPT_TEMPLATE,
    PromptBundle,
)
from .backends import (
    BackendError,
    BackendSet,
    BackendUnavailable,
    BodyPoseResult,
    ControlInpainter,
    Detector,
    FixtureDetector,
    FixturePoseEstimator,
    HandDetection,
    HandLabel,
    HashPatternInpainter,
    InferenceFailure,
    InpaintRequest,
    InstructionInpainter,
    MockInstructionEditor,
    NoPersonDetected,
    PoseEstimator,
    PoseLandmark,
    build_backends,
    canonical_detections,
    canonical_pose,
    hand_set_from_pose,
)
from .pipeline import (
    STEPS,
    PipelineError,
    PipelineSession,
    PredecessorNotDone,
    SessionParams,
    StepExecutionError,
    UnknownArtifact,
    run_full_session,
    sub_seed,
)
from .dataset import (
    AnnotationRecord,
    HandAnnotation,
    ImagePair,
    ParseError,
    build_pairs,
    parse_annotations,
    serialize_annotations,
    split_pairs,
)
from .evaluation import (
    ConfusionCounts,
    FeatureDistribution,
    fid,
    feature_distribution,
    iou,
    match_and_count,
    precision_recall,
)

__version__ = "0.1.0"
