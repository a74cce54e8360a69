"""drawspace: an executable environment and data pipeline for drawing-based
visual spatial reasoning.

Policies reason about images by drawing on them: bounding boxes and
polylines annotate copies of earlier images, each annotated output is
appended to an indexed registry, and the loop continues until the policy
answers. The package provides the response grammar, the episode state
machine, gated rewards, reflection-based trace filtering, group-relative
advantage arithmetic, a procedural maze QA generator with oracle
demonstrations, and an evaluation harness, all behind one CLI.
"""

from .canvas import (
    BBoxGeometry,
    DecodeError,
    DegenerateGeometryError,
    DrawingError,
    DrawStyle,
    InsufficientPointsError,
    InvalidDimensionError,
    PolylineGeometry,
    RasterImage,
    decode_png,
    draw_bbox,
    draw_polyline,
    encode_png,
    label_color,
    new_canvas,
)
from .dsl import (
    AmbiguousResponseError,
    DrawOperation,
    DslError,
    FinalAnswer,
    OpParseError,
    PolicyResponse,
    UnparseableAnswerError,
    extract_answer,
    normalize_label,
    parse_response,
    serialize_response,
)
from .episode import (
    EpisodeConfig,
    EpisodeState,
    EpisodeTrace,
    ExecutedOp,
    ImagePart,
    ImageRegistry,
    Message,
    PolicyError,
    PolicyPort,
    ReasoningStep,
    ScriptedPolicy,
    Termination,
    TextPart,
    check_termination,
    iter_trace_ops,
    run_episode,
    sample_frames,
    step,
)
from .evaluation import EvalReport, JoinError, attempt_correct, evaluate, pass_at_k
from .grpo import (
    AlignmentError,
    GroupTooSmallError,
    RolloutGroup,
    ShapeError,
    SurrogateResult,
    TokenSegment,
    clipped_surrogate,
    group_advantages,
    group_objective,
    token_mask,
)
from .maze import (
    InvalidSizeError,
    MazeSpec,
    MazeTask,
    emit_dataset,
    gen_maze,
    gen_task,
    oracle_policy,
    render_maze,
)
from .reflect import (
    DuplicateWitness,
    ReflectionWitness,
    detect_duplicate,
    detect_reflection,
    rrs_filter,
)
from .remote import RemoteConfig, RemotePolicy
from .reward import (
    CONFIDENCE_LADDER,
    RewardBreakdown,
    combine_reward,
    score_choice,
    score_format,
    score_numeric_mra,
    total_reward,
)
from .tasks import Task, TaskLoadError, load_tasks
from .traces import read_traces_jsonl, record_to_trace, trace_to_record, write_traces_jsonl

__version__ = "0.1.0"
