"""textmorph: moving-least-squares text image augmentation with a
difficulty-seeking direction agent and a desk-scale glyph task."""

from .agent import (
    AgentPolicy,
    Recognizer,
    ReferencePolicy,
    StepReport,
    difficulty_probe_seam,
    negate,
    nll,
    parse_log_line,
    sample_state,
    train_step,
)
from .augment import (
    AugmentConfig,
    FiducialLayout,
    MovingState,
    augment,
    init_fiducials,
    perspective_state,
    perturb_state,
    random_state,
    sample_offsets,
    stretch_state,
)
from .errors import (
    DegenerateConfiguration,
    DimensionMismatch,
    DoesNotFit,
    EmptyGroundTruth,
    InvalidDimensions,
    LengthMismatch,
    TextmorphError,
    UnknownCharacter,
    ZeroWeightSum,
)
from .glyphs import GlyphTask, TemplateRecognizer, load_default_task, render_word, template_recognize
from .metrics import cer, edit_distance, wer, word_accuracy
from .mls import (
    ControlPointSet,
    DeformationMode,
    FillRule,
    LocalTransform,
    Point2,
    WarpGrid,
    apply_transform,
    build_warp_grid,
    centroids,
    solve_transform,
    warp_image,
    weights,
)
from .rng import RandomSource

__version__ = "0.1.0"
