"""facecraft: invert, edit, and assemble 8x8 face textures for cube-headed
game characters with a miniature style-based generator."""

from .checkpoints import load_latent, load_weights, save_latent, save_weights
from .dataset import (
    ChannelStats,
    RefinementConfig,
    RefinementDecision,
    RefinementReport,
    channel_stats,
    classify_face,
    is_checkerboard,
    is_low_variance,
    is_monochromatic,
    refine_corpus,
)
from .editing import EditConfig, EditResult, edit, edit_from_source, edit_objective
from .errors import (
    ChecksumError,
    DecodeError,
    EmptyCorpusError,
    FacecraftError,
    NonFiniteLossError,
    ScorerFailureError,
    ShapeMismatchError,
    TooSmallError,
    VersionMismatchError,
)
from .generator import (
    GeneratorConfig,
    GeneratorWeights,
    NoiseSeed,
    average_latent,
    ensure_w_avg,
    map_latent,
    sample_random_latent,
    synthesize,
)
from .inversion import (
    InversionConfig,
    InversionResult,
    invert,
    inversion_objective,
    stat_loss,
    write_trajectory_jsonl,
)
from .scorers import TextImageScorer, TextPrompt, get_scorer
from .textures import (
    FaceTexture,
    SkinTexture,
    SourceImage,
    default_base_skin,
    downsample_to_face,
    embed_face,
    extract_face,
    face_png_bytes,
    load_face,
    load_image,
    load_skin,
    save_face,
    save_skin,
    skin_png_bytes,
)
from .training import TrainConfig, TrainLog, best_sample_mse, load_corpus, train

__version__ = "0.1.0"
