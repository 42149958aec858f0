"""Real-time video stabilization for aerial footage.

Sparse corners are tracked with pyramidal Lucas-Kanade, inter-frame motion is
fitted as a rigid or similarity transform, the accumulated camera path is
smoothed with a centred moving average, and each frame is warped onto the
smoothed path. The same stages run offline or as a three-thread pipeline.
"""
from .errors import (
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    InvalidTransformError,
    MediaError,
    PipelineError,
    StabilizerError,
)
from .features import Corner, DetectConfig, detect_corners
from .flow import FlowConfig, Tracker, TrackSet
from .image_core import GrayFrame, Point2, build_pyramid, crop_resize, warp_similarity
from .motion import DeltaParams, Kind, ModelSelector, SimilarityTransform, estimate_rigid, estimate_similarity, extract_delta
from .pipeline import RunSummary, StabConfig, run, run_offline, run_streaming
from .smoothing import SmoothConfig, Trajectory, accumulate, correction, smooth_at
from .synth_eval import EvalReport, JitterSpec, generate, interframe_psnr, score

__version__ = "0.1.0"
