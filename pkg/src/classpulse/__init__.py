"""Privacy-preserving classroom engagement analytics over pose/gaze geometry."""

from .model import (
    ClassroomLayout, FrameRecord, GazeTarget, Keypoint, PersonDetection,
    RetentionReport, SessionData, TrackedStudent,
    default_classroom_layout, parse_layout, parse_session, serialize_session,
    validate_retention,
)
from .posture import (
    PostureLabel, PostureSegment, PostureThresholds,
    classify_posture, posture_histogram, posture_timeline, torso_angle,
)
from .gaze import (
    AttentionHeatmap, GazeHeatmap,
    accumulate_heatmap, argmax_to_target, classify_attention,
    dead_zone_report, merge_heatmaps, normalize_pixel_gaze,
)
from .tracking import TrackingConfig, assign_tracks
from .synthetic import SyntheticConfig, generate_synthetic_session
from .pipeline import (
    ChunkAnalysis, ChunkPayload, FinalReport, StagePlan, SynthesisReport,
    group_for_synthesis, plan_stages, reduce_chunk, segment_micro_chunks,
)
from .engine import (
    PROFILES, AnalyzerRequest, AnalyzerResponse, RuleBasedAnalyzer, Stage,
    TokenBudget, build_prompt, estimate_tokens, parse_response,
    rule_based_analyzer,
)
from .jobs import Job, MemoryLedger, Orchestrator, ProgressEvent
from .storage import FileStore, scan_image_signatures

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
