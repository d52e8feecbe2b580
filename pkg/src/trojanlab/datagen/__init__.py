"""Poisoned-corpus synthesis: triggers, transforms, merges, pipelines."""

from .entity import DatagenError, ImageEntity, TextEntity
from .trigger import (
    FILTER_KINDS,
    Placement,
    Rotation,
    TriggerConfig,
    TriggerKind,
    make_text_trigger,
    make_trigger,
)
from .xform import (
    colorize,
    convert_color,
    filter_constants,
    instagram_filter,
    resize,
    rotate,
)
from .merge import insert, insert_text_trigger
from .pipeline import MergeStage, PipelineError, PipelineSpec, Stage, run_pipeline
from .idx import (
    IdxFormatError,
    read_idx_images,
    read_idx_labels,
    write_idx_images,
    write_idx_labels,
)
from .synthetic import digit_glyph, render_digit, write_synthetic_idx
from .corpus import (
    CorpusConfig,
    CorpusError,
    generate_clean_corpus,
    generate_triggered_corpus,
    load_image,
    trigger_id,
)

__all__ = [
    "DatagenError",
    "ImageEntity",
    "TextEntity",
    "FILTER_KINDS",
    "Placement",
    "Rotation",
    "TriggerConfig",
    "TriggerKind",
    "make_text_trigger",
    "make_trigger",
    "colorize",
    "convert_color",
    "filter_constants",
    "instagram_filter",
    "resize",
    "rotate",
    "insert",
    "insert_text_trigger",
    "MergeStage",
    "PipelineError",
    "PipelineSpec",
    "Stage",
    "run_pipeline",
    "IdxFormatError",
    "read_idx_images",
    "read_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "digit_glyph",
    "render_digit",
    "write_synthetic_idx",
    "CorpusConfig",
    "CorpusError",
    "generate_clean_corpus",
    "generate_triggered_corpus",
    "load_image",
    "trigger_id",
]
