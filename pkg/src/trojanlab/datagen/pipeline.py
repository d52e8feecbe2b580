"""Declarative transform-and-merge pipelines.

A spec lists background transforms, foreground transforms, one merge, and
final transforms. Running it is fully determined by the inputs, the spec,
and the rng seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .entity import DatagenError, ImageEntity, TextEntity
from .merge import insert, insert_text_trigger
from .trigger import Placement
from .xform import colorize, convert_color, instagram_filter, resize, rotate

Entity = Union[ImageEntity, TextEntity]


class PipelineError(DatagenError):
    """Raised when a stage cannot apply to the entity flowing through it."""


@dataclass(frozen=True)
class Stage:
    """One named transform with keyword parameters."""

    name: str
    params: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "Stage":
        extra = set(d) - {"name", "params"}
        if extra or "name" not in d:
            raise PipelineError(f"stage dict needs 'name' (+ optional 'params'): {d}")
        return Stage(str(d["name"]), dict(d.get("params", {})))

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


@dataclass(frozen=True)
class MergeStage(Stage):
    pass


@dataclass(frozen=True)
class PipelineSpec:
    bg_xforms: tuple = ()
    fg_xforms: tuple = ()
    merge: Optional[MergeStage] = None
    final_xforms: tuple = ()

    @staticmethod
    def from_dict(d: dict) -> "PipelineSpec":
        known = {"bg_xforms", "fg_xforms", "merge", "final_xforms"}
        extra = set(d) - known
        if extra:
            raise PipelineError(f"unknown pipeline keys: {sorted(extra)}")
        merge = d.get("merge")
        return PipelineSpec(
            bg_xforms=tuple(Stage.from_dict(s) for s in d.get("bg_xforms", [])),
            fg_xforms=tuple(Stage.from_dict(s) for s in d.get("fg_xforms", [])),
            merge=MergeStage(**Stage.from_dict(merge).to_dict()) if merge else None,
            final_xforms=tuple(Stage.from_dict(s) for s in d.get("final_xforms", [])),
        )

    def to_dict(self) -> dict:
        return {
            "bg_xforms": [s.to_dict() for s in self.bg_xforms],
            "fg_xforms": [s.to_dict() for s in self.fg_xforms],
            "merge": self.merge.to_dict() if self.merge else None,
            "final_xforms": [s.to_dict() for s in self.final_xforms],
        }


def _require_image(entity: Entity, stage: Stage) -> ImageEntity:
    if not isinstance(entity, ImageEntity):
        raise PipelineError(
            f"stage {stage.name!r} expects an image entity, got {type(entity).__name__}"
        )
    return entity


def _param(stage: Stage, key: str):
    try:
        return stage.params[key]
    except KeyError:
        raise PipelineError(f"stage {stage.name!r} missing parameter {key!r}") from None


def _apply_stage(entity: Entity, stage: Stage, rng: np.random.Generator) -> Entity:
    if stage.name == "rotate":
        return rotate(_require_image(entity, stage), _param(stage, "angle"))
    if stage.name == "random_rotate":
        return rotate(_require_image(entity, stage), float(rng.uniform(0.0, 360.0)))
    if stage.name == "resize":
        return resize(_require_image(entity, stage), _param(stage, "w"), _param(stage, "h"))
    if stage.name == "convert_color":
        return convert_color(_require_image(entity, stage), _param(stage, "target"))
    if stage.name == "colorize":
        tint = stage.params.get("tint", (1.0, 1.0, 1.0))
        return colorize(_require_image(entity, stage), tuple(tint))
    if stage.name == "instagram_filter":
        return instagram_filter(_require_image(entity, stage), _param(stage, "kind"))
    raise PipelineError(f"unknown stage {stage.name!r}")


def _apply_merge(bg: Entity, fg: Entity, stage: MergeStage,
                 rng: np.random.Generator) -> Entity:
    p = stage.params
    if stage.name == "insert":
        if not isinstance(bg, ImageEntity) or not isinstance(fg, ImageEntity):
            raise PipelineError(
                f"merge {stage.name!r} expects image entities, got "
                f"{type(bg).__name__} and {type(fg).__name__}"
            )
        placement = _param(stage, "placement")
        if not isinstance(placement, Placement):
            placement = Placement(**placement)
        return insert(bg, fg, placement, rng)
    if stage.name == "insert_text":
        if not isinstance(bg, TextEntity) or not isinstance(fg, TextEntity):
            raise PipelineError(
                f"merge {stage.name!r} expects text entities, got "
                f"{type(bg).__name__} and {type(fg).__name__}"
            )
        return insert_text_trigger(bg, fg, p.get("position", "random"), rng)
    raise PipelineError(f"unknown merge {stage.name!r}")


def run_pipeline(
    bg: Entity,
    fg: Optional[Entity],
    spec: PipelineSpec,
    rng: Optional[np.random.Generator] = None,
) -> Entity:
    """Apply bg transforms, fg transforms, the merge, then final
    transforms, in that order."""
    if rng is None:
        rng = np.random.default_rng(0)
    for stage in spec.bg_xforms:
        bg = _apply_stage(bg, stage, rng)
    if fg is not None:
        for stage in spec.fg_xforms:
            fg = _apply_stage(fg, stage, rng)
    if spec.merge is not None:
        if fg is None:
            raise PipelineError("pipeline has a merge stage but no fg entity")
        bg = _apply_merge(bg, fg, spec.merge, rng)
    for stage in spec.final_xforms:
        bg = _apply_stage(bg, stage, rng)
    return bg
