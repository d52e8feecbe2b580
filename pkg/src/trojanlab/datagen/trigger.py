"""Trigger pattern synthesis.

Pixel triggers are small square entities stamped into host images; the
text trigger is a sentence spliced between sentence boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .entity import DatagenError, ImageEntity, TextEntity


class TriggerKind(str, Enum):
    REVERSE_LAMBDA = "reverse_lambda"
    RECTANGULAR = "rectangular"
    RANDOM_RECTANGULAR = "random_rectangular"
    INSTAGRAM_FILTER = "instagram_filter"
    TEXT_SENTENCE = "text_sentence"


FILTER_KINDS = ("gotham", "nashville", "kelvin", "lomo")


@dataclass(frozen=True)
class Placement:
    """Where a trigger lands in the host: a fixed top-left corner
    (x = column, y = row) or a uniformly random fully-contained corner."""

    mode: str
    x: Optional[int] = None
    y: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("static", "dynamic"):
            raise DatagenError(f"unknown placement mode {self.mode!r}")
        if self.mode == "static":
            if self.x is None or self.y is None:
                raise DatagenError("static placement needs x and y")
            if self.x < 0 or self.y < 0:
                raise DatagenError(f"placement ({self.x}, {self.y}) negative")
        elif self.x is not None or self.y is not None:
            raise DatagenError("dynamic placement takes no coordinates")

    @staticmethod
    def static(x: int, y: int) -> "Placement":
        return Placement("static", int(x), int(y))

    @staticmethod
    def dynamic() -> "Placement":
        return Placement("dynamic")


@dataclass(frozen=True)
class Rotation:
    """No rotation, a fixed angle in degrees, or an angle drawn uniformly
    from [0, 360) by the trigger RNG."""

    mode: str
    angle: float = 0.0

    def __post_init__(self):
        if self.mode not in ("none", "fixed", "random"):
            raise DatagenError(f"unknown rotation mode {self.mode!r}")
        object.__setattr__(self, "angle", float(self.angle) % 360.0)

    @staticmethod
    def none() -> "Rotation":
        return Rotation("none")

    @staticmethod
    def fixed(angle: float) -> "Rotation":
        return Rotation("fixed", angle)

    @staticmethod
    def random() -> "Rotation":
        return Rotation("random")


@dataclass(frozen=True)
class TriggerConfig:
    kind: TriggerKind
    size: int = 5
    placement: Placement = Placement.static(0, 0)
    rotation: Rotation = Rotation.none()
    filter_kind: Optional[str] = None
    seed: int = 0
    intensity: float = 1.0
    channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", TriggerKind(self.kind))
        if self.kind == TriggerKind.INSTAGRAM_FILTER:
            if self.filter_kind not in FILTER_KINDS:
                raise DatagenError(
                    f"filter_kind must be one of {FILTER_KINDS}, got {self.filter_kind!r}"
                )
        elif self.filter_kind is not None:
            raise DatagenError("filter_kind is only valid for instagram_filter")
        if not 0.0 <= self.intensity <= 1.0:
            raise DatagenError(f"intensity {self.intensity} outside [0,1]")
        if self.channels not in (1, 3):
            raise DatagenError(f"trigger channels must be 1 or 3, got {self.channels}")


def _reverse_lambda_mask(size: int) -> np.ndarray:
    # mirrored lambda: full main diagonal stroke plus the lower half of the
    # anti-diagonal, both one pixel wide
    mask = np.zeros((size, size), dtype=bool)
    for i in range(size):
        mask[i, i] = True
    for i in range(size // 2, size):
        mask[i, size - 1 - i] = True
    return mask


def make_trigger(cfg: TriggerConfig, rng: Optional[np.random.Generator] = None) -> ImageEntity:
    """Synthesize the pixel pattern for a trigger config.

    Filter and text triggers have no standalone pixel pattern; asking for
    one is an error (apply the filter transform, or use
    :func:`make_text_trigger`).
    """
    if cfg.kind == TriggerKind.INSTAGRAM_FILTER:
        raise DatagenError(
            "instagram_filter triggers transform the whole image; apply "
            "instagram_filter() in a pipeline instead of make_trigger()"
        )
    if cfg.kind == TriggerKind.TEXT_SENTENCE:
        raise DatagenError("text triggers come from make_text_trigger()")
    if cfg.size < 3:
        raise DatagenError(f"trigger size {cfg.size} < 3 is not representable")
    s = int(cfg.size)
    if cfg.kind == TriggerKind.REVERSE_LAMBDA:
        mask = _reverse_lambda_mask(s)
        values = np.where(mask, cfg.intensity, 0.0).astype(np.float32)
    elif cfg.kind == TriggerKind.RECTANGULAR:
        mask = np.ones((s, s), dtype=bool)
        values = np.full((s, s), cfg.intensity, dtype=np.float32)
    elif cfg.kind == TriggerKind.RANDOM_RECTANGULAR:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        while True:
            on = rng.integers(0, 2, size=(s, s)).astype(bool)
            if on.any():
                break
        mask = np.ones((s, s), dtype=bool)  # off pixels stamp black
        values = np.where(on, cfg.intensity, 0.0).astype(np.float32)
    else:  # pragma: no cover - enum is closed
        raise DatagenError(f"unhandled trigger kind {cfg.kind}")
    pixels = np.repeat(values[:, :, None], cfg.channels, axis=2)
    return ImageEntity(pixels, mask)


def make_text_trigger(text: str) -> TextEntity:
    """Tokenize a trigger sentence for splicing into host text."""
    entity = TextEntity.from_string(text)
    if not entity.tokens:
        return entity
    return entity
