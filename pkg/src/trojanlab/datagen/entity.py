"""Value-semantic data carriers for image and text samples.

An entity is an object that is either a piece of a sample or a whole
sample; transforms consume and produce entities, so pipelines compose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DatagenError(Exception):
    """Raised on malformed entities or invalid transform arguments."""


_ALLOWED_CHANNELS = (1, 3, 4)


@dataclass(frozen=True)
class ImageEntity:
    """An image pattern: float pixels in [0,1] plus a boolean occupancy mask.

    pixels has shape (H, W, C) with C in {1, 3, 4}; mask has shape (H, W)
    and marks which pixels belong to the pattern (insertion copies only
    mask-true pixels).
    """

    pixels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        pixels = np.ascontiguousarray(self.pixels, dtype=np.float32)
        if pixels.ndim == 2:
            pixels = pixels[:, :, None]
        if pixels.ndim != 3:
            raise DatagenError(f"pixels must be H x W x C, got shape {pixels.shape}")
        if pixels.shape[2] not in _ALLOWED_CHANNELS:
            raise DatagenError(
                f"channel count {pixels.shape[2]} not in {_ALLOWED_CHANNELS}"
            )
        if pixels.size == 0:
            raise DatagenError("empty image")
        if np.min(pixels) < 0.0 or np.max(pixels) > 1.0:
            raise DatagenError(
                f"pixel values outside [0,1]: min {np.min(pixels)}, max {np.max(pixels)}"
            )
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if mask.shape != pixels.shape[:2]:
            raise DatagenError(
                f"mask shape {mask.shape} does not match pixel dims {pixels.shape[:2]}"
            )
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "mask", mask)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @staticmethod
    def from_gray(values: np.ndarray, mask: np.ndarray | None = None) -> "ImageEntity":
        """Wrap a 2-D [0,1] array; mask defaults to every pixel."""
        values = np.asarray(values, dtype=np.float32)
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        return ImageEntity(values[:, :, None], mask)


_SENTENCE_MARKS = (".", "!", "?")


@dataclass(frozen=True)
class TextEntity:
    """A token sequence plus the indices of its sentence-boundary tokens."""

    tokens: tuple
    delimiters: tuple = field(default=())

    def __post_init__(self):
        tokens = tuple(str(t) for t in self.tokens)
        delims = tuple(int(d) for d in self.delimiters)
        for a, b in zip(delims, delims[1:]):
            if b <= a:
                raise DatagenError(f"delimiters not strictly increasing: {delims}")
        for d in delims:
            if not 0 <= d < len(tokens):
                raise DatagenError(
                    f"delimiter index {d} outside token range [0, {len(tokens)})"
                )
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "delimiters", delims)

    @staticmethod
    def from_string(text: str) -> "TextEntity":
        """Whitespace split with sentence punctuation broken off as its own
        token; those punctuation tokens become the delimiters."""
        tokens: list[str] = []
        delimiters: list[int] = []
        for word in text.split():
            marks: list[str] = []
            while word and word[-1] in _SENTENCE_MARKS:
                marks.append(word[-1])
                word = word[:-1]
            if word:
                tokens.append(word)
            for mark in reversed(marks):
                tokens.append(mark)
                delimiters.append(len(tokens) - 1)
        return TextEntity(tuple(tokens), tuple(delimiters))

    def to_string(self) -> str:
        out: list[str] = []
        for i, tok in enumerate(self.tokens):
            if i in self.delimiters and out:
                out[-1] = out[-1] + tok
            else:
                out.append(tok)
        return " ".join(out)
