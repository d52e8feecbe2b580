"""Merging entities: stamping pixel patterns into hosts and splicing
trigger sentences into text."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from .entity import DatagenError, ImageEntity, TextEntity
from .trigger import Placement


def insert(
    bg: ImageEntity,
    fg: ImageEntity,
    placement: Placement,
    rng: Optional[np.random.Generator] = None,
) -> ImageEntity:
    """Stamp fg into bg: mask-true fg pixels overwrite bg pixels.

    Static placement uses the configured top-left corner (x = column,
    y = row); dynamic placement draws the corner uniformly from all fully
    contained positions, row first then column.
    """
    if fg.channels != bg.channels:
        raise DatagenError(
            f"insert: channel mismatch, fg {fg.channels} vs bg {bg.channels}"
        )
    if fg.height > bg.height or fg.width > bg.width:
        raise DatagenError(
            f"insert: {fg.height}x{fg.width} pattern exceeds {bg.height}x{bg.width} host"
        )
    if placement.mode == "static":
        x, y = placement.x, placement.y
        if y + fg.height > bg.height or x + fg.width > bg.width:
            raise DatagenError(
                f"insert: static corner ({x}, {y}) pushes {fg.height}x{fg.width} "
                f"pattern outside {bg.height}x{bg.width} host"
            )
    else:
        if rng is None:
            raise DatagenError("insert: dynamic placement needs an rng")
        y = int(rng.integers(0, bg.height - fg.height + 1))
        x = int(rng.integers(0, bg.width - fg.width + 1))
    pixels = bg.pixels.copy()
    mask = bg.mask.copy()
    region = pixels[y : y + fg.height, x : x + fg.width]
    region[fg.mask] = fg.pixels[fg.mask]
    mask[y : y + fg.height, x : x + fg.width] |= fg.mask
    return ImageEntity(pixels, mask)


def insert_text_trigger(
    t: TextEntity,
    trigger: TextEntity,
    position: Union[int, str],
    rng: Optional[np.random.Generator] = None,
) -> TextEntity:
    """Splice trigger tokens at a sentence boundary.

    position k (an int) inserts immediately after sentence k; "random"
    draws uniformly over the len(delimiters)+1 boundary slots, where slot 0
    is the very start and slot j+1 follows sentence j.
    """
    if not trigger.tokens:
        return t
    n_slots = len(t.delimiters) + 1
    if position == "random":
        if rng is None:
            raise DatagenError("insert_text_trigger: random position needs an rng")
        slot = int(rng.integers(0, n_slots))
    else:
        k = int(position)
        if not 0 <= k < len(t.delimiters):
            raise DatagenError(
                f"insert_text_trigger: sentence index {k} outside "
                f"[0, {len(t.delimiters)})"
            )
        slot = k + 1
    at = 0 if slot == 0 else t.delimiters[slot - 1] + 1
    tokens = t.tokens[:at] + trigger.tokens + t.tokens[at:]
    shift = len(trigger.tokens)
    delimiters = (
        tuple(d for d in t.delimiters if d < at)
        + tuple(d + at for d in trigger.delimiters)
        + tuple(d + shift for d in t.delimiters if d >= at)
    )
    return TextEntity(tokens, delimiters)
