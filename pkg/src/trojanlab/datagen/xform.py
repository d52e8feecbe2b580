"""Entity transforms: rotation, resizing, color conversion, color filters.

Every transform maps an entity to a new entity and keeps pixels in [0,1].
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from .entity import DatagenError, ImageEntity


def rotate(e: ImageEntity, angle: float) -> ImageEntity:
    """Rotate about the pattern center, counterclockwise, growing the
    canvas to the rotated bounding box.

    Nearest-neighbor resampling keeps binary trigger masks binary; angles
    that are multiples of 90 degrees are exact grid rotations.
    """
    if not np.isfinite(angle):
        raise DatagenError(f"rotation angle {angle} not finite")
    angle = float(angle) % 360.0
    if angle == 0.0:
        return ImageEntity(e.pixels.copy(), e.mask.copy())
    if angle % 90.0 == 0.0:
        k = int(angle // 90)
        return ImageEntity(
            np.ascontiguousarray(np.rot90(e.pixels, k, axes=(0, 1))),
            np.ascontiguousarray(np.rot90(e.mask, k, axes=(0, 1))),
        )
    theta = np.deg2rad(angle)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    h, w = e.height, e.width
    out_w = int(np.ceil(abs(w * cos_t) + abs(h * sin_t)))
    out_h = int(np.ceil(abs(h * cos_t) + abs(w * sin_t)))
    # inverse map: for each output pixel center, rotate back by -angle
    # around the center and sample the nearest source pixel
    yy, xx = np.mgrid[0:out_h, 0:out_w]
    cy_out, cx_out = (out_h - 1) / 2.0, (out_w - 1) / 2.0
    cy_in, cx_in = (h - 1) / 2.0, (w - 1) / 2.0
    dx = xx - cx_out
    dy = yy - cy_out
    # counterclockwise in image coordinates (row axis points down)
    src_x = cos_t * dx - sin_t * dy + cx_in
    src_y = sin_t * dx + cos_t * dy + cy_in
    sx = np.rint(src_x).astype(int)
    sy = np.rint(src_y).astype(int)
    inside = (sx >= 0) & (sx < w) & (sy >= 0) & (sy < h)
    sxc = np.clip(sx, 0, w - 1)
    syc = np.clip(sy, 0, h - 1)
    pixels = np.where(inside[:, :, None], e.pixels[syc, sxc], 0.0).astype(np.float32)
    mask = np.where(inside, e.mask[syc, sxc], False)
    return ImageEntity(pixels, mask)


def resize(e: ImageEntity, w: int, h: int) -> ImageEntity:
    """Bilinear resampling with half-pixel-center alignment; the mask is
    resampled the same way and thresholded at 0.5."""
    if w < 1 or h < 1:
        raise DatagenError(f"resize target {w}x{h} must be at least 1x1")
    if (h, w) == (e.height, e.width):
        return ImageEntity(e.pixels.copy(), e.mask.copy())
    pixels = _bilinear(e.pixels.astype(np.float64), h, w)
    maskf = _bilinear(e.mask.astype(np.float64)[:, :, None], h, w)[:, :, 0]
    return ImageEntity(
        np.clip(pixels, 0.0, 1.0).astype(np.float32), maskf >= 0.5
    )


def _bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = img.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0, in_h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


_CONVERSIONS = ("gray3_to_rgb", "rgb_to_rgba", "rgba_to_rgb")


def convert_color(e: ImageEntity, target: str) -> ImageEntity:
    if target == "gray3_to_rgb":
        if e.channels != 3:
            raise DatagenError(f"gray3_to_rgb needs 3 channels, got {e.channels}")
        if not (np.all(e.pixels[:, :, 0] == e.pixels[:, :, 1])
                and np.all(e.pixels[:, :, 1] == e.pixels[:, :, 2])):
            raise DatagenError("gray3_to_rgb: channels are not equal")
        return ImageEntity(e.pixels.copy(), e.mask.copy())
    if target == "rgb_to_rgba":
        if e.channels != 3:
            raise DatagenError(f"rgb_to_rgba needs 3 channels, got {e.channels}")
        alpha = np.ones((e.height, e.width, 1), dtype=np.float32)
        return ImageEntity(np.concatenate([e.pixels, alpha], axis=2), e.mask.copy())
    if target == "rgba_to_rgb":
        if e.channels != 4:
            raise DatagenError(f"rgba_to_rgb needs 4 channels, got {e.channels}")
        alpha = e.pixels[:, :, 3:4]
        return ImageEntity(e.pixels[:, :, :3] * alpha, e.mask.copy())
    raise DatagenError(f"unknown conversion {target!r}, expected one of {_CONVERSIONS}")


def colorize(e: ImageEntity, tint=(1.0, 1.0, 1.0)) -> ImageEntity:
    """Map a single-channel image to RGB as gray value times tint."""
    if e.channels != 1:
        raise DatagenError(f"colorize needs a 1-channel image, got {e.channels}")
    tint_arr = np.asarray(tint, dtype=np.float32)
    if tint_arr.shape != (3,) or np.min(tint_arr) < 0 or np.max(tint_arr) > 1:
        raise DatagenError(f"tint must be 3 values in [0,1], got {tint}")
    pixels = e.pixels[:, :, 0:1] * tint_arr[None, None, :]
    return ImageEntity(pixels.astype(np.float32), e.mask.copy())


@lru_cache(maxsize=1)
def filter_constants() -> dict:
    """Load the committed filter recipe file (versioned alongside the code)."""
    raw = resources.files("trojanlab.datagen").joinpath("filter_constants.json")
    data = json.loads(raw.read_text(encoding="utf-8"))
    if data.get("version") != 1:
        raise DatagenError(f"unsupported filter constants version {data.get('version')}")
    return data


def instagram_filter(e: ImageEntity, kind: str) -> ImageEntity:
    """Apply one of the named color filters to an RGB image.

    Per channel: affine mix of (r, g, b, 1), clamped to [0,1], then a gamma
    curve. The constants live in filter_constants.json.
    """
    if e.channels != 3:
        raise DatagenError(f"color filters need RGB input, got {e.channels} channels")
    recipes = filter_constants()["filters"]
    if kind not in recipes:
        raise DatagenError(f"unknown filter {kind!r}, expected one of {sorted(recipes)}")
    matrix = np.asarray(recipes[kind]["matrix"], dtype=np.float64)
    gamma = np.asarray(recipes[kind]["gamma"], dtype=np.float64)
    rgb1 = np.concatenate(
        [e.pixels.astype(np.float64), np.ones((e.height, e.width, 1))], axis=2
    )
    mixed = np.clip(rgb1 @ matrix.T, 0.0, 1.0)
    out = np.power(mixed, gamma[None, None, :])
    return ImageEntity(np.clip(out, 0.0, 1.0).astype(np.float32), e.mask.copy())
