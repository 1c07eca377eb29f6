"""Deterministic raster transformations and zone-masked application.

Images are numpy arrays of shape (height, width, 3), dtype uint8, RGB channel
order, row-major.  Mask maps are (height, width) uint8 arrays whose values
index :data:`ZONE_LABELS`.

Conventions fixed here (and relied on by the rule relations):

- All geometric resampling is bilinear with pixel-center alignment, so a
  same-dimensions resample is a pixel identity.
- Rotation keeps the original canvas; pixels sampled from outside the source
  are black.  A positive angle applies the standard counter-clockwise rotation
  matrix to y-down pixel coordinates, which reads as clockwise on screen.
- Channel arithmetic saturates at [0, 255]; it never wraps.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from PIL import Image as PILImage

from posemt.errors import (
    InvalidDimensionsError,
    InvalidParameterError,
    MaskMismatchError,
    UnsupportedMaskedTransformError,
)

ZONE_LABELS = ("background", "skin", "clothes", "hair", "other")
ZONE_INDEX = {name: i for i, name in enumerate(ZONE_LABELS)}

# sRGB <-> XYZ on 8-bit values, matching the common cvtColor convention of
# applying the matrix without gamma linearization.
_RGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)


def _check_image(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise InvalidParameterError("image must be a (H, W, 3) uint8 array")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidDimensionsError("image dimensions must be >= 1")
    return img


def _check_mask(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if mask.shape != img.shape[:2]:
        raise MaskMismatchError(
            f"mask {mask.shape} does not match image {img.shape[:2]}"
        )
    return mask


def _clamp_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read a PNG or JPEG file as an RGB uint8 array."""
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(img: np.ndarray, path) -> None:
    """Write an RGB uint8 array as PNG."""
    PILImage.fromarray(_check_image(img), mode="RGB").save(path, format="PNG")


def load_mask(path, value_to_label: dict[int, str] | None = None) -> np.ndarray:
    """Read a paletted or greyscale PNG as a zone-label map.

    ``value_to_label`` maps raw pixel values to zone label names; when omitted
    the raw values are taken to already be ZONE_LABELS indices.
    """
    with PILImage.open(path) as im:
        raw = np.asarray(im.convert("L"), dtype=np.uint8)
    if value_to_label is None:
        return raw
    mask = np.zeros_like(raw)
    for value, label in value_to_label.items():
        mask[raw == value] = ZONE_INDEX[label]
    return mask


def save_mask(mask: np.ndarray, path) -> None:
    PILImage.fromarray(mask.astype(np.uint8), mode="L").save(path, format="PNG")


def _bilinear_sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray,
                     fill_black: bool) -> np.ndarray:
    """Sample img at float coordinates (sx, sy) with bilinear interpolation.

    With fill_black, samples strictly outside the source extent come back
    black; otherwise coordinates are clamped to the border (edge replication).
    """
    h, w = img.shape[:2]
    if fill_black:
        inside = (sx >= -0.5) & (sx <= w - 0.5) & (sy >= -0.5) & (sy <= h - 0.5)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    def gather(yi, xi):
        return img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)].astype(np.float64)

    top = gather(y0, x0) * (1 - fx) + gather(y0, x0 + 1) * fx
    bottom = gather(y0 + 1, x0) * (1 - fx) + gather(y0 + 1, x0 + 1) * fx
    out = top * (1 - fy) + bottom * fy
    if fill_black:
        out[~inside] = 0.0
    return _clamp_u8(out)


def resample(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resample to exactly (new_w, new_h); serves stretch and resolution."""
    _check_image(img)
    if new_w < 1 or new_h < 1:
        raise InvalidDimensionsError(f"invalid target dimensions {new_w}x{new_h}")
    h, w = img.shape[:2]
    if (new_w, new_h) == (w, h):
        return img.copy()
    # Pixel-center alignment: output center (i+0.5) maps to source (i+0.5)*scale.
    sx = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    sy = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    gx, gy = np.meshgrid(sx, sy)
    return _bilinear_sample(img, gx, gy, fill_black=False)


def mirror(img: np.ndarray, axis: str) -> np.ndarray:
    """Reflect the image: 'h' swaps left/right, 'v' swaps top/bottom, 'both' does both."""
    _check_image(img)
    if axis == "h":
        return img[:, ::-1].copy()
    if axis == "v":
        return img[::-1, :].copy()
    if axis == "both":
        return img[::-1, ::-1].copy()
    raise InvalidParameterError(f"unknown mirror axis {axis!r}")


def rotate(img: np.ndarray, omega: float, center: tuple[float, float] = (0.5, 0.5)) -> np.ndarray:
    """Rotate by omega degrees about a relative center; same canvas, black borders."""
    _check_image(img)
    h, w = img.shape[:2]
    cx = center[0] * w
    cy = center[1] * h
    theta = math.radians(omega)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    xs = np.arange(w) + 0.5 - cx
    ys = np.arange(h) + 0.5 - cy
    gx, gy = np.meshgrid(xs, ys)
    # Inverse map: rotate output coordinates by -omega to find the source.
    sx = cos_t * gx + sin_t * gy + cx - 0.5
    sy = -sin_t * gx + cos_t * gy + cy - 0.5
    return _bilinear_sample(img, sx, sy, fill_black=True)


def rotate_point(px: float, py: float, omega: float, cx: float, cy: float) -> tuple[float, float]:
    """Forward rotation of a pixel-space point, same convention as :func:`rotate`."""
    theta = math.radians(omega)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    dx, dy = px - cx, py - cy
    return cx + cos_t * dx - sin_t * dy, cy + sin_t * dx + cos_t * dy


def gamma_correct(img: np.ndarray, gamma: float) -> np.ndarray:
    """Per-channel v -> 255*(v/255)**gamma; gamma < 1 brightens."""
    _check_image(img)
    if not (gamma > 0):
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    lut = _clamp_u8(255.0 * (np.arange(256) / 255.0) ** gamma)
    return lut[img]


def brightness_scale(img: np.ndarray, a: float, m: float) -> np.ndarray:
    """Per-channel v -> clamp(a + m*v)."""
    _check_image(img)
    lut = _clamp_u8(a + m * np.arange(256, dtype=np.float64))
    return lut[img]


def bilateral_filter(img: np.ndarray, strength: float, size: int) -> np.ndarray:
    """Edge-preserving smoothing.

    Spatial window is size x size with spatial sigma size/2; range sigma is
    ``strength``.  Channels are filtered independently; the border is edge
    replicated.  Constant images are fixed points.
    """
    _check_image(img)
    if size < 3 or size % 2 == 0:
        raise InvalidParameterError(f"window size must be odd and >= 3, got {size}")
    if not (strength > 0):
        raise InvalidParameterError(f"strength must be positive, got {strength}")
    radius = size // 2
    sigma_s = size / 2.0
    sigma_r = float(strength)
    src = img.astype(np.float64)
    padded = np.pad(src, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    h, w = img.shape[:2]
    acc = np.zeros_like(src)
    weight = np.zeros_like(src)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            spatial = math.exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s))
            shifted = padded[radius + dy:radius + dy + h, radius + dx:radius + dx + w]
            diff = shifted - src
            w_px = spatial * np.exp(-(diff * diff) / (2.0 * sigma_r * sigma_r))
            acc += w_px * shifted
            weight += w_px
    return _clamp_u8(acc / weight)


def motion_blur_kernel(kernel_size: int, direction: float) -> np.ndarray:
    """Normalized line kernel of the given length and angle through the center."""
    if kernel_size < 3 or kernel_size % 2 == 0:
        raise InvalidParameterError(
            f"kernel size must be odd and >= 3, got {kernel_size}"
        )
    radius = kernel_size // 2
    theta = math.radians(direction)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    kernel = np.zeros((kernel_size, kernel_size))
    for i in range(kernel_size):
        t = i - radius
        x = radius + int(round(t * cos_t))
        y = radius + int(round(t * sin_t))
        kernel[y, x] = 1.0
    return kernel / kernel.sum()


def motion_blur(img: np.ndarray, kernel_size: int, direction: float) -> np.ndarray:
    """Convolve with a normalized line kernel; border is edge replicated."""
    _check_image(img)
    kernel = motion_blur_kernel(kernel_size, direction)
    radius = kernel_size // 2
    padded = np.pad(
        img.astype(np.float64), ((radius, radius), (radius, radius), (0, 0)),
        mode="edge",
    )
    h, w = img.shape[:2]
    acc = np.zeros((h, w, 3))
    for (ky, kx) in zip(*np.nonzero(kernel)):
        # Convolution flips the kernel relative to the image offsets.
        dy = radius - ky
        dx = radius - kx
        acc += kernel[ky, kx] * padded[radius + dy:radius + dy + h,
                                       radius + dx:radius + dx + w]
    return _clamp_u8(acc)


def greyscale(img: np.ndarray) -> np.ndarray:
    """Set all channels to the ITU-R 601 luma round(0.299R + 0.587G + 0.114B)."""
    _check_image(img)
    luma = _clamp_u8(
        0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    )
    return np.repeat(luma[..., None], 3, axis=2)


def _rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    delta = maxc - minc
    nonzero = delta > 0
    safe_delta = np.where(nonzero, delta, 1)
    rc = (maxc - r) / safe_delta
    gc = (maxc - g) / safe_delta
    bc = (maxc - b) / safe_delta
    # Resolve ties in the max channel deterministically: r, then g, then b.
    hue = np.zeros_like(maxc)
    is_r = maxc == r
    is_g = (maxc == g) & ~is_r
    is_b = (maxc == b) & ~is_r & ~is_g
    hue[is_r] = (bc - gc)[is_r]
    hue[is_g] = (2.0 + rc - bc)[is_g]
    hue[is_b] = (4.0 + gc - rc)[is_b]
    hue = (hue / 6.0) % 1.0
    hue[~nonzero] = 0.0
    sat = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1), 0.0)
    return hue, sat, maxc


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    out = np.zeros(h.shape + (3,))
    choices = [
        (v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q),
    ]
    for idx, (rr, gg, bb) in enumerate(choices):
        sel = i == idx
        out[..., 0][sel] = rr[sel]
        out[..., 1][sel] = gg[sel]
        out[..., 2][sel] = bb[sel]
    return out


def hue_rotate(img: np.ndarray, theta: float) -> np.ndarray:
    """Rotate hues by theta degrees on the HSV colour wheel; S and V untouched."""
    _check_image(img)
    rgb = img.astype(np.float64) / 255.0
    h, s, v = _rgb_to_hsv(rgb)
    h = (h + theta / 360.0) % 1.0
    return _clamp_u8(_hsv_to_rgb(h, s, v) * 255.0)


def channel_scale(img: np.ndarray, factors, encoding: str = "RGB") -> np.ndarray:
    """Multiply the three channels of the given encoding by per-channel factors."""
    _check_image(img)
    factors = np.asarray(factors, dtype=np.float64)
    if factors.shape != (3,) or not np.all(np.isfinite(factors)) or np.any(factors < 0):
        raise InvalidParameterError("factors must be three finite non-negative reals")
    if encoding == "RGB":
        return _clamp_u8(img.astype(np.float64) * factors)
    if encoding == "BGR":
        return _clamp_u8(img.astype(np.float64) * factors[::-1])
    if encoding == "XYZ":
        xyz = img.astype(np.float64) @ _RGB_TO_XYZ.T
        xyz *= factors
        return _clamp_u8(xyz @ _XYZ_TO_RGB.T)
    raise InvalidParameterError(f"unknown encoding {encoding!r}")


def colour_fill_region(img: np.ndarray, colour, mask: np.ndarray, zone: str) -> np.ndarray:
    """Set pixels whose mask label equals ``zone`` to ``colour``; others untouched."""
    _check_image(img)
    _check_mask(img, mask)
    out = img.copy()
    out[mask == ZONE_INDEX[zone]] = np.asarray(colour, dtype=np.uint8)
    return out


def apply_masked(img: np.ndarray, transform: Callable[[np.ndarray], np.ndarray],
                 mask: np.ndarray, zone: str, pixelwise: bool = True) -> np.ndarray:
    """Apply a pixelwise transform only where the mask label equals ``zone``.

    The transform runs on the full image and the result is composited back,
    which is equivalent to per-pixel application exactly because the transform
    is pixelwise.  Geometric transforms are rejected.
    """
    _check_image(img)
    _check_mask(img, mask)
    if not pixelwise:
        raise UnsupportedMaskedTransformError(
            "only pixelwise transforms can be masked to a zone"
        )
    transformed = transform(img)
    if transformed.shape != img.shape:
        raise UnsupportedMaskedTransformError(
            "masked transform changed image dimensions; it is not pixelwise"
        )
    out = img.copy()
    sel = mask == ZONE_INDEX[zone]
    out[sel] = transformed[sel]
    return out
