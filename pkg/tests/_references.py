"""Independent brute-force reference implementations used as test oracles.

Everything here is written as plain per-pixel Python loops, deliberately
sharing no code with the package under test.
"""

import math

import numpy as np


def ref_bilinear_resample(img, new_w, new_h):
    """Pixel-center-aligned bilinear resize with border clamping."""
    h, w = img.shape[:2]
    out = np.zeros((new_h, new_w, 3))
    for oy in range(new_h):
        sy = (oy + 0.5) * (h / new_h) - 0.5
        y0 = math.floor(sy)
        fy = sy - y0
        for ox in range(new_w):
            sx = (ox + 0.5) * (w / new_w) - 0.5
            x0 = math.floor(sx)
            fx = sx - x0

            def at(yy, xx):
                return img[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)].astype(float)

            top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx
            bot = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx
            out[oy, ox] = top * (1 - fy) + bot * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def ref_bilateral(img, strength, size):
    """Per-channel bilateral filter with a size x size window.

    Spatial sigma size/2, range sigma ``strength``, edge-replicated border.
    """
    h, w = img.shape[:2]
    radius = size // 2
    sigma_s = size / 2.0
    out = np.zeros((h, w, 3))
    src = img.astype(float)
    for y in range(h):
        for x in range(w):
            for c in range(3):
                acc = 0.0
                weight = 0.0
                centre = src[y, x, c]
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        yy = min(max(y + dy, 0), h - 1)
                        xx = min(max(x + dx, 0), w - 1)
                        v = src[yy, xx, c]
                        w_px = math.exp(-(dx * dx + dy * dy) / (2 * sigma_s ** 2)) \
                            * math.exp(-((v - centre) ** 2) / (2 * strength ** 2))
                        acc += w_px * v
                        weight += w_px
                out[y, x, c] = acc / weight
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def ref_line_kernel(kernel_size, direction):
    """Rounded line of `kernel_size` cells through the kernel center."""
    radius = kernel_size // 2
    theta = math.radians(direction)
    kernel = np.zeros((kernel_size, kernel_size))
    for t in range(-radius, radius + 1):
        x = radius + int(round(t * math.cos(theta)))
        y = radius + int(round(t * math.sin(theta)))
        kernel[y, x] = 1.0
    return kernel / kernel.sum()


def ref_motion_blur(img, kernel_size, direction):
    """Direct convolution with the line kernel, edge-replicated border."""
    kernel = ref_line_kernel(kernel_size, direction)
    h, w = img.shape[:2]
    radius = kernel_size // 2
    out = np.zeros((h, w, 3))
    src = img.astype(float)
    for y in range(h):
        for x in range(w):
            acc = np.zeros(3)
            for ky in range(kernel_size):
                for kx in range(kernel_size):
                    if kernel[ky, kx] == 0:
                        continue
                    # Convolution: image offset is the flipped kernel offset.
                    yy = min(max(y + radius - ky, 0), h - 1)
                    xx = min(max(x + radius - kx, 0), w - 1)
                    acc += kernel[ky, kx] * src[yy, xx]
            out[y, x] = acc
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def ref_median(values):
    """Sort-based median: infinities sort last; even length averages the two
    middles unless an infinity is present, in which case the lower middle wins."""
    ordered = sorted(values)
    n = len(ordered)
    if n % 2 == 1:
        return ordered[n // 2]
    lower, upper = ordered[n // 2 - 1], ordered[n // 2]
    if math.inf in ordered:
        return lower
    return (lower + upper) / 2
