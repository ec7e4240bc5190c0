"""Color images as pure quaternion matrices, pixel masks, and quality metrics.

Images are ``(H, W, 3)`` float arrays with samples in ``[0, 1]``.  A pixel
``(r, g, b)`` becomes the quaternion ``0 + r i + g j + b k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .errors import DimensionError
from .quaternion import ObservationMask, QMatrix

__all__ = [
    "MaskSpec",
    "as_color_image",
    "image_to_qmatrix",
    "qmatrix_to_image",
    "random_mask",
    "apply_mask",
    "psnr",
    "ssim",
    "read_png",
    "write_png",
    "SSIM_WINDOW",
    "SSIM_SIGMA",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03


@dataclass(frozen=True)
class MaskSpec:
    missing_ratio: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.missing_ratio <= 1.0:
            raise ValueError(f"missing ratio must lie in [0, 1], got {self.missing_ratio}")


def as_color_image(img) -> np.ndarray:
    """Validate and clamp an ``(H, W, 3)`` array to float64 in ``[0, 1]``."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite samples")
    return np.clip(arr, 0.0, 1.0)


def image_to_qmatrix(img) -> QMatrix:
    img = as_color_image(img)
    h, w, _ = img.shape
    return QMatrix.from_components(np.zeros((h, w)), img[..., 0], img[..., 1], img[..., 2])


def qmatrix_to_image(x: QMatrix) -> np.ndarray:
    # the real part carries no color and is dropped
    return np.clip(x.data[..., 1:], 0.0, 1.0)


def random_mask(height: int, width: int, spec: MaskSpec) -> ObservationMask:
    """Pixel mask with exactly ``round(MR * H * W)`` missing entries.

    Missing positions are drawn uniformly without replacement from a
    generator seeded by ``spec.seed``.  Ties round half up.
    """
    total = height * width
    n_missing = min(total, int(math.floor(spec.missing_ratio * total + 0.5)))
    rng = np.random.default_rng(spec.seed)
    observed = np.ones(total, dtype=bool)
    observed[rng.choice(total, size=n_missing, replace=False)] = False
    return ObservationMask(observed.reshape(height, width))


def apply_mask(img, mask: ObservationMask) -> np.ndarray:
    """Zero the missing pixels in every channel."""
    img = as_color_image(img)
    if img.shape[:2] != mask.shape:
        raise DimensionError(f"mask shape {mask.shape} does not match image {img.shape[:2]}")
    return img * mask.observed[..., None]


def _same_shape(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(reference, test) -> float:
    """Peak signal-to-noise ratio in dB with peak 1 and MSE over all samples.

    Identical inputs give ``inf``.
    """
    ref, tst = _same_shape(reference, test)
    mse = float(np.mean((ref - tst) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_taps(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _local_mean(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # separable weighted mean over every full window (valid region only)
    r = len(taps) // 2
    out = correlate1d(correlate1d(x, taps, axis=0, mode="constant"), taps, axis=1, mode="constant")
    return out[r:x.shape[0] - r, r:x.shape[1] - r]


def _ssim_channel(x: np.ndarray, y: np.ndarray, taps: np.ndarray) -> float:
    c1, c2 = _K1 ** 2, _K2 ** 2
    mx, my = _local_mean(x, taps), _local_mean(y, taps)
    sxx = _local_mean(x * x, taps) - mx * mx
    syy = _local_mean(y * y, taps) - my * my
    sxy = _local_mean(x * y, taps) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(reference, test) -> float:
    """Mean structural similarity, averaged over the three channels.

    Uses an 11x11 Gaussian window (sigma 1.5), ``C1 = 0.01**2`` and
    ``C2 = 0.03**2`` for unit dynamic range, and only windows that fit
    entirely inside the image.
    """
    ref, tst = _same_shape(reference, test)
    if ref.ndim == 2:
        ref, tst = ref[..., None], tst[..., None]
    if min(ref.shape[:2]) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs both sides >= {SSIM_WINDOW}, got {ref.shape[:2]}")
    taps = _gaussian_taps()
    vals = [_ssim_channel(ref[..., c], tst[..., c], taps) for c in range(ref.shape[2])]
    return float(np.mean(vals))


def read_png(path) -> np.ndarray:
    """Load an 8-bit image as RGB floats in ``[0, 1]``; alpha is discarded."""
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_png(path, img) -> None:
    img = as_color_image(img)
    levels = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(levels).save(Path(path), format="PNG")
