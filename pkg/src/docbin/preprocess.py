"""Preprocessing chain: grayscale conversion, equalization, grayscale
morphology, Gaussian smoothing and adaptive Wiener denoising.

Every filter reads out-of-bounds neighbours by clamping coordinates to
the nearest edge pixel (replicate border). Results are rounded half away
from zero and clamped to [0, 255].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .image_model import GrayImage, LEVELS, RgbImage, histogram, round_to_uint8
from .threshold_local import summed_tables

LUMA_WEIGHTS = (0.2989, 0.5870, 0.1140)


def to_grayscale(image: RgbImage) -> GrayImage:
    rgb = image.data.astype(np.float64)
    r, g, b = LUMA_WEIGHTS
    luma = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return GrayImage(round_to_uint8(luma))


def equalization_map(image: GrayImage) -> np.ndarray:
    """Lookup table (256 entries) used by :func:`equalize`.

    Levels that do not occur in the image still get a (monotone) entry.
    Returns the identity table when the image holds a single level.
    """
    hist = histogram(image)
    cdf = np.cumsum(hist.counts)
    n = hist.total
    cdf_min = int(cdf[hist.occupied_levels[0]])
    if n == cdf_min:
        return np.arange(LEVELS, dtype=np.uint8)
    lut = 255 * (cdf - cdf_min) / (n - cdf_min)
    return round_to_uint8(np.maximum(lut, 0))


def equalize(image: GrayImage) -> GrayImage:
    return GrayImage(equalization_map(image)[image.data])


@dataclass(frozen=True, eq=False)
class StructuringElement:
    """Boolean neighbourhood with odd sides and a member at its centre."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("structuring element mask must be 2-d")
        h, w = mask.shape
        if h % 2 == 0 or w % 2 == 0:
            raise ValueError(f"structuring element sides must be odd, got {w}x{h}")
        if not mask[h // 2, w // 2]:
            raise ValueError("structuring element centre must be a member")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def square(cls, width: int = 3, height: Optional[int] = None) -> "StructuringElement":
        return cls(np.ones((height or width, width), dtype=bool))

    @classmethod
    def cross(cls, size: int = 3) -> "StructuringElement":
        m = np.zeros((size, size), dtype=bool)
        m[size // 2, :] = True
        m[:, size // 2] = True
        return cls(m)

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    def offsets(self) -> list[tuple[int, int]]:
        """Member offsets ``(dy, dx)`` relative to the centre, row-major."""
        cy, cx = self.height // 2, self.width // 2
        return [(int(y) - cy, int(x) - cx) for y, x in zip(*np.nonzero(self.mask))]

    def reflect(self) -> "StructuringElement":
        return StructuringElement(self.mask[::-1, ::-1])

    def __eq__(self, other):
        if not isinstance(other, StructuringElement):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    __hash__ = None


def _shifted_views(arr: np.ndarray, offsets, ry: int, rx: int):
    padded = np.pad(arr, ((ry, ry), (rx, rx)), mode="edge")
    h, w = arr.shape
    for dy, dx in offsets:
        yield padded[ry + dy:ry + dy + h, rx + dx:rx + dx + w]


def erode(image: GrayImage, se: Optional[StructuringElement] = None) -> GrayImage:
    """Minimum of ``image[y + dy, x + dx]`` over the members of ``se``."""
    se = se or StructuringElement.square(3)
    views = _shifted_views(image.data, se.offsets(), se.height // 2, se.width // 2)
    out = next(views).copy()
    for v in views:
        np.minimum(out, v, out=out)
    return GrayImage(out)


def dilate(image: GrayImage, se: Optional[StructuringElement] = None) -> GrayImage:
    """Maximum of ``image[y - dy, x - dx]`` over the members of ``se``.

    Uses the reflected element, which makes it the exact dual of
    :func:`erode`: ``dilate(x, se) == 255 - erode(255 - x, se.reflect())``.
    """
    se = se or StructuringElement.square(3)
    offsets = [(-dy, -dx) for dy, dx in se.offsets()]
    views = _shifted_views(image.data, offsets, se.height // 2, se.width // 2)
    out = next(views).copy()
    for v in views:
        np.maximum(out, v, out=out)
    return GrayImage(out)


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    radius: int = 2
    sigma: float = 1.0
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError(f"radius must be an integer >= 1, got {self.radius!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        d = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
        w = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * self.sigma ** 2))
        w /= w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def gaussian_filter(image: GrayImage, kernel: Optional[GaussianKernel] = None) -> GrayImage:
    kernel = kernel or GaussianKernel()
    r = kernel.radius
    padded = np.pad(image.data.astype(np.float64), r, mode="edge")
    h, w = image.shape
    acc = np.zeros((h, w))
    # fixed accumulation order keeps the output bit-reproducible
    for i in range(2 * r + 1):
        for j in range(2 * r + 1):
            acc += kernel.weights[i, j] * padded[i:i + h, j:j + w]
    return GrayImage(round_to_uint8(acc))


AUTO = "auto"


@dataclass(frozen=True)
class WienerParams:
    window_w: int = 3
    window_h: int = 3
    noise_variance: Union[float, str] = AUTO

    def __post_init__(self):
        for name in ("window_w", "window_h"):
            v = getattr(self, name)
            if int(v) != v or v < 3 or v % 2 == 0:
                raise ValueError(f"{name} must be an odd integer >= 3, got {v!r}")
        nv = self.noise_variance
        if nv != AUTO and not (isinstance(nv, (int, float)) and nv >= 0):
            raise ValueError(f"noise_variance must be >= 0 or 'auto', got {nv!r}")


def wiener_stats(image: GrayImage, params: WienerParams) -> tuple[np.ndarray, np.ndarray]:
    """Replicate-border window mean and variance for every pixel."""
    ry, rx = params.window_h // 2, params.window_w // 2
    padded = np.pad(image.data, ((ry, ry), (rx, rx)), mode="edge")
    S, Q = summed_tables(padded)
    h, w = image.shape
    wh, ww = params.window_h, params.window_w
    s = (S[wh:wh + h, ww:ww + w] + S[:h, :w]) - (S[:h, ww:ww + w] + S[wh:wh + h, :w])
    q = (Q[wh:wh + h, ww:ww + w] + Q[:h, :w]) - (Q[:h, ww:ww + w] + Q[wh:wh + h, :w])
    n = float(wh * ww)
    m = s.astype(np.float64) / n
    var = np.maximum(0.0, q.astype(np.float64) / n - m * m)
    return m, var


WIENER_EPS = 1e-12


def wiener_filter(image: GrayImage, params: Optional[WienerParams] = None) -> GrayImage:
    """Adaptive (local-statistics) Wiener filter.

    With ``noise_variance='auto'`` the noise power is the mean of all
    local variances.
    """
    params = params or WienerParams()
    m, var = wiener_stats(image, params)
    if params.noise_variance == AUTO:
        nu2 = float(var.mean())
    else:
        nu2 = float(params.noise_variance)
    gain = np.maximum(0.0, var - nu2) / np.maximum(var, WIENER_EPS)
    out = m + gain * (image.data.astype(np.float64) - m)
    return GrayImage(round_to_uint8(out))
