"""Local (windowed) thresholding: Niblack, Zhang-Tan and Sauvola.

Window mean and standard deviation come from a pair of summed-area
tables, so the cost per pixel is independent of the window size.
Windows are truncated at the image border; statistics only ever
describe real pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .image_model import BinaryImage, GrayImage

METHODS = ("niblack", "zhang_tan", "sauvola")

R_CONSTANT = "constant"
R_MAX_STD = "max_std"


@dataclass(frozen=True)
class LocalParams:
    window_w: int = 15
    window_h: int = 15
    k: float = 0.5
    R: float = 128.0
    r_mode: str = R_CONSTANT

    def __post_init__(self):
        for name in ("window_w", "window_h"):
            v = getattr(self, name)
            if int(v) != v or v < 3 or v % 2 == 0:
                raise ValueError(f"{name} must be an odd integer >= 3, got {v!r}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R!r}")
        if self.r_mode not in (R_CONSTANT, R_MAX_STD):
            raise ValueError(f"unknown r_mode {self.r_mode!r}")


def default_params(method: str, window: int = 15) -> LocalParams:
    """Default parameters for ``method`` with a square ``window``."""
    if method == "niblack":
        return LocalParams(window, window, k=-0.2, R=128.0)
    if method == "zhang_tan":
        return LocalParams(window, window, k=0.2, R=128.0)
    if method == "sauvola":
        return LocalParams(window, window, k=0.5, R=128.0)
    raise ValueError(f"unknown local method {method!r}")


@dataclass(frozen=True)
class LocalStats:
    m: float
    s: float


@dataclass(frozen=True, eq=False)
class IntegralPair:
    """Summed-area tables of values (``S``) and squared values (``Q``).

    Both are ``(H+1, W+1)`` uint64 arrays with a zero top row and left
    column, so ``S[y, x]`` is the sum over rows ``[0, y)`` and columns
    ``[0, x)``. The largest possible ``Q`` total is below 2**49, so the
    tables are exact.
    """

    S: np.ndarray
    Q: np.ndarray

    @property
    def height(self) -> int:
        return self.S.shape[0] - 1

    @property
    def width(self) -> int:
        return self.S.shape[1] - 1

    def rect_sums(self, y0, y1, x0, x1):
        """Sum and sum of squares over ``[y0, y1) x [x0, x1)``.

        Arguments may be broadcastable integer arrays.
        """
        S, Q = self.S, self.Q
        # positive corners first: no intermediate uint64 wrap-around
        s = (S[y1, x1] + S[y0, x0]) - (S[y0, x1] + S[y1, x0])
        q = (Q[y1, x1] + Q[y0, x0]) - (Q[y0, x1] + Q[y1, x0])
        return s, q


def summed_tables(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=np.uint64)
    h, w = v.shape
    S = np.zeros((h + 1, w + 1), dtype=np.uint64)
    Q = np.zeros((h + 1, w + 1), dtype=np.uint64)
    np.cumsum(np.cumsum(v, axis=0), axis=1, out=S[1:, 1:])
    np.cumsum(np.cumsum(v * v, axis=0), axis=1, out=Q[1:, 1:])
    return S, Q


def build_integral(image: GrayImage) -> IntegralPair:
    S, Q = summed_tables(image.data)
    S.setflags(write=False)
    Q.setflags(write=False)
    return IntegralPair(S, Q)


def _mean_std(total, sq_total, n):
    # identical float operations in scalar and array form
    m = total / n
    var = np.maximum(0.0, sq_total / n - m * m)
    return m, np.sqrt(var)


def window_stats(ip: IntegralPair, x: int, y: int, params: LocalParams) -> LocalStats:
    if not (0 <= x < ip.width and 0 <= y < ip.height):
        raise ValueError(f"({x}, {y}) lies outside the {ip.width}x{ip.height} image")
    hw, hh = params.window_w // 2, params.window_h // 2
    x0, x1 = max(0, x - hw), min(ip.width, x + hw + 1)
    y0, y1 = max(0, y - hh), min(ip.height, y + hh + 1)
    s, q = ip.rect_sums(y0, y1, x0, x1)
    n = (y1 - y0) * (x1 - x0)
    m, sd = _mean_std(float(s), float(q), float(n))
    return LocalStats(float(m), float(sd))


def local_stats(ip: IntegralPair, params: LocalParams) -> tuple[np.ndarray, np.ndarray]:
    """Window mean and standard deviation for every pixel, as (H, W) arrays."""
    h, w = ip.height, ip.width
    hw, hh = params.window_w // 2, params.window_h // 2
    xs = np.arange(w)
    ys = np.arange(h)
    x0 = np.maximum(0, xs - hw)[None, :]
    x1 = np.minimum(w, xs + hw + 1)[None, :]
    y0 = np.maximum(0, ys - hh)[:, None]
    y1 = np.minimum(h, ys + hh + 1)[:, None]
    s, q = ip.rect_sums(y0, y1, x0, x1)
    n = ((y1 - y0) * (x1 - x0)).astype(np.float64)
    return _mean_std(s.astype(np.float64), q.astype(np.float64), n)


def niblack_threshold(stats: LocalStats, params: LocalParams) -> float:
    return stats.m + params.k * stats.s


def zhang_tan_threshold(stats: LocalStats, params: LocalParams) -> float:
    return stats.m * (1 + params.k * (1 - stats.s / params.R))


def sauvola_threshold(stats: LocalStats, params: LocalParams) -> float:
    return stats.m * (1 - params.k * (1 - stats.s / params.R))


THRESHOLDS: dict[str, Callable[[LocalStats, LocalParams], float]] = {
    "niblack": niblack_threshold,
    "zhang_tan": zhang_tan_threshold,
    "sauvola": sauvola_threshold,
}


def effective_R(s_max: float, params: LocalParams) -> float:
    """The R actually used: the constant, or the largest local std dev.

    ``max_std`` falls back to the constant when every window is flat.
    """
    if params.r_mode == R_MAX_STD and s_max > 0:
        return float(s_max)
    return float(params.R)


def threshold_surface(image: GrayImage, method: str, params: LocalParams,
                      integral: Optional[IntegralPair] = None) -> np.ndarray:
    """Per-pixel real threshold ``T(x, y)`` as an (H, W) float array."""
    if method not in THRESHOLDS:
        raise ValueError(f"unknown local method {method!r}")
    ip = integral if integral is not None else build_integral(image)
    m, s = local_stats(ip, params)
    R = effective_R(float(s.max()), params)
    # the array formulas below must stay in lockstep with the scalar ones
    stats = LocalStats(m, s)
    return THRESHOLDS[method](stats, _with_R(params, R))


def _with_R(params: LocalParams, R: float) -> LocalParams:
    if R == params.R and params.r_mode == R_CONSTANT:
        return params
    return LocalParams(params.window_w, params.window_h, params.k, R, R_CONSTANT)


def apply_local(image: GrayImage, method: str, params: Optional[LocalParams] = None,
                integral: Optional[IntegralPair] = None) -> BinaryImage:
    """Binarize with a local method; pixels at or below ``T`` become ink.

    The comparison uses the unrounded real threshold.
    """
    if params is None:
        params = default_params(method)
    T = threshold_surface(image, method, params, integral)
    return BinaryImage(image.data <= T)


def apply_local_naive(image: GrayImage, method: str,
                      params: Optional[LocalParams] = None) -> BinaryImage:
    """Reference implementation that sums every window directly.

    O(window area) per pixel; used to check :func:`apply_local` and to
    measure what the summed-area tables buy.
    """
    if params is None:
        params = default_params(method)
    fn = THRESHOLDS[method]
    img = image.data.astype(np.int64)
    h, w = img.shape
    hw, hh = params.window_w // 2, params.window_h // 2
    ms = np.empty((h, w))
    ss = np.empty((h, w))
    for y in range(h):
        y0, y1 = max(0, y - hh), min(h, y + hh + 1)
        for x in range(w):
            x0, x1 = max(0, x - hw), min(w, x + hw + 1)
            win = img[y0:y1, x0:x1]
            n = (y1 - y0) * (x1 - x0)
            total = int(win.sum())
            sq_total = int((win * win).sum())
            m = total / n
            var = max(0.0, sq_total / n - m * m)
            ms[y, x] = m
            ss[y, x] = math.sqrt(var)
    R = effective_R(float(ss.max()), params)
    p = _with_R(params, R)
    out = np.empty((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            t = fn(LocalStats(float(ms[y, x]), float(ss[y, x])), p)
            out[y, x] = img[y, x] <= t
    return BinaryImage(out)
