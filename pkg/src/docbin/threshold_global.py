"""Otsu's global threshold.

Class 1 holds levels ``i <= t`` (the dark, ink side) and class 2 holds
``i > t``. Every candidate ``t`` in [0, 254] with two non-empty classes
is scored; the smallest ``t`` with the least weighted within-class
variance wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .image_model import BinaryImage, GrayImage, Histogram, LEVELS, histogram


class EmptyHistogramError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OtsuScan:
    """Per-threshold quantities of the scan, indexed by ``t`` (0..255).

    Entries for thresholds where a class is empty are NaN (class means,
    variances, ``var_within``); ``q1``/``q2`` are always defined.
    """

    q1: np.ndarray
    q2: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    var1: np.ndarray
    var2: np.ndarray
    var_within: np.ndarray
    chosen_t: int
    degenerate: bool

    @property
    def valid(self) -> np.ndarray:
        """Boolean mask of thresholds where both classes are non-empty."""
        return ~np.isnan(self.var_within)

    def var_between(self) -> np.ndarray:
        return self.q1 * self.q2 * (self.mu1 - self.mu2) ** 2


def otsu_threshold(hist: Histogram) -> OtsuScan:
    if hist.total == 0:
        raise EmptyHistogramError("Otsu threshold of an empty histogram")
    counts = hist.counts
    P = hist.probabilities
    levels = np.arange(LEVELS, dtype=np.float64)

    q1 = np.empty(LEVELS)
    q2 = np.empty(LEVELS)
    mu1 = np.full(LEVELS, np.nan)
    mu2 = np.full(LEVELS, np.nan)
    var1 = np.full(LEVELS, np.nan)
    var2 = np.full(LEVELS, np.nan)
    var_within = np.full(LEVELS, np.nan)

    # exact integer moments per split, used to pick the winner without
    # floating-point tie noise
    n = hist.total
    c_cum = np.cumsum(counts).tolist()
    s_cum = np.cumsum(counts * np.arange(LEVELS)).tolist()
    ss_cum = np.cumsum(counts * np.arange(LEVELS) ** 2).tolist()
    s_all, ss_all = s_cum[-1], ss_cum[-1]

    best_t = None
    best_key = None
    for t in range(LEVELS):
        p1, p2 = P[:t + 1], P[t + 1:]
        q1[t] = p1.sum()
        q2[t] = p2.sum()
        c1 = c_cum[t]
        c2 = n - c1
        if t == LEVELS - 1 or c1 == 0 or c2 == 0:
            continue
        m1 = (levels[:t + 1] * p1).sum() / q1[t]
        m2 = (levels[t + 1:] * p2).sum() / q2[t]
        mu1[t], mu2[t] = m1, m2
        var1[t] = (((levels[:t + 1] - m1) ** 2) * p1).sum() / q1[t]
        var2[t] = (((levels[t + 1:] - m2) ** 2) * p2).sum() / q2[t]

        # n * var_within = ss_all - s1^2/c1 - s2^2/c2, exactly
        s1 = s_cum[t]
        s2 = s_all - s1
        key = Fraction(ss_all * c1 * c2 - s1 * s1 * c2 - s2 * s2 * c1, n * c1 * c2)
        var_within[t] = float(key)
        if best_key is None or key < best_key:
            best_key, best_t = key, t

    if best_t is None:
        return OtsuScan(q1, q2, mu1, mu2, var1, var2, var_within,
                        chosen_t=int(hist.occupied_levels[0]), degenerate=True)
    return OtsuScan(q1, q2, mu1, mu2, var1, var2, var_within,
                    chosen_t=best_t, degenerate=False)


def apply_global(image: GrayImage, t: int) -> BinaryImage:
    """Pixels at or below ``t`` become ink."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must lie in [0, 255], got {t}")
    return BinaryImage(image.data <= t)


def otsu_binarize(image: GrayImage) -> tuple[BinaryImage, OtsuScan]:
    scan = otsu_threshold(histogram(image))
    return apply_global(image, scan.chosen_t), scan
