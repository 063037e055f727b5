"""Pixel-level evaluation, synthetic degraded fixtures, parameter sweeps
and timing benchmarks."""

from __future__ import annotations

import csv
import io
import itertools
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .image_model import BinaryImage, GrayImage, round_to_uint8
from .rng import Lcg64
from .threshold_global import otsu_binarize
from .threshold_local import (
    METHODS as LOCAL_METHODS,
    LocalParams,
    apply_local,
    apply_local_naive,
    build_integral,
    default_params,
)

ALL_METHODS = ("otsu",) + LOCAL_METHODS

PAPER_LEVEL = 220
INK_LEVEL = 40
SPOT_LEVEL = 80


class ShapeMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PixelMetrics:
    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int

    @property
    def precision(self) -> float:
        d = self.true_pos + self.false_pos
        return self.true_pos / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.true_pos + self.false_neg
        return self.true_pos / d if d else 0.0

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def accuracy(self) -> float:
        total = self.true_pos + self.false_pos + self.false_neg + self.true_neg
        return (self.true_pos + self.true_neg) / total

    def as_dict(self) -> dict:
        return {
            "tp": self.true_pos, "fp": self.false_pos,
            "fn": self.false_neg, "tn": self.true_neg,
            "precision": self.precision, "recall": self.recall,
            "f": self.f_measure, "accuracy": self.accuracy,
        }


def score(pred: BinaryImage, truth: BinaryImage) -> PixelMetrics:
    """Confusion counts with foreground (ink) as the positive class."""
    if pred.shape != truth.shape:
        raise ShapeMismatchError(
            f"prediction is {pred.width}x{pred.height}, truth is {truth.width}x{truth.height}"
        )
    p, t = pred.data, truth.data
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = p.size - tp - fp - fn
    return PixelMetrics(tp, fp, fn, tn)


# -- synthetic fixtures -------------------------------------------------------

@dataclass(frozen=True)
class DegradationSpec:
    illumination_gradient: float = 0.0
    noise_sigma: float = 0.0
    spot_count: int = 0
    spot_radius: int = 0
    seed: int = 0

    def __post_init__(self):
        for name in ("illumination_gradient", "noise_sigma", "spot_count", "spot_radius", "seed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def synthesize(text_mask: BinaryImage, spec: DegradationSpec) -> GrayImage:
    """Render a degraded page from an ink mask.

    Paper is 220 and ink 40. A linear ramp darkens the page from 0 at the
    left edge to ``illumination_gradient`` at the right edge, seeded
    Gaussian noise is added, then ``spot_count`` dark disks (level 80) are
    stamped. Spot centres are drawn from the stream before the noise, so
    they do not move when only the noise level changes.
    """
    h, w = text_mask.shape
    page = np.where(text_mask.data, float(INK_LEVEL), float(PAPER_LEVEL))
    if w > 1:
        ramp = spec.illumination_gradient * np.arange(w) / (w - 1)
    else:
        ramp = np.zeros(1)
    page = page - ramp[None, :]

    rng = Lcg64(spec.seed)
    centres = rng.uniforms(2 * spec.spot_count).reshape(-1, 2)
    if spec.noise_sigma > 0:
        page = page + spec.noise_sigma * rng.normals(h * w).reshape(h, w)

    if spec.spot_count and spec.spot_radius >= 0:
        yy, xx = np.mgrid[0:h, 0:w]
        r2 = spec.spot_radius ** 2
        for u, v in centres:
            cy, cx = int(u * h), int(v * w)
            page[(yy - cy) ** 2 + (xx - cx) ** 2 <= r2] = SPOT_LEVEL
    return GrayImage(round_to_uint8(page))


def make_text_mask(width: int = 512, height: int = 512, seed: int = 0,
                   line_pitch: int = 24, margin: int = 16) -> BinaryImage:
    """Cursive-like synthetic ink mask.

    Each text line has a baseline stroke broken into words, with vertical
    ascenders/descenders, short bowls and diacritic dots scattered along
    it. Strokes are 2 px thick.
    """
    rng = Lcg64(seed)
    ink = np.zeros((height, width), dtype=bool)
    x_max = width - margin
    for base in range(margin + line_pitch // 2, height - margin, line_pitch):
        x = margin
        while x < x_max - 8:
            word = 12 + int(rng.uniform() * 60)
            x_end = min(x + word, x_max)
            ink[base:base + 2, x:x_end] = True
            gx = x
            while gx < x_end - 2:
                kind = rng.uniform()
                if kind < 0.35:
                    top = base - 4 - int(rng.uniform() * (line_pitch // 2))
                    ink[max(0, top):base, gx:gx + 2] = True
                elif kind < 0.55:
                    bot = base + 4 + int(rng.uniform() * (line_pitch // 4))
                    ink[base:min(height, bot), gx:gx + 2] = True
                elif kind < 0.8:
                    ink[base - 5:base, gx:gx + 2] = True
                    ink[base - 6:base - 4, gx:min(x_end, gx + 5)] = True
                    ink[base - 5:base, min(x_end, gx + 5) - 2:min(x_end, gx + 5)] = True
                else:
                    dy = -8 if rng.uniform() < 0.6 else 5
                    ink[base + dy:base + dy + 2, gx:gx + 2] = True
                gx += 4 + int(rng.uniform() * 5)
            x = x_end + 6 + int(rng.uniform() * 6)
    return BinaryImage(ink)


def standard_fixture(size: int = 512, gradient: float = 120, noise: float = 8,
                     seed: int = 42) -> tuple[GrayImage, BinaryImage]:
    """The degraded page used for method comparisons, with its truth mask."""
    mask = make_text_mask(size, size, seed=seed)
    spec = DegradationSpec(illumination_gradient=gradient, noise_sigma=noise, seed=seed)
    return synthesize(mask, spec), mask


# -- binarization dispatch ----------------------------------------------------

def binarize(image: GrayImage, method: str, params: Optional[LocalParams] = None,
             integral=None) -> BinaryImage:
    if method == "otsu":
        return otsu_binarize(image)[0]
    if method in LOCAL_METHODS:
        return apply_local(image, method, params, integral)
    raise ValueError(f"unknown method {method!r}")


# -- sweeps --------------------------------------------------------------------

SWEEP_FIELDS = ("method", "window", "k", "R", "precision", "recall", "f", "accuracy")
RANK_METRICS = ("f", "precision", "recall", "accuracy")


@dataclass(frozen=True)
class SweepSpec:
    method: str
    windows: Sequence[int] = (15,)
    ks: Sequence[float] = ()
    Rs: Sequence[float] = (128.0,)
    metric: str = "f"
    cap: int = 10_000

    def __post_init__(self):
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.metric not in RANK_METRICS:
            raise ValueError(f"unknown ranking metric {self.metric!r}")
        if self.method != "otsu":
            for name in ("windows", "ks", "Rs"):
                if name == "Rs" and self.method == "niblack":
                    continue
                if name == "ks" and not self.ks:
                    continue
                if not len(getattr(self, name)):
                    raise ValueError(f"sweep grid '{name}' is empty")
        n = len(self.combinations())
        if n > self.cap:
            raise ValueError(f"sweep grid has {n} combinations, cap is {self.cap}")

    def combinations(self) -> list[dict]:
        """Grid points in enumeration order (window, then k, then R)."""
        if self.method == "otsu":
            return [{"window": None, "k": None, "R": None}]
        ks = list(self.ks) or [default_params(self.method).k]
        Rs = [None] if self.method == "niblack" else list(self.Rs)
        return [{"window": w, "k": k, "R": R}
                for w, k, R in itertools.product(self.windows, ks, Rs)]


@dataclass(frozen=True)
class SweepRow:
    method: str
    window: Optional[int]
    k: Optional[float]
    R: Optional[float]
    metrics: PixelMetrics

    def value(self, metric: str) -> float:
        return self.metrics.as_dict()[metric]


def _params_for(method: str, combo: dict) -> Optional[LocalParams]:
    if method == "otsu":
        return None
    base = default_params(method, combo["window"])
    return LocalParams(combo["window"], combo["window"], k=combo["k"],
                       R=combo["R"] if combo["R"] is not None else base.R)


def sweep(image: GrayImage, truth: BinaryImage, spec: SweepSpec,
          jobs: int = 1) -> list[SweepRow]:
    """Score every grid point; best first by ``spec.metric``, ties in grid order."""
    if image.shape != truth.shape:
        raise ShapeMismatchError(
            f"image is {image.width}x{image.height}, truth is {truth.width}x{truth.height}"
        )
    ip = build_integral(image) if spec.method != "otsu" else None
    combos = spec.combinations()

    def run(combo):
        pred = binarize(image, spec.method, _params_for(spec.method, combo), ip)
        return SweepRow(spec.method, combo["window"], combo["k"], combo["R"],
                        score(pred, truth))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, combos))
    else:
        rows = [run(c) for c in combos]
    return sorted(rows, key=lambda r: -r.value(spec.metric))


def _fmt(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    for r in rows:
        m = r.metrics
        w.writerow([r.method, _fmt(r.window), _fmt(r.k), _fmt(r.R),
                    repr(m.precision), repr(m.recall), repr(m.f_measure), repr(m.accuracy)])
    return buf.getvalue()


# -- benchmarks ----------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    method: str
    median_ms: float
    timings_ms: tuple


def bench(image: GrayImage, methods: Sequence[str], repetitions: int = 5,
          window: int = 15, naive: bool = False) -> list[BenchRow]:
    """Median end-to-end binarization time per method.

    One untimed warm-up run precedes the timed repetitions. ``naive``
    times the direct window-summing reference for local methods.
    """
    if repetitions < 3:
        raise ValueError("bench needs at least 3 repetitions")
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method {m!r}")
    rows = []
    for method in methods:
        params = default_params(method, window) if method != "otsu" else None
        if naive and method != "otsu":
            def run():
                apply_local_naive(image, method, params)
        else:
            def run():
                binarize(image, method, params)
        run()
        timings = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            run()
            timings.append((time.perf_counter() - t0) * 1000.0)
        rows.append(BenchRow(method, statistics.median(timings), tuple(timings)))
    return rows


def bench_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "median_ms"))
    for r in rows:
        w.writerow((r.method, f"{r.median_ms:.3f}"))
    return buf.getvalue()
