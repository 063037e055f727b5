"""Declarative preprocessing + binarization pipelines.

A config is a JSON document::

    {"stages": [{"kind": "grayscale"},
                {"kind": "erode", "size": 3},
                {"kind": "sauvola", "window": 15, "k": 0.5, "R": 128}],
     "emit_intermediates": false}

Exactly one thresholding stage is allowed and it must come last. Every
parameter is optional and falls back to the module default.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from . import preprocess as pp
from .image_model import BinaryImage, GrayImage, Image, RgbImage, load, save
from .threshold_global import otsu_binarize
from .threshold_local import LocalParams, R_CONSTANT, R_MAX_STD, apply_local, default_params

PREPROCESS_KINDS = ("grayscale", "equalize", "erode", "dilate", "gaussian", "wiener")
THRESHOLD_KINDS = ("otsu", "niblack", "zhang_tan", "sauvola")
STAGE_KINDS = PREPROCESS_KINDS + THRESHOLD_KINDS


class ConfigError(ValueError):
    """Invalid pipeline config; ``path`` locates the offending entry."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class StageInputError(TypeError):
    pass


@dataclass(frozen=True)
class Stage:
    kind: str
    params: Any = None

    @property
    def is_threshold(self) -> bool:
        return self.kind in THRESHOLD_KINDS


@dataclass(frozen=True)
class PipelineConfig:
    stages: tuple
    emit_intermediates: bool = False

    @property
    def method(self) -> str:
        return self.stages[-1].kind

    def stage_labels(self) -> list[str]:
        """Unique per-stage names: the kind, suffixed ``_2``, ``_3``... on repeats."""
        seen: dict[str, int] = {}
        labels = []
        for st in self.stages:
            seen[st.kind] = seen.get(st.kind, 0) + 1
            n = seen[st.kind]
            labels.append(st.kind if n == 1 else f"{st.kind}_{n}")
        return labels


# -- parsing ------------------------------------------------------------------

_ALLOWED = {
    "grayscale": set(),
    "equalize": set(),
    "erode": {"size", "width", "height", "shape"},
    "dilate": {"size", "width", "height", "shape"},
    "gaussian": {"radius", "sigma"},
    "wiener": {"window", "window_w", "window_h", "noise_variance"},
    "otsu": set(),
    "niblack": {"window", "window_w", "window_h", "k"},
    "zhang_tan": {"window", "window_w", "window_h", "k", "R", "R_mode"},
    "sauvola": {"window", "window_w", "window_h", "k", "R", "R_mode"},
}


def _number(d: dict, key: str, path: str, default, integer: bool = False):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"must be a number, got {v!r}", f"{path}.{key}")
    if integer and int(v) != v:
        raise ConfigError(f"must be an integer, got {v!r}", f"{path}.{key}")
    return int(v) if integer else float(v)


def _window(d: dict, path: str, default: int, minimum: int) -> tuple[int, int]:
    side = _number(d, "window", path, default, integer=True)
    w = _number(d, "window_w", path, side, integer=True)
    h = _number(d, "window_h", path, side, integer=True)
    for key, v in (("window_w", w), ("window_h", h)):
        if v < minimum or v % 2 == 0:
            raise ConfigError(f"window must be an odd integer >= {minimum}, got {v}",
                              f"{path}.{key if key in d else 'window'}")
    return w, h


def _stage_params(kind: str, d: dict, path: str):
    if kind in ("erode", "dilate"):
        size = _number(d, "size", path, 3, integer=True)
        w = _number(d, "width", path, size, integer=True)
        h = _number(d, "height", path, size, integer=True)
        for key, v in (("width", w), ("height", h)):
            if v < 1 or v % 2 == 0:
                raise ConfigError(f"must be an odd integer >= 1, got {v}", f"{path}.{key}")
        shape = d.get("shape", "square")
        if shape == "square":
            return pp.StructuringElement.square(w, h)
        if shape == "cross":
            if w != h:
                raise ConfigError("cross elements must be square", f"{path}.shape")
            return pp.StructuringElement.cross(w)
        raise ConfigError(f"unknown shape {shape!r}", f"{path}.shape")
    if kind == "gaussian":
        radius = _number(d, "radius", path, 2, integer=True)
        sigma = _number(d, "sigma", path, 1.0)
        if radius < 1:
            raise ConfigError(f"must be >= 1, got {radius}", f"{path}.radius")
        if sigma <= 0:
            raise ConfigError(f"must be positive, got {sigma}", f"{path}.sigma")
        return pp.GaussianKernel(radius, sigma)
    if kind == "wiener":
        w, h = _window(d, path, 3, 3)
        nv = d.get("noise_variance", pp.AUTO)
        if nv != pp.AUTO:
            nv = _number(d, "noise_variance", path, None)
            if nv < 0:
                raise ConfigError(f"must be >= 0 or 'auto', got {nv}", f"{path}.noise_variance")
        return pp.WienerParams(w, h, nv)
    if kind in ("niblack", "zhang_tan", "sauvola"):
        base = default_params(kind)
        w, h = _window(d, path, 15, 3)
        k = _number(d, "k", path, base.k)
        R = _number(d, "R", path, base.R)
        if R <= 0:
            raise ConfigError(f"must be positive, got {R}", f"{path}.R")
        mode = d.get("R_mode", R_CONSTANT)
        if mode not in (R_CONSTANT, R_MAX_STD):
            raise ConfigError(f"must be '{R_CONSTANT}' or '{R_MAX_STD}', got {mode!r}",
                              f"{path}.R_mode")
        return LocalParams(w, h, k, R, mode)
    return None


def config_from_dict(doc: Any) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", "$")
    extra = set(doc) - {"stages", "emit_intermediates"}
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)}", "$")
    if "stages" not in doc:
        raise ConfigError("missing required key 'stages'", "$")
    raw = doc["stages"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("must be a non-empty array", "stages")
    emit = doc.get("emit_intermediates", False)
    if not isinstance(emit, bool):
        raise ConfigError("must be true or false", "emit_intermediates")

    stages = []
    for i, d in enumerate(raw):
        path = f"stages[{i}]"
        if not isinstance(d, dict):
            raise ConfigError("stage must be an object", path)
        if "kind" not in d:
            raise ConfigError("missing required key 'kind'", path)
        kind = d["kind"]
        if kind not in STAGE_KINDS:
            raise ConfigError(f"unknown stage kind {kind!r}", f"{path}.kind")
        extra = set(d) - _ALLOWED[kind] - {"kind"}
        if extra:
            raise ConfigError(f"unknown parameter(s) {sorted(extra)} for {kind}", path)
        stages.append(Stage(kind, _stage_params(kind, d, path)))

    n_thresh = sum(st.is_threshold for st in stages)
    if n_thresh == 0:
        raise ConfigError("pipeline needs exactly one threshold stage, found none", "stages")
    if n_thresh > 1:
        raise ConfigError(f"pipeline needs exactly one threshold stage, found {n_thresh}",
                          "stages")
    if not stages[-1].is_threshold:
        idx = next(i for i, st in enumerate(stages) if st.is_threshold)
        raise ConfigError("threshold stage must be last", f"stages[{idx}]")
    return PipelineConfig(tuple(stages), emit)


def parse_config(text: Union[str, bytes]) -> PipelineConfig:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    return config_from_dict(doc)


def load_config(path) -> PipelineConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read())


# -- execution ----------------------------------------------------------------

@dataclass
class RunReport:
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    method: Optional[str] = None
    threshold: Optional[int] = None
    stage_ms: list = field(default_factory=list)   # [(label, ms), ...]
    total_ms: float = 0.0
    width: Optional[int] = None
    height: Optional[int] = None
    error: Optional[str] = None
    intermediates: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_record(self) -> dict:
        return {
            "path": self.input_path,
            "output": self.output_path,
            "method": self.method,
            "threshold": self.threshold,
            "width": self.width,
            "height": self.height,
            "total_ms": self.total_ms,
            "stages": [{"stage": s, "ms": ms} for s, ms in self.stage_ms],
            "error": self.error,
        }


def _apply_stage(stage: Stage, img: Image, report: RunReport) -> Image:
    kind = stage.kind
    if isinstance(img, BinaryImage):
        raise StageInputError(f"stage '{kind}' cannot take a binary image")
    if kind == "grayscale":
        # already-gray inputs pass through so mixed batches share one config
        return pp.to_grayscale(img) if isinstance(img, RgbImage) else img
    if isinstance(img, RgbImage):
        raise StageInputError(f"stage '{kind}' needs a grayscale image; add a grayscale stage first")
    if kind == "equalize":
        return pp.equalize(img)
    if kind == "erode":
        return pp.erode(img, stage.params)
    if kind == "dilate":
        return pp.dilate(img, stage.params)
    if kind == "gaussian":
        return pp.gaussian_filter(img, stage.params)
    if kind == "wiener":
        return pp.wiener_filter(img, stage.params)
    if kind == "otsu":
        out, scan = otsu_binarize(img)
        report.threshold = scan.chosen_t
        return out
    return apply_local(img, kind, stage.params)


def run_pipeline(config: PipelineConfig, image: Union[RgbImage, GrayImage],
                 report: Optional[RunReport] = None) -> tuple[BinaryImage, RunReport]:
    report = report if report is not None else RunReport()
    report.method = config.method
    report.width, report.height = image.width, image.height
    start = time.perf_counter()
    cur = image
    for i, (stage, label) in enumerate(zip(config.stages, config.stage_labels())):
        t0 = time.perf_counter()
        cur = _apply_stage(stage, cur, report)
        report.stage_ms.append((label, (time.perf_counter() - t0) * 1000.0))
        if config.emit_intermediates:
            report.intermediates[i] = cur
    report.total_ms = (time.perf_counter() - start) * 1000.0
    return cur, report


def output_name(input_path, method: str) -> str:
    return f"{Path(input_path).stem}.{method}.pbm"


def intermediate_name(input_path, index: int, label: str, image: Image) -> str:
    ext = {BinaryImage: "pbm", GrayImage: "pgm", RgbImage: "ppm"}[type(image)]
    return f"{Path(input_path).stem}.{index}_{label}.{ext}"


def _run_one(config: PipelineConfig, path, output_dir: Path) -> RunReport:
    report = RunReport(input_path=str(path), method=config.method)
    start = time.perf_counter()
    try:
        image = load(path)
        if isinstance(image, BinaryImage):
            raise StageInputError("input is already a binary (P4) image")
        binary, report = run_pipeline(config, image, report)
        out = output_dir / output_name(path, config.method)
        save(binary, out)
        report.output_path = str(out)
        labels = config.stage_labels()
        for i, img in report.intermediates.items():
            save(img, output_dir / intermediate_name(path, i, labels[i], img))
        report.intermediates = {}
    except (OSError, ValueError, TypeError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        report.total_ms = (time.perf_counter() - start) * 1000.0
    return report


def run_batch(config: PipelineConfig, inputs: Sequence, output_dir,
              jobs: Optional[int] = None) -> list[RunReport]:
    """Run ``config`` over every input file, writing ``<stem>.<method>.pbm``.

    A failing image yields a report carrying ``error``; the rest of the
    batch continues. Reports come back in input order. Raises ``OSError``
    if ``output_dir`` cannot be created or written.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(output_dir, os.W_OK | os.X_OK):
        raise PermissionError(f"output directory {output_dir} is not writable")
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(inputs) <= 1:
        return [_run_one(config, p, output_dir) for p in inputs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda p: _run_one(config, p, output_dir), inputs))


# -- report serialization -----------------------------------------------------

def reports_ndjson(reports: Sequence[RunReport]) -> str:
    return "".join(json.dumps(r.to_record()) + "\n" for r in reports)


def report_columns(config: PipelineConfig) -> list[str]:
    return (["path", "method", "threshold", "total_ms"]
            + [f"{label}_ms" for label in config.stage_labels()] + ["error"])


def reports_csv(config: PipelineConfig, reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = config.stage_labels()
    w.writerow(report_columns(config))
    for r in reports:
        ms = dict(r.stage_ms)
        w.writerow([r.input_path, r.method,
                     "" if r.threshold is None else r.threshold,
                     f"{r.total_ms:.3f}"]
                    + [f"{ms[l]:.3f}" if l in ms else "" for l in labels]
                    + [r.error or ""])
    return buf.getvalue()
