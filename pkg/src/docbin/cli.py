"""``docbin`` command line: binarize, sweep, bench, synth, score.

Exit codes: 0 success, 1 some images failed (batch continued), 2 usage
or config error, 3 I/O error. Diagnostics go to stderr; CSV/NDJSON
output goes to stdout untainted.
"""

from __future__ import annotations

import argparse
import enum
import json
import sys
from typing import Optional, Sequence

from . import evaluate as ev
from .image_model import BinaryImage, GrayImage, NetpbmError, RgbImage, load, write_netpbm
from .pipeline import ConfigError, load_config, reports_csv, reports_ndjson, run_batch
from .preprocess import to_grayscale


class ExitStatus(enum.IntEnum):
    OK = 0
    PARTIAL_FAILURE = 1
    USAGE = 2
    IO_ERROR = 3


class _Fail(Exception):
    def __init__(self, status: ExitStatus, message: str):
        super().__init__(message)
        self.status = status


def _err(msg: str) -> None:
    print(f"docbin: {msg}", file=sys.stderr)


def _write_text(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _Fail(ExitStatus.IO_ERROR, f"cannot write {path}: {exc}")


def _load_image(path: str, what: str):
    try:
        return load(path)
    except OSError as exc:
        raise _Fail(ExitStatus.IO_ERROR, f"cannot read {what} {path}: {exc}")
    except NetpbmError as exc:
        raise _Fail(ExitStatus.IO_ERROR, f"cannot decode {what} {path}: {exc}")


def _load_gray(path: str, what: str = "image") -> GrayImage:
    img = _load_image(path, what)
    if isinstance(img, RgbImage):
        return to_grayscale(img)
    if isinstance(img, BinaryImage):
        raise _Fail(ExitStatus.USAGE, f"{what} {path} is a bitmap; a grayscale or RGB image is needed")
    return img


def _load_mask(path: str, what: str) -> BinaryImage:
    img = _load_image(path, what)
    if not isinstance(img, BinaryImage):
        raise _Fail(ExitStatus.USAGE, f"{what} {path} must be a P4 bitmap")
    return img


def cmd_binarize(args) -> ExitStatus:
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        raise _Fail(ExitStatus.USAGE, f"config file not found: {args.config}")
    except OSError as exc:
        raise _Fail(ExitStatus.USAGE, f"cannot read config {args.config}: {exc}")
    except ConfigError as exc:
        raise _Fail(ExitStatus.USAGE, f"invalid config {args.config}: {exc}")
    if args.emit_intermediates:
        config = type(config)(config.stages, True)
    try:
        reports = run_batch(config, args.inputs, args.out, jobs=args.jobs)
    except OSError as exc:
        raise _Fail(ExitStatus.IO_ERROR, f"cannot use output directory {args.out}: {exc}")

    failed = [r for r in reports if not r.ok]
    for r in failed:
        _err(f"{r.input_path}: {r.error}")
    report_to_stdout = args.report is not None and args.report_file in (None, "-")
    if args.report is not None:
        text = (reports_csv(config, reports) if args.report == "csv"
                else reports_ndjson(reports))
        _write_text(text, args.report_file)
    total_ms = sum(r.total_ms for r in reports)
    summary = (f"processed {len(reports) - len(failed)} image(s), "
               f"{len(failed)} failed, {total_ms:.1f} ms total")
    # keep stdout machine-readable when the report goes there
    print(summary, file=sys.stderr if report_to_stdout else sys.stdout)
    return ExitStatus.PARTIAL_FAILURE if failed else ExitStatus.OK


def _load_grid(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise _Fail(ExitStatus.IO_ERROR, f"cannot read grid {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise _Fail(ExitStatus.USAGE, f"grid {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise _Fail(ExitStatus.USAGE, f"grid {path} must be a JSON object")
    unknown = set(doc) - {"window", "k", "R"}
    if unknown:
        raise _Fail(ExitStatus.USAGE, f"grid {path}: unknown key(s) {sorted(unknown)}")
    for key, val in doc.items():
        if not isinstance(val, list):
            doc[key] = [val]
    return doc


def cmd_sweep(args) -> ExitStatus:
    grid = _load_grid(args.grid)
    image = _load_gray(args.image)
    truth = _load_mask(args.truth, "truth")
    try:
        spec = ev.SweepSpec(
            method=args.method,
            windows=tuple(int(w) for w in grid.get("window", [15])),
            ks=tuple(float(k) for k in grid.get("k", [])),
            Rs=tuple(float(r) for r in grid.get("R", [128.0])),
            metric=args.metric,
            cap=args.cap,
        )
        rows = ev.sweep(image, truth, spec, jobs=args.jobs or 1)
    except ev.ShapeMismatchError as exc:
        raise _Fail(ExitStatus.USAGE, f"image/truth dimension mismatch: {exc}")
    except (TypeError, ValueError) as exc:
        raise _Fail(ExitStatus.USAGE, f"invalid sweep: {exc}")
    _write_text(ev.sweep_csv(rows), args.out)
    return ExitStatus.OK


def cmd_bench(args) -> ExitStatus:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in ev.ALL_METHODS]
    if unknown or not methods:
        raise _Fail(ExitStatus.USAGE,
                    f"unknown method(s) {unknown}; choose from {', '.join(ev.ALL_METHODS)}")
    if args.reps < 3:
        raise _Fail(ExitStatus.USAGE, "--reps must be at least 3")
    image = _load_gray(args.image)
    rows = ev.bench(image, methods, args.reps, window=args.window)
    _write_text(ev.bench_csv(rows), args.out)
    return ExitStatus.OK


def cmd_synth(args) -> ExitStatus:
    mask = _load_mask(args.mask, "mask")
    try:
        spec = ev.DegradationSpec(args.gradient, args.noise, args.spots,
                                  args.spot_radius, args.seed)
    except ValueError as exc:
        raise _Fail(ExitStatus.USAGE, str(exc))
    data = write_netpbm(ev.synthesize(mask, spec))
    try:
        with open(args.out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise _Fail(ExitStatus.IO_ERROR, f"cannot write {args.out}: {exc}")
    return ExitStatus.OK


def cmd_score(args) -> ExitStatus:
    pred = _load_mask(args.pred, "prediction")
    truth = _load_mask(args.truth, "truth")
    try:
        m = ev.score(pred, truth)
    except ev.ShapeMismatchError as exc:
        raise _Fail(ExitStatus.USAGE, str(exc))
    d = m.as_dict()
    cols = ("tp", "fp", "fn", "tn", "precision", "recall", "f", "accuracy")
    text = ",".join(cols) + "\n" + ",".join(repr(d[c]) for c in cols) + "\n"
    _write_text(text, args.out)
    return ExitStatus.OK


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _non_negative(conv):
    def parse(text: str):
        v = conv(text)
        if v < 0:
            raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docbin", allow_abbrev=False,
        description="Document image binarization: preprocessing, Otsu, Niblack, "
                    "Zhang-Tan and Sauvola thresholding, evaluation and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("binarize", allow_abbrev=False,
                       help="run a pipeline config over netpbm images")
    p.add_argument("--config", required=True, help="pipeline config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--emit-intermediates", action="store_true",
                   help="also write every stage's output")
    p.add_argument("--report", choices=("csv", "ndjson"), help="emit a run report")
    p.add_argument("--report-file", help="write the report here instead of stdout")
    p.add_argument("--jobs", type=_positive_int, default=None,
                   help="max images processed concurrently (default: CPU count)")
    p.add_argument("inputs", nargs="*", help="input .pgm/.ppm files")
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("sweep", allow_abbrev=False,
                       help="score a parameter grid against a ground-truth mask")
    p.add_argument("--method", required=True, choices=ev.ALL_METHODS)
    p.add_argument("--truth", required=True, help="ground-truth mask (P4)")
    p.add_argument("--grid", required=True,
                   help='JSON grid, e.g. {"window": [15, 31], "k": [0.2, 0.5], "R": [128]}')
    p.add_argument("--metric", default="f", choices=ev.RANK_METRICS, help="ranking metric")
    p.add_argument("--cap", type=_positive_int, default=10_000, help="max grid points")
    p.add_argument("--jobs", type=_positive_int, default=None)
    p.add_argument("--out", help="CSV destination (default: stdout)")
    p.add_argument("image")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", allow_abbrev=False, help="time binarization methods")
    p.add_argument("--methods", default="otsu,niblack,sauvola",
                   help="comma-separated: otsu, niblack, zhang_tan, sauvola")
    p.add_argument("--reps", type=int, default=5, help="timed repetitions (>= 3)")
    p.add_argument("--window", type=int, default=15, help="local window side")
    p.add_argument("--out", help="CSV destination (default: stdout)")
    p.add_argument("image")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", allow_abbrev=False,
                       help="render a degraded page from an ink mask")
    p.add_argument("--mask", required=True, help="ink mask (P4)")
    p.add_argument("--gradient", type=_non_negative(float), default=0.0)
    p.add_argument("--noise", type=_non_negative(float), default=0.0)
    p.add_argument("--spots", type=_non_negative(int), default=0)
    p.add_argument("--spot-radius", type=_non_negative(int), default=0)
    p.add_argument("--seed", type=_non_negative(int), default=0)
    p.add_argument("--out", required=True, help="output PGM")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", allow_abbrev=False, help="compare two masks pixel by pixel")
    p.add_argument("--pred", required=True, help="predicted mask (P4)")
    p.add_argument("--truth", required=True, help="ground-truth mask (P4)")
    p.add_argument("--out", help="CSV destination (default: stdout)")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except _Fail as exc:
        _err(str(exc))
        return int(exc.status)


if __name__ == "__main__":
    sys.exit(main())
