"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or
``python3 tests/test_acceptance.py`` for a plain report.
"""

import csv
import io
import json
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import jsonschema
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from otsu_oracle import (  # noqa: E402
    argmax_smallest, argmin_smallest, between_class_curve, random_histograms,
    within_class_curve,
)

from docbin.cli import main as cli_main  # noqa: E402
from docbin.evaluate import (  # noqa: E402
    DegradationSpec, bench, make_text_mask, score, standard_fixture, synthesize,
)
from docbin.image_model import (  # noqa: E402
    BinaryImage, GrayImage, RgbImage, read_netpbm, save, write_netpbm,
)
from docbin.pipeline import parse_config, run_batch, run_pipeline  # noqa: E402
from docbin.preprocess import (  # noqa: E402
    GaussianKernel, StructuringElement, WienerParams, dilate, equalization_map,
    erode, gaussian_filter, wiener_filter,
)
from docbin.threshold_global import otsu_threshold  # noqa: E402
from docbin.threshold_local import (  # noqa: E402
    LocalParams, LocalStats, apply_local, apply_local_naive, default_params,
    niblack_threshold, sauvola_threshold, zhang_tan_threshold,
)
from docbin.evaluate import binarize  # noqa: E402


def report(n, ok, detail):
    print(f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
    return ok


# -- 1, 2: Otsu --------------------------------------------------------------

HISTS = random_histograms(200, seed=7)


def check_otsu_oracle():
    t0 = time.perf_counter()
    chosen = [otsu_threshold(h).chosen_t for h in HISTS]
    elapsed = time.perf_counter() - t0
    expected = [argmin_smallest(within_class_curve(h.counts)) for h in HISTS]
    mismatches = sum(a != b for a, b in zip(chosen, expected))
    ok = mismatches == 0 and elapsed < 5.0
    return report(1, ok, f"otsu vs brute-force minimizer: {mismatches}/200 mismatches, "
                         f"{elapsed:.2f} s (limit 5 s)")


def check_otsu_dual():
    mism = 0
    for h in HISTS:
        a = argmin_smallest(within_class_curve(h.counts))
        b = argmax_smallest(between_class_curve(h.counts))
        mism += not (a == b == otsu_threshold(h).chosen_t)
    return report(2, mism == 0, f"min within-class vs max between-class: {mism}/200 disagree")


# -- 3, 4: local thresholds ----------------------------------------------------

def check_local_naive():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    diffs = cases = 0
    for _ in range(50):
        h, w = (int(v) for v in rng.integers(1, 65, size=2))
        img = GrayImage(rng.integers(0, 256, size=(h, w), dtype=np.uint8))
        for win in (3, 7, 15):
            for method in ("niblack", "zhang_tan", "sauvola"):
                p = default_params(method, win)
                cases += 1
                diffs += apply_local(img, method, p) != apply_local_naive(img, method, p)
    elapsed = time.perf_counter() - t0
    ok = diffs == 0 and elapsed < 30.0
    return report(3, ok, f"integral vs naive: {diffs}/{cases} differ, {elapsed:.1f} s (limit 30 s)")


def check_closed_form():
    checks = [
        (sauvola_threshold(LocalStats(100, 0), LocalParams(k=0.5, R=128)), 50.0),
        (sauvola_threshold(LocalStats(100, 128), LocalParams(k=0.5, R=128)), 100.0),
        (niblack_threshold(LocalStats(100, 20), LocalParams(k=-0.2)), 96.0),
        (zhang_tan_threshold(LocalStats(100, 128), LocalParams(k=0.2, R=128)), 100.0),
        (zhang_tan_threshold(LocalStats(37.5, 64), LocalParams(k=0.7, R=64)), 37.5),
    ]
    worst = max(abs(got - want) for got, want in checks)
    return report(4, worst <= 1e-12, f"{len(checks)} closed-form values, max error {worst:.1e}")


# -- 5: preprocessing ------------------------------------------------------------

def check_preprocess():
    rng = np.random.default_rng(5)
    fails = {"erode<=x<=dilate": 0, "duality": 0, "gauss const": 0,
             "wiener const": 0, "equalize": 0}
    for _ in range(100):
        h, w = (int(v) for v in rng.integers(1, 24, size=2))
        img = GrayImage(rng.integers(0, 256, size=(h, w), dtype=np.uint8))
        sy, sx = (int(v) for v in rng.integers(0, 3, size=2))
        mask = rng.random((2 * sy + 1, 2 * sx + 1)) < 0.5
        mask[sy, sx] = True
        se = StructuringElement(mask)
        e, d = erode(img, se).data, dilate(img, se).data
        fails["erode<=x<=dilate"] += not ((e <= img.data).all() and (img.data <= d).all())
        inv = GrayImage(255 - img.data)
        fails["duality"] += not np.array_equal(d, 255 - erode(inv, se.reflect()).data)

        const = GrayImage(np.full((h, w), int(rng.integers(0, 256)), dtype=np.uint8))
        kern = GaussianKernel(int(rng.integers(1, 4)), float(rng.uniform(0.3, 3.0)))
        fails["gauss const"] += gaussian_filter(const, kern) != const
        wp = WienerParams(int(rng.choice([3, 5, 7])), int(rng.choice([3, 5, 7])),
                          "auto" if rng.random() < 0.5 else float(rng.uniform(0, 500)))
        fails["wiener const"] += wiener_filter(const, wp) != const

        lut = equalization_map(img).astype(int)
        occ = np.flatnonzero(np.bincount(img.data.ravel(), minlength=256))
        mono = (np.diff(lut) >= 0).all()
        ends = occ.size == 1 or (lut[occ[0]] == 0 and lut[occ[-1]] == 255)
        fails["equalize"] += not (mono and ends)
    ok = not any(fails.values())
    detail = ", ".join(f"{k} {100 - v}/100" for k, v in fails.items())
    return report(5, ok, detail)


# -- 6, 7, 8: quality and timing ------------------------------------------------

def check_quality():
    img, truth = standard_fixture(512, gradient=120, noise=8, seed=42)
    f = {m: score(binarize(img, m), truth).f_measure for m in ("otsu", "niblack", "sauvola")}
    ok = f["niblack"] > f["otsu"] and f["sauvola"] > f["otsu"]
    return report(6, ok, "f-measure otsu {otsu:.4f}, niblack {niblack:.4f}, "
                         "sauvola {sauvola:.4f}; need niblack > otsu and sauvola > otsu".format(**f))


def check_time_order():
    img, _ = standard_fixture(1024)
    rows = {r.method: r.median_ms for r in bench(img, ["otsu", "niblack", "sauvola"], 5, window=15)}
    ok = rows["otsu"] < rows["niblack"] and rows["otsu"] < rows["sauvola"]
    return report(7, ok, "median ms otsu {otsu:.1f}, niblack {niblack:.1f}, "
                         "sauvola {sauvola:.1f}".format(**rows))


def check_acceleration():
    img, _ = standard_fixture(512)
    fast75 = bench(img, ["sauvola"], 5, window=75)[0].median_ms
    naive75 = bench(img, ["sauvola"], 3, window=75, naive=True)[0].median_ms
    speedup = naive75 / fast75
    ratios = {}
    for m in ("niblack", "zhang_tan", "sauvola"):
        t15 = bench(img, [m], 5, window=15)[0].median_ms
        t75 = bench(img, [m], 5, window=75)[0].median_ms
        ratios[m] = max(t15, t75) / min(t15, t75)
    ok = speedup >= 5.0 and all(r < 2.0 for r in ratios.values())
    rs = ", ".join(f"{m} {r:.2f}x" for m, r in ratios.items())
    return report(8, ok, f"75x75 speedup over naive {speedup:.0f}x (need >= 5x); "
                         f"15 vs 75 time ratio {rs} (need < 2x)")


# -- 9: round trips and determinism -------------------------------------------------

CONFIG = ('{"stages": [{"kind": "grayscale"}, {"kind": "wiener"}, '
          '{"kind": "erode"}, {"kind": "sauvola", "window": 15}]}')


def check_determinism():
    rng = np.random.default_rng(9)
    bad = 0
    for i in range(50):
        h, w = (int(v) for v in rng.integers(1, 80, size=2))
        kind = i % 3
        if kind == 0:
            img = BinaryImage(rng.random((h, w)) < 0.5)
        elif kind == 1:
            img = GrayImage(rng.integers(0, 256, size=(h, w), dtype=np.uint8))
        else:
            img = RgbImage(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))
        raw = write_netpbm(img)
        back = read_netpbm(raw)
        bad += not (type(back) is type(img) and back == img and write_netpbm(back) == raw)

    config = parse_config(CONFIG)
    page, _ = standard_fixture(96, seed=4)
    same_pipe = run_pipeline(config, page)[0] == run_pipeline(config, page)[0]
    mask = make_text_mask(96, 96, seed=1)
    spec = DegradationSpec(80, 6, 4, 5, 11)
    same_synth = synthesize(mask, spec) == synthesize(mask, spec)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        inputs = []
        for s in range(6):
            p = tmp / f"page{s}.pgm"
            save(standard_fixture(64, seed=s)[0], p)
            inputs.append(p)
        run_batch(config, inputs, tmp / "j1", jobs=1)
        run_batch(config, inputs, tmp / "jn", jobs=4)
        outs1 = {p.name: p.read_bytes() for p in (tmp / "j1").iterdir()}
        outsn = {p.name: p.read_bytes() for p in (tmp / "jn").iterdir()}
        same_jobs = len(outs1) == 6 and outs1 == outsn

    ok = bad == 0 and same_pipe and same_synth and same_jobs
    return report(9, ok, f"round trip {50 - bad}/50 exact; pipeline repeatable {same_pipe}; "
                         f"synthesize repeatable {same_synth}; jobs 1 vs 4 identical {same_jobs}")


# -- 10: end-to-end CLI ---------------------------------------------------------------

NDJSON_SCHEMA = {
    "type": "object",
    "required": ["path", "method", "threshold", "total_ms", "stages", "error"],
    "properties": {
        "path": {"type": "string"},
        "method": {"enum": ["otsu", "niblack", "zhang_tan", "sauvola"]},
        "threshold": {"type": ["integer", "null"]},
        "total_ms": {"type": "number", "minimum": 0},
        "stages": {"type": "array", "items": {
            "type": "object", "required": ["stage", "ms"],
            "properties": {"stage": {"type": "string"}, "ms": {"type": "number"}}}},
        "error": {"type": ["string", "null"]},
    },
}


def _csv_rows(text, header, numeric):
    rows = list(csv.DictReader(io.StringIO(text)))
    jsonschema.validate(
        [{k: (float(v) if k in numeric else v) for k, v in r.items()} for r in rows],
        {"type": "array", "items": {
            "type": "object", "required": list(header),
            "properties": {k: {"type": "number"} for k in numeric}}})
    assert text.splitlines()[0] == ",".join(header)
    return rows


def _docbin(*args):
    p = subprocess.run([sys.executable, "-m", "docbin", *map(str, args)],
                       capture_output=True, text=True)
    return p.returncode, p.stdout, p.stderr


def check_cli():
    results = {}
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "cfg.json"
        cfg.write_text(CONFIG)
        bad_cfg = tmp / "bad.json"
        bad_cfg.write_text('{"stages": [{"kind": "otsu"}, {"kind": "sauvola"}]}')
        img, truth = standard_fixture(64, seed=8)
        save(img, tmp / "a.pgm")
        save(standard_fixture(64, seed=9)[0], tmp / "b.pgm")
        save(truth, tmp / "truth.pbm")
        (tmp / "corrupt.pgm").write_bytes(b"P5\n64 64\n255\n" + bytes(100))

        code, out, _ = _docbin("binarize", "--config", cfg, "--out", tmp / "o1",
                               tmp / "a.pgm", tmp / "b.pgm")
        results["binarize 2 valid -> 0"] = code == 0 and len(list((tmp / "o1").iterdir())) == 2

        code, out, err = _docbin("binarize", "--config", cfg, "--out", tmp / "o2",
                                 "--report", "ndjson", tmp / "a.pgm", tmp / "corrupt.pgm")
        recs = [json.loads(l) for l in out.splitlines()]
        for r in recs:
            jsonschema.validate(r, NDJSON_SCHEMA)
        results["binarize corrupt -> 1, ndjson"] = (
            code == 1 and len(recs) == 2 and len(list((tmp / "o2").iterdir())) == 1)

        code, out, err = _docbin("binarize", "--config", cfg, "--out", tmp / "o3",
                                 "--report", "csv", tmp / "a.pgm", tmp / "corrupt.pgm")
        rows = _csv_rows(out, ("path", "method", "threshold", "total_ms", "grayscale_ms",
                               "wiener_ms", "erode_ms", "sauvola_ms", "error"), ())
        results["binarize corrupt -> 1, csv"] = code == 1 and len(rows) == 2

        code, _, err = _docbin("binarize", "--config", bad_cfg, "--out", tmp / "o4", tmp / "a.pgm")
        results["binarize two thresholds -> 2"] = code == 2 and "threshold stage" in err

        (tmp / "g1.json").write_text('{"window": [15], "k": [0.5], "R": [128]}')
        code, out, _ = _docbin("sweep", "--method", "sauvola", "--truth", tmp / "truth.pbm",
                               "--grid", tmp / "g1.json", tmp / "a.pgm")
        sweep_cols = ("method", "window", "k", "R", "precision", "recall", "f", "accuracy")
        rows = _csv_rows(out, sweep_cols, ("precision", "recall", "f", "accuracy"))
        results["sweep one point -> 1 row"] = code == 0 and len(rows) == 1

        (tmp / "g4.json").write_text('{"window": [15, 31], "k": [0.2, 0.5]}')
        code, out, _ = _docbin("sweep", "--method", "sauvola", "--truth", tmp / "truth.pbm",
                               "--grid", tmp / "g4.json", tmp / "a.pgm")
        rows = _csv_rows(out, sweep_cols, ("precision", "recall", "f", "accuracy"))
        recomputed = [score(binarize(img, "sauvola", LocalParams(int(r["window"]), int(r["window"]),
                                                                 float(r["k"]), float(r["R"]))),
                            truth).f_measure for r in rows]
        results["sweep 2x2 -> 4 sorted rows"] = (
            code == 0 and len(rows) == 4 and recomputed == [float(r["f"]) for r in rows]
            and recomputed == sorted(recomputed, reverse=True))

        code, out, err = _docbin("sweep", "--method", "sauvola", "--grid", tmp / "g1.json", tmp / "a.pgm")
        results["sweep missing --truth -> 2"] = code == 2 and "usage" in err.lower()

        code, out, _ = _docbin("bench", "--methods", "otsu,niblack,sauvola,zhang_tan",
                               "--reps", 5, tmp / "a.pgm")
        rows = _csv_rows(out, ("method", "median_ms"), ("median_ms",))
        results["bench 4 methods -> 4 rows"] = code == 0 and len(rows) == 4
        code, _, _ = _docbin("bench", "--methods", "foo", tmp / "a.pgm")
        results["bench foo -> 2"] = code == 2

        save(make_text_mask(64, 64, seed=3), tmp / "mask.pbm")
        code, _, _ = _docbin("synth", "--mask", tmp / "mask.pbm", "--out", tmp / "s0.pgm")
        two_tone = set(np.unique(read_netpbm((tmp / "s0.pgm").read_bytes()).data).tolist()) == {40, 220}
        results["synth defaults -> two-tone"] = code == 0 and two_tone
        args = ("synth", "--mask", tmp / "mask.pbm", "--gradient", 120, "--noise", 8,
                "--spots", 3, "--spot-radius", 4, "--seed", 42)
        c1 = _docbin(*args, "--out", tmp / "s1.pgm")[0]
        c2 = _docbin(*args, "--out", tmp / "s2.pgm")[0]
        results["synth twice -> identical"] = (
            c1 == c2 == 0 and (tmp / "s1.pgm").read_bytes() == (tmp / "s2.pgm").read_bytes())
        save(BinaryImage(np.zeros((8, 32), dtype=bool)), tmp / "blank.pbm")
        code, _, _ = _docbin("synth", "--mask", tmp / "blank.pbm", "--gradient", 120,
                             "--out", tmp / "s3.pgm")
        col = read_netpbm((tmp / "s3.pgm").read_bytes()).data[:, -1]
        results["synth gradient 120 -> column 100"] = code == 0 and (col == 100).all()
        code, _, _ = _docbin("synth", "--mask", tmp / "missing.pbm", "--out", tmp / "s4.pgm")
        results["synth unreadable mask -> 3"] = code == 3

        results["--help -> 0"] = all(_docbin(c, "--help")[0] == 0
                                     for c in ("binarize", "sweep", "bench", "synth", "score"))

    failed = [k for k, v in results.items() if not v]
    detail = f"{len(results) - len(failed)}/{len(results)} invocations as specified"
    if failed:
        detail += "; failed: " + "; ".join(failed)
    return report(10, not failed, detail)


CHECKS = [check_otsu_oracle, check_otsu_dual, check_local_naive, check_closed_form,
          check_preprocess, check_quality, check_time_order, check_acceleration,
          check_determinism, check_cli]


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_criterion(check):
    assert check()


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
