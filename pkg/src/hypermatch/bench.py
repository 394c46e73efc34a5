"""Micro-benchmarks for the geometry kernels and the scoring pipeline.

Measurement, not correctness: each op is timed over >= 30 samples after
warm-up (inner loops sized so a sample spans at least ~10 ms, long
enough to average out allocator and scheduler bursts) and the median is
reported. Allocation figures are net allocated blocks per op
with the final result held alive, sampled via sys.getallocatedblocks;
freed temporaries do not show up, so treat the number as a floor. The
kernels allocate fresh result arrays per call by design (no out=
buffer reuse), and the recorded baselines reflect that.

Regression gating compares medians against a checked-in baseline JSON
(`bench-baseline.json`), only when the machine tag matches, and only in
the slow direction: +25% over baseline fails, improvements merely
suggest re-baselining. Run `hypermatch bench --out <file>` to produce a
baseline, `hypermatch bench <baseline>` to gate against one.
"""

from __future__ import annotations

import json
import math
import os
import platform
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import data, geometry
from . import model as model_mod
from .model import ModelConfig

MIN_SAMPLES = 30
WARMUP_CALLS = 5
TARGET_SAMPLE_NS = 10_000_000
GATE_TOLERANCE = 0.25

PIPELINE_CONFIG = ModelConfig(layers=4, embed_dim=64, hyper_dim=64,
                              max_phrase_len=5, curvature=1.0)


@dataclass
class BenchResult:
    name: str                   # op identifier, stable across runs
    scale: str                  # input-size tag, e.g. "d64" or "d8/p512"
    median_ns: float
    ops_per_sec: float
    allocs_per_op: int

    @property
    def key(self) -> str:
        return f"{self.name}/{self.scale}"


def machine_tag() -> str:
    return f"{platform.system()}-{platform.machine()}-cpu{os.cpu_count()}"


def _measure(fn, min_samples: int = MIN_SAMPLES) -> tuple[float, int]:
    """(median ns/op, net allocated blocks/op) for a nullary callable."""
    for _ in range(WARMUP_CALLS):
        fn()
    reps = 1
    while True:
        start = time.perf_counter_ns()
        for _ in range(reps):
            fn()
        if time.perf_counter_ns() - start >= TARGET_SAMPLE_NS or reps >= 1 << 16:
            break
        reps *= 2
    samples = []
    for _ in range(min_samples):
        start = time.perf_counter_ns()
        for _ in range(reps):
            fn()
        samples.append((time.perf_counter_ns() - start) / reps)
    hold = []
    before = sys.getallocatedblocks()
    hold.append(fn())
    allocs = sys.getallocatedblocks() - before
    hold.clear()
    return statistics.median(samples), max(allocs, 0)


def _result(name: str, scale: str, fn) -> BenchResult:
    median_ns, allocs = _measure(fn)
    return BenchResult(name=name, scale=scale, median_ns=median_ns,
                       ops_per_sec=1e9 / median_ns if median_ns > 0 else 0.0,
                       allocs_per_op=allocs)


def bench_geometry(dims=(8, 64, 768), c: float = 1.0,
                   point_counts=(1, 8, 64, 512)) -> list[BenchResult]:
    """Kernel timings per dimension; midpoint additionally per point count."""
    rng = np.random.default_rng(7)
    results = []
    for dim in dims:
        x = rng.normal(size=dim)
        x *= 0.6 / np.linalg.norm(x)
        y = rng.normal(size=dim)
        y *= 0.6 / np.linalg.norm(y)
        v = rng.normal(size=dim)
        scale = f"d{dim}"
        results.append(_result("mobius_add", scale,
                               lambda x=x, y=y: geometry.mobius_add(x, y, c)))
        results.append(_result("poincare_distance", scale,
                               lambda x=x, y=y: geometry.poincare_distance(x, y, c)))
        results.append(_result("expmap0", scale,
                               lambda v=v: geometry.expmap0(v, c)))
        results.append(_result("logmap0", scale,
                               lambda x=x: geometry.logmap0(x, c)))
        for count in point_counts:
            pts = rng.normal(size=(count, dim))
            pts *= 0.6 / np.linalg.norm(pts, axis=-1, keepdims=True)
            results.append(_result(
                "einstein_midpoint", f"{scale}/p{count}",
                lambda pts=pts: geometry.einstein_midpoint(pts, c)))
    return results


def _pipeline_documents(count: int, cfg: ModelConfig, doc_len: int):
    docs = []
    for d in range(count):
        tokens = [f"doc{d}tok{i:04d}" for i in range(doc_len)]
        layers = data.synth_layers(tokens, cfg.layers, cfg.embed_dim, seed=d)
        docs.append(model_mod.prepare_document(
            f"bench-{d}", tokens, [], layers, cfg, ordinal=d))
    return docs


def bench_pipeline(doc_len: int = 512, cfg: ModelConfig = PIPELINE_CONFIG,
                   thread_counts=(1, 4)) -> list[BenchResult]:
    """Full score-all-candidates pass, single doc and threaded batches."""
    params = model_mod.init_parameters(cfg, seed=0)
    single = _pipeline_documents(1, cfg, doc_len)[0]
    results = [_result(
        "score_document", f"m{doc_len}/n{cfg.max_phrase_len}",
        lambda: model_mod.score_document(single, params, cfg))]

    batch = _pipeline_documents(8, cfg, doc_len)
    for workers in thread_counts:
        def run_batch(workers=workers):
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(
                    lambda doc: model_mod.score_document(doc, params, cfg),
                    batch))
        median_ns, allocs = _measure(run_batch, min_samples=5)
        per_doc = median_ns / len(batch)
        results.append(BenchResult(
            name="score_batch8", scale=f"m{doc_len}/t{workers}",
            median_ns=per_doc, ops_per_sec=1e9 / per_doc,
            allocs_per_op=allocs // len(batch)))
    return results


def _format_table(results: list[BenchResult]) -> str:
    lines = [f"{'op':<24} {'scale':<12} {'median':>12} {'ops/s':>12} {'allocs':>8}"]
    for r in results:
        if r.median_ns >= 1e6:
            med = f"{r.median_ns / 1e6:.2f} ms"
        elif r.median_ns >= 1e3:
            med = f"{r.median_ns / 1e3:.2f} us"
        else:
            med = f"{r.median_ns:.0f} ns"
        lines.append(f"{r.name:<24} {r.scale:<12} {med:>12} "
                     f"{r.ops_per_sec:>12.1f} {r.allocs_per_op:>8d}")
    return "\n".join(lines)


def to_baseline(results: list[BenchResult]) -> dict:
    return {
        "machine": machine_tag(),
        "tolerance": GATE_TOLERANCE,
        "results": {
            r.key: {"median_ns": r.median_ns, "allocs_per_op": r.allocs_per_op}
            for r in results
        },
    }


def gate(results: list[BenchResult], baseline: dict) -> tuple[bool, list[str]]:
    """Compare against a baseline; (ok, messages). Slow direction only."""
    messages = []
    if baseline.get("machine") != machine_tag():
        messages.append(
            f"baseline machine '{baseline.get('machine')}' does not match "
            f"'{machine_tag()}'; gate skipped")
        return True, messages
    tolerance = float(baseline.get("tolerance", GATE_TOLERANCE))
    recorded = baseline.get("results", {})
    ok = True
    current = {r.key: r for r in results}
    for key, entry in recorded.items():
        if key not in current:
            messages.append(f"{key}: in baseline but not measured; ignored")
            continue
        base_ns = float(entry["median_ns"])
        cur_ns = current[key].median_ns
        ratio = cur_ns / base_ns if base_ns > 0 else math.inf
        if ratio > 1.0 + tolerance:
            ok = False
            messages.append(f"FAIL {key}: {cur_ns:.0f} ns vs baseline "
                            f"{base_ns:.0f} ns ({ratio:.2f}x)")
        elif ratio < 1.0 - tolerance:
            messages.append(f"note {key}: {ratio:.2f}x of baseline; "
                            "consider re-measuring the baseline")
    return ok, messages


def run(baseline_path=None, out_path=None, threads: int | None = None) -> int:
    thread_counts = (1, threads) if threads and threads > 1 else (1, 4)
    results = bench_geometry() + bench_pipeline(thread_counts=thread_counts)
    print(_format_table(results))
    print(f"machine: {machine_tag()}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(to_baseline(results), fh, indent=2)
            fh.write("\n")
        print(f"baseline written to {out_path}")
    if baseline_path:
        with open(baseline_path, "r", encoding="utf-8") as fh:
            baseline = json.load(fh)
        ok, messages = gate(results, baseline)
        for message in messages:
            print(message)
        print("gate: PASS" if ok else "gate: FAIL")
        return 0 if ok else 1
    return 0
