"""Time the compiled and pure-Python kernels side by side.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json] [--pipeline]

Each kernel runs on the same inputs under every available backend; the
table reports the best wall time of ``--repeat`` runs and the speed-up of
the compiled core. ``--pipeline`` also times one synthetic helix frame
through the full pipeline.
"""

import argparse
import json
import tempfile
import timeit
from pathlib import Path

import numpy as np

from filament3d import kernels


def _cases(rng):
    t = np.linspace(0.0, 6 * np.pi, 1000)
    verts = np.column_stack([np.cos(t), np.sin(t), 0.1 * t])
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1).sum()
    P = rng.normal(size=(200, 2))
    Q = rng.normal(size=(200, 2))
    dist = np.linalg.norm(P[:, None] - Q[None], axis=2)
    s = np.linspace(0.0, 10.0, 200)
    y = np.abs(s - 4.0) + 0.05 * rng.normal(size=s.size)
    kappa = 0.5 + 0.01 * np.arange(10000) / 10000
    tau = np.full(10000, 0.3)
    return {
        "chord_walk (1000 vertices, 200 chords)": lambda: kernels.chord_walk(verts, seg / 200, 200),
        "frechet_table (200 x 200)": lambda: kernels.frechet_table(dist),
        "warp_table (200 x 200)": lambda: kernels.warp_table(dist),
        "segment_dp (200 samples, l1)": lambda: kernels.segment_dp(s, y, 0.5, 3, True),
        "segment_dp (200 samples, l2)": lambda: kernels.segment_dp(s, y, 0.5, 3, False),
        "integrate_frames (10000 steps)": lambda: kernels.integrate_frames(kappa, tau, 1e-3, np.eye(3)),
    }


def _pipeline_case(tmp):
    from filament3d.config import PipelineConfig
    from filament3d.pipeline import discover_frame, run_pipeline, write_synthetic_frame
    from filament3d.synthetic import make_scene, scene_curve

    frame = write_synthetic_frame(make_scene(scene_curve("helix"), sigma=0.5, seed=0), Path(tmp) / "frame", "helix")
    inputs = discover_frame(frame)
    return lambda: run_pipeline(PipelineConfig(), inputs, Path(tmp) / "out")


def best_time(fn, repeat):
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pipeline", action="store_true", help="also time one full helix frame")
    ap.add_argument("--json", help="write the timings here")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    cases = _cases(np.random.default_rng(args.seed))
    with tempfile.TemporaryDirectory() as tmp:
        if args.pipeline:
            cases["pipeline (helix frame, sigma 0.5)"] = _pipeline_case(tmp)
        results = {}
        old = kernels.BACKEND
        try:
            for name, fn in cases.items():
                results[name] = {}
                for b in backends:
                    kernels.use_backend(b)
                    results[name][b] = best_time(fn, args.repeat)
        finally:
            kernels.use_backend(old)

    width = max(len(n) for n in results)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>10}" for b in backends)
    if "cython" in backends:
        header += f"  {'speed-up':>9}"
    print(header)
    print("-" * len(header))
    for name, row in results.items():
        line = f"{name:<{width}}  " + "  ".join(f"{row[b] * 1e3:>8.2f}ms" for b in backends)
        if "cython" in backends:
            line += f"  {row['python'] / row['cython']:>8.1f}x"
        print(line)
    if "cython" not in backends:
        print("compiled kernels are not built; only the pure-Python fallback was timed")
    if args.json:
        Path(args.json).write_text(json.dumps({"seconds": results, "backends": backends}, indent=2) + "\n")


if __name__ == "__main__":
    main()
