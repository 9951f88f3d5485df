"""End-to-end driver: skeletons and cameras in, fitted and evaluated 3D curve out.

Every stage writes its artifacts into the run directory; nothing written
by one stage is touched by a later one. Errors are re-raised as
:class:`PipelineStageError` carrying the stage name.
"""

from __future__ import annotations

import hashlib
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, io, kernels
from .config import PipelineConfig
from .correspondence import match_views
from .curve import CameraModel, OrderedPolyline2D, Polyline3D, smooth_curve
from .errors import Filament3DError, InvalidInput, PipelineStageError
from .evaluation import breakpoint_density, goodness, grid_search, reprojection_error, tip_trajectory
from .frenet import frenet_series
from .ordering import PixelSet, order_skeleton
from .pwc import fit_pwc_series
from .reconstruction import reconstruct

STAGES = ("order", "match", "frenet", "fit", "reconstruct", "evaluate")


@contextmanager
def stage(name, log=None):
    """Tag any failure inside the block with the stage name."""
    t0 = time.perf_counter()
    try:
        yield
    except PipelineStageError:
        raise
    except (Filament3DError, OSError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        raise PipelineStageError(name, exc) from exc
    if log is not None:
        log.append({"stage": name, "seconds": round(time.perf_counter() - t0, 6)})


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions():
    import scipy

    return {
        "filament3d": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernels": kernels.BACKEND,
    }


@dataclass
class FrameInputs:
    """Skeleton sources and cameras of one frame.

    A skeleton source is a pixel CSV or mask path (ordered by the
    ``order`` stage, which needs the start hint), a :class:`PixelSet`, or an
    already ordered :class:`OrderedPolyline2D`.
    """

    skeletons: list
    cameras: object  # path or list of CameraModel
    start_hints: list | None = None
    reference: int | None = None


def discover_frame(frame_dir):
    """Inputs of a frame directory laid out like the ``synth`` output.

    Looks for ``view{i}_skeleton.csv`` (or ``.png``/``.pgm``) pixel sets
    with start hints in ``scene.json``; falls back to ordered
    ``view{i}_ordered.csv`` polylines. Cameras come from ``cameras.json``.
    """
    d = Path(frame_dir)
    skeletons = []
    i = 0
    while True:
        found = None
        for name in (f"view{i}_skeleton.csv", f"view{i}_skeleton.png", f"view{i}_skeleton.pgm", f"view{i}_ordered.csv"):
            if (d / name).exists():
                found = d / name
                break
        if found is None:
            break
        skeletons.append(found)
        i += 1
    if not skeletons:
        raise InvalidInput(f"{d}: no view skeletons found")
    hints = None
    if (d / "scene.json").exists():
        hints = io.read_json(d / "scene.json").get("start_hints")
    return FrameInputs(skeletons, d / "cameras.json", hints)


@dataclass
class PipelineResult:
    out_dir: Path
    curve: Polyline3D
    reconstructed: Polyline3D
    model: object
    metrics: dict
    manifest: dict = field(repr=False, default_factory=dict)


def _order_views(inputs: FrameInputs, cfg: PipelineConfig, out: Path):
    ordered, reports, sources = [], [], []
    for i, src in enumerate(inputs.skeletons):
        if isinstance(src, OrderedPolyline2D):
            ordered.append(src)
            reports.append({"view": i, "topology": "given"})
            continue
        if isinstance(src, PixelSet):
            ps = src
        else:
            p = Path(src)
            sources.append(p)
            if p.name.endswith("_ordered.csv"):
                ordered.append(io.read_polyline2d(p))
                reports.append({"view": i, "topology": "given"})
                continue
            if not inputs.start_hints or len(inputs.start_hints) <= i:
                raise InvalidInput(f"view {i}: a start hint is required to order pixel skeletons")
            ps = io.read_pixelset(p, inputs.start_hints[i])
        poly, rep = order_skeleton(ps, tau_tip=cfg.tau_tip, n_fit=cfg.n_line_fit, eps_angle=cfg.eps_angle, max_gap=cfg.max_gap)
        ordered.append(poly)
        reports.append(
            {
                "view": i,
                "topology": rep.topology,
                "cross_point": rep.cross_point,
                "tip_distance": rep.tip_distance,
                "n_pixels": len(ps),
            }
        )
    for i, poly in enumerate(ordered):
        io.write_points_csv(out / f"view{i}_ordered.csv", poly, header=["u", "v"])
    io.write_json(out / "ordering.json", reports)
    return ordered, sources


def _cameras(inputs: FrameInputs):
    if isinstance(inputs.cameras, (str, os.PathLike)):
        p = Path(inputs.cameras)
        if not p.exists():
            raise InvalidInput(f"camera file {p} does not exist")
        cams, _ = io.read_cameras(p)
        return cams, p
    cams = list(inputs.cameras)
    if not all(isinstance(c, CameraModel) for c in cams):
        raise InvalidInput("cameras must be a path or a list of CameraModel")
    return cams, None


def run_pipeline(config: PipelineConfig, inputs: FrameInputs, out_dir):
    """Order, match and triangulate, fit, reconstruct and evaluate one frame.

    Writes per-stage artifacts plus ``metrics.json`` (deterministic for
    identical inputs and configuration) and ``manifest.json`` (config hash,
    versions, input digests, stage timings, metrics).
    """
    cfg = config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.ini")
    log = []

    with stage("order", log):
        ordered, sources = _order_views(inputs, cfg, out)

    with stage("match", log):
        cams, cam_path = _cameras(inputs)
        if cam_path is not None:
            sources.append(cam_path)
        ref = cfg.reference if inputs.reference is None else inputs.reference
        if len(cams) != len(ordered):
            raise InvalidInput(f"{len(ordered)} skeletons but {len(cams)} cameras")
        match = match_views(ordered, cams, k=cfg.k, reference=ref, refine=cfg.refine, epipolar=cfg.epipolar)
        curve = match.curve
        io.write_points_csv(out / "triangulated.csv", curve)
        io.write_json(out / "couplings.json", {str(v): c.to_dict() for v, c in match.couplings.items()})

    with stage("frenet", log):
        if cfg.smooth_knots:
            curve = Polyline3D(smooth_curve(curve, cfg.smooth_knots))
            io.write_points_csv(out / "smoothed.csv", curve)
        series = frenet_series(curve, cfg.eps_straight)
        io.write_table_csv(out / "frenet.csv", {"s": series.s, "kappa": series.kappa, "tau": series.tau})
        io.write_json(out / "frames.json", {"T": series.T, "N": series.N, "B": series.B, "boundary_policy": series.boundary_policy})

    with stage("fit", log):
        eps_k, eps_t = cfg.eps_kappa, cfg.eps_tau
        if cfg.penalty_search:
            gs = grid_search(
                curve,
                (cfg.eps_kappa_min, cfg.eps_kappa_max),
                (cfg.eps_tau_min, cfg.eps_tau_max),
                grid=cfg.grid,
                max_iters=cfg.max_iters,
                n_regions=cfg.n_regions,
                fit_norm=cfg.fit_norm,
                min_len=cfg.min_len,
                midpoint=cfg.midpoint,
                r2_target=cfg.r2_target,
                sse_target=cfg.sse_target,
                sse_mode=cfg.sse_mode,
                workers=cfg.gridsearch_workers,
                eps_straight=cfg.eps_straight,
            )
            write_gridsearch(out, gs)
            eps_k, eps_t = gs.best_eps_kappa, gs.best_eps_tau
        model = fit_pwc_series(series, curve.points[0], eps_k, eps_t, cfg.fit_norm, cfg.min_len)
        io.write_model(out / "model.json", model)

    with stage("reconstruct", log):
        rec = reconstruct(model, curve.points, midpoint=cfg.midpoint, series=cfg.series)
        io.write_points_csv(out / "reconstructed.csv", rec.curve)

    with stage("evaluate", log):
        fit = goodness(rec.curve, curve, fraction=cfg.section_fraction)
        reproj = {}
        for i, (poly, cam) in enumerate(zip(ordered, cams)):
            reproj[str(i)] = reprojection_error(rec.curve, poly, cam, k=cfg.k, pairing=cfg.pairing, fraction=cfg.section_fraction)
        metrics = {
            "fit": fit.to_dict(),
            "rms": rec.rms,
            "penalties": {"eps_kappa": eps_k, "eps_tau": eps_t},
            "segments": {"kappa": len(model.kappa_segments), "tau": len(model.tau_segments)},
            "reprojection": {v: {s: {"mean": m, "std": sd} for s, (m, sd) in secs.items()} for v, secs in reproj.items()},
            "reprojection_mean_entire": float(np.mean([secs["entire"][0] for secs in reproj.values()])),
            "frame_integrity": {
                "post_deviation": rec.frames.post_deviation,
                "drift_per_1000_steps": rec.frames.drift_per_1000_steps(),
            },
        }
        io.write_json(out / "metrics.json", metrics)
        rows = [(v, s, m, sd) for v, secs in reproj.items() for s, (m, sd) in secs.items()]
        io.write_table_csv(
            out / "sections.csv",
            {
                "view": [r[0] for r in rows],
                "section": [r[1] for r in rows],
                "mean_px": [float(r[2]) for r in rows],
                "std_px": [float(r[3]) for r in rows],
            },
        )

    manifest = {
        "config_sha256": cfg.digest(),
        "config": cfg.as_dict(),
        "versions": versions(),
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in sources if Path(p).exists()],
        "stages": log,
        "metrics": metrics,
    }
    io.write_json(out / "manifest.json", manifest)
    return PipelineResult(out, curve, rec.curve, model, metrics, manifest)


def write_gridsearch(out, gs):
    """Result JSON plus one R² and one SSE heat-map CSV per iteration."""
    out = Path(out)
    io.write_json(out / "gridsearch.json", gs.to_dict())
    for it, h in enumerate(gs.history):
        for attr in ("r_squared", "sse", "sse_normalized"):
            M = h.matrix(attr)
            rows = {"eps_kappa": np.repeat(h.eps_kappa, len(h.eps_tau)), "eps_tau": np.tile(h.eps_tau, len(h.eps_kappa)), attr: M.ravel()}
            io.write_table_csv(out / f"gridsearch_iter{it}_{attr}.csv", rows)


def write_synthetic_frame(scene, out_dir, kind=""):
    """Write a synthetic scene as a frame directory that :func:`discover_frame` reads.

    Files: ``truth.csv``, ``cameras.json``, ``view{i}_skeleton.csv``
    (shuffled pixels), ``view{i}_projection.csv`` (noisy ordered
    projections) and ``scene.json`` with the start hints.
    """
    from .synthetic import IMAGE_SIZE, project_scene

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    views, rasters = project_scene(scene, rasterize=True)
    io.write_points_csv(out / "truth.csv", scene.truth_curve)
    io.write_cameras(out / "cameras.json", scene.cameras, scene.reference)
    hints = []
    for i, (v, (ps, order)) in enumerate(zip(views, rasters)):
        io.write_points_csv(out / f"view{i}_projection.csv", v, header=["u", "v"])
        io.write_pixels(out / f"view{i}_skeleton.csv", ps.pixels)
        hints.append(list(ps.start_hint))
    io.write_json(
        out / "scene.json",
        {
            "kind": kind,
            "pixel_noise_sigma": scene.pixel_noise_sigma,
            "seed": scene.seed,
            "reference": scene.reference,
            "image_size": list(IMAGE_SIZE),
            "start_hints": hints,
        },
    )
    return out


# --------------------------------------------------------------------------
# sequences


def _run_frame(args):
    idx, frame_dir, cfg_text, out_dir = args
    cfg = PipelineConfig.from_ini(cfg_text)
    try:
        res = run_pipeline(cfg, discover_frame(frame_dir), out_dir)
    except PipelineStageError as exc:
        return {"index": idx, "frame": str(frame_dir), "ok": False, "stage": exc.stage, "error": str(exc)}
    except Filament3DError as exc:
        return {"index": idx, "frame": str(frame_dir), "ok": False, "stage": "input", "error": f"{type(exc).__name__}: {exc}"}
    return {"index": idx, "frame": str(frame_dir), "ok": True, "out": str(out_dir), "metrics": res.metrics}


@dataclass
class SequenceResult:
    out_dir: Path
    frames: list
    failures: list
    tips: np.ndarray


def run_sequence(config: PipelineConfig, frame_dirs, out_dir, workers=None):
    """Run the pipeline on every frame and aggregate tip paths and breakpoints.

    Frames run on up to ``workers`` processes (default from the config). A
    failing frame is recorded with its stage and message and the rest of the
    sequence continues.
    """
    frame_dirs = [Path(d) for d in frame_dirs]
    if not frame_dirs:
        raise InvalidInput("need at least one frame")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.ini")
    workers = config.sequence_workers if workers is None else int(workers)
    text = config.to_ini()
    jobs = [(i, str(d), text, str(out / f"frame_{i:04d}")) for i, d in enumerate(frame_dirs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_frame, jobs))
    else:
        results = [_run_frame(j) for j in jobs]
    ok = [r for r in results if r["ok"]]
    failures = [r for r in results if not r["ok"]]

    curves = [io.read_polyline3d(Path(r["out"]) / "reconstructed.csv") for r in ok]
    models = [io.read_model(Path(r["out"]) / "model.json") for r in ok]
    idx = [r["index"] for r in ok]
    tips = np.empty((0, 3))
    if ok:
        traj = tip_trajectory(curves)
        tips = traj.points
        io.write_table_csv(out / "tip_trajectory.csv", {"frame": idx, "x": tips[:, 0], "y": tips[:, 1], "z": tips[:, 2]})
        bp = breakpoint_density(models)
        rows = [(f, q, b) for f, d in zip(idx, bp) for q in ("kappa", "tau") for b in d[q]]
        io.write_table_csv(out / "breakpoints.csv", {"frame": [r[0] for r in rows], "quantity": [r[1] for r in rows], "index": [r[2] for r in rows]})
        strips = _strips(models)
        io.write_table_csv(
            out / "curvature_torsion.csv",
            {
                "frame": np.repeat(idx, strips["u"].size),
                "u": np.tile(strips["u"], len(idx)),
                "kappa": strips["kappa"].ravel(),
                "tau": strips["tau"].ravel(),
            },
        )
        plot_sequence(out, idx, tips, strips)
    manifest = {
        "config_sha256": config.digest(),
        "versions": versions(),
        "frames": [{k: v for k, v in r.items() if k != "metrics"} for r in results],
        "failures": failures,
        "n_ok": len(ok),
        "n_failed": len(failures),
    }
    io.write_json(out / "sequence_manifest.json", manifest)
    return SequenceResult(out, results, failures, tips)


def _strips(models, n=100):
    """Curvature and torsion of each model at ``n`` fractions of its length."""
    u = np.linspace(0.0, 1.0, n)
    K = np.empty((len(models), n))
    T = np.empty((len(models), n))
    for i, m in enumerate(models):
        s = m.arclength[0] + u * m.length
        K[i] = m.kappa_at(s)
        T[i] = m.tau_at(s)
    return {"u": u, "kappa": K, "tau": T}


def plot_sequence(out, frames, tips, strips):
    """SVG plots: tip path projections and curvature/torsion heat strips."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out)
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    for ax, (a, b), name in zip(axes, ((0, 1), (1, 2), (0, 2)), ("X-Y", "Y-Z", "X-Z")):
        ax.plot(tips[:, a], tips[:, b], "o-", ms=3)
        ax.set_title(name)
        ax.set_xlabel("xyz"[a])
        ax.set_ylabel("xyz"[b])
        ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(out / "tip_trajectory.svg")
    plt.close(fig)

    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    extent = (0.0, 1.0, frames[-1] + 0.5, frames[0] - 0.5)
    for ax, key in zip(axes, ("kappa", "tau")):
        im = ax.imshow(strips[key], aspect="auto", extent=extent, interpolation="nearest")
        ax.set_ylabel("frame")
        ax.set_title(key)
        fig.colorbar(im, ax=ax)
    axes[-1].set_xlabel("normalized arc length")
    fig.tight_layout()
    fig.savefig(out / "curvature_torsion.svg")
    plt.close(fig)


__all__ = [
    "FrameInputs",
    "PipelineResult",
    "STAGES",
    "SequenceResult",
    "discover_frame",
    "plot_sequence",
    "run_pipeline",
    "run_sequence",
    "stage",
    "versions",
    "write_gridsearch",
    "write_synthetic_frame",
]
