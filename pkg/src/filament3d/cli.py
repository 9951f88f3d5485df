"""Command-line interface: one subcommand per stage plus full runs.

Exit status is 0 on success, 1 when a stage fails (the message on stderr
starts with the stage name in brackets) and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import PipelineConfig
from .correspondence import match_views
from .curve import Polyline3D, smooth_curve
from .errors import Filament3DError, InvalidInput, PipelineStageError
from .evaluation import goodness, grid_search, reprojection_error
from .frenet import frenet_series
from .ordering import order_skeleton
from .pipeline import discover_frame, run_pipeline, run_sequence, stage, write_gridsearch, write_synthetic_frame
from .pwc import fit_pwc_series
from .reconstruction import reconstruct


def _config(args, **overrides):
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    kw = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **kw) if kw else cfg


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _say(msg):
    print(msg)


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    from .synthetic import curling_sequence, make_scene, scene_curve

    with stage("synth"):
        out = _out_dir(args.out)
        if args.kind == "curling":
            curves = curling_sequence(n_frames=args.frames, n=args.n)
            # every frame shares the first frame's placement so the base stays put
            offset = curves[0].points.mean(axis=0)
            for i, c in enumerate(curves):
                scene = make_scene(c.points - offset, sigma=args.sigma, seed=args.seed + i, center=False)
                write_synthetic_frame(scene, out / f"frame_{i:04d}", "curling")
            _say(f"wrote {len(curves)} frames to {out}")
        else:
            scene = make_scene(scene_curve(args.kind, n=args.n), sigma=args.sigma, seed=args.seed)
            write_synthetic_frame(scene, out, args.kind)
            _say(f"wrote {args.kind} frame to {out}")


def cmd_order(args):
    cfg = _config(args, tau_tip=args.tau_tip, max_gap=args.max_gap)
    with stage("order"):
        ps = io.read_pixelset(args.pixels, (args.start_u, args.start_v))
        poly, rep = order_skeleton(ps, tau_tip=cfg.tau_tip, n_fit=cfg.n_line_fit, eps_angle=cfg.eps_angle, max_gap=cfg.max_gap)
        io.write_points_csv(args.out, poly, header=["u", "v"])
        report = {"topology": rep.topology, "cross_point": rep.cross_point, "tip_distance": rep.tip_distance, "n_pixels": len(ps)}
        if args.report:
            io.write_json(args.report, report)
        _say(f"{rep.topology}: {len(poly)} ordered points -> {args.out}")


def cmd_match(args):
    cfg = _config(args, k=args.k, reference=args.reference, smooth_knots=args.smooth_knots)
    with stage("match"):
        cam_path = Path(args.cameras)
        if not cam_path.exists():
            raise InvalidInput(f"camera file {cam_path} does not exist")
        cams, ref = io.read_cameras(cam_path)
        if args.reference is not None:
            ref = args.reference
        views = [io.read_polyline2d(v) for v in args.views]
        if len(views) != len(cams):
            raise InvalidInput(f"{len(views)} views but {len(cams)} cameras")
        epipolar = cfg.epipolar and not args.no_epipolar
        res = match_views(views, cams, k=cfg.k, reference=ref, refine=cfg.refine or args.refine, epipolar=epipolar)
        out = _out_dir(args.out)
        io.write_points_csv(out / "triangulated.csv", res.curve)
        if cfg.smooth_knots:
            io.write_points_csv(out / "smoothed.csv", smooth_curve(res.curve, cfg.smooth_knots))
        io.write_json(out / "couplings.json", {str(v): c.to_dict() for v, c in res.couplings.items()})
        _say(f"triangulated {len(res.curve)} points -> {out / 'triangulated.csv'}")


def _load_curve(path, knots):
    # stage commands take the curve as given unless --smooth-knots is passed
    C = io.read_polyline3d(path)
    return Polyline3D(smooth_curve(C, knots)) if knots else C


def cmd_frenet(args):
    cfg = _config(args, eps_straight=args.eps_straight)
    with stage("frenet"):
        C = _load_curve(args.curve, args.smooth_knots)
        series = frenet_series(C, cfg.eps_straight)
        io.write_table_csv(args.out, {"s": series.s, "kappa": series.kappa, "tau": series.tau})
        if args.frames:
            io.write_json(args.frames, {"T": series.T, "N": series.N, "B": series.B, "boundary_policy": series.boundary_policy})
        _say(f"{len(series)} samples -> {args.out}")


def cmd_fit(args):
    cfg = _config(args, eps_kappa=args.eps_kappa, eps_tau=args.eps_tau, fit_norm=args.fit_norm)
    with stage("fit"):
        C = _load_curve(args.curve, args.smooth_knots)
        series = frenet_series(C, cfg.eps_straight)
        model = fit_pwc_series(series, C.points[0], cfg.eps_kappa, cfg.eps_tau, cfg.fit_norm, cfg.min_len)
        io.write_model(args.out, model)
        _say(f"{len(model.kappa_segments)} curvature and {len(model.tau_segments)} torsion segments -> {args.out}")


def cmd_reconstruct(args):
    cfg = _config(args)
    with stage("reconstruct"):
        model = io.read_model(args.model)
        obs = io.read_polyline3d(args.observed)
        rec = reconstruct(model, obs, midpoint=cfg.midpoint or args.midpoint, series=args.series or cfg.series)
        io.write_points_csv(args.out, rec.curve)
        if args.metrics:
            fit = goodness(rec.curve, obs, fraction=cfg.section_fraction)
            io.write_json(
                args.metrics,
                {
                    "rms": rec.rms,
                    "r_squared": fit.r_squared,
                    "sse": fit.sse,
                    "post_deviation": rec.frames.post_deviation,
                    "drift_per_1000_steps": rec.frames.drift_per_1000_steps(),
                },
            )
        _say(f"registration rms {rec.rms:.6g} -> {args.out}")


def cmd_evaluate(args):
    cfg = _config(args, section_fraction=args.section_fraction)
    with stage("evaluate"):
        fitted = io.read_polyline3d(args.fitted)
        observed = io.read_polyline3d(args.observed)
        fit = goodness(fitted, observed, fraction=cfg.section_fraction)
        metrics = {"fit": fit.to_dict()}
        rows = {"view": [], "section": [], "mean": [], "std": []}
        for sec, (m, sd) in fit.per_section.items():
            rows["view"].append("3d")
            rows["section"].append(sec)
            rows["mean"].append(float(m))
            rows["std"].append(float(sd))
        if args.views:
            if not args.cameras:
                raise InvalidInput("--views needs --cameras")
            cams, _ = io.read_cameras(args.cameras)
            if len(cams) != len(args.views):
                raise InvalidInput(f"{len(args.views)} views but {len(cams)} cameras")
            reproj = {}
            for i, (v, cam) in enumerate(zip(args.views, cams)):
                secs = reprojection_error(fitted, io.read_polyline2d(v), cam, k=cfg.k, pairing=cfg.pairing, fraction=cfg.section_fraction)
                reproj[str(i)] = {s: {"mean": m, "std": sd} for s, (m, sd) in secs.items()}
                for s, (m, sd) in secs.items():
                    rows["view"].append(str(i))
                    rows["section"].append(s)
                    rows["mean"].append(float(m))
                    rows["std"].append(float(sd))
            metrics["reprojection"] = reproj
            metrics["reprojection_mean_entire"] = float(np.mean([r["entire"]["mean"] for r in reproj.values()]))
        out = _out_dir(args.out)
        io.write_json(out / "metrics.json", metrics)
        io.write_table_csv(out / "sections.csv", rows)
        _say(f"R^2 {fit.r_squared:.6f}, SSE {fit.sse:.6g} -> {out / 'metrics.json'}")


def cmd_gridsearch(args):
    cfg = _config(
        args,
        eps_kappa_max=args.eps_kappa_max,
        eps_tau_max=args.eps_tau_max,
        grid=args.grid,
        max_iters=args.max_iters,
        gridsearch_workers=args.workers,
    )
    with stage("gridsearch"):
        C = _load_curve(args.curve, args.smooth_knots)
        gs = grid_search(
            C,
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
        out = _out_dir(args.out)
        write_gridsearch(out, gs)
        state = "converged" if gs.converged else "not converged"
        _say(
            f"{state} after {len(gs.history)} iteration(s): eps_kappa={gs.best_eps_kappa:.6g} "
            f"eps_tau={gs.best_eps_tau:.6g} R^2={gs.best.r_squared:.6f} -> {out / 'gridsearch.json'}"
        )


def cmd_pipeline(args):
    if args.dump_config:
        sys.stdout.write(_config(args).to_ini())
        return
    if not args.frame or not args.out:
        raise InvalidInput("pipeline needs a frame directory and --out")
    cfg = _config(args, penalty_search=True if args.gridsearch else None)
    with stage("order"):
        inputs = discover_frame(args.frame)
    if args.cameras:
        inputs.cameras = Path(args.cameras)
    res = run_pipeline(cfg, inputs, args.out)
    m = res.metrics
    _say(f"R^2 {m['fit']['r_squared']:.6f}, mean reprojection {m['reprojection_mean_entire']:.3f} px -> {res.out_dir}")


def cmd_sequence(args):
    cfg = _config(args, sequence_workers=args.workers, penalty_search=True if args.gridsearch else None)
    frames = [Path(f) for f in args.frames]
    if len(frames) == 1 and not (frames[0] / "cameras.json").exists():
        frames = sorted(p for p in frames[0].iterdir() if p.is_dir())
    res = run_sequence(cfg, frames, args.out)
    for f in res.failures:
        print(f"frame {f['index']} failed [{f['stage']}]: {f['error']}", file=sys.stderr)
    n_ok = len(res.frames) - len(res.failures)
    _say(f"{n_ok}/{len(res.frames)} frames completed -> {res.out_dir}")
    if n_ok == 0:
        raise PipelineStageError("sequence", InvalidInput("every frame failed"))


# --------------------------------------------------------------------------
# parser


def _add_config(p):
    p.add_argument("--config", help="INI configuration file (defaults apply otherwise)")


def build_parser():
    ap = argparse.ArgumentParser(prog="filament3d", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic frame (or a curling sequence)")
    p.add_argument("--kind", choices=("helix", "clothoid", "euler", "curling"), default="helix")
    p.add_argument("--sigma", type=float, default=0.5, help="pixel noise standard deviation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=10, help="frames for --kind curling")
    p.add_argument("--n", type=int, default=1000, help="truth curve samples")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("order", help="order the pixels of one skeleton from its start point")
    p.add_argument("pixels", help="u,v CSV or binary mask image")
    p.add_argument("--start-u", type=int, required=True)
    p.add_argument("--start-v", type=int, required=True)
    p.add_argument("--tau-tip", type=float)
    p.add_argument("--max-gap", type=int)
    p.add_argument("--report", help="write the topology report here (JSON)")
    p.add_argument("--out", required=True, help="ordered polyline CSV")
    _add_config(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("match", help="correspond ordered views and triangulate")
    p.add_argument("views", nargs="+", help="ordered view CSVs, one per camera")
    p.add_argument("--cameras", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--reference", type=int)
    p.add_argument("--no-epipolar", action="store_true", help="use the plain Frechet partners")
    p.add_argument("--refine", action="store_true")
    p.add_argument("--smooth-knots", type=int, help="knots of the smoothed.csv spline (0 = do not write it)")
    p.add_argument("--out", required=True, help="output directory")
    _add_config(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("frenet", help="discrete curvature, torsion and frames of a 3D curve")
    p.add_argument("curve")
    p.add_argument("--smooth-knots", type=int)
    p.add_argument("--eps-straight", type=float)
    p.add_argument("--frames", help="also write the frames (JSON)")
    p.add_argument("--out", required=True, help="s,kappa,tau CSV")
    _add_config(p)
    p.set_defaults(func=cmd_frenet)

    p = sub.add_parser("fit", help="piece-wise linear curvature and torsion model")
    p.add_argument("curve")
    p.add_argument("--eps-kappa", type=float)
    p.add_argument("--eps-tau", type=float)
    p.add_argument("--fit-norm", choices=("l1_of_l2fit", "pure_l2"))
    p.add_argument("--smooth-knots", type=int)
    p.add_argument("--out", required=True, help="model JSON")
    _add_config(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reconstruct", help="integrate a model and register it to the observed curve")
    p.add_argument("model")
    p.add_argument("--observed", required=True)
    p.add_argument("--midpoint", action="store_true")
    p.add_argument("--series", choices=("corrected", "printed"))
    p.add_argument("--metrics", help="also write rms, R^2 and SSE (JSON)")
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="R^2, SSE and per-section errors (optionally reprojection)")
    p.add_argument("fitted")
    p.add_argument("--observed", required=True)
    p.add_argument("--views", nargs="+", help="ordered view CSVs for reprojection errors")
    p.add_argument("--cameras")
    p.add_argument("--section-fraction", type=float)
    p.add_argument("--out", required=True, help="output directory")
    _add_config(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gridsearch", help="iterative penalty grid search")
    p.add_argument("curve")
    p.add_argument("--eps-kappa-max", type=float)
    p.add_argument("--eps-tau-max", type=float)
    p.add_argument("--grid", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--smooth-knots", type=int)
    p.add_argument("--out", required=True, help="output directory")
    _add_config(p)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("pipeline", help="run every stage on one frame directory")
    p.add_argument("frame", nargs="?", help="frame directory (view skeletons, cameras.json, scene.json)")
    p.add_argument("--cameras", help="camera file overriding <frame>/cameras.json")
    p.add_argument("--gridsearch", action="store_true", help="select the penalties by grid search")
    p.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    p.add_argument("--out")
    _add_config(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sequence", help="run the pipeline over frame directories and aggregate")
    p.add_argument("frames", nargs="+", help="frame directories, or one directory holding them")
    p.add_argument("--workers", type=int)
    p.add_argument("--gridsearch", action="store_true")
    p.add_argument("--out", required=True)
    _add_config(p)
    p.set_defaults(func=cmd_sequence)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Filament3DError as exc:
        print(f"error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
