"""Reading and writing polylines, pixel sets, masks, cameras and models."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .curve import CameraModel, OrderedPolyline2D, Polyline3D, arc_length, as_points
from .errors import InvalidInput
from .ordering import PixelSet
from .pwc import PwcModel

MASK_SUFFIXES = (".pgm", ".png", ".pbm", ".ppm")


def _fmt(x):
    return repr(float(x))


def write_points_csv(path, points, header=None):
    """One point per row; the header defaults to ``x,y`` or ``x,y,z``."""
    pts = np.asarray(points.points if hasattr(points, "points") else points, dtype=float)
    if pts.ndim != 2:
        raise InvalidInput("points must be a 2D array")
    if header is None:
        header = ["x", "y", "z"][: pts.shape[1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in pts:
            w.writerow([_fmt(v) for v in row])


def write_table_csv(path, columns: dict):
    """Columns of equal length, written with their names as header."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_points_csv(path, dim=None):
    """Numeric CSV with a header row; returns an (n, d) float array."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidInput(f"{path} is empty")
    try:
        float(rows[0][0])
        body = rows
    except ValueError:
        body = rows[1:]
    try:
        pts = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InvalidInput(f"{path}: non-numeric value ({exc})") from exc
    if pts.size == 0:
        raise InvalidInput(f"{path} has no data rows")
    return as_points(pts, dim)


def read_polyline2d(path):
    return OrderedPolyline2D(read_points_csv(path, 2))


def read_polyline3d(path):
    return Polyline3D(read_points_csv(path, 3))


def polyline_to_json(poly):
    pts = as_points(poly.points if hasattr(poly, "points") else poly)
    return {"points": pts.tolist(), "arclength": arc_length(pts).tolist()}


def polyline_from_json(d):
    pts = as_points(d["points"])
    return Polyline3D(pts) if pts.shape[1] == 3 else OrderedPolyline2D(pts)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: invalid JSON ({exc})") from exc


def write_cameras(path, cameras, reference=1):
    write_json(path, {"reference": int(reference), "cameras": [c.to_dict() for c in cameras]})


def read_cameras(path):
    """Returns ``(cameras, reference)``. A bare list of camera records is accepted too."""
    d = read_json(path)
    if isinstance(d, list):
        recs, ref = d, 1
    else:
        recs, ref = d.get("cameras"), d.get("reference", 1)
    if not isinstance(recs, list) or not recs:
        raise InvalidInput(f"{path}: no camera records")
    return [CameraModel.from_dict(r) for r in recs], int(ref)


def write_model(path, model: PwcModel):
    write_json(path, model.to_dict())


def read_model(path):
    try:
        return PwcModel.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"{path}: malformed model ({exc})") from exc


def read_mask(path):
    """(u, v) integer coordinates of the nonzero pixels of a binary mask image."""
    try:
        with Image.open(path) as im:
            a = np.asarray(im.convert("L"))
    except OSError as exc:
        raise InvalidInput(f"cannot read mask {path}: {exc}") from exc
    v, u = np.nonzero(a)
    return np.column_stack([u, v])


def write_mask(path, pixels, size):
    """Write pixels as a white-on-black mask; ``size`` is (width, height)."""
    w, h = size
    a = np.zeros((h, w), dtype=np.uint8)
    px = np.asarray(list(pixels), dtype=int).reshape(-1, 2)
    ok = (px[:, 0] >= 0) & (px[:, 0] < w) & (px[:, 1] >= 0) & (px[:, 1] < h)
    a[px[ok, 1], px[ok, 0]] = 255
    Image.fromarray(a).save(path)


def read_pixels(path):
    """Skeleton pixels from a ``u,v`` CSV or a binary mask image."""
    if Path(path).suffix.lower() in MASK_SUFFIXES:
        return read_mask(path)
    pts = read_points_csv(path, 2)
    if not np.all(pts == np.round(pts)):
        raise InvalidInput(f"{path}: pixel coordinates must be integers")
    return pts.astype(int)


def read_pixelset(path, start_hint):
    return PixelSet.from_array(read_pixels(path), start_hint)


def write_pixels(path, pixels):
    px = np.asarray(sorted(pixels) if isinstance(pixels, (set, frozenset)) else pixels, dtype=int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v"])
        for u, v in px:
            w.writerow([int(u), int(v)])


__all__ = [
    "polyline_from_json",
    "polyline_to_json",
    "read_cameras",
    "read_json",
    "read_mask",
    "read_model",
    "read_pixels",
    "read_pixelset",
    "read_points_csv",
    "read_polyline2d",
    "read_polyline3d",
    "write_cameras",
    "write_json",
    "write_mask",
    "write_model",
    "write_pixels",
    "write_points_csv",
    "write_table_csv",
]
