"""Pipeline configuration: one INI file with a commented line per constant."""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, fields

from .errors import InvalidInput

# section, key, comment; the order here is the order in the written file
_LAYOUT = (
    ("resample", "k", "points per view after uniform resampling (and in the 3D curve)"),
    ("ordering", "tau_tip", "crossing-to-tip distance in pixels below which a loop counts as loop_at_tip"),
    ("ordering", "n_line_fit", "skeleton points per line fit when choosing the loop direction"),
    ("ordering", "eps_angle", "angle difference in radians below which the loop direction is ambiguous"),
    ("ordering", "max_gap", "largest pixel gap bridged while walking the skeleton"),
    ("matching", "reference", "index of the reference view that the homographies map into"),
    ("matching", "epipolar", "re-align Frechet partners onto epipolar lines before triangulating"),
    ("matching", "refine", "Gauss-Newton reprojection refinement after the linear triangulation"),
    ("frenet", "smooth_knots", "interior knots of the quintic smoothing spline applied before the Frenet stage (0 = off)"),
    ("frenet", "eps_straight", "|T_i x T_i+1| below which a vertex is treated as locally straight"),
    ("fitting", "eps_kappa", "segment penalty for curvature when the grid search is off"),
    ("fitting", "eps_tau", "segment penalty for torsion when the grid search is off"),
    ("fitting", "fit_norm", "segment cost: l1_of_l2fit (sum of absolute residuals of the LS line) or pure_l2"),
    ("fitting", "min_len", "minimum samples per segment"),
    ("fitting", "penalty_search", "select the penalties per frame by grid search"),
    ("gridsearch", "eps_kappa_min", "lower end of the curvature penalty range"),
    ("gridsearch", "eps_kappa_max", "upper end of the curvature penalty range"),
    ("gridsearch", "eps_tau_min", "lower end of the torsion penalty range"),
    ("gridsearch", "eps_tau_max", "upper end of the torsion penalty range"),
    ("gridsearch", "grid", "grid points per axis and iteration"),
    ("gridsearch", "max_iters", "refinement iterations at most"),
    ("gridsearch", "n_regions", "candidate regions kept per iteration"),
    ("gridsearch", "r2_target", "convergence bar: R^2 must exceed this"),
    ("gridsearch", "sse_target", "convergence bar: SSE must stay below this"),
    ("gridsearch", "sse_mode", "unit_length (curves scaled to unit length) or raw"),
    ("gridsearch", "workers", "threads evaluating grid cells"),
    ("integration", "midpoint", "evaluate curvature/torsion at step centres instead of left ends"),
    ("integration", "series", "frame update series: corrected or printed"),
    ("evaluation", "section_fraction", "base and tip sections as this fraction of the arc length"),
    ("evaluation", "pairing", "reprojection pairing: arc (index after resampling) or nearest"),
    ("sequence", "workers", "frames processed concurrently"),
)


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 200
    tau_tip: float = 10.0
    n_line_fit: int = 10
    eps_angle: float = 1e-3
    max_gap: int = 3
    reference: int = 1
    epipolar: bool = True
    refine: bool = False
    smooth_knots: int = 4
    eps_straight: float = 1e-8
    eps_kappa: float = 0.01
    eps_tau: float = 0.01
    fit_norm: str = "l1_of_l2fit"
    min_len: int = 3
    penalty_search: bool = False
    eps_kappa_min: float = 0.0
    eps_kappa_max: float = 1350.0
    eps_tau_min: float = 0.0
    eps_tau_max: float = 3450.0
    grid: int = 10
    max_iters: int = 6
    n_regions: int = 4
    r2_target: float = 0.999
    sse_target: float = 1e-3
    sse_mode: str = "unit_length"
    gridsearch_workers: int = 1
    midpoint: bool = False
    series: str = "corrected"
    section_fraction: float = 0.25
    pairing: str = "arc"
    sequence_workers: int = 1

    def __post_init__(self):
        checks = (
            (self.k >= 4, "k must be at least 4"),
            (self.tau_tip >= 0, "tau_tip must be non-negative"),
            (self.n_line_fit >= 2, "n_line_fit must be at least 2"),
            (self.eps_angle >= 0, "eps_angle must be non-negative"),
            (self.max_gap >= 1, "max_gap must be at least 1"),
            (self.reference >= 0, "reference must be a view index"),
            (self.smooth_knots >= 0, "smooth_knots must be non-negative"),
            (self.eps_straight > 0, "eps_straight must be positive"),
            (self.eps_kappa >= 0 and self.eps_tau >= 0, "penalties must be non-negative"),
            (self.fit_norm in ("l1_of_l2fit", "pure_l2"), "fit_norm must be l1_of_l2fit or pure_l2"),
            (self.min_len >= 2, "min_len must be at least 2"),
            (0 <= self.eps_kappa_min <= self.eps_kappa_max, "bad curvature penalty range"),
            (0 <= self.eps_tau_min <= self.eps_tau_max, "bad torsion penalty range"),
            (self.grid >= 2, "grid must be at least 2"),
            (self.max_iters >= 1, "max_iters must be at least 1"),
            (self.n_regions >= 1, "n_regions must be at least 1"),
            (self.sse_mode in ("unit_length", "raw"), "sse_mode must be unit_length or raw"),
            (self.gridsearch_workers >= 1 and self.sequence_workers >= 1, "workers must be at least 1"),
            (self.series in ("corrected", "printed"), "series must be corrected or printed"),
            (0 < self.section_fraction <= 0.5, "section_fraction must lie in (0, 0.5]"),
            (self.pairing in ("arc", "nearest"), "pairing must be arc or nearest"),
        )
        for ok, msg in checks:
            if not ok:
                raise InvalidInput(msg)

    # attribute name <-> (section, key)
    @staticmethod
    def _attr(section, key):
        if key == "workers":
            return f"{section}_workers"
        return key

    def to_ini(self):
        lines = ["# filament3d pipeline configuration", ""]
        current = None
        for section, key, comment in _LAYOUT:
            if section != current:
                if current is not None:
                    lines.append("")
                lines.append(f"[{section}]")
                current = section
            lines.append(f"# {comment}")
            lines.append(f"{key} = {_format(getattr(self, self._attr(section, key)))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise InvalidInput(f"malformed config: {exc}") from exc
        known = {(s, k) for s, k, _ in _LAYOUT}
        for s in cp.sections():
            for k in cp[s]:
                if (s, k) not in known:
                    raise InvalidInput(f"unknown config key [{s}] {k}")
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for section, key, _ in _LAYOUT:
            if cp.has_option(section, key):
                name = cls._attr(section, key)
                kw[name] = _parse(cp.get(section, key), types[name], f"[{section}] {key}")
        return cls(**kw)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_ini())

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                return cls.from_ini(fh.read())
        except OSError as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from exc

    def digest(self):
        """SHA-256 of the canonical INI text."""
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def as_dict(self):
        return asdict(self)


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw, typ, where):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise InvalidInput(f"{where}: cannot parse {raw!r}") from exc


__all__ = ["PipelineConfig"]
