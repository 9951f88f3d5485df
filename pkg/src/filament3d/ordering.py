"""Ordering of unordered skeleton pixels into a base-to-tip polyline.

A pixel is a junction when it has at least three branches in its 3x3
neighbourhood. Branches are counted over the 8 neighbours after dropping
diagonal neighbours that are already reachable through a 4-neighbour,
which is what keeps staircase steps of a 1-px line from being counted
twice.

Self-crossing skeletons are split by deleting the 3x3 neighbourhood of the
crossing pixel, labelling the remaining pieces, handing the deleted pixels
back to the piece whose local line passes closest, and finally choosing
the loop direction that turns least relative to the incoming branch.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .curve import OrderedPolyline2D
from .errors import AmbiguousDirection, DegenerateLineFit, InvalidInput, UnsupportedTopology, WrongTopology

TAU_TIP = 10.0
N_LINE_FIT = 10
EPS_ANGLE = 1e-3
MAX_GAP = 3
CROSSING_MARGIN = 1e-9

TOPOLOGIES = ("simple", "loop_at_tip", "loop_interior")

_N8 = ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))
_N4 = ((0, -1), (-1, 0), (1, 0), (0, 1))


@dataclass(frozen=True)
class PixelSet:
    """Unordered skeleton pixels of one view and the base pixel to start from."""

    pixels: frozenset
    start_hint: tuple

    def __post_init__(self):
        px = frozenset((int(u), int(v)) for u, v in self.pixels)
        start = (int(self.start_hint[0]), int(self.start_hint[1]))
        if start not in px:
            raise InvalidInput(f"start hint {start} is not a skeleton pixel")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "start_hint", start)

    def __len__(self):
        return len(self.pixels)

    @classmethod
    def from_array(cls, uv, start_hint):
        return cls(frozenset(map(tuple, np.asarray(uv, dtype=int).tolist())), tuple(start_hint))


@dataclass(frozen=True)
class IntersectionReport:
    cross_point: tuple | None
    tip_distance: float | None
    topology: str
    junctions: tuple = ()

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise InvalidInput(f"unknown topology {self.topology!r}")
        if (self.cross_point is None) != (self.topology == "simple"):
            raise InvalidInput("cross point must be present exactly for non-simple topologies")


def neighbours8(p, pixels):
    u, v = p
    return [(u + du, v + dv) for du, dv in _N8 if (u + du, v + dv) in pixels]


def branch_count(p, pixels):
    """Number of distinct skeleton branches leaving ``p``."""
    u, v = p
    four = [(u + du, v + dv) for du, dv in _N4 if (u + du, v + dv) in pixels]
    count = len(four)
    for du, dv in ((-1, -1), (1, -1), (-1, 1), (1, 1)):
        q = (u + du, v + dv)
        if q not in pixels:
            continue
        # diagonal reachable through a 4-neighbour shared with p
        if (u + du, v) in pixels or (u, v + dv) in pixels:
            continue
        count += 1
    return count


def _within(p, pixels, radius):
    u, v = p
    r = int(radius)
    out = []
    for du in range(-r, r + 1):
        for dv in range(-r, r + 1):
            if (du or dv) and du * du + dv * dv <= radius * radius and (u + du, v + dv) in pixels:
                out.append((u + du, v + dv))
    return out


def components(pixels, max_gap=1):
    """Connected components; pixels closer than ``max_gap`` are linked."""
    pixels = set(pixels)
    seen = set()
    comps = []
    for p in sorted(pixels):
        if p in seen:
            continue
        comp = []
        seen.add(p)
        q = deque([p])
        while q:
            a = q.popleft()
            comp.append(a)
            nbrs = neighbours8(a, pixels) if max_gap <= 1 else _within(a, pixels, max_gap)
            for b in nbrs:
                if b not in seen:
                    seen.add(b)
                    q.append(b)
        comps.append(comp)
    return comps


def _bfs_hops(src, pixels):
    dist = {src: 0}
    q = deque([src])
    while q:
        a = q.popleft()
        for b in neighbours8(a, pixels):
            if b not in dist:
                dist[b] = dist[a] + 1
                q.append(b)
    return dist


def _junction_clusters(pixels):
    junc = [p for p in pixels if branch_count(p, pixels) >= 3]
    if not junc:
        return []
    jset = set(junc)
    clusters = components(jset, max_gap=2)
    reps = []
    for cl in clusters:
        arr = np.array(cl, dtype=float)
        c = arr.mean(axis=0)
        best = max(cl, key=lambda p: (branch_count(p, pixels), -((p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2), -p[0], -p[1]))
        reps.append(best)
    return reps


def detect_intersection(ps: PixelSet, tau_tip=TAU_TIP, max_gap=MAX_GAP):
    """Find a self-crossing of the skeleton and classify where it sits.

    ``tip_distance`` is the path length in pixel steps from the crossing to
    the tip (the endpoint farthest from the start); a tip closer than
    ``tau_tip`` means the loop closes at the tip.
    """
    pixels = ps.pixels
    if len(components(pixels, max_gap=max_gap)) != 1:
        raise InvalidInput("skeleton pixels are not a single connected component")
    reps = _junction_clusters(pixels)
    if not reps:
        return IntersectionReport(None, None, "simple", ())
    from_start = _bfs_hops(ps.start_hint, pixels)
    reps.sort(key=lambda p: (from_start.get(p, math.inf), p))
    pc = reps[0]
    ends = [p for p in pixels if p != ps.start_hint and branch_count(p, pixels) <= 1]
    if ends:
        tip = max(ends, key=lambda p: (from_start.get(p, -1), p))
        tip_distance = float(_bfs_hops(pc, pixels).get(tip, math.inf))
    else:
        tip_distance = 0.0
    topology = "loop_at_tip" if tip_distance <= tau_tip else "loop_interior"
    return IntersectionReport(pc, tip_distance, topology, tuple(reps))


def _step_key(cur, nxt, prev_dir):
    du, dv = nxt[0] - cur[0], nxt[1] - cur[1]
    d = math.hypot(du, dv)
    if prev_dir is None:
        turn = 0.0
    else:
        turn = abs(math.atan2(prev_dir[0] * dv - prev_dir[1] * du, prev_dir[0] * du + prev_dir[1] * dv))
    return (round(d, 9), round(turn, 9), nxt)


def _walk(start, pixels, visited, max_gap=MAX_GAP, prev_dir=None):
    path = [start]
    visited.add(start)
    cur = start
    while True:
        cands = [q for q in neighbours8(cur, pixels) if q not in visited]
        if not cands and max_gap > 1:
            cands = [q for q in _within(cur, pixels, max_gap) if q not in visited]
        if not cands:
            return path
        nxt = min(cands, key=lambda q: _step_key(cur, q, prev_dir))
        prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
        visited.add(nxt)
        path.append(nxt)
        cur = nxt


def _order_from(start, pixels, max_gap=MAX_GAP, exhaustive=False):
    """Walk from ``start``; a second walk in the opposite direction is merged in front."""
    visited = set()
    first = _walk(start, pixels, visited, max_gap)
    path = first
    if len(visited) < len(pixels):
        second = _walk(start, pixels, visited, max_gap)
        if len(second) > 1:
            path = second[:0:-1] + first
    if exhaustive:
        while len(visited) < len(pixels):
            last = path[-1]
            rest = [p for p in pixels if p not in visited]
            nxt = min(rest, key=lambda p: ((p[0] - last[0]) ** 2 + (p[1] - last[1]) ** 2, p))
            path.extend(_walk(nxt, pixels, visited, max_gap))
    return path


def order_simple(ps: PixelSet, max_gap=MAX_GAP, report=None):
    """Order a skeleton without self-crossings, starting at the start hint."""
    if report is None:
        report = detect_intersection(ps, max_gap=max_gap)
    if report.topology != "simple":
        raise WrongTopology(f"skeleton has topology {report.topology}")
    if len(ps) == 1:
        raise InvalidInput("a single pixel cannot be ordered into a polyline")
    path = _order_from(ps.start_hint, ps.pixels, max_gap)
    if len(path) != len(ps):
        raise InvalidInput(f"{len(ps) - len(path)} pixels are unreachable from the start hint")
    return OrderedPolyline2D(np.array(path, dtype=float))


def _line_direction(points):
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        raise DegenerateLineFit("line fit needs at least 2 points")
    C = P - P.mean(axis=0)
    if not np.any(np.abs(C) > 1e-12):
        raise DegenerateLineFit("points have zero spread")
    _, _, Vt = np.linalg.svd(C, full_matrices=False)
    d = Vt[0]
    along = np.diff(P, axis=0).sum(axis=0)
    if d.dot(along) < 0:
        d = -d
    return d


def turning_angle(d1, d2):
    """Unsigned angle from direction ``d1`` to ``d2`` via atan2(det, dot)."""
    return abs(math.atan2(d1[0] * d2[1] - d1[1] * d2[0], d1[0] * d2[0] + d1[1] * d2[1]))


def fit_direction_lines(s1_tail, s2_head, s2star_head):
    """Turning angles from the incoming branch to each candidate loop direction.

    Each sequence is fitted with a total-least-squares line oriented along
    the sequence order. Returns ``(alpha_n2, alpha_n2star)`` in [0, pi].
    """
    l1 = _line_direction(s1_tail)
    l2 = _line_direction(s2_head)
    l2s = _line_direction(s2star_head)
    return turning_angle(l1, l2), turning_angle(l1, l2s)


def _component_ends(comp):
    ends = [p for p in comp if branch_count(p, comp) <= 1]
    return ends or list(comp)


def _pass_line(points):
    P = np.asarray(points, dtype=float)
    c = P.mean(axis=0)
    _, _, Vt = np.linalg.svd(P - c)
    return c, Vt[0]


def _cheb(p, q):
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def _pieces(ps, pc, radius, want_tail):
    """Remove the block of the given radius and validate the pieces left.

    Returns ``(block, s1_pixels, others)`` or None when the pieces do not
    look like one incoming branch, one loop and at most one tail.
    """
    pixels = ps.pixels
    block = {(pc[0] + du, pc[1] + dv) for du in range(-radius, radius + 1) for dv in range(-radius, radius + 1)} & pixels
    if ps.start_hint in block:
        return None
    comps = [set(c) for c in components(pixels - block)]
    first = next(c for c in comps if ps.start_hint in c)
    others = [c for c in comps if c is not first]
    if len(others) not in ((2,) if want_tail else (1, 2)):
        return None

    def touching(comp):
        return [e for e in _component_ends(comp) if _cheb(e, pc) <= radius + 1]

    def simple(comp):
        return len(comp) == 1 or (len(_component_ends(comp)) <= 2 and all(branch_count(p, comp) <= 2 for p in comp))

    if not simple(first) or not [e for e in touching(first) if e != ps.start_hint]:
        return None
    n_touch = []
    for c in others:
        if not simple(c):
            return None
        n_touch.append(min(len(touching(c)), 2) if len(c) > 1 else len(touching(c)))
    if 0 in n_touch or n_touch.count(2) != 1:
        return None
    return block, first, others


def _chain_cost(seq):
    P = np.asarray(seq, dtype=float)
    return float(np.sum(np.diff(P, axis=0) ** 2)) if len(P) > 1 else 0.0


def _chain_violations(seq):
    """Steps that are not 8-neighbours plus pixels touching their second successor."""
    v = sum(_cheb(a, b) != 1 for a, b in zip(seq[:-1], seq[1:]))
    return v + sum(_cheb(a, b) <= 1 for a, b in zip(seq[:-2], seq[2:]))


def _sort_along(pixels, origin, direction):
    return sorted(pixels, key=lambda r: ((r[0] - origin[0]) * direction[0] + (r[1] - origin[1]) * direction[1], r))


def _score_pass(s_in, pixels, s_out, pc, direction, line):
    """(violations, cost, ordered pixels) of one pass; the crossing pixel may be part of it."""
    seq = _sort_along(pixels, s_in, direction)
    tail = [s_out] if s_out is not None else []
    best = None
    for cand in (seq, _sort_along(pixels + [pc], s_in, direction)):
        full = [s_in] + cand + tail
        key = (_chain_violations(full), _chain_cost(full))
        if best is None or key < best:
            best = key
    perp = 0.0
    if line is not None:
        c, d = line
        for r in pixels:
            perp += ((r[0] - c[0]) * d[1] - (r[1] - c[1]) * d[0]) ** 2
    return best[0], best[1] + perp, seq


def _assign_block(block_px, pc, a_in, a_out, b_in, b_out, b_dir, line_a=None, line_b=None, max_enum=10):
    """Split crossing pixels between the two passes through the crossing.

    Pass A runs from ``a_in`` to ``a_out``; pass B starts at ``b_in`` and
    ends at ``b_out`` (or continues along ``b_dir`` when it has no tail).
    Each pass must be a thin 8-connected chain, so splits are ranked by
    chain violations first, then by the summed squared step length plus
    squared distances to the fitted pass lines. One pixel may belong to both
    passes (it is then emitted once, in pass A).

    Returns ``(pixels_a, pixels_b, gap)`` where ``gap`` is the score margin
    to the best split that orders the pixels differently.
    """
    px = list(block_px)
    n = len(px)
    a_dir = np.subtract(a_out, a_in).astype(float)
    if b_out is not None:
        b_dir = np.subtract(b_out, b_in).astype(float)
    if n > max_enum + 4:
        # very large block: nearest pass line only
        da = a_dir / np.linalg.norm(a_dir)
        db = np.asarray(b_dir, float) / np.linalg.norm(b_dir)
        A = [r for r in px if abs(np.cross(da, np.subtract(r, a_in))) <= abs(np.cross(db, np.subtract(r, b_in)))]
        B = [r for r in px if r not in A]
        return _sort_along(A, a_in, a_dir), _sort_along(B, b_in, b_dir), 0.0
    shared_opts = [None] + (list(range(n)) if n <= max_enum else [])
    scored = []
    for mask in range(1 << n):
        for k in shared_opts:
            if k is not None and mask >> k & 1:
                continue
            A = [px[i] for i in range(n) if not mask >> i & 1]
            B = [px[i] for i in range(n) if mask >> i & 1] + ([px[k]] if k is not None else [])
            va, ca, As = _score_pass(a_in, A, a_out, pc, a_dir, line_a)
            vb, cb, Bs = _score_pass(b_in, B, b_out, pc, b_dir, line_b)
            if k is not None:
                Bs = [r for r in Bs if r != px[k]]
            scored.append((va + vb, round(ca + cb, 9), mask, -1 if k is None else k, As, Bs))
    scored.sort(key=lambda t: t[:4])
    best = scored[0]
    order = best[4] + best[5]
    gap = next((t[1] - best[1] for t in scored[1:] if t[0] == best[0] and t[4] + t[5] != order), math.inf)
    if scored[1:] and scored[1][0] > best[0]:
        gap = math.inf
    return best[4], best[5], gap


def order_with_intersection(ps: PixelSet, report: IntersectionReport, n_fit=N_LINE_FIT, eps_angle=EPS_ANGLE, max_gap=MAX_GAP, crossing_margin=CROSSING_MARGIN):
    """Order a skeleton with one self-crossing.

    The square block around the crossing is removed (3x3, grown when the
    curve's passes still touch outside it) and the remaining pieces are
    labelled. The branch from the start comes first. The loop is traversed
    in the direction whose first ``n_fit`` points turn least relative to the
    last ``n_fit`` points of the incoming branch; a tail continuing past the
    crossing (the piece whose far end lies farthest from the crossing) is
    appended last. Block pixels are handed back to the two passes through
    the crossing. The crossing pixel itself is dropped.
    """
    if report.topology == "simple" or report.cross_point is None:
        raise WrongTopology("skeleton has no self-crossing")
    if len(report.junctions) > 1:
        raise UnsupportedTopology(f"{len(report.junctions)} crossings found; only one is supported")
    pc = tuple(report.cross_point)
    if _cheb(ps.start_hint, pc) <= 1:
        raise UnsupportedTopology("start hint lies on the crossing")
    for radius in (1, 2, 3):
        found = _pieces(ps, pc, radius, report.topology == "loop_interior")
        if found is not None:
            break
    else:
        raise AmbiguousDirection("branches at the crossing cannot be separated")
    block, first, others = found
    s1 = _order_from(ps.start_hint, first, max_gap, exhaustive=True)

    ordered = []
    for comp in others:
        start = min(_component_ends(comp), key=lambda p: ((p[0] - pc[0]) ** 2 + (p[1] - pc[1]) ** 2, p))
        ordered.append(_order_from(start, comp, max_gap, exhaustive=True))
    if len(ordered) == 2:
        far = [math.dist(pc, o[-1]) for o in ordered]
        if far[0] == far[1]:
            raise AmbiguousDirection("cannot tell the tail from the loop")
        k3 = int(np.argmax(far))
        s3 = ordered[k3]
        s2 = ordered[1 - k3]
    else:
        s3 = []
        s2 = ordered[0]
    s2star = s2[::-1]

    n1 = max(2, min(n_fit, len(s1) + 1))
    n2 = max(2, min(n_fit, len(s2) + 1))
    tail = s1[-(n1 - 1) :] + [pc]
    a2, a2s = fit_direction_lines(tail, [pc] + s2[: n2 - 1], [pc] + s2star[: n2 - 1])
    if abs(a2 - a2s) < eps_angle:
        raise AmbiguousDirection(f"loop directions turn by {a2:.4f} and {a2s:.4f} rad")
    loop = s2 if a2 <= a2s else s2star

    b_dir = np.subtract(loop[-1], loop[-min(len(loop), 4)]) if len(loop) > 1 else np.subtract(pc, loop[-1])
    if not np.any(b_dir):
        b_dir = np.subtract(pc, loop[-1])
    m = max(2, n_fit // 2)
    line_a = _pass_line(s1[-m:] + loop[:m])
    line_b = _pass_line(loop[-m:] + s3[:m]) if len(loop) + len(s3) >= 2 else None
    a_px, b_px, gap = _assign_block(sorted(block - {pc}), pc, s1[-1], loop[0], loop[-1], s3[0] if s3 else None, b_dir, line_a, line_b)
    if gap < crossing_margin:
        raise AmbiguousDirection(f"pixels at the crossing fit both passes almost equally well (margin {gap:.3g})")
    return OrderedPolyline2D(np.array(s1 + a_px + loop + b_px + s3, dtype=float))


def order_skeleton(ps: PixelSet, tau_tip=TAU_TIP, n_fit=N_LINE_FIT, eps_angle=EPS_ANGLE, max_gap=MAX_GAP):
    """Detect the topology and dispatch to the matching ordering routine."""
    report = detect_intersection(ps, tau_tip=tau_tip, max_gap=max_gap)
    if report.topology == "simple":
        return order_simple(ps, max_gap=max_gap, report=report), report
    return order_with_intersection(ps, report, n_fit=n_fit, eps_angle=eps_angle, max_gap=max_gap), report
