"""From rasters and bathymetry grids to labeled triangle meshes.

Pipeline: level function -> zero contour (marching squares) -> Laplacian
smoothing -> Douglas-Peucker simplification -> PSLG with shoreline (1) and
open-sea (2) labels -> conforming Delaunay triangulation refined with
Ruppert's algorithm.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bathymetry import PlanarGrid
from .mesh import Mesh, validate

SHORE = 1
OPEN_SEA = 2


class MeshgenError(ValueError):
    pass


# --------------------------------------------------------------------- types

@dataclass(frozen=True, eq=False)
class Raster:
    width: int
    height: int
    maxval: int
    pixels: np.ndarray  # (height, width), row 0 at the top of the image

    def __eq__(self, other):
        return (isinstance(other, Raster) and (self.width, self.height, self.maxval)
                == (other.width, other.height, other.maxval) and np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True, eq=False)
class LevelGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(ys), len(xs)); negative = wet

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return float(self.xs[0]), float(self.ys[0]), float(self.xs[-1]), float(self.ys[-1])

    @property
    def cell_size(self) -> float:
        dx = (self.xs[-1] - self.xs[0]) / max(len(self.xs) - 1, 1)
        dy = (self.ys[-1] - self.ys[0]) / max(len(self.ys) - 1, 1)
        return float(math.sqrt(dx * dy))


@dataclass(eq=False)
class Polyline:
    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.points)

    def length(self) -> float:
        p = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())

    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(eq=False)
class PSLG:
    points: np.ndarray
    segments: list[tuple[int, int, int]]  # (i, j, label)

    def segment_array(self) -> np.ndarray:
        return np.array([s[:2] for s in self.segments], dtype=np.int64).reshape(-1, 2)


@dataclass
class MeshgenParams:
    max_area: float = 1.0
    min_angle: float = 20.0
    smooth_iters: int = 10
    smooth_lambda: float = 0.5
    simplify_eps: float | None = None  # None: half a grid cell
    min_component_cells: float = 25.0
    max_elements: int = 10 ** 7

    def __post_init__(self):
        if not self.max_area > 0:
            raise ValueError("max_area must be positive")
        if not 0 <= self.min_angle < 28.6:
            raise ValueError("min_angle must lie in [0, 28.6) degrees for guaranteed termination")
        if not 0 < self.smooth_lambda < 1:
            raise ValueError("smooth_lambda must lie in (0, 1)")
        if self.smooth_iters < 0:
            raise ValueError("smooth_iters must be >= 0")


# ----------------------------------------------------------------------- PGM

def read_pgm(data: bytes) -> Raster:
    """Parse a P2 (ASCII) or P5 (binary) graymap."""
    if isinstance(data, str):
        data = data.encode("ascii")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise MeshgenError(f"bad PGM magic {magic!r}")
    header = []
    pos = 2
    token = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")
    while len(header) < 3:
        m = token.match(data, pos)
        if m is None:
            raise MeshgenError("truncated PGM header")
        header.append(m.group(2))
        pos = m.end()
    try:
        width, height, maxval = (int(t) for t in header)
    except ValueError:
        raise MeshgenError("non-integer PGM header field") from None
    if width < 0 or height < 0:
        raise MeshgenError("negative PGM dimensions")
    if not 1 <= maxval <= 65535:
        raise MeshgenError(f"PGM maxval {maxval} out of range 1..65535")
    n = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte before the raster
        size = 2 if maxval > 255 else 1
        payload = data[pos:pos + n * size]
        if len(payload) < n * size:
            raise MeshgenError(f"truncated PGM payload: need {n * size} bytes, got {len(payload)}")
        pix = np.frombuffer(payload, dtype=">u2" if size == 2 else np.uint8).astype(np.int64)
    else:
        body = re.sub(rb"#[^\n]*", b"", data[pos:]).split()
        if len(body) < n:
            raise MeshgenError(f"truncated PGM payload: need {n} samples, got {len(body)}")
        try:
            pix = np.array([int(t) for t in body[:n]], dtype=np.int64)
        except ValueError:
            raise MeshgenError("non-integer PGM sample") from None
    if n and (pix.max() > maxval or pix.min() < 0):
        raise MeshgenError("PGM sample exceeds maxval")
    return Raster(width, height, maxval, pix.reshape(height, width))


def raster_to_level(raster: Raster, wet_threshold: float, wet_dark: bool = True,
                    pixel_size: float = 1.0, origin=(0.0, 0.0)) -> LevelGrid:
    """Pixel centers become grid nodes; the image is flipped so y points up.

    With ``wet_dark`` pixels darker than the threshold are water. The half
    offset keeps the level away from zero at integer intensities.
    """
    img = raster.pixels[::-1].astype(float)
    vals = (img - wet_threshold + 0.5) if wet_dark else (wet_threshold - img + 0.5)
    xs = origin[0] + (np.arange(raster.width) + 0.5) * pixel_size
    ys = origin[1] + (np.arange(raster.height) + 0.5) * pixel_size
    return LevelGrid(xs, ys, vals)


def bathy_to_level(grid: PlanarGrid) -> LevelGrid:
    """Wet where the elevation is below sea level."""
    return LevelGrid(np.asarray(grid.xs, float), np.asarray(grid.ys, float), np.array(grid.z, float))


# ------------------------------------------------------------ marching squares

def marching_squares(level: LevelGrid, iso: float = 0.0) -> list[Polyline]:
    """Contours of ``level == iso``, oriented with the wet side (< iso) on the left.

    Saddle cells are resolved with the average of the four corners.
    """
    V = np.asarray(level.values, dtype=float)
    xs, ys = level.xs, level.ys
    ny, nx = V.shape
    inside = V < iso
    coords: dict[tuple, tuple[float, float]] = {}

    def crossing(key):
        if key not in coords:
            kind, i, j = key
            if kind == "h":
                (x0, v0), (x1, v1) = (xs[i], V[j, i]), (xs[i + 1], V[j, i + 1])
                t = (iso - v0) / (v1 - v0)
                coords[key] = (float(x0 + t * (x1 - x0)), float(ys[j]))
            else:
                (y0, v0), (y1, v1) = (ys[j], V[j, i]), (ys[j + 1], V[j + 1, i])
                t = (iso - v0) / (v1 - v0)
                coords[key] = (float(xs[i]), float(y0 + t * (y1 - y0)))
        return key

    succ: dict[tuple, tuple] = {}
    has_pred: set = set()
    mixed = np.argwhere((inside[:-1, :-1] != inside[1:, :-1]) | (inside[:-1, :-1] != inside[:-1, 1:])
                        | (inside[:-1, :-1] != inside[1:, 1:]))
    for j, i in mixed.tolist():
        corners = [inside[j, i], inside[j, i + 1], inside[j + 1, i + 1], inside[j + 1, i]]
        # CCW edges: bottom, right, top (reversed), left (reversed)
        keys = [("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j)]
        exits, enters = [], []
        for e in range(4):
            a, b = corners[e], corners[(e + 1) % 4]
            if a and not b:
                exits.append(e)
            elif b and not a:
                enters.append(e)
        if len(exits) == 1:
            pairs = [(exits[0], enters[0])]
        else:
            center_inside = V[j:j + 2, i:i + 2].mean() < iso
            pairs = []
            for e in exits:
                if center_inside:
                    nxt = min(enters, key=lambda q: (q - e) % 4)
                else:
                    nxt = min(enters, key=lambda q: (e - q) % 4)
                pairs.append((e, nxt))
        for e_out, e_in in pairs:
            a, b = crossing(keys[e_out]), crossing(keys[e_in])
            succ[a] = b
            has_pred.add(b)

    polylines = []
    used: set = set()
    for start in [k for k in succ if k not in has_pred]:
        chain = [start]
        used.add(start)
        k = start
        while k in succ:
            k = succ[k]
            chain.append(k)
            used.add(k)
        polylines.append(_make_polyline([coords[c] for c in chain], closed=False))
    for start in list(succ):
        if start in used:
            continue
        chain = [start]
        used.add(start)
        k = succ[start]
        while k != start:
            chain.append(k)
            used.add(k)
            k = succ[k]
        polylines.append(_make_polyline([coords[c] for c in chain], closed=True))
    return [p for p in polylines if p is not None]


def _make_polyline(points, closed: bool) -> Polyline | None:
    pts = [points[0]]
    for p in points[1:]:
        if p != pts[-1]:
            pts.append(p)
    if closed and len(pts) > 1 and pts[-1] == pts[0]:
        pts.pop()
    if len(pts) < (3 if closed else 2):
        return None
    return Polyline(np.array(pts), closed)


# --------------------------------------------------- smoothing / simplification

def smooth_polyline(poly: Polyline, iters: int = 10, lam: float = 0.5) -> Polyline:
    """Jacobi-style umbrella smoothing; open ends stay put, closed chains wrap."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    p = poly.points.copy()
    for _ in range(iters):
        if poly.closed:
            lap = np.roll(p, 1, axis=0) + np.roll(p, -1, axis=0) - 2 * p
        else:
            lap = np.zeros_like(p)
            lap[1:-1] = p[:-2] + p[2:] - 2 * p[1:-1]
        p = p + 0.5 * lam * lap
    return Polyline(p, poly.closed)


def _point_segment_distance(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    L2 = float(d @ d)
    if L2 == 0.0:
        return np.linalg.norm(P - a, axis=1)
    t = np.clip((P - a) @ d / L2, 0.0, 1.0)
    return np.linalg.norm(P - (a + t[:, None] * d), axis=1)


def _dp_open(p: np.ndarray, eps: float) -> np.ndarray:
    keep = np.zeros(len(p), bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(p) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        d = _point_segment_distance(p[i + 1:j], p[i], p[j])
        k = int(np.argmax(d))
        if d[k] > eps:
            m = i + 1 + k
            keep[m] = True
            stack += [(i, m), (m, j)]
    return p[keep]


def _diameter_pair(p: np.ndarray) -> tuple[int, int]:
    cand = np.arange(len(p))
    if len(p) > 3:
        try:
            from scipy.spatial import ConvexHull
            cand = np.sort(ConvexHull(p).vertices)
        except Exception:  # collinear input: fall back to all points
            pass
    q = p[cand]
    d2 = ((q[:, None, :] - q[None, :, :]) ** 2).sum(-1)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    return tuple(sorted((int(cand[i]), int(cand[j]))))


def simplify_polyline(poly: Polyline, eps: float) -> Polyline:
    """Douglas-Peucker. Closed chains are cut at their diameter pair first."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    p = poly.points
    if not poly.closed:
        return Polyline(_dp_open(p, eps), False)
    if len(p) < 4:
        return Polyline(p.copy(), True)
    i, j = _diameter_pair(p)
    first = _dp_open(p[i:j + 1], eps)
    second = _dp_open(np.vstack([p[j:], p[:i + 1]]), eps)
    return Polyline(np.vstack([first[:-1], second[:-1]]), True)


# ----------------------------------------------------------------------- PSLG

def _box_param(p, bbox) -> float:
    x0, y0, x1, y1 = bbox
    W, H = x1 - x0, y1 - y0
    x, y = p
    dist = [abs(y - y0), abs(x - x1), abs(y - y1), abs(x - x0)]
    side = int(np.argmin(dist))
    if side == 0:
        return x - x0
    if side == 1:
        return W + (y - y0)
    if side == 2:
        return W + H + (x1 - x)
    return 2 * W + H + (y1 - y)


def _box_corners(bbox):
    x0, y0, x1, y1 = bbox
    W, H = x1 - x0, y1 - y0
    return [(W, (x1, y0)), (W + H, (x1, y1)), (2 * W + H, (x0, y1)), (2 * W + 2 * H, (x0, y0))]


def build_pslg(polylines: list[Polyline], bbox, box_wet: bool | None = None,
               min_area: float = 0.0) -> PSLG:
    """Close contours along the grid box and label the boundary.

    Open polylines must start and end on the box; they are joined by walking
    the box counterclockwise. Box pieces get label 2 (open sea), contour
    pieces label 1 (shoreline). Loops enclosing less than ``min_area`` are
    dropped. ``box_wet`` decides whether the bare box is a loop when no
    contour reaches it.
    """
    x0, y0, x1, y1 = bbox
    per = 2 * ((x1 - x0) + (y1 - y0))
    tol = 1e-9 * per
    loops: list[list[tuple[tuple[float, float], int]]] = []  # (point, label of segment leaving it)

    opens = [p for p in polylines if not p.closed]
    for p in opens:
        for q in (p.points[0], p.points[-1]):
            if min(abs(q[0] - x0), abs(q[0] - x1), abs(q[1] - y0), abs(q[1] - y1)) > tol:
                raise MeshgenError(f"open polyline ends at ({q[0]:g}, {q[1]:g}), away from the grid box")
    starts = [_box_param(p.points[0], bbox) for p in opens]
    ends = [_box_param(p.points[-1], bbox) for p in opens]
    unused = set(range(len(opens)))
    while unused:
        first = min(unused)
        k = first
        loop: list = []
        while True:
            unused.discard(k)
            loop += [(tuple(q), SHORE) for q in opens[k].points[:-1]]
            loop.append((tuple(opens[k].points[-1]), OPEN_SEA))
            s_end = ends[k]
            nxt = min(range(len(opens)), key=lambda m: ((starts[m] - s_end) % per, m))
            gap = (starts[nxt] - s_end) % per
            for s_c, c in sorted(_box_corners(bbox), key=lambda sc: (sc[0] - s_end) % per):
                if 0 < (s_c - s_end) % per < gap:
                    loop.append((c, OPEN_SEA))
            if nxt == first:
                break
            if nxt not in unused:
                raise MeshgenError("contour endpoints do not pair up along the grid box")
            k = nxt
        loops.append(loop)
    if not opens and box_wet:
        loops.append([((x0, y0), OPEN_SEA), ((x1, y0), OPEN_SEA), ((x1, y1), OPEN_SEA), ((x0, y1), OPEN_SEA)])
    for p in polylines:
        if p.closed:
            loops.append([(tuple(q), SHORE) for q in p.points])

    kept = []
    for loop in loops:
        pts = [q for q, _ in loop]
        if len(pts) < 3:
            continue
        area = Polyline(np.array(pts), True).signed_area()
        if abs(area) < min_area:
            continue
        kept.append((area, loop))
    if not any(a > 0 for a, _ in kept):
        raise MeshgenError("no wet region")

    index: dict[tuple[float, float], int] = {}
    points = []
    segments = []
    for _, loop in kept:
        ids = []
        for q, _ in loop:
            q = (float(q[0]), float(q[1]))
            if q not in index:
                index[q] = len(points)
                points.append(q)
            ids.append(index[q])
        for n, (_, lab) in enumerate(loop):
            a, b = ids[n], ids[(n + 1) % len(ids)]
            if a != b:
                segments.append((a, b, lab))
    pslg = PSLG(np.array(points, float), segments)
    bad = find_intersections(pslg)
    if bad:
        (i, j) = bad[0]
        raise MeshgenError(f"self-intersecting boundary: segments {pslg.segments[i][:2]} and {pslg.segments[j][:2]}")
    return pslg


def _orient_f(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_conflict(p, a, b, q, c, d) -> bool:
    """True if segments ab and cd meet anywhere except at shared endpoints."""
    shared = {a, b} & {c, d}
    P = (p[a], p[b])
    Q = (q[c], q[d])
    o1, o2 = _orient_f(*P, Q[0]), _orient_f(*P, Q[1])
    o3, o4 = _orient_f(*Q, P[0]), _orient_f(*Q, P[1])
    if shared:
        if len(shared) == 2:
            return True  # duplicate segment
        # collinear overlap beyond the shared endpoint
        if o1 == 0 and o2 == 0:
            s = shared.pop()
            u = np.subtract(P[1] if a == s else P[0], p[s])
            v = np.subtract(Q[1] if c == s else Q[0], p[s])
            return float(np.dot(u, v)) > 0
        return False
    if (o1 > 0) != (o2 > 0) and (o3 > 0) != (o4 > 0) and o1 * o2 < 0 and o3 * o4 < 0:
        return True

    def on(s0, s1, r, o):
        return o == 0 and min(s0[0], s1[0]) <= r[0] <= max(s0[0], s1[0]) and \
            min(s0[1], s1[1]) <= r[1] <= max(s0[1], s1[1])

    return on(*P, Q[0], o1) or on(*P, Q[1], o2) or on(*Q, P[0], o3) or on(*Q, P[1], o4)


def find_intersections(pslg: PSLG) -> list[tuple[int, int]]:
    """Pairs of segment indices that cross or overlap (bucketed by a uniform grid)."""
    pts = pslg.points
    segs = pslg.segment_array()
    if len(segs) < 2:
        return []
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    cell = max(float(np.max(hi - lo)) / max(math.sqrt(len(segs)), 1.0), 1e-300)
    buckets: dict[tuple[int, int], list[int]] = {}
    for s, (a, b) in enumerate(segs.tolist()):
        (ax, ay), (bx, by) = pts[a], pts[b]
        for gx in range(int((min(ax, bx) - lo[0]) // cell), int((max(ax, bx) - lo[0]) // cell) + 1):
            for gy in range(int((min(ay, by) - lo[1]) // cell), int((max(ay, by) - lo[1]) // cell) + 1):
                buckets.setdefault((gx, gy), []).append(s)
    tp = [tuple(q) for q in pts.tolist()]
    found = set()
    for members in buckets.values():
        for m, s in enumerate(members):
            a, b = segs[s]
            for t in members[m + 1:]:
                key = (min(s, t), max(s, t))
                if key in found:
                    continue
                c, d = segs[t]
                if _segments_conflict(tp, int(a), int(b), tp, int(c), int(d)):
                    found.add(key)
    return sorted(found)


# ------------------------------------------------------ robust predicates

def _orient(a, b, c) -> float:
    detl = (b[0] - a[0]) * (c[1] - a[1])
    detr = (b[1] - a[1]) * (c[0] - a[0])
    det = detl - detr
    if abs(det) > 1e-15 * (abs(detl) + abs(detr)):
        return det
    fa = [Fraction(v) for v in a]
    fb = [Fraction(v) for v in b]
    fc = [Fraction(v) for v in c]
    return float((fb[0] - fa[0]) * (fc[1] - fa[1]) - (fb[1] - fa[1]) * (fc[0] - fa[0]))


def _incircle(a, b, c, d) -> float:
    """> 0 when d lies inside the circle through CCW a, b, c."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    t1 = bdx * cdy - bdy * cdx
    t2 = cdx * ady - cdy * adx
    t3 = adx * bdy - ady * bdx
    det = alift * t1 + blift * t2 + clift * t3
    perm = (alift * (abs(bdx * cdy) + abs(bdy * cdx)) + blift * (abs(cdx * ady) + abs(cdy * adx))
            + clift * (abs(adx * bdy) + abs(ady * bdx)))
    if abs(det) > 1e-14 * perm:
        return det
    A = [Fraction(v) - Fraction(w) for v, w in zip(a, d)]
    B = [Fraction(v) - Fraction(w) for v, w in zip(b, d)]
    C = [Fraction(v) - Fraction(w) for v, w in zip(c, d)]
    la, lb, lc = A[0] ** 2 + A[1] ** 2, B[0] ** 2 + B[1] ** 2, C[0] ** 2 + C[1] ** 2
    ex = la * (B[0] * C[1] - B[1] * C[0]) + lb * (C[0] * A[1] - C[1] * A[0]) + lc * (A[0] * B[1] - A[1] * B[0])
    return float(ex)


def _circumcenter(a, b, c):
    bx, by = b[0] - a[0], b[1] - a[1]
    cx, cy = c[0] - a[0], c[1] - a[1]
    d = 2.0 * (bx * cy - by * cx)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    return (a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d)


# ------------------------------------------------ Delaunay refinement engine

class _Refiner:
    """Incremental Bowyer-Watson triangulation with Ruppert refinement.

    Segments are recovered by splitting (conforming Delaunay), so the final
    mesh has every input segment as a chain of edges.
    """

    def __init__(self, pslg: PSLG, params: MeshgenParams):
        self.params = params
        self.pts: list[tuple[float, float]] = []
        self.tris: list[tuple[int, int, int] | None] = []
        self.inside: list[bool] = []
        self.edge: dict[tuple[int, int], int] = {}  # directed edge -> triangle on its left
        self.subseg: dict[tuple[int, int], tuple[int, int]] = {}  # sorted pair -> (label, input segment)
        self.n_input = len(pslg.points)
        self.vertex_segs: list[set[int]] = []
        self.last = 0
        self.seg_queue: deque = deque()
        self.flags_dirty = False

        P = np.asarray(pslg.points, float)
        lo, hi = P.min(axis=0), P.max(axis=0)
        c = (lo + hi) / 2
        r = float(max(hi - lo)) * 50 + 1.0
        for q in ((c[0] - 2 * r, c[1] - r), (c[0] + 2 * r, c[1] - r), (c[0], c[1] + 2 * r)):
            self.pts.append((float(q[0]), float(q[1])))
            self.vertex_segs.append(set())
        self._add_tri(0, 1, 2, False)
        self.n_super = 3

        self.input_segments = [(int(a), int(b), int(lab)) for a, b, lab in pslg.segments]
        self.input_angle_small: dict[int, dict[frozenset, bool]] = {}
        for q in pslg.points:
            self.insert((float(q[0]), float(q[1])))
        for s, (a, b, lab) in enumerate(self.input_segments):
            a, b = a + self.n_super, b + self.n_super
            self.vertex_segs[a].add(s)
            self.vertex_segs[b].add(s)
            self.subseg[(min(a, b), max(a, b))] = (lab, s)
            self.seg_queue.append((min(a, b), max(a, b)))

    # -- basic structure
    def _add_tri(self, a, b, c, inside) -> int:
        t = len(self.tris)
        self.tris.append((a, b, c))
        self.inside.append(inside)
        self.edge[(a, b)] = t
        self.edge[(b, c)] = t
        self.edge[(c, a)] = t
        return t

    def _kill(self, t):
        a, b, c = self.tris[t]
        for e in ((a, b), (b, c), (c, a)):
            if self.edge.get(e) == t:
                del self.edge[e]
        self.tris[t] = None

    def n_triangles(self) -> int:
        return sum(1 for t in self.tris if t is not None)

    def locate(self, p) -> int | None:
        t = self.last if self.last < len(self.tris) and self.tris[self.last] is not None else None
        if t is None:
            t = next(i for i in range(len(self.tris) - 1, -1, -1) if self.tris[i] is not None)
        for _ in range(4 * len(self.tris) + 10):
            a, b, c = self.tris[t]
            moved = False
            for u, v in ((a, b), (b, c), (c, a)):
                if _orient(self.pts[u], self.pts[v], p) < 0:
                    nt = self.edge.get((v, u))
                    if nt is None:
                        return None
                    t = nt
                    moved = True
                    break
            if not moved:
                return t
        for i, tri in enumerate(self.tris):  # walk cycled: exhaustive search
            if tri is not None and all(_orient(self.pts[u], self.pts[v], p) >= 0
                                       for u, v in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))):
                return i
        return None

    def cavity(self, p, t0: int) -> list[int]:
        cav = [t0]
        seen = {t0}
        k = 0
        while k < len(cav):
            a, b, c = self.tris[cav[k]]
            k += 1
            for u, v in ((a, b), (b, c), (c, a)):
                nt = self.edge.get((v, u))
                if nt is None or nt in seen:
                    continue
                seen.add(nt)
                x, y, z = self.tris[nt]
                if _incircle(self.pts[x], self.pts[y], self.pts[z], p) > 0:
                    cav.append(nt)
        return cav

    def insert(self, p, t0: int | None = None) -> int | None:
        """Insert point p; returns its vertex index (existing one if p duplicates a vertex)."""
        if t0 is None:
            t0 = self.locate(p)
        if t0 is None:
            raise MeshgenError(f"point ({p[0]:g}, {p[1]:g}) lies outside the triangulation")
        for v in self.tris[t0]:
            if self.pts[v] == p:
                return v
        cav = self.cavity(p, t0)
        cavset = set(cav)
        boundary = []
        lost = []
        for t in cav:
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if self.edge.get((v, u)) not in cavset:
                    boundary.append((u, v, self.inside[t]))
                elif u < v and (u, v) in self.subseg:
                    lost.append((u, v))
        vid = len(self.pts)
        self.pts.append((float(p[0]), float(p[1])))
        self.vertex_segs.append(set())
        for t in cav:
            self._kill(t)
        new = []
        for u, v, flag in boundary:
            if _orient(self.pts[u], self.pts[v], p) <= 0:
                raise MeshgenError("degenerate cavity during insertion (nearly coincident points)")
            new.append(self._add_tri(u, v, vid, flag))
        self.last = new[-1]
        if lost:
            self.flags_dirty = True
            self.seg_queue.extend(lost)
        # subsegments on the cavity rim may now be encroached by the new vertex
        for u, v, _ in boundary:
            key = (min(u, v), max(u, v))
            if key in self.subseg and self._encroaches(p, key):
                self.seg_queue.append(key)
        return vid

    # -- segments
    def _encroaches(self, p, key) -> bool:
        a, b = self.pts[key[0]], self.pts[key[1]]
        return (a[0] - p[0]) * (b[0] - p[0]) + (a[1] - p[1]) * (b[1] - p[1]) < 0

    def _segment_needs_split(self, key) -> bool:
        if key not in self.subseg:
            return False
        a, b = key
        apexes = []
        for e in ((a, b), (b, a)):
            t = self.edge.get(e)
            if t is not None:
                apexes.append(next(v for v in self.tris[t] if v not in e))
        if not apexes:
            return True  # not an edge of the triangulation
        if len(apexes) == 1 and (b, a) not in self.edge and (a, b) not in self.edge:
            return True
        return any(self._encroaches(self.pts[v], key) for v in apexes if v >= self.n_super)

    def _split_point(self, key):
        a, b = key
        pa, pb = np.array(self.pts[a]), np.array(self.pts[b])
        L = float(np.linalg.norm(pb - pa))
        ia = a - self.n_super < self.n_input and a >= self.n_super
        ib = b - self.n_super < self.n_input and b >= self.n_super
        if ia != ib:
            # concentric shells around the input vertex keep small angles from cascading
            origin, other = (pa, pb) if ia else (pb, pa)
            d = 2.0 ** round(math.log2(L / 2))
            t = d / L
            m = origin + t * (other - origin)
        else:
            m = 0.5 * (pa + pb)
        return (float(m[0]), float(m[1]))

    def split_segment(self, key) -> None:
        lab, s = self.subseg.pop(key)
        a, b = key
        m = self._split_point(key)
        t0 = self.edge.get((a, b))
        if t0 is None:
            t0 = self.edge.get((b, a))
        vid = self.insert(m, t0 if t0 is not None and self._contains(t0, m) else None)
        if vid in (a, b):
            raise MeshgenError("segment too short to split (precision exhausted)")
        self.vertex_segs[vid].add(s)
        for k in ((min(a, vid), max(a, vid)), (min(vid, b), max(vid, b))):
            self.subseg[k] = (lab, s)
            self.seg_queue.append(k)

    def _contains(self, t, p) -> bool:
        a, b, c = self.tris[t]
        P = self.pts
        return _orient(P[a], P[b], p) >= 0 and _orient(P[b], P[c], p) >= 0 and _orient(P[c], P[a], p) >= 0

    def recover_segments(self) -> None:
        while self.seg_queue:
            key = self.seg_queue.popleft()
            if self._segment_needs_split(key):
                self.split_segment(key)
                self._check_budget()
        if self.flags_dirty:
            self.mark_domain()

    def _check_budget(self):
        if len(self.tris) > 4 * self.params.max_elements:
            raise MeshgenError(f"refinement exceeded the element budget ({self.params.max_elements})")

    # -- domain
    def mark_domain(self) -> None:
        """Parity flood fill: crossing a segment toggles inside/outside."""
        self.inside = [False] * len(self.tris)
        seen = [False] * len(self.tris)
        start = next(i for i, t in enumerate(self.tris) if t is not None and min(t) < self.n_super)
        queue = deque([(start, False)])
        seen[start] = True
        while queue:
            t, flag = queue.popleft()
            self.inside[t] = flag
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                nt = self.edge.get((v, u))
                if nt is None or seen[nt]:
                    continue
                seen[nt] = True
                queue.append((nt, flag ^ ((min(u, v), max(u, v)) in self.subseg)))
        self.flags_dirty = False

    # -- quality
    def _small_input_angle(self, p, q) -> bool:
        """Edge pq spans the wedge between two input segments meeting at under 60 degrees."""
        sp, sq = self.vertex_segs[p], self.vertex_segs[q]
        if not sp or not sq:
            return False
        for s1 in sp:
            for s2 in sq:
                if s1 == s2:
                    continue
                e1, e2 = self.input_segments[s1][:2], self.input_segments[s2][:2]
                common = set(e1) & set(e2)
                if common:
                    c = common.pop() + self.n_super
                    if c in (p, q):
                        continue  # pq must cut across the wedge, not run along one side
                    o1 = (e1[0] if e1[1] + self.n_super == c else e1[1]) + self.n_super
                    o2 = (e2[0] if e2[1] + self.n_super == c else e2[1]) + self.n_super
                    u = np.subtract(self.pts[o1], self.pts[c])
                    w = np.subtract(self.pts[o2], self.pts[c])
                    cosang = float(u @ w) / (np.linalg.norm(u) * np.linalg.norm(w))
                    if cosang > 0.5:  # angle below 60 degrees
                        return True
        return False

    def _is_bad(self, t) -> bool:
        a, b, c = self.tris[t]
        P = self.pts
        area = 0.5 * _orient(P[a], P[b], P[c])
        if area > self.params.max_area:
            return True
        if self.params.min_angle <= 0:
            return False
        l2 = [(P[b][0] - P[c][0]) ** 2 + (P[b][1] - P[c][1]) ** 2,
              (P[c][0] - P[a][0]) ** 2 + (P[c][1] - P[a][1]) ** 2,
              (P[a][0] - P[b][0]) ** 2 + (P[a][1] - P[b][1]) ** 2]
        k = int(np.argmin(l2))
        # sin(min angle) = 2 area / (product of the two edges adjacent to it)
        others = [l2[i] for i in range(3) if i != k]
        sin_min = 2 * area / math.sqrt(others[0] * others[1])
        if sin_min >= math.sin(math.radians(self.params.min_angle)):
            return False
        short = [v for i, v in enumerate((a, b, c)) if i != k]
        return not self._small_input_angle(*short)

    def refine(self) -> None:
        self.recover_segments()
        self.mark_domain()
        queue = deque(t for t, tri in enumerate(self.tris) if tri is not None and self.inside[t])
        while queue:
            t = queue.popleft()
            if self.tris[t] is None or not self.inside[t] or not self._is_bad(t):
                continue
            a, b, c = self.tris[t]
            cc = _circumcenter(self.pts[a], self.pts[b], self.pts[c])
            t0 = self.locate(cc)
            if t0 is None:
                hits = [k for k in self.subseg if self._encroaches(cc, k)]
            else:
                cav = self.cavity(cc, t0)
                hits = set()
                for ct in cav:
                    x, y, z = self.tris[ct]
                    for u, v in ((x, y), (y, z), (z, x)):
                        key = (min(u, v), max(u, v))
                        if key in self.subseg and self._encroaches(cc, key):
                            hits.add(key)
                hits = sorted(hits)
            n_before = len(self.tris)
            if hits:
                for key in hits:
                    if key in self.subseg:
                        self.split_segment(key)
                self.recover_segments()
                queue.append(t)
            else:
                self.insert(cc, t0)
                if self.seg_queue:
                    self.recover_segments()
            self._check_budget()
            queue.extend(k for k in range(n_before, len(self.tris))
                         if self.tris[k] is not None and self.inside[k])
            if self.flags_dirty:
                self.mark_domain()

    def to_mesh(self) -> Mesh:
        keep = [t for t, tri in enumerate(self.tris) if tri is not None and self.inside[t]]
        if not keep:
            raise MeshgenError("PSLG encloses no triangles")
        used = sorted({v for t in keep for v in self.tris[t]})
        if used[0] < self.n_super:
            raise MeshgenError("PSLG does not enclose the domain (triangle reaches the far field)")
        new_id = {v: i for i, v in enumerate(used)}
        tris = [[new_id[v] for v in self.tris[t]] for t in keep]
        keepset = set(keep)
        edges, labels = [], []
        for t in keep:
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if self.edge.get((v, u)) not in keepset:
                    lab = self.subseg.get((min(u, v), max(u, v)), (SHORE, -1))[0]
                    edges.append((new_id[u], new_id[v]))
                    labels.append(lab)
        order = sorted(range(len(edges)), key=lambda k: edges[k])
        edges = [edges[k] for k in order]
        labels = [labels[k] for k in order]
        pts = np.array([self.pts[v] for v in used])
        return Mesh.from_arrays(pts, tris, edges, labels)


def triangulate_pslg(pslg: PSLG, params: MeshgenParams) -> Mesh:
    """Conforming Delaunay triangulation of the region enclosed by the PSLG,
    refined until areas <= max_area and angles >= min_angle."""
    if len(pslg.points) < 3 or len(pslg.segments) < 3:
        raise MeshgenError("PSLG needs at least three points and segments")
    for a, b, _ in pslg.segments:
        if a == b or np.array_equal(pslg.points[a], pslg.points[b]):
            raise MeshgenError(f"zero-length segment ({a}, {b})")
    degree = np.bincount(pslg.segment_array().ravel(), minlength=len(pslg.points))
    if np.any(degree % 2):
        v = int(np.flatnonzero(degree % 2)[0])
        raise MeshgenError(f"PSLG does not enclose a region: vertex {v} ends an open chain")
    r = _Refiner(pslg, params)
    r.refine()
    mesh = r.to_mesh()
    problems = validate(mesh)
    if problems:
        raise MeshgenError("generated mesh failed validation: " + "; ".join(problems[:5]))
    return mesh


# ------------------------------------------------------------------ pipeline

@dataclass
class MeshReport:
    n_vertices: int
    n_triangles: int
    min_angle: float
    wet_area: float
    label_census: dict[int, int] = field(default_factory=dict)

    def lines(self) -> list[str]:
        census = ", ".join(f"label {k}: {v}" for k, v in sorted(self.label_census.items()))
        return [f"vertices: {self.n_vertices}", f"triangles: {self.n_triangles}",
                f"min angle: {self.min_angle:.2f} deg", f"wet area: {self.wet_area:.6g}",
                f"boundary edges: {census}"]


def min_angles(mesh: Mesh) -> np.ndarray:
    """Smallest interior angle of each triangle, degrees."""
    p = mesh.points[mesh.triangles]
    out = np.full(mesh.n_triangles, 180.0)
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        w = p[:, (i + 2) % 3] - p[:, i]
        cos = np.einsum("ij,ij->i", u, w) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        out = np.minimum(out, np.degrees(np.arccos(np.clip(cos, -1, 1))))
    return out


def mesh_report(mesh: Mesh) -> MeshReport:
    labels, counts = np.unique(mesh.edge_labels, return_counts=True)
    return MeshReport(mesh.n_vertices, mesh.n_triangles, float(min_angles(mesh).min()),
                      mesh.total_area(), {int(k): int(v) for k, v in zip(labels, counts)})


def level_to_pslg(level: LevelGrid, params: MeshgenParams) -> PSLG:
    eps = 0.5 * level.cell_size if params.simplify_eps is None else params.simplify_eps
    lines = []
    for p in marching_squares(level):
        p = smooth_polyline(p, params.smooth_iters, params.smooth_lambda)
        p = simplify_polyline(p, eps)
        if len(p) >= (3 if p.closed else 2):
            lines.append(p)
    box_wet = bool(level.values[0, 0] < 0)
    min_area = params.min_component_cells * level.cell_size ** 2
    return build_pslg(lines, level.bbox, box_wet=box_wet, min_area=min_area)


def mesh_from_level(level: LevelGrid, params: MeshgenParams) -> Mesh:
    return triangulate_pslg(level_to_pslg(level, params), params)
