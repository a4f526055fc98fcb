"""Unstructured P1 triangle meshes with labeled boundary edges.

Text format (1-based indices)::

    nv nt ne
    x y label          (nv lines)
    i1 i2 i3 region    (nt lines)
    i1 i2 label        (ne lines)
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np

EPS_BARY = 1e-12


class MeshFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateTriangleError(ValueError):
    pass


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangle mesh. Immutable once built.

    ``points`` is (nv, 2); ``triangles`` is (nt, 3) with 0-based vertex
    indices in counterclockwise order; ``boundary_edges`` is (ne, 2).
    """

    points: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), int))
    vertex_labels: np.ndarray | None = None
    regions: np.ndarray | None = None
    edge_labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        tri = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        edges = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        nv, nt, ne = len(pts), len(tri), len(edges)
        vl = np.zeros(nv, np.int64) if self.vertex_labels is None else self.vertex_labels
        rg = np.zeros(nt, np.int64) if self.regions is None else self.regions
        el = np.ones(ne, np.int64) if self.edge_labels is None else self.edge_labels
        object.__setattr__(self, "points", _frozen(pts, float))
        object.__setattr__(self, "triangles", _frozen(tri, np.int64))
        object.__setattr__(self, "boundary_edges", _frozen(edges, np.int64))
        object.__setattr__(self, "vertex_labels", _frozen(vl, np.int64))
        object.__setattr__(self, "regions", _frozen(rg, np.int64))
        object.__setattr__(self, "edge_labels", _frozen(el, np.int64))

    @classmethod
    def from_arrays(cls, points, triangles, boundary_edges=(), edge_labels=None,
                    regions=None, vertex_labels=None) -> "Mesh":
        """Build a mesh, flipping clockwise triangles and deriving vertex labels
        from the boundary edges when none are given."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        tri = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if len(tri) and tri.min() >= 0 and tri.max() < len(points):
            cw = signed_areas(points, tri) < 0
            tri[cw] = tri[cw][:, [0, 2, 1]]
        edges = np.asarray(boundary_edges, dtype=np.int64).reshape(-1, 2)
        if edge_labels is None:
            edge_labels = np.ones(len(edges), np.int64)
        edge_labels = np.asarray(edge_labels, dtype=np.int64)
        if vertex_labels is None:
            vertex_labels = np.zeros(len(points), np.int64)
            # lower label wins at corners shared by two boundary parts
            for (a, b), lab in sorted(zip(edges.tolist(), edge_labels.tolist()),
                                      key=lambda e: -e[1]):
                vertex_labels[a] = vertex_labels[b] = lab
        return cls(points, tri, edges, vertex_labels, regions, edge_labels)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        return signed_areas(self.points, self.triangles)

    @cached_property
    def h(self) -> float:
        """Maximum triangle diameter (longest edge)."""
        if self.n_triangles == 0:
            return 0.0
        p = self.points[self.triangles]
        lens = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)
        return float(lens.max())

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        if self.n_vertices == 0:
            return (0.0, 0.0, 0.0, 0.0)
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    @property
    def eps_area(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return 1e-14 * (x1 - x0) * (y1 - y0)

    @property
    def eps_geo(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return 1e-10 * float(np.hypot(x1 - x0, y1 - y0))

    @cached_property
    def edge_map(self) -> dict[tuple[int, int], list[int]]:
        """Undirected edge (sorted pair) -> incident triangle indices."""
        out: dict[tuple[int, int], list[int]] = {}
        for t, (a, b, c) in enumerate(self.triangles.tolist()):
            for e in ((a, b), (b, c), (c, a)):
                out.setdefault((min(e), max(e)), []).append(t)
        return out

    @cached_property
    def neighbors(self) -> np.ndarray:
        """neighbors[t, i] is the triangle across the edge opposite local vertex i, or -1."""
        nb = -np.ones((self.n_triangles, 3), np.int64)
        em = self.edge_map
        for t, tri in enumerate(self.triangles.tolist()):
            for i in range(3):
                a, b = tri[(i + 1) % 3], tri[(i + 2) % 3]
                owners = em[(min(a, b), max(a, b))]
                if len(owners) == 2:
                    nb[t, i] = owners[0] if owners[1] == t else owners[1]
        return nb

    def topological_boundary_edges(self) -> list[tuple[int, int]]:
        """Edges owned by exactly one triangle, sorted pairs."""
        return sorted(e for e, ts in self.edge_map.items() if len(ts) == 1)

    def boundary_label_map(self) -> dict[tuple[int, int], int]:
        return {(min(a, b), max(a, b)): int(lab)
                for (a, b), lab in zip(self.boundary_edges.tolist(), self.edge_labels.tolist())}

    def total_area(self) -> float:
        return float(self.areas.sum())

    def same_as(self, other: "Mesh", rtol: float = 0.0) -> bool:
        """Structural equality; coordinates compared to ``rtol``."""
        if (self.n_vertices, self.n_triangles, len(self.boundary_edges)) != (
                other.n_vertices, other.n_triangles, len(other.boundary_edges)):
            return False
        return (np.allclose(self.points, other.points, rtol=rtol, atol=0.0)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.boundary_edges, other.boundary_edges)
                and np.array_equal(self.vertex_labels, other.vertex_labels)
                and np.array_equal(self.regions, other.regions)
                and np.array_equal(self.edge_labels, other.edge_labels))


def signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = points[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def element_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Areas (nt,) and hat-function gradients (nt, 3, 2) for every triangle."""
    cached = mesh.__dict__.get("_geometry")
    if cached is not None:
        return cached
    p = mesh.points[mesh.triangles]
    area = mesh.areas
    if len(area) and area.min() <= mesh.eps_area:
        bad = np.flatnonzero(area <= mesh.eps_area)
        raise DegenerateTriangleError(f"degenerate triangles (area <= {mesh.eps_area:g}): {bad[:10].tolist()}")
    # grad of lambda_i = perp(opposite edge) / (2 area)
    x, y = p[..., 0], p[..., 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([gx, gy], axis=2) / (2.0 * area)[:, None, None]
    grads.setflags(write=False)
    mesh.__dict__["_geometry"] = (area, grads)
    return area, grads


def triangle_geometry(mesh: Mesh, t: int) -> tuple[float, np.ndarray]:
    if not 0 <= t < mesh.n_triangles:
        raise IndexError(f"triangle index {t} out of range")
    a, b, c = mesh.points[mesh.triangles[t]]
    area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    if area <= mesh.eps_area:
        raise DegenerateTriangleError(f"triangle {t} is degenerate (area {area:g})")
    grads = np.array([[b[1] - c[1], c[0] - b[0]],
                      [c[1] - a[1], a[0] - c[0]],
                      [a[1] - b[1], b[0] - a[0]]]) / (2.0 * area)
    return float(area), grads


def barycentric(mesh: Mesh, t: int, p) -> np.ndarray:
    a, b, c = mesh.points[mesh.triangles[t]]
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det
    l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def locate_point(mesh: Mesh, p, start: int = 0) -> tuple[int, np.ndarray] | None:
    """Find a triangle containing ``p``; returns (index, barycentric coords) or None.

    Walks across edges toward ``p`` and falls back to a full scan when the
    walk leaves the domain (nonconvex meshes) or cycles.
    """
    if mesh.n_triangles == 0:
        return None
    p = np.asarray(p, dtype=float)
    t = min(max(start, 0), mesh.n_triangles - 1)
    nb = mesh.neighbors
    for _ in range(mesh.n_triangles + 1):
        lam = barycentric(mesh, t, p)
        i = int(np.argmin(lam))
        if lam[i] >= -EPS_BARY:
            return t, lam
        nxt = int(nb[t, i])
        if nxt < 0:
            break
        t = nxt
    return _locate_brute(mesh, p)


def _locate_brute(mesh: Mesh, p: np.ndarray):
    q = mesh.points[mesh.triangles]
    a, b, c = q[:, 0], q[:, 1], q[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    l1 = ((p[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (p[1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
    l2 = ((b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])) / det
    lam = np.stack([1.0 - l1 - l2, l1, l2], axis=1)
    worst = lam.min(axis=1)
    t = int(np.argmax(worst))
    if worst[t] >= -EPS_BARY:
        return t, lam[t]
    # tolerate points on the boundary within the geometric tolerance
    recon = np.einsum("i,ij->j", np.clip(lam[t], 0, None) / np.clip(lam[t], 0, None).sum(), q[t])
    if np.hypot(*(recon - p)) <= mesh.eps_geo:
        lam_t = np.clip(lam[t], 0, None)
        return t, lam_t / lam_t.sum()
    return None


def boundary_nodes(mesh: Mesh, labels: Iterable[int]) -> set[int]:
    labels = set(labels)
    out: set[int] = set()
    for (a, b), lab in zip(mesh.boundary_edges.tolist(), mesh.edge_labels.tolist()):
        if lab in labels:
            out.update((a, b))
    return out


def validate(mesh: Mesh) -> list[str]:
    """Return a list of invariant violations; empty when the mesh is valid."""
    out: list[str] = []
    nv = mesh.n_vertices
    if not np.all(np.isfinite(mesh.points)):
        for i in np.flatnonzero(~np.isfinite(mesh.points).all(axis=1)):
            out.append(f"vertex {i}: non-finite coordinates")
    for i in np.flatnonzero(mesh.vertex_labels < 0):
        out.append(f"vertex {i}: negative label")
    tri = mesh.triangles
    good = np.ones(len(tri), bool)
    for t, v in enumerate(tri.tolist()):
        if min(v) < 0 or max(v) >= nv:
            out.append(f"triangle {t}: vertex index out of range")
            good[t] = False
        elif len(set(v)) < 3:
            out.append(f"triangle {t}: repeated vertex index")
            good[t] = False
    if good.any():
        areas = signed_areas(mesh.points, tri[good])
        for t, a in zip(np.flatnonzero(good), areas):
            if a <= mesh.eps_area:
                out.append(f"triangle {t}: not counterclockwise or degenerate (signed area {a:g})")
    edges: dict[tuple[int, int], list[int]] = {}
    for t in np.flatnonzero(good):
        a, b, c = tri[t].tolist()
        for e in ((a, b), (b, c), (c, a)):
            edges.setdefault((min(e), max(e)), []).append(int(t))
    for e, ts in edges.items():
        if len(ts) > 2:
            out.append(f"edge {e}: shared by {len(ts)} triangles {ts} (nonconforming)")
    for k, (a, b) in enumerate(mesh.boundary_edges.tolist()):
        if min(a, b) < 0 or max(a, b) >= nv:
            out.append(f"boundary edge {k}: vertex index out of range")
            continue
        n = len(edges.get((min(a, b), max(a, b)), []))
        if n != 1:
            out.append(f"boundary edge {k}: lies on {n} triangles (expected 1)")
    used = np.zeros(nv, bool)
    if good.any():
        used[tri[good].ravel()] = True
    for i in np.flatnonzero(~used):
        out.append(f"vertex {i}: orphan (no incident triangle)")
    if good.any():
        q = mesh.points[tri[good]]
        if np.linalg.norm(q - np.roll(q, 1, axis=1), axis=2).max() <= 0:
            out.append("mesh: h must be positive")
    return out


def _tokens(line: str, n: int, lineno: int, kinds) -> list:
    parts = line.split()
    if len(parts) != n:
        raise MeshFormatError(f"expected {n} fields, got {len(parts)}", lineno)
    try:
        return [k(p) for k, p in zip(kinds, parts[:n])]
    except ValueError:
        raise MeshFormatError(f"malformed numeric field in {line.strip()!r}", lineno) from None


def read_msh(stream: TextIO | str) -> Mesh:
    """Parse the "nv nt ne" text format. Errors carry the 1-based line number."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    lines = [(i + 1, ln) for i, ln in enumerate(stream.read().splitlines()) if ln.strip()]
    if not lines:
        raise MeshFormatError("empty file", 1)
    it = iter(lines)
    lineno, head = next(it)
    nv, nt, ne = _tokens(head, 3, lineno, (int, int, int))
    if min(nv, nt, ne) < 0:
        raise MeshFormatError("negative count in header", lineno)

    def take(count, n, kinds, what):
        rows = []
        for k in range(count):
            try:
                ln_no, ln = next(it)
            except StopIteration:
                last = lines[-1][0] + 1
                raise MeshFormatError(f"missing {what} line {k + 1} of {count}", last) from None
            rows.append((ln_no, _tokens(ln, n, ln_no, kinds)))
        return rows

    # exact field counts make a short section fail on the first misplaced line
    vrows = take(nv, 3, (float, float, int), "vertex")
    trows = take(nt, 4, (int, int, int, int), "triangle")
    erows = take(ne, 3, (int, int, int), "boundary edge")
    extra = next(it, None)
    if extra is not None:
        raise MeshFormatError("trailing content after declared entities", extra[0])

    for ln_no, (x, y, lab) in vrows:
        if not (np.isfinite(x) and np.isfinite(y)):
            raise MeshFormatError("non-finite coordinate", ln_no)
    for ln_no, row in trows:
        if any(not 1 <= i <= nv for i in row[:3]):
            raise MeshFormatError(f"vertex index out of range 1..{nv}", ln_no)
        if len(set(row[:3])) < 3:
            raise MeshFormatError("triangle repeats a vertex", ln_no)
    for ln_no, row in erows:
        if any(not 1 <= i <= nv for i in row[:2]):
            raise MeshFormatError(f"vertex index out of range 1..{nv}", ln_no)

    pts = np.array([r[:2] for _, r in vrows], float).reshape(-1, 2)
    vl = np.array([r[2] for _, r in vrows], np.int64)
    tri = np.array([r[:3] for _, r in trows], np.int64).reshape(-1, 3) - 1
    reg = np.array([r[3] for _, r in trows], np.int64)
    edges = np.array([r[:2] for _, r in erows], np.int64).reshape(-1, 2) - 1
    el = np.array([r[2] for _, r in erows], np.int64)
    mesh = Mesh.from_arrays(pts, tri, edges, el, reg, vl)

    owners: dict[tuple[int, int], list[int]] = {}
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        for e in ((a, b), (b, c), (c, a)):
            owners.setdefault((min(e), max(e)), []).append(t)
            if len(owners[(min(e), max(e))]) > 2:
                raise MeshFormatError(f"nonconforming: edge {min(e) + 1}-{max(e) + 1} shared by 3+ triangles",
                                      trows[t][0])
    for (ln_no, row), (a, b) in zip(erows, edges.tolist()):
        if len(owners.get((min(a, b), max(a, b)), [])) != 1:
            raise MeshFormatError("boundary edge does not lie on exactly one triangle", ln_no)
    problems = [v for v in validate(mesh) if "degenerate" in v or "orphan" in v]
    if problems:
        raise MeshFormatError("; ".join(problems[:5]))
    return mesh


def write_msh(mesh: Mesh) -> str:
    out = [f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    for (x, y), lab in zip(mesh.points.tolist(), mesh.vertex_labels.tolist()):
        out.append(f"{x!r} {y!r} {lab}")
    for (a, b, c), r in zip(mesh.triangles.tolist(), mesh.regions.tolist()):
        out.append(f"{a + 1} {b + 1} {c + 1} {r}")
    for (a, b), lab in zip(mesh.boundary_edges.tolist(), mesh.edge_labels.tolist()):
        out.append(f"{a + 1} {b + 1} {lab}")
    return "\n".join(out) + "\n"


def rectangle_mesh(x0: float, x1: float, y0: float, y1: float, nx: int, ny: int,
                   labels=(1, 2, 3, 4), diagonal: str = "alternate") -> Mesh:
    """Structured triangulation of a rectangle.

    ``labels`` tags the bottom, right, top and left sides. ``diagonal`` is
    "right" (all cells split the same way) or "alternate" (criss-cross
    pattern, reduces grid-aligned bias).
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if diagonal == "alternate" and (i + j) % 2:
                tris += [(a, b, d), (b, c, d)]
            else:
                tris += [(a, b, c), (a, c, d)]
    bottom, right, top, left = labels
    edges, elab = [], []
    for i in range(nx):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        elab.append(bottom)
    for j in range(ny):
        edges.append((vid(nx, j), vid(nx, j + 1)))
        elab.append(right)
    for i in range(nx, 0, -1):
        edges.append((vid(i, ny), vid(i - 1, ny)))
        elab.append(top)
    for j in range(ny, 0, -1):
        edges.append((vid(0, j), vid(0, j - 1)))
        elab.append(left)
    return Mesh.from_arrays(pts, tris, edges, elab)
