"""xyz bathymetry ingestion, planar projection, depth clamping and mesh binding.

Elevations are read in meters and stored in kilometers; negative is below
sea level. Depth D = -z is positive in the water.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, replace
from typing import TextIO

import numpy as np

from .mesh import Mesh, element_geometry

EARTH_RADIUS_KM = 6378.137
DEFAULT_Z_CAP_KM = -0.010


class BathymetryError(ValueError):
    pass


class DryZoneError(BathymetryError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"no-dry-zone violation at {len(self.nodes)} node(s): {self.nodes[:20]}")


@dataclass(frozen=True, eq=False)
class GeoGrid:
    lons: np.ndarray
    lats: np.ndarray
    z: np.ndarray  # (len(lats), len(lons)), km


@dataclass(frozen=True, eq=False)
class PlanarGrid:
    xs: np.ndarray
    ys: np.ndarray
    z: np.ndarray  # (len(ys), len(xs)), km


@dataclass(frozen=True)
class ProjectionSpec:
    mode: str = "uniform_per_degree"  # or "earth_radius"
    R: float = EARTH_RADIUS_KM
    ref_lat: float = 0.0
    km_per_degree: float = 100.0

    def __post_init__(self):
        if self.mode not in ("uniform_per_degree", "earth_radius"):
            raise ValueError(f"unknown projection mode {self.mode!r}")
        if self.R <= 0 or self.km_per_degree <= 0:
            raise ValueError("R and km_per_degree must be positive")


@dataclass(frozen=True, eq=False)
class BathymetryField:
    D: np.ndarray       # nodal depth
    gradD2: np.ndarray  # (nt, 2), gradient of the P1 interpolant of D**2

    @classmethod
    def from_nodal(cls, mesh: Mesh, D) -> "BathymetryField":
        D = np.asarray(D, dtype=float)
        if D.shape != (mesh.n_vertices,):
            raise ValueError("depth array length must equal the vertex count")
        if np.any(~(D > 0)):
            raise DryZoneError(np.flatnonzero(~(D > 0)).tolist())
        _, grads = element_geometry(mesh)
        g = np.einsum("tk,tkd->td", (D ** 2)[mesh.triangles], grads)
        return cls(D, g)

    @classmethod
    def flat(cls, mesh: Mesh, depth: float = 1.0) -> "BathymetryField":
        if depth <= 0:
            raise DryZoneError(range(mesh.n_vertices))
        return cls(np.full(mesh.n_vertices, float(depth)), np.zeros((mesh.n_triangles, 2)))


_SPLIT = re.compile(r"[,\s]+")


def parse_xyz(stream: TextIO | str) -> GeoGrid:
    """Read "lon lat z" rows (z in meters) forming a complete rectilinear grid."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        if len(parts) != 3:
            raise BathymetryError(f"line {lineno}: expected 3 values, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise BathymetryError(f"line {lineno}: non-numeric token in {line!r}") from None
    if not rows:
        raise BathymetryError("no data rows")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise BathymetryError("non-finite values in xyz data")
    lons, ix = np.unique(data[:, 0], return_inverse=True)
    lats, iy = np.unique(data[:, 1], return_inverse=True)
    if len(lons) * len(lats) != len(data):
        keys = ix * len(lats) + iy
        if len(np.unique(keys)) != len(keys):
            raise BathymetryError("duplicate (lon, lat) pair in xyz data")
        raise BathymetryError(f"incomplete grid: {len(lons)} lons x {len(lats)} lats != {len(data)} rows")
    z = np.full((len(lats), len(lons)), np.nan)
    z[iy, ix] = data[:, 2] / 1000.0
    if np.isnan(z).any():
        raise BathymetryError("duplicate (lon, lat) pair in xyz data")
    return GeoGrid(lons, lats, z)


def km_per_degree_lat(R: float = EARTH_RADIUS_KM) -> float:
    return math.pi * R / 180.0


def project(grid: GeoGrid, spec: ProjectionSpec = ProjectionSpec()) -> PlanarGrid:
    if spec.mode == "uniform_per_degree":
        kx = ky = spec.km_per_degree
    else:
        ky = km_per_degree_lat(spec.R)
        kx = ky * math.cos(math.radians(spec.ref_lat))
    return PlanarGrid(np.asarray(grid.lons) * kx, np.asarray(grid.lats) * ky, np.array(grid.z, float))


def clamp_depth(data, z_cap: float = DEFAULT_Z_CAP_KM):
    """Raise every elevation above ``z_cap`` (km) down to ``z_cap``."""
    if isinstance(data, (GeoGrid, PlanarGrid)):
        return replace(data, z=np.minimum(data.z, z_cap))
    if isinstance(data, BathymetryField):
        raise TypeError("clamp the grid before binding; a bound field is already depth-valued")
    return np.minimum(np.asarray(data, dtype=float), z_cap)


def sample_bilinear(grid: PlanarGrid, points) -> np.ndarray:
    """Bilinear interpolation; points outside the box use the nearest box point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    xs, ys, z = grid.xs, grid.ys, grid.z
    x = np.clip(pts[:, 0], xs[0], xs[-1])
    y = np.clip(pts[:, 1], ys[0], ys[-1])
    i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, max(len(xs) - 2, 0))
    j = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, max(len(ys) - 2, 0))
    if len(xs) == 1:
        tx = np.zeros_like(x)
        i1 = i
    else:
        tx = (x - xs[i]) / (xs[i + 1] - xs[i])
        i1 = i + 1
    if len(ys) == 1:
        ty = np.zeros_like(y)
        j1 = j
    else:
        ty = (y - ys[j]) / (ys[j + 1] - ys[j])
        j1 = j + 1
    out = ((1 - tx) * (1 - ty) * z[j, i] + tx * (1 - ty) * z[j, i1]
           + (1 - tx) * ty * z[j1, i] + tx * ty * z[j1, i1])
    return out if np.ndim(points) > 1 else out[0]


def bind_to_mesh(grid: PlanarGrid, mesh: Mesh) -> BathymetryField:
    z = sample_bilinear(grid, mesh.points)
    D = -z
    dry = np.flatnonzero(~(D > 0))
    if len(dry):
        raise DryZoneError(dry.tolist())
    return BathymetryField.from_nodal(mesh, D)
