"""P1 assembly of the BBM-BBM operators over variable depth.

Left-hand sides (constant in time)::

    A_eta = M + b K          K_ij = int D^2 grad(phi_j) . grad(phi_i)
    A_vel = M + d N + d K    N_ij = int (grad(D^2) . grad(phi_j)) phi_i

Right-hand sides are evaluated from the current state with a degree-4
triangle rule, exact for every (at most cubic) integrand here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bathymetry import BathymetryField
from .linalg import CSRMatrix, add, from_coo, replace_rows_with_identity
from .mesh import Mesh, element_geometry

# Dunavant rules: rows are barycentric (l0, l1, l2), weights sum to 1
_A4, _B4 = 0.445948490915965, 0.091576213509771
DUNAVANT4_POINTS = np.array([
    [1 - 2 * _A4, _A4, _A4], [_A4, 1 - 2 * _A4, _A4], [_A4, _A4, 1 - 2 * _A4],
    [1 - 2 * _B4, _B4, _B4], [_B4, 1 - 2 * _B4, _B4], [_B4, _B4, 1 - 2 * _B4],
])
DUNAVANT4_WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)

_A6, _B6 = 0.249286745170910, 0.063089014491502
_C6 = (0.053145049844817, 0.310352451033784, 0.636502499121399)
DUNAVANT6_POINTS = np.array(
    [[1 - 2 * _A6, _A6, _A6], [_A6, 1 - 2 * _A6, _A6], [_A6, _A6, 1 - 2 * _A6],
     [1 - 2 * _B6, _B6, _B6], [_B6, 1 - 2 * _B6, _B6], [_B6, _B6, 1 - 2 * _B6]]
    + [[_C6[i], _C6[j], _C6[k]] for i, j, k in
       ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))])
DUNAVANT6_WEIGHTS = np.array([0.116786275726379] * 3 + [0.050844906370207] * 3
                             + [0.082851075618374] * 6)

_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


@dataclass(frozen=True)
class ModelParams:
    b: float = 1.0 / 6.0
    d: float = 1.0 / 6.0

    def __post_init__(self):
        # zero is allowed for the nondispersive limit; run configs require > 0
        if not (self.b >= 0 and self.d >= 0):
            raise ValueError(f"b and d must be nonnegative (got b={self.b}, d={self.d})")


@dataclass(frozen=True)
class DirichletSpec:
    eta_nodes: frozenset = field(default_factory=frozenset)
    u_nodes: frozenset = field(default_factory=frozenset)
    v_nodes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("eta_nodes", "u_nodes", "v_nodes"):
            object.__setattr__(self, name, frozenset(int(i) for i in getattr(self, name)))

    def nodes(self, fieldname: str) -> frozenset:
        return getattr(self, f"{fieldname}_nodes")

    def index_array(self, fieldname: str) -> np.ndarray:
        return np.array(sorted(self.nodes(fieldname)), dtype=np.int64)

    def check(self, mesh: Mesh) -> None:
        for name in ("eta", "u", "v"):
            s = self.nodes(name)
            if s and (min(s) < 0 or max(s) >= mesh.n_vertices):
                raise ValueError(f"{name} Dirichlet nodes outside the mesh")


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    M: CSRMatrix
    K: CSRMatrix
    N: CSRMatrix
    A_eta: CSRMatrix
    A_vel_u: CSRMatrix
    A_vel_v: CSRMatrix

    @property
    def A_vel(self) -> CSRMatrix:
        """Velocity operator with the u constraints applied."""
        return self.A_vel_u


def _scatter(mesh: Mesh, local: np.ndarray) -> CSRMatrix:
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    n = mesh.n_vertices
    return from_coo(rows.ravel(), cols.ravel(), local.reshape(len(tri), 9).ravel(), (n, n))


def _require_nonempty(mesh: Mesh) -> None:
    if mesh.n_triangles == 0:
        raise ValueError("empty mesh")


def assemble_mass(mesh: Mesh) -> CSRMatrix:
    _require_nonempty(mesh)
    area, _ = element_geometry(mesh)
    return _scatter(mesh, area[:, None, None] * _MASS_REF[None])


def assemble_weighted_stiffness(mesh: Mesh, bathy: BathymetryField) -> CSRMatrix:
    """K_ij = int (D^2)_h grad(phi_j).grad(phi_i); the P1 weight integrates to its mean."""
    _require_nonempty(mesh)
    area, grads = element_geometry(mesh)
    w = (bathy.D ** 2)[mesh.triangles].mean(axis=1)
    local = np.einsum("tid,tjd->tij", grads, grads) * (area * w)[:, None, None]
    return _scatter(mesh, local)


def assemble_advective_coupling(mesh: Mesh, bathy: BathymetryField) -> CSRMatrix:
    """N_ij = int (grad(D^2).grad(phi_j)) phi_i, exact with int phi_i = area/3."""
    _require_nonempty(mesh)
    area, grads = element_geometry(mesh)
    gj = np.einsum("td,tjd->tj", bathy.gradD2, grads)
    local = np.broadcast_to((area / 3.0)[:, None, None] * gj[:, None, :], (len(area), 3, 3))
    return _scatter(mesh, np.ascontiguousarray(local))


def build_system_matrices(mesh: Mesh, bathy: BathymetryField, params: ModelParams,
                          dirichlet: DirichletSpec) -> SystemMatrices:
    dirichlet.check(mesh)
    M = assemble_mass(mesh)
    K = assemble_weighted_stiffness(mesh, bathy)
    N = assemble_advective_coupling(mesh, bathy)
    A_eta = add(M, K, beta=params.b)
    A_vel = add(add(M, N, beta=params.d), K, beta=params.d)
    return SystemMatrices(
        M, K, N,
        replace_rows_with_identity(A_eta, dirichlet.eta_nodes),
        replace_rows_with_identity(A_vel, dirichlet.u_nodes),
        replace_rows_with_identity(A_vel, dirichlet.v_nodes),
    )


def _at_points(mesh: Mesh, f: np.ndarray, qp: np.ndarray) -> np.ndarray:
    """P1 field values at quadrature points, shape (nt, nq)."""
    return f[mesh.triangles] @ qp.T


def _grad(mesh: Mesh, grads: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.einsum("tk,tkd->td", f[mesh.triangles], grads)


def _load(mesh: Mesh, area: np.ndarray, integrand: np.ndarray, qp: np.ndarray, qw: np.ndarray) -> np.ndarray:
    """F_i = sum_T area_T sum_q w_q g(x_q) phi_i(x_q)."""
    local = np.einsum("tq,q,qk->tk", integrand, qw, qp) * area[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def eta_rhs(mesh: Mesh, bathy: BathymetryField, eta, u, v, rule: str = "deg4") -> np.ndarray:
    """-int div((D + eta) V) phi_i, expanded without integration by parts."""
    qp, qw = _rule(rule)
    area, grads = element_geometry(mesh)
    eta, u, v = (np.asarray(a, dtype=float) for a in (eta, u, v))
    H = bathy.D + eta
    gH = _grad(mesh, grads, H)
    gu = _grad(mesh, grads, u)
    gv = _grad(mesh, grads, v)
    div = gu[:, 0] + gv[:, 1]
    integrand = (_at_points(mesh, H, qp) * div[:, None]
                 + gH[:, :1] * _at_points(mesh, u, qp) + gH[:, 1:] * _at_points(mesh, v, qp))
    return -_load(mesh, area, integrand, qp, qw)


def velocity_rhs(mesh: Mesh, eta, u, v, component: str, rule: str = "deg4") -> np.ndarray:
    """-int (d_c eta + u d_c u + v d_c v) phi_i for c in {x, y}."""
    qp, qw = _rule(rule)
    k = {"x": 0, "y": 1}[component]
    area, grads = element_geometry(mesh)
    eta, u, v = (np.asarray(a, dtype=float) for a in (eta, u, v))
    ge = _grad(mesh, grads, eta)[:, k]
    gu = _grad(mesh, grads, u)[:, k]
    gv = _grad(mesh, grads, v)[:, k]
    integrand = (ge[:, None] + _at_points(mesh, u, qp) * gu[:, None]
                 + _at_points(mesh, v, qp) * gv[:, None])
    return -_load(mesh, area, integrand, qp, qw)


def _rule(name: str):
    if name == "deg4":
        return DUNAVANT4_POINTS, DUNAVANT4_WEIGHTS
    if name == "deg6":
        return DUNAVANT6_POINTS, DUNAVANT6_WEIGHTS
    raise ValueError(f"unknown quadrature rule {name!r}")


def apply_dirichlet_rhs(spec: DirichletSpec, f, fieldname: str) -> np.ndarray:
    out = np.array(f, dtype=float)
    idx = spec.index_array(fieldname)
    if len(idx):
        out[idx] = 0.0
    return out


def l2_error(mesh: Mesh, values, exact, rule: str = "deg6") -> tuple[float, float]:
    """(||u_h - u||, ||u||) in L2 for a nodal P1 field against a callable exact(x, y)."""
    qp, qw = _rule(rule)
    area, _ = element_geometry(mesh)
    xq = _at_points(mesh, mesh.points[:, 0], qp)
    yq = _at_points(mesh, mesh.points[:, 1], qp)
    ex = np.asarray(exact(xq, yq), dtype=float)
    uh = _at_points(mesh, np.asarray(values, dtype=float), qp)
    err = float(np.sqrt(np.sum(((uh - ex) ** 2 @ qw) * area)))
    ref = float(np.sqrt(np.sum((ex ** 2 @ qw) * area)))
    return err, ref
