"""Initial data and boundary-condition assignments for the built-in runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fem import DirichletSpec, ModelParams
from .mesh import Mesh, boundary_nodes
from .simulate import State

InitialData = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]

ALL_FIELDS = frozenset({"eta", "u", "v"})


@dataclass
class ScenarioSpec:
    name: str
    initial: InitialData
    # boundary label -> constrained fields; labels not listed are natural (Neumann)
    dirichlet: dict[int, frozenset] = field(default_factory=dict)
    flat_depth: float | None = 1.0  # None means "use the bound bathymetry"
    params: ModelParams = field(default_factory=ModelParams)
    dirichlet_all_boundary: bool = False
    exact: Callable | None = None
    period: float | None = None


def _zeros_like(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def ic_mediterranean(PX: float = 2270.0, PY: float = 500.0) -> InitialData:
    """Elevated ridge of height ~0.1 near (PX + 130, PY + 96), at rest."""

    def initial(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        A = (-70.0 + (y - PY) - 0.2 * (x - PX)) / 10.0
        B = (-13e4 + 0.2 * (y - PY) + (x - PX) * 1e3) / 10.0 ** 3.5
        eta = 0.1 * (1.0 - 1.0 / (1.0 + 1e3 * np.exp(-A ** 2 - B ** 2)))
        return eta, _zeros_like(x), _zeros_like(x)

    return initial


def ic_cyprus(variant: str = "as_printed", center=(3350.0, 3380.0), widths=(3.0, 10.0),
              amplitude: float = 0.01) -> InitialData:
    """Gaussian-type hump; ``as_printed`` multiplies the squared terms, ``sum_exponent`` adds them."""
    if variant not in ("as_printed", "sum_exponent"):
        raise ValueError(f"unknown variant {variant!r}")
    cx, cy = center
    sx, sy = widths

    def initial(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        P2 = ((x - cx) / sx) ** 2
        Q2 = ((y - cy) / sy) ** 2
        expo = P2 * Q2 if variant == "as_printed" else P2 + Q2
        return amplitude * np.exp(-expo), _zeros_like(x), _zeros_like(x)

    return initial


def dispersion_omega(k: float, b: float = 1 / 6, d: float = 1 / 6, D0: float = 1.0) -> float:
    """Angular frequency of linear waves of wavenumber k over depth D0."""
    if k <= 0:
        raise ValueError("k must be positive")
    kd2 = (k * D0) ** 2
    return D0 * k / math.sqrt((1.0 + b * kd2) * (1.0 + d * kd2))


def ic_standing_wave(a: float = 1e-5, m: int = 1, L: float = 1.0, W: float = 1.0,
                     params: ModelParams = ModelParams(), D0: float = 1.0):
    """Linear standing wave eta = a cos(wt) cos(kx); returns (initial, exact).

    Boundary data that match: u constrained at x = 0, L; v constrained at
    y = 0, W; eta natural everywhere.
    """
    if m < 1:
        raise ValueError("mode must be >= 1")
    k = m * math.pi / L
    omega = dispersion_omega(k, params.b, params.d, D0)
    c = a * k / (omega * (1.0 + params.d * (k * D0) ** 2))

    def exact(x, y, t):
        x = np.asarray(x, dtype=float)
        eta = a * math.cos(omega * t) * np.cos(k * x)
        u = c * math.sin(omega * t) * np.sin(k * x)
        return eta, u, _zeros_like(x) + 0.0 * np.asarray(y, dtype=float)

    def initial(x, y):
        return exact(x, y, 0.0)

    return initial, exact


def mediterranean_scenario(PX: float = 2270.0, PY: float = 500.0, params: ModelParams = ModelParams()):
    return ScenarioSpec("mediterranean", ic_mediterranean(PX, PY), {}, 1.0, params,
                        dirichlet_all_boundary=True)


def cyprus_scenario(variant: str = "as_printed", params: ModelParams = ModelParams(), **kw):
    return ScenarioSpec("cyprus", ic_cyprus(variant, **kw), {1: ALL_FIELDS}, None, params)


def standing_wave_scenario(a: float = 1e-5, m: int = 1, L: float = 1.0, W: float = 1.0,
                           params: ModelParams = ModelParams(), D0: float = 1.0,
                           labels=(1, 2, 3, 4)):
    """``labels`` are the bottom, right, top, left side tags of the rectangle mesh."""
    initial, exact = ic_standing_wave(a, m, L, W, params, D0)
    bottom, right, top, left = labels
    dc = {right: frozenset({"u"}), left: frozenset({"u"})}
    dc[bottom] = dc.get(bottom, frozenset()) | {"v"}
    dc[top] = dc.get(top, frozenset()) | {"v"}
    omega = dispersion_omega(m * math.pi / L, params.b, params.d, D0)
    return ScenarioSpec("standing_wave", initial, dc, D0, params, exact=exact,
                        period=2 * math.pi / omega)


def rest_scenario(params: ModelParams = ModelParams(), flat_depth: float | None = 1.0):
    def initial(x, y):
        z = _zeros_like(x)
        return z, z.copy(), z.copy()
    return ScenarioSpec("rest", initial, {}, flat_depth, params, dirichlet_all_boundary=True)


def dirichlet_for(mesh: Mesh, scenario: ScenarioSpec) -> DirichletSpec:
    if scenario.dirichlet_all_boundary:
        nodes = boundary_nodes(mesh, set(mesh.edge_labels.tolist()))
        return DirichletSpec(nodes, nodes, nodes)
    sets = {f: set() for f in ALL_FIELDS}
    for label, fields in scenario.dirichlet.items():
        nodes = boundary_nodes(mesh, {label})
        for f in fields:
            sets[f] |= nodes
    return DirichletSpec(sets["eta"], sets["u"], sets["v"])


@dataclass
class InitialStateReport:
    state: State
    max_clamped: float  # largest |value| zeroed on a constrained node


def initial_state(mesh: Mesh, scenario: ScenarioSpec, dirichlet: DirichletSpec) -> InitialStateReport:
    """Evaluate initial data at the nodes and zero them exactly on constrained nodes."""
    x, y = mesh.points[:, 0], mesh.points[:, 1]
    fields = [np.array(f, dtype=float) for f in scenario.initial(x, y)]
    clamped = 0.0
    for name, f in zip(("eta", "u", "v"), fields):
        idx = dirichlet.index_array(name)
        if len(idx):
            clamped = max(clamped, float(np.abs(f[idx]).max()))
            f[idx] = 0.0
    return InitialStateReport(State(0.0, *fields), clamped)
