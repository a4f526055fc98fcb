"""Explicit RK2 time stepping of the semi-discrete BBM-BBM system."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .bathymetry import BathymetryField
from .fem import (DirichletSpec, ModelParams, SystemMatrices, apply_dirichlet_rhs,
                  build_system_matrices, eta_rhs, velocity_rhs)
from .linalg import ConvergenceError, CSRMatrix, bicgstab_solve, cg_solve, spmv
from .mesh import Mesh, locate_point

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    def __init__(self, step: int, t: float):
        self.step = step
        self.t = t
        super().__init__(f"non-finite values after step {step} (t={t:g}); dt is probably too large")


class StageSolveError(RuntimeError):
    def __init__(self, stage: str, cause: ConvergenceError):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


class SimulationError(RuntimeError):
    """Wraps a failure inside run(); ``diagnostics`` holds everything recorded so far."""

    def __init__(self, cause: Exception, state: "State", diagnostics: "Diagnostics"):
        super().__init__(str(cause))
        self.cause = cause
        self.state = state
        self.diagnostics = diagnostics


@dataclass(frozen=True, eq=False)
class State:
    t: float
    eta: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.eta, self.u, self.v

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.eta).all() and np.isfinite(self.u).all() and np.isfinite(self.v).all())

    @classmethod
    def rest(cls, mesh: Mesh, t: float = 0.0) -> "State":
        z = np.zeros(mesh.n_vertices)
        return cls(t, z, z.copy(), z.copy())


@dataclass
class SimConfig:
    dt: float = 0.1
    t_end: float = 0.0
    solver_tol: float = 1e-10
    solver_maxit: int | None = None
    output_every: int = 1
    gauge_points: Sequence[tuple[float, float]] = ()
    scheme: str = "heun"  # or "midpoint"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.output_every < 1:
            raise ValueError("output_every must be >= 1")
        if self.scheme not in ("heun", "midpoint"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def step_sizes(self) -> list[float]:
        n = math.ceil(self.t_end / self.dt - 1e-9)
        if n == 0:
            return []
        return [self.dt] * (n - 1) + [self.t_end - (n - 1) * self.dt]


@dataclass
class Diagnostics:
    mass_series: list[tuple[float, float]] = field(default_factory=list)
    eta_max: np.ndarray | None = None
    gauge_points: list[tuple[float, float]] = field(default_factory=list)
    gauge_series: list[list[tuple[float, float, float, float]]] = field(default_factory=list)
    gauge_warnings: list[str] = field(default_factory=list)
    steps: int = 0


class SnapshotSink(Protocol):
    def __call__(self, step: int, t: float, mesh: Mesh, eta: np.ndarray, u: np.ndarray,
                 v: np.ndarray, eta_max: np.ndarray) -> None: ...


def discrete_mass(M: CSRMatrix, eta) -> float:
    """1^T M eta, i.e. the integral of the P1 field."""
    return float(np.sum(spmv(M, eta)))


class Integrator:
    """Holds the assembled operators and warm-start guesses for the stage solves."""

    def __init__(self, mesh: Mesh, bathy: BathymetryField, matrices: SystemMatrices,
                 dirichlet: DirichletSpec, tol: float = 1e-10, maxit: int | None = None):
        self.mesh = mesh
        self.bathy = bathy
        self.matrices = matrices
        self.dirichlet = dirichlet
        self.tol = tol
        self.maxit = maxit
        self.guess: tuple | None = None
        self.iterations = [0, 0, 0]

    def rates(self, state: State):
        mesh, dc = self.mesh, self.dirichlet
        eta, u, v = state.fields()
        g = self.guess or (None, None, None)
        f_eta = apply_dirichlet_rhs(dc, eta_rhs(mesh, self.bathy, eta, u, v), "eta")
        f_u = apply_dirichlet_rhs(dc, velocity_rhs(mesh, eta, u, v, "x"), "u")
        f_v = apply_dirichlet_rhs(dc, velocity_rhs(mesh, eta, u, v, "y"), "v")
        # one absolute floor per stage: a field whose forcing is pure roundoff
        # (e.g. v in a 1D wave) is not solved to relative precision of its noise
        atol = self.tol * max(np.linalg.norm(f_eta), np.linalg.norm(f_u), np.linalg.norm(f_v))
        out = []
        for name, solve, A, f, x0 in (
                ("eta", cg_solve, self.matrices.A_eta, f_eta, g[0]),
                ("u", bicgstab_solve, self.matrices.A_vel_u, f_u, g[1]),
                ("v", bicgstab_solve, self.matrices.A_vel_v, f_v, g[2])):
            try:
                res = solve(A, f, tol=self.tol, maxit=self.maxit, x0=x0, atol=atol)
            except ConvergenceError as exc:
                raise StageSolveError(f"t={state.t:g} {name}-rate solve", exc) from exc
            x = res.x
            idx = dc.index_array(name)
            if len(idx):
                x[idx] = 0.0
            self.iterations[len(out)] += res.iterations
            out.append(x)
        self.guess = tuple(out)
        return tuple(out)

    def step(self, state: State, dt: float, scheme: str = "heun") -> State:
        y = np.stack(state.fields())
        k1 = np.stack(self.rates(state))
        if scheme == "heun":
            mid = y + dt * k1
            k2 = np.stack(self.rates(State(state.t + dt, *mid)))
            new = y + 0.5 * dt * (k1 + k2)
        elif scheme == "midpoint":
            mid = y + 0.5 * dt * k1
            k2 = np.stack(self.rates(State(state.t + 0.5 * dt, *mid)))
            new = y + dt * k2
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        return State(state.t + dt, new[0], new[1], new[2])


def compute_rates(state: State, matrices: SystemMatrices, mesh: Mesh, bathy: BathymetryField,
                  dirichlet: DirichletSpec, tol: float = 1e-10, maxit: int | None = None):
    return Integrator(mesh, bathy, matrices, dirichlet, tol, maxit).rates(state)


def rk2_step(state: State, matrices: SystemMatrices, mesh: Mesh, bathy: BathymetryField,
             dirichlet: DirichletSpec, dt: float, scheme: str = "heun", step_index: int = 1) -> State:
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return State(state.t, state.eta.copy(), state.u.copy(), state.v.copy())
    new = Integrator(mesh, bathy, matrices, dirichlet).step(state, dt, scheme)
    if not new.is_finite():
        raise BlowUpError(step_index, new.t)
    return new


def probe_gauges(mesh: Mesh, state: State, gauge_points: Iterable, located=None):
    """Barycentric samples (eta, u, v) per gauge; None for gauges outside the mesh."""
    if located is None:
        located = [locate_point(mesh, p) for p in gauge_points]
    out = []
    for hit in located:
        if hit is None:
            out.append(None)
            continue
        t, lam = hit
        nodes = mesh.triangles[t]
        out.append(tuple(float(lam @ f[nodes]) for f in state.fields()))
    return out


def run(mesh: Mesh, bathy: BathymetryField, params: ModelParams, dirichlet: DirichletSpec,
        initial: State, config: SimConfig, sinks: Iterable[Callable] = (),
        matrices: SystemMatrices | None = None, progress: Callable[[int, State], None] | None = None):
    """Integrate to ``config.t_end``; returns (final state, diagnostics).

    Mass, running maximum and gauges are updated every step; sinks are
    called at step 0, every ``output_every`` steps, and at the final step.
    """
    if mesh.n_triangles == 0:
        raise ValueError("cannot simulate on an empty mesh")
    for name, f in zip(("eta", "u", "v"), initial.fields()):
        idx = dirichlet.index_array(name)
        if len(idx) and np.any(f[idx] != 0):
            raise ValueError(f"initial {name} does not vanish on its Dirichlet nodes")
    sinks = list(sinks)
    if matrices is None:
        matrices = build_system_matrices(mesh, bathy, params, dirichlet)
    integ = Integrator(mesh, bathy, matrices, dirichlet, config.solver_tol, config.solver_maxit)

    diag = Diagnostics(eta_max=initial.eta.copy())
    located = []
    for p in config.gauge_points:
        hit = locate_point(mesh, p)
        if hit is None:
            msg = f"gauge at ({p[0]:g}, {p[1]:g}) lies outside the mesh; skipped"
            log.warning(msg)
            diag.gauge_warnings.append(msg)
            continue
        located.append(hit)
        diag.gauge_points.append((float(p[0]), float(p[1])))
        diag.gauge_series.append([])

    def record(step: int, state: State, emit: bool):
        diag.mass_series.append((state.t, discrete_mass(matrices.M, state.eta)))
        for series, sample in zip(diag.gauge_series, probe_gauges(mesh, state, (), located)):
            series.append((state.t, *sample))
        if emit:
            for sink in sinks:
                sink(step, state.t, mesh, state.eta, state.u, state.v, diag.eta_max)

    state = initial
    steps = config.step_sizes()
    record(0, state, True)
    for n, dt in enumerate(steps, start=1):
        try:
            state = integ.step(state, dt, config.scheme)
            if not state.is_finite():
                raise BlowUpError(n, state.t)
        except (BlowUpError, StageSolveError) as exc:
            raise SimulationError(exc, state, diag) from exc
        np.maximum(diag.eta_max, state.eta, out=diag.eta_max)
        diag.steps = n
        record(n, state, n % config.output_every == 0 or n == len(steps))
        if progress is not None:
            progress(n, state)
    return state, diag
