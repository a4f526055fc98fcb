"""Command line: ``bbmsim meshgen|run|probe -c config``.

Config files are flat ``section.key = value`` lines with ``#`` comments.
Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .bathymetry import (BathymetryError, BathymetryField, ProjectionSpec, bind_to_mesh, clamp_depth,
                         parse_xyz, project)
from .fem import ModelParams, l2_error
from .mesh import Mesh, MeshFormatError, locate_point, read_msh, rectangle_mesh, write_msh
from .meshgen import (MeshgenError, MeshgenParams, bathy_to_level, mesh_from_level, mesh_report,
                      raster_to_level, read_pgm)
from .scenarios import (ScenarioSpec, cyprus_scenario, dirichlet_for, initial_state,
                        mediterranean_scenario, rest_scenario, standing_wave_scenario)
from .simulate import SimConfig, SimulationError, probe_gauges, run, State

log = logging.getLogger("bbmsim")

THREADS_ENV = "BBMSIM_THREADS"
MESH_SOURCES = ("input.mesh", "input.pgm", "input.xyz", "input.rectangle")
SNAPSHOT_FIELDS = ["eta", "u", "v", "velocity"]
ETA_MAX_FIELDS = ["eta_max"]


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# ------------------------------------------------------------------- config

def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _points(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in s.split(";"):
        if chunk.strip():
            x, y = (float(t) for t in chunk.replace(",", " ").split())
            out.append((x, y))
    return tuple(out)


def _rectangle(s: str) -> tuple[float, float, float, float, int, int]:
    t = s.split()
    if len(t) != 6:
        raise ValueError("expected 'x0 x1 y0 y1 nx ny'")
    x0, x1, y0, y1 = (float(v) for v in t[:4])
    nx, ny = int(t[4]), int(t[5])
    if not (x1 > x0 and y1 > y0 and nx > 0 and ny > 0):
        raise ValueError("rectangle needs x1 > x0, y1 > y0, nx, ny > 0")
    return x0, x1, y0, y1, nx, ny


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


def _positive(kind):
    def parse(s):
        v = kind(s)
        if not v > 0:
            raise ValueError(f"must be > 0, got {s}")
        return v
    return parse


def _nonneg(kind):
    def parse(s):
        v = kind(s)
        if not v >= 0:
            raise ValueError(f"must be >= 0, got {s}")
        return v
    return parse


# key -> (parser, default); default None means optional with no value
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "input.mesh": (str, None),
    "input.pgm": (str, None),
    "input.xyz": (str, None),
    "input.rectangle": (_rectangle, None),
    "input.bathymetry": (str, None),
    "pgm.wet_threshold": (float, 128.0),
    "pgm.wet_dark": (_bool, True),
    "pgm.pixel_size": (_positive(float), 1.0),
    "pgm.origin_x": (float, 0.0),
    "pgm.origin_y": (float, 0.0),
    "projection.mode": (_choice("uniform_per_degree", "earth_radius"), "uniform_per_degree"),
    "projection.km_per_degree": (_positive(float), 100.0),
    "projection.R": (_positive(float), 6378.137),
    "projection.ref_lat": (float, 0.0),
    "bathymetry.z_cap": (float, -0.010),
    "meshgen.max_area": (_positive(float), None),
    "meshgen.min_angle": (_nonneg(float), 20.0),
    "meshgen.smooth_iters": (_nonneg(int), 10),
    "meshgen.smooth_lambda": (float, 0.5),
    "meshgen.simplify_eps": (_nonneg(float), None),
    "meshgen.min_component_cells": (_nonneg(float), 25.0),
    "meshgen.output": (str, None),
    "model.b": (_positive(float), 1.0 / 6.0),
    "model.d": (_positive(float), 1.0 / 6.0),
    "scenario.name": (_choice("mediterranean", "cyprus", "standing_wave", "rest"), None),
    "scenario.variant": (_choice("as_printed", "sum_exponent"), "as_printed"),
    "scenario.PX": (float, 2270.0),
    "scenario.PY": (float, 500.0),
    "scenario.center_x": (float, 3350.0),
    "scenario.center_y": (float, 3380.0),
    "scenario.width_x": (_positive(float), 3.0),
    "scenario.width_y": (_positive(float), 10.0),
    "scenario.amplitude": (float, None),
    "scenario.mode": (_positive(int), 1),
    "scenario.L": (_positive(float), 1.0),
    "scenario.W": (_positive(float), 1.0),
    "scenario.depth": (_positive(float), 1.0),
    "sim.dt": (_positive(float), 0.1),
    "sim.t_end": (_nonneg(float), None),
    "sim.steps": (_nonneg(int), None),
    "sim.solver_tol": (_positive(float), 1e-10),
    "sim.solver_maxit": (_positive(int), None),
    "sim.scheme": (_choice("heun", "midpoint"), "heun"),
    "sim.gauges": (_points, ()),
    "output.dir": (str, "output"),
    "output.every": (_positive(int), 1),
    "output.snapshots": (_bool, True),
}

PATH_KEYS = ("input.mesh", "input.pgm", "input.xyz", "input.bathymetry")


@dataclass
class RunConfig:
    values: dict[str, Any]
    lines: dict[str, int] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __getitem__(self, key: str):
        return self.values[key]

    def path(self, key: str) -> Path:
        p = Path(self.values[key])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def mesh_source(self) -> str | None:
        given = [k for k in MESH_SOURCES if self.values[k] is not None]
        return given[0] if given else None

    def echo(self) -> dict[str, Any]:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.values.items()}

    def model_params(self) -> ModelParams:
        return ModelParams(self["model.b"], self["model.d"])

    def meshgen_params(self, cell_area: float) -> MeshgenParams:
        max_area = self["meshgen.max_area"]
        return MeshgenParams(
            max_area=max_area if max_area is not None else 4.0 * cell_area,
            min_angle=self["meshgen.min_angle"], smooth_iters=self["meshgen.smooth_iters"],
            smooth_lambda=self["meshgen.smooth_lambda"], simplify_eps=self["meshgen.simplify_eps"],
            min_component_cells=self["meshgen.min_component_cells"])

    def projection(self) -> ProjectionSpec:
        return ProjectionSpec(self["projection.mode"], self["projection.R"], self["projection.ref_lat"],
                              self["projection.km_per_degree"])

    def sim_config(self) -> SimConfig:
        t_end = self["sim.t_end"]
        if t_end is None:
            t_end = self["sim.steps"] * self["sim.dt"]
        return SimConfig(dt=self["sim.dt"], t_end=t_end, solver_tol=self["sim.solver_tol"],
                         solver_maxit=self["sim.solver_maxit"], output_every=self["output.every"],
                         gauge_points=self["sim.gauges"], scheme=self["sim.scheme"])

    def scenario(self) -> ScenarioSpec:
        name, params = self["scenario.name"], self.model_params()
        if name == "mediterranean":
            sc = mediterranean_scenario(self["scenario.PX"], self["scenario.PY"], params)
        elif name == "cyprus":
            amp = self["scenario.amplitude"]
            sc = cyprus_scenario(self["scenario.variant"], params,
                                 center=(self["scenario.center_x"], self["scenario.center_y"]),
                                 widths=(self["scenario.width_x"], self["scenario.width_y"]),
                                 amplitude=0.01 if amp is None else amp)
        elif name == "standing_wave":
            amp = self["scenario.amplitude"]
            sc = standing_wave_scenario(1e-5 if amp is None else amp, self["scenario.mode"],
                                        self["scenario.L"], self["scenario.W"], params, self["scenario.depth"])
        else:
            sc = rest_scenario(params)
        if sc.flat_depth is not None:
            sc.flat_depth = self["scenario.depth"]
        return sc


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
    return "".join(out)


def parse_config(text: str, base_dir: Path | str = ".", require: Sequence[str] = ("run",),
                 check_files: bool = True) -> RunConfig:
    """Parse and validate; ``require`` names the commands the config must serve.

    Raises ConfigError carrying the offending line number.
    """
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno
    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)
    cfg = RunConfig(values, lines, Path(base_dir))
    _validate(cfg, require, check_files)
    return cfg


def _validate(cfg: RunConfig, require: Sequence[str], check_files: bool) -> None:
    given = [k for k in MESH_SOURCES if k in cfg.lines]
    if len(given) > 1:
        raise ConfigError(f"two mesh sources: {given[0]} and {given[1]} (exactly one allowed)",
                          cfg.lines[given[1]])
    if not 0 < cfg["meshgen.smooth_lambda"] < 1:
        raise ConfigError("meshgen.smooth_lambda must lie in (0, 1)", cfg.lines.get("meshgen.smooth_lambda"))
    if not cfg["meshgen.min_angle"] < 28.6:
        raise ConfigError("meshgen.min_angle must be < 28.6", cfg.lines.get("meshgen.min_angle"))
    if "sim.t_end" in cfg.lines and "sim.steps" in cfg.lines:
        raise ConfigError("give sim.t_end or sim.steps, not both", cfg.lines["sim.steps"])
    if "meshgen" in require:
        if cfg.mesh_source not in ("input.pgm", "input.xyz"):
            raise ConfigError("missing required key: input.pgm or input.xyz")
        if cfg["meshgen.output"] is None:
            raise ConfigError("missing required key: meshgen.output")
    if "run" in require:
        if not given:
            raise ConfigError("missing required key: one of " + ", ".join(MESH_SOURCES))
        if cfg["scenario.name"] is None:
            raise ConfigError("missing required key: scenario.name")
        if cfg["sim.t_end"] is None and cfg["sim.steps"] is None:
            raise ConfigError("missing required key: sim.t_end")
    if cfg["scenario.name"] == "standing_wave" and cfg.mesh_source not in (None, "input.rectangle", "input.mesh"):
        raise ConfigError("standing_wave needs a rectangle mesh", cfg.lines.get(cfg.mesh_source))
    if check_files:
        for key in PATH_KEYS:
            if cfg[key] is not None and not cfg.path(key).is_file():
                raise ConfigError(f"{key}: file not found: {cfg.path(key)}", cfg.lines[key])


def load_config(path: str | Path, require: Sequence[str]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, require)


# -------------------------------------------------------------- file output

def _fmt(x: float) -> str:
    return repr(float(x))


def write_vtk(mesh: Mesh, path: str | Path, scalars: dict[str, np.ndarray] | None = None,
              vectors: dict[str, tuple[np.ndarray, np.ndarray]] | None = None, title: str = "bbmsim") -> None:
    """Legacy ASCII VTK unstructured grid with point data."""
    scalars = scalars or {}
    vectors = vectors or {}
    n = mesh.n_vertices
    for name, f in scalars.items():
        if len(f) != n:
            raise ValueError(f"field {name!r} has length {len(f)}, mesh has {n} vertices")
    for name, (fx, fy) in vectors.items():
        if len(fx) != n or len(fy) != n:
            raise ValueError(f"vector field {name!r} length does not match {n} vertices")
    out = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    out += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.points.tolist()]
    nt = mesh.n_triangles
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    out.append(f"POINT_DATA {n}")
    for name, f in scalars.items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_fmt(v) for v in np.asarray(f, float).tolist()]
    for name, (fx, fy) in vectors.items():
        out.append(f"VECTORS {name} double")
        out += [f"{_fmt(a)} {_fmt(b)} 0" for a, b in zip(np.asarray(fx, float).tolist(),
                                                        np.asarray(fy, float).tolist())]
    Path(path).write_text("\n".join(out) + "\n")


@dataclass
class VtkData:
    points: np.ndarray
    triangles: np.ndarray
    scalars: dict[str, np.ndarray]
    vectors: dict[str, np.ndarray]


def read_vtk(path: str | Path) -> VtkData:
    """Reader for the subset that write_vtk emits."""
    tok = Path(path).read_text().split("\n")
    if not tok or tok[0].strip() != "# vtk DataFile Version 2.0":
        raise ValueError(f"{path}: not a legacy VTK file")
    words = " ".join(tok[2:]).split()
    i = 0

    def take(k):
        nonlocal i
        out = words[i:i + k]
        if len(out) < k:
            raise ValueError(f"{path}: truncated VTK file")
        i += k
        return out

    points = tris = None
    scalars, vectors = {}, {}
    n = 0
    while i < len(words):
        w = words[i]
        i += 1
        if w == "POINTS":
            n = int(take(2)[0])
            points = np.array(take(3 * n), float).reshape(n, 3)[:, :2]
        elif w == "CELLS":
            nc, size = (int(v) for v in take(2))
            c = np.array(take(size), np.int64).reshape(nc, 4)
            tris = c[:, 1:]
        elif w == "CELL_TYPES":
            take(int(take(1)[0]))
        elif w == "SCALARS":
            name, _, ncomp = take(3)
            take(2)  # LOOKUP_TABLE default
            scalars[name] = np.array(take(n), float)
        elif w == "VECTORS":
            name, _ = take(2)
            vectors[name] = np.array(take(3 * n), float).reshape(n, 3)[:, :2]
    if points is None or tris is None:
        raise ValueError(f"{path}: missing POINTS or CELLS")
    return VtkData(points, tris, scalars, vectors)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Header row then comma-separated records; floats in round-trip precision."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    Path(path).write_text("\n".join(out) + "\n")


def gauge_rows(points, series):
    for g, ((x, y), samples) in enumerate(zip(points, series)):
        for t, eta, u, v in samples:
            yield g, float(x), float(y), float(t), float(eta), float(u), float(v)


GAUGE_HEADER = ("gauge", "x", "y", "t", "eta", "u", "v")


# ----------------------------------------------------------------- pipeline

def _cell_area(xs, ys) -> float:
    return float((xs[-1] - xs[0]) / max(len(xs) - 1, 1) * (ys[-1] - ys[0]) / max(len(ys) - 1, 1))


def build_mesh(cfg: RunConfig) -> tuple[Mesh, Any]:
    """Mesh from the configured source; also returns the projected grid for xyz input."""
    src = cfg.mesh_source
    if src == "input.mesh":
        with open(cfg.path("input.mesh")) as f:
            return read_msh(f), None
    if src == "input.rectangle":
        x0, x1, y0, y1, nx, ny = cfg["input.rectangle"]
        return rectangle_mesh(x0, x1, y0, y1, nx, ny), None
    if src == "input.pgm":
        raster = read_pgm(cfg.path("input.pgm").read_bytes())
        level = raster_to_level(raster, cfg["pgm.wet_threshold"], cfg["pgm.wet_dark"], cfg["pgm.pixel_size"],
                                (cfg["pgm.origin_x"], cfg["pgm.origin_y"]))
        return mesh_from_level(level, cfg.meshgen_params(cfg["pgm.pixel_size"] ** 2)), None
    if src == "input.xyz":
        grid = project(parse_xyz(cfg.path("input.xyz").read_text()), cfg.projection())
        level = bathy_to_level(grid)
        return mesh_from_level(level, cfg.meshgen_params(_cell_area(grid.xs, grid.ys))), grid
    raise ConfigError("no mesh source configured")


def build_bathymetry(cfg: RunConfig, mesh: Mesh, scenario: ScenarioSpec, grid) -> BathymetryField:
    if cfg["input.bathymetry"] is not None:
        grid = project(parse_xyz(cfg.path("input.bathymetry").read_text()), cfg.projection())
    if scenario.flat_depth is None or (grid is not None and scenario.name != "standing_wave"):
        if grid is None:
            raise ConfigError(f"scenario {scenario.name} needs bathymetry (input.xyz or input.bathymetry)")
        return bind_to_mesh(clamp_depth(grid, cfg["bathymetry.z_cap"]), mesh)
    return BathymetryField.flat(mesh, scenario.flat_depth)


class VtkSnapshotSink:
    def __init__(self, outdir: Path, width: int):
        self.outdir = outdir
        self.width = width
        self.written: list[str] = []

    def __call__(self, step, t, mesh, eta, u, v, eta_max):
        name = f"snapshot_{step:0{self.width}d}.vtk"
        write_vtk(mesh, self.outdir / name, {"eta": eta, "u": u, "v": v}, {"velocity": (u, v)},
                  title=f"bbmsim snapshot step {step} t={t!r}")
        self.written.append(name)


def _write_series(outdir: Path, mesh: Mesh, diag) -> None:
    write_csv(outdir / "mass.csv", ("t", "mass"), diag.mass_series)
    write_csv(outdir / "gauges.csv", GAUGE_HEADER, gauge_rows(diag.gauge_points, diag.gauge_series))
    if diag.eta_max is not None:
        write_vtk(mesh, outdir / "eta_max.vtk", {"eta_max": diag.eta_max}, title="bbmsim running maximum of eta")


def _versions() -> dict[str, str]:
    import scipy
    return {"bbmsim": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def cmd_meshgen(cfg: RunConfig, out=None) -> Mesh:
    out = out or sys.stdout
    mesh, _ = build_mesh(cfg)
    target = cfg.path("meshgen.output") if not Path(cfg["meshgen.output"]).is_absolute() \
        else Path(cfg["meshgen.output"])
    target.write_text(write_msh(mesh))
    for line in mesh_report(mesh).lines():
        print(line, file=out)
    print(f"mesh written to {target}", file=out)
    return mesh


@dataclass
class RunResult:
    state: State
    diagnostics: Any
    outdir: Path
    rel_error: float | None = None


def cmd_run(cfg: RunConfig, out=None) -> RunResult:
    out = out or sys.stdout
    threads = _threads()
    t0 = time.perf_counter()
    outdir = cfg.path("output.dir") if not Path(cfg["output.dir"]).is_absolute() else Path(cfg["output.dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    mesh, grid = build_mesh(cfg)
    scenario = cfg.scenario()
    bathy = build_bathymetry(cfg, mesh, scenario, grid)
    dirichlet = dirichlet_for(mesh, scenario)
    init = initial_state(mesh, scenario, dirichlet)
    if init.max_clamped > 0:
        log.info("initial data clamped on constrained nodes (max |value| %.3e)", init.max_clamped)
    sim = cfg.sim_config()
    n_steps = len(sim.step_sizes())
    sinks = []
    snap = None
    if cfg["output.snapshots"]:
        snap = VtkSnapshotSink(outdir, max(4, len(str(n_steps))))
        sinks.append(snap)
    manifest = {"config": cfg.echo(), "versions": _versions(), "threads": threads,
                "mesh": {"vertices": mesh.n_vertices, "triangles": mesh.n_triangles},
                "fields": {"snapshot": SNAPSHOT_FIELDS, "eta_max": ETA_MAX_FIELDS},
                "initial_max_clamped": init.max_clamped, "steps": n_steps}
    try:
        state, diag = run(mesh, bathy, scenario.params, dirichlet, init.state, sim, sinks)
    except SimulationError as exc:
        _write_series(outdir, mesh, exc.diagnostics)
        manifest.update(status="failed", error=str(exc), steps_completed=exc.diagnostics.steps,
                        wall_time_s=time.perf_counter() - t0, snapshots=snap.written if snap else [])
        (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        raise
    _write_series(outdir, mesh, diag)
    result = RunResult(state, diag, outdir)
    print(f"steps: {diag.steps}, t = {state.t:.6g}", file=out)
    m0, m1 = diag.mass_series[0][1], diag.mass_series[-1][1]
    print(f"mass: initial {m0:.12g}, final {m1:.12g}", file=out)
    if scenario.exact is not None:
        err, ref = l2_error(mesh, state.eta, lambda x, y: scenario.exact(x, y, state.t)[0])
        result.rel_error = err / ref if ref > 0 else err
        print(f"final relative L2 error of eta: {result.rel_error:.6e}", file=out)
    manifest.update(status="ok", wall_time_s=time.perf_counter() - t0,
                    snapshots=snap.written if snap else [], final_t=state.t)
    if result.rel_error is not None:
        manifest["final_relative_l2_error_eta"] = result.rel_error
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return result


def cmd_probe(cfg: RunConfig, snapshot: int, out=None) -> list:
    out = out or sys.stdout
    outdir = cfg.path("output.dir") if not Path(cfg["output.dir"]).is_absolute() else Path(cfg["output.dir"])
    matches = sorted(outdir.glob("snapshot_*.vtk"))
    chosen = [p for p in matches if int(p.stem.split("_")[1]) == snapshot]
    if not chosen:
        raise FileNotFoundError(f"no snapshot {snapshot} in {outdir}")
    data = read_vtk(chosen[0])
    mesh = Mesh.from_arrays(data.points, data.triangles)
    state = State(0.0, data.scalars["eta"], data.scalars["u"], data.scalars["v"])
    samples = probe_gauges(mesh, state, cfg["sim.gauges"])
    print(",".join(("gauge", "x", "y", "eta", "u", "v")), file=out)
    for g, (p, s) in enumerate(zip(cfg["sim.gauges"], samples)):
        if s is None:
            print(f"{g},{_fmt(p[0])},{_fmt(p[1])},nan,nan,nan", file=out)
        else:
            print(",".join([str(g), _fmt(p[0]), _fmt(p[1])] + [_fmt(v) for v in s]), file=out)
    return samples


# ---------------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv: Sequence[str] | None = None) -> int:
    parser = _Parser(prog="bbmsim", description="P1 finite element BBM-BBM wave simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, hlp in (("meshgen", "build a mesh from a PGM raster or xyz grid"),
                      ("run", "run a simulation"), ("probe", "sample gauges from a saved snapshot")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("-c", "--config", required=True)
        if name == "probe":
            p.add_argument("--snapshot", type=int, required=True)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, (args.command,) if args.command != "probe" else ())
        if args.command == "meshgen":
            cmd_meshgen(cfg)
        elif args.command == "run":
            cmd_run(cfg)
        else:
            cmd_probe(cfg, args.snapshot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except MeshgenError as exc:
        print(f"meshgen error: {exc}", file=sys.stderr)
        return 2
    except (MeshFormatError, BathymetryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"simulation failed after {exc.diagnostics.steps} steps: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
