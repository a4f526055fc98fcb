"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

The lines are collected by conftest.py and repeated in the terminal summary.
"""

import io
import math
import time

import numpy as np
import pytest

from bbmsim.bathymetry import BathymetryField, parse_xyz
from bbmsim.cli import SNAPSHOT_FIELDS, build_mesh, cmd_run, parse_config, read_vtk, write_vtk
from bbmsim.fem import (ModelParams, assemble_advective_coupling, assemble_mass, assemble_weighted_stiffness,
                        build_system_matrices, l2_error)
from bbmsim.linalg import assemble_from_triplets, bicgstab_solve, cg_solve, from_coo
from bbmsim.mesh import Mesh, read_msh, rectangle_mesh, validate, write_msh
from bbmsim.meshgen import LevelGrid, MeshgenParams, mesh_from_level, min_angles
from bbmsim.scenarios import dirichlet_for, initial_state, mediterranean_scenario, standing_wave_scenario
from bbmsim.simulate import Integrator, SimConfig, discrete_mass, run

from conftest import ACCEPTANCE_LINES


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# ----------------------------------------------------------------- 1

def test_criterion_1_element_oracles():
    t0 = time.perf_counter()
    tri = Mesh.from_arrays(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    M = assemble_mass(tri).to_dense()
    K = assemble_weighted_stiffness(tri, BathymetryField.flat(tri)).to_dense()
    M_ref = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24
    K_ref = np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]) / 2
    em, ek = np.abs(M - M_ref).max(), np.abs(K - K_ref).max()
    m = rectangle_mesh(0, 3, 0, 2, 7, 5)
    n_max = np.abs(assemble_advective_coupling(m, BathymetryField.flat(m, 0.37)).to_dense()).max()
    dt = time.perf_counter() - t0
    ok = em <= 1e-14 and ek <= 1e-14 and n_max == 0.0 and dt < 1.0
    report(1, ok, f"|M-M_ref|={em:.1e} |K-K_ref|={ek:.1e} max|N|={n_max:.1e} ({dt:.2f}s)")


# ----------------------------------------------------------------- 2

def standing_wave_error(n, steps):
    mesh = rectangle_mesh(0, 1, 0, 1, n, n)
    sc = standing_wave_scenario(a=1e-5, m=1, L=1.0, W=1.0, params=ModelParams(1 / 6, 1 / 6), D0=1.0)
    dc = dirichlet_for(mesh, sc)
    T = sc.period
    final, _ = run(mesh, BathymetryField.flat(mesh, 1.0), sc.params, dc, initial_state(mesh, sc, dc).state,
                   SimConfig(dt=T / steps, t_end=T, solver_tol=1e-12))
    err, ref = l2_error(mesh, final.eta, lambda x, y: sc.exact(x, y, T)[0])
    return err / ref


def test_criterion_2_dispersion_and_convergence():
    t0 = time.perf_counter()
    omega = math.pi / (1 + math.pi ** 2 / 6)
    assert standing_wave_scenario().period == pytest.approx(2 * math.pi / omega, rel=1e-14)
    e64 = standing_wave_error(64, 2000)
    e32 = standing_wave_error(32, 2000)
    space_ratio = e32 / e64
    # coarse-dt regime on the fine mesh: dt = T/10 and T/20
    e_dt1 = standing_wave_error(64, 10)
    e_dt2 = standing_wave_error(64, 20)
    time_ratio = e_dt1 / e_dt2
    dt = time.perf_counter() - t0
    parts = {"err(h=1/64)<=1e-2": e64 <= 1e-2, "h-ratio in [3,5]": 3.0 <= space_ratio <= 5.0,
             "dt-ratio in [3.2,4.8]": 3.2 <= time_ratio <= 4.8, "runtime<300s": dt < 300}
    failed = [k for k, v in parts.items() if not v]
    report(2, not failed, f"err(h=1/64)={e64:.2e} h-ratio={space_ratio:.2f} dt-ratio(T/10->T/20)={time_ratio:.2f} "
                          f"({dt:.0f}s)" + (f" failed: {', '.join(failed)}" if failed else ""))


# ----------------------------------------------------------------- 3

def test_criterion_3_conservation():
    t0 = time.perf_counter()
    # rectangle stand-in around the ridge; wide enough that the quiet window is long
    cx, cy, R, n = 2400.0, 596.0, 250.0, 100
    mesh = rectangle_mesh(cx - R, cx + R, cy - R, cy + R, n, n)
    sc = mediterranean_scenario()
    dc = dirichlet_for(mesh, sc)
    state = initial_state(mesh, sc, dc).state
    bathy = BathymetryField.flat(mesh, 1.0)
    mats = build_system_matrices(mesh, bathy, sc.params, dc)
    integ = Integrator(mesh, bathy, mats, dc, tol=1e-10)
    boundary = set(dc.index_array("eta").tolist())
    adjacent = np.array(sorted({v for t in mesh.triangles.tolist() if boundary & set(t) for v in t}))
    m0 = discrete_mass(mats.M, state.eta)
    eta_max = state.eta.copy()
    quiet, worst_quiet, monotone, finite = 0, 0.0, True, True
    still_quiet = True
    for k in range(1, 501):
        state = integ.step(state, 0.1)
        finite &= state.is_finite()
        new_max = np.maximum(eta_max, state.eta)
        monotone &= bool(np.all(new_max >= eta_max))
        eta_max = new_max
        signal = max(np.abs(f[adjacent]).max() for f in state.fields())
        drift = abs(discrete_mass(mats.M, state.eta) - m0) / (1 + abs(m0))
        if still_quiet and signal < 1e-12:
            quiet = k
            worst_quiet = max(worst_quiet, drift)
        else:
            still_quiet = False
    dt = time.perf_counter() - t0
    ok = finite and monotone and worst_quiet <= 1e-8 and quiet >= 150 and dt < 120
    report(3, ok, f"quiet steps={quiet}/500 max drift while quiet={worst_quiet:.1e} final drift={drift:.1e} "
                  f"eta_max monotone={monotone} finite={finite} ({dt:.0f}s)")


# ----------------------------------------------------------------- 4

def island_mesh():
    xs = np.linspace(-1, 1, 101)
    X, Y = np.meshgrid(xs, xs)
    level = LevelGrid(xs, xs.copy(), 0.5 - np.hypot(X, Y))  # dry disk of radius 0.5
    return mesh_from_level(level, MeshgenParams(max_area=1e-3 * 4.0, min_angle=20.0))


def test_criterion_4_mesh_pipeline(tmp_path):
    t0 = time.perf_counter()
    a, b = island_mesh(), island_mesh()
    pa, pb = tmp_path / "a.msh", tmp_path / "b.msh"
    pa.write_text(write_msh(a))
    pb.write_text(write_msh(b))
    identical = pa.read_bytes() == pb.read_bytes()
    exact = 4.0 - math.pi * 0.25
    area_err = abs(a.total_area() - exact) / exact
    amin = float(min_angles(a).min())
    labelled = bool(np.all(np.isin(a.edge_labels, [1, 2]))) and set(a.edge_labels.tolist()) == {1, 2}
    problems = validate(a)
    dt = time.perf_counter() - t0
    ok = area_err <= 0.02 and amin >= 20.0 and labelled and not problems and identical and dt < 30
    report(4, ok, f"triangles={a.n_triangles} area error={area_err:.2%} min angle={amin:.2f} labels ok={labelled} "
                  f"validate={len(problems)} issues byte-identical={identical} ({dt:.1f}s)")


# ----------------------------------------------------------------- 5

def shelf_xyz():
    lons = 33.0 + 0.02 * np.arange(50)
    lats = 33.5 + 0.02 * np.arange(50)
    LON, LAT = np.meshgrid(lons, lats)
    s = (LAT - lats[0]) / (lats[-1] - lats[0]) + 0.04 * np.sin(2 * np.pi * (LON - lons[0]) / 0.5)
    z = -2800.0 + 3000.0 * np.clip(s, 0, 1) ** 1.5  # metres, deep south, land strip to the north
    rows = [f"{lo!r} {la!r} {zz!r}" for lo, la, zz in zip(LON.ravel().tolist(), LAT.ravel().tolist(), z.ravel().tolist())]
    return "\n".join(rows) + "\n", z


def test_criterion_5_realistic_pipeline(tmp_path):
    t0 = time.perf_counter()
    text, z = shelf_xyz()
    assert z.min() == pytest.approx(-2800.0) and z.max() == pytest.approx(200.0)
    (tmp_path / "shelf.xyz").write_text(text)
    cfg = parse_config("\n".join([
        "input.xyz = shelf.xyz", "projection.mode = uniform_per_degree", "projection.km_per_degree = 100",
        "bathymetry.z_cap = -0.010", "scenario.name = cyprus", "scenario.variant = sum_exponent",
        "scenario.center_x = 3350", "scenario.center_y = 3390", "scenario.width_x = 8",
        "scenario.width_y = 8", "sim.dt = 0.1", "sim.steps = 200", "sim.gauges = 3350 3390",
        "output.dir = out", "output.every = 50", ""]), tmp_path)
    res = cmd_run(cfg, out=io.StringIO())
    od = res.outdir
    mass = np.array([m for _, m in res.diagnostics.mass_series])
    snaps = sorted(od.glob("snapshot_*.vtk"))
    parsed = [read_vtk(p) for p in snaps + [od / "eta_max.vtk"]]
    fields_ok = all(set(d.scalars) | set(d.vectors) == set(SNAPSHOT_FIELDS) for d in parsed[:-1])
    fields_ok &= set(parsed[-1].scalars) == {"eta_max"}
    mesh_labels = set(np.unique(build_mesh(cfg)[0].edge_labels).tolist())
    dt = time.perf_counter() - t0
    ok = (res.diagnostics.steps == 200 and np.isfinite(mass).all() and np.isfinite(res.diagnostics.eta_max).all()
          and len(snaps) == 5 and fields_ok and mesh_labels == {1, 2} and dt < 300)
    report(5, ok, f"steps={res.diagnostics.steps} mass finite={np.isfinite(mass).all()} "
                  f"eta_max finite={np.isfinite(res.diagnostics.eta_max).all()} vtk files parsed={len(parsed)} "
                  f"labels={sorted(mesh_labels)} ({dt:.0f}s)")


# ----------------------------------------------------------------- 6

def random_system(rng, n, symmetric):
    mask = rng.random((n, n)) < min(1.0, 8.0 / n)
    B = np.where(mask, rng.normal(size=(n, n)), 0.0)
    if symmetric:
        B = B + B.T
    np.fill_diagonal(B, 0.0)
    B[np.diag_indices(n)] = np.abs(B).sum(axis=1) + 0.1 + rng.random(n)
    r, c = np.nonzero(B)
    return from_coo(r, c, B[r, c], (n, n)), B


def test_criterion_6_solvers():
    t0 = time.perf_counter()
    spd = assemble_from_triplets([(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)], 2)
    upper = assemble_from_triplets([(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0)], 2)
    e_cg = np.abs(cg_solve(spd, [1.0, 2.0], tol=1e-14).x - [1 / 11, 7 / 11]).max()
    e_bi = np.abs(bicgstab_solve(upper, [3.0, 2.0], tol=1e-14).x - [1.0, 1.0]).max()
    rng = np.random.default_rng(2024)
    tol = 1e-10
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        b = rng.normal(size=n)
        S, Bs = random_system(rng, n, True)
        x = cg_solve(S, b, tol=tol).x
        worst = max(worst, np.linalg.norm(Bs @ x - b) / (tol * np.linalg.norm(b)))
        A, Ba = random_system(rng, n, False)
        x = bicgstab_solve(A, b, tol=tol).x
        worst = max(worst, np.linalg.norm(Ba @ x - b) / (tol * np.linalg.norm(b)))
    dt = time.perf_counter() - t0
    ok = e_cg <= 1e-12 and e_bi <= 1e-12 and worst <= 1.0 and dt < 10
    report(6, ok, f"2x2 cg err={e_cg:.1e} bicgstab err={e_bi:.1e} worst residual/(tol*|b|)={worst:.2f} "
                  f"over 200 solves ({dt:.1f}s)")


# ----------------------------------------------------------------- 7

def test_criterion_7_round_trips(tmp_path):
    import meshio
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    msh_ok = vtk_ok = xyz_ok = True
    for k in range(20):
        nx, ny = rng.integers(1, 8, 2)
        m = rectangle_mesh(0, 1, 0, 1, int(nx), int(ny), labels=tuple(rng.integers(1, 5, 4).tolist()))
        p = m.points.copy()
        inner = (p[:, 0] > 0) & (p[:, 0] < 1) & (p[:, 1] > 0) & (p[:, 1] < 1)
        p[inner] += rng.uniform(-0.2, 0.2, (inner.sum(), 2)) / max(nx, ny)
        p = p * rng.uniform(0.1, 1000) + rng.uniform(-1e3, 1e3, 2)
        m = Mesh.from_arrays(p, m.triangles, m.boundary_edges, m.edge_labels)
        back = read_msh(write_msh(m))
        msh_ok &= back.same_as(m) and write_msh(back) == write_msh(m)
        eta, u, v = rng.normal(size=(3, m.n_vertices))
        path = tmp_path / f"f{k}.vtk"
        write_vtk(m, path, {"eta": eta, "u": u, "v": v}, {"velocity": (u, v)})
        ref = meshio.read(path)
        vtk_ok &= sorted(ref.point_data) == sorted(SNAPSHOT_FIELDS)
        vtk_ok &= np.array_equal(ref.points[:, :2], m.points) and np.array_equal(ref.cells[0].data, m.triangles)
        vtk_ok &= np.array_equal(np.ravel(ref.point_data["eta"]), eta)
        vtk_ok &= np.array_equal(ref.point_data["velocity"][:, :2], np.column_stack([u, v]))
        lons = np.sort(rng.choice(np.arange(-400, 400) * 0.05, int(rng.integers(1, 9)), replace=False))
        lats = np.sort(rng.choice(np.arange(-400, 400) * 0.05, int(rng.integers(1, 9)), replace=False))
        zz = rng.integers(-5000, 500, (len(lats), len(lons)))
        rows = [f"{float(lo)!r} {float(la)!r} {zz[j, i]}" for j, la in enumerate(lats) for i, lo in enumerate(lons)]
        g1 = parse_xyz("\n".join(rows))
        g2 = parse_xyz("\n".join(rows[i] for i in rng.permutation(len(rows))))
        xyz_ok &= (np.array_equal(g1.lons, g2.lons) and np.array_equal(g1.lats, g2.lats)
                   and np.array_equal(g1.z, g2.z) and np.array_equal(g1.z, zz / 1000.0))
    dt = time.perf_counter() - t0
    ok = msh_ok and vtk_ok and xyz_ok and dt < 10
    report(7, ok, f"msh round trip={msh_ok} vtk reference parse={vtk_ok} xyz permutation invariance={xyz_ok} "
                  f"over 20 fixtures ({dt:.1f}s)")
