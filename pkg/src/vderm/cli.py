"""Command-line front end: ``vderm {solve,report,deform,morph,remesh-map} --config PATH``.

Exit codes (disjoint by error class):

    0  success
    2  usage, configuration or input-file error
    3  solver failure (CG breakdown, lost positivity, CFL guard)
    4  solve finished without meeting epsilon within n_max (artifacts written)
    5  geometry error (point outside the deformed grid or grid box, folded map)
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import _backend
from .errors import (
    CflViolation,
    ConfigError,
    DegenerateCell,
    FieldFileError,
    GridError,
    NonConvergence,
    NonPositiveDensity,
    OutOfDomain,
    OutOfHull,
    SingularJacobian,
)
from .forward_map import ForwardMap, mismatch_error
from .grid import GridSpec, as_density
from .io import RunConfig, read_field, read_points, write_field, write_points, write_vtk_structured
from .mesh import MeshPlacement, deform_mesh, map_points_to_reference, morph_frames, read_mesh, write_mesh
from .presets import PRESETS
from .regions import read_region_spec, rasterize_density
from .solver import Embedding, SolveResult, solve

log = logging.getLogger("vderm")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_NOT_CONVERGED = 4
EXIT_GEOMETRY = 5

XI_FILE = "xi_final.fld"
RHO_FILE = "rho_final.fld"
RHO0_FILE = "rho0.fld"
REPORT_FILE = "report.txt"
LOG_FILE = "iterations.log"
SUMMARY_FILE = "summary.txt"
SNAPSHOT_DIR = "snapshots"


# ---------------------------------------------------------------- helpers


def load_density(config):
    grid = config.grid
    if config.density_source == "preset":
        name, value = config.density_arg
        rho = PRESETS[name](grid.dims, value) if name == "uniform" else PRESETS[name](grid.dims)
    elif config.density_source == "spec":
        placement = _model_placement(config)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            spec = read_region_spec(config.density_arg, placement=placement, grid=grid, margin=config.mesh_margin)
            rho = rasterize_density(spec, grid)
        for w in caught:
            log.warning("density.spec: %s", w.message)
    else:
        ff = read_field(config.density_arg)
        if ff.ncomp != 1:
            raise ConfigError(f"density.file: expected a scalar field, got {ff.ncomp} components")
        if ff.dims != grid.dims:
            raise ConfigError(f"density.file: grid {ff.dims} does not match grid.dims {grid.dims}")
        rho = ff.data
    try:
        return as_density(rho, grid)
    except NonPositiveDensity as exc:
        raise ConfigError(f"density: {exc}") from None


def _model_placement(config):
    if config.mesh_placement == "grid":
        return MeshPlacement()
    if config.mesh_model is not None:
        return MeshPlacement.fit(read_mesh(config.mesh_model).vertices, config.grid, config.mesh_margin)
    return None


def _mesh_placement(config, mesh):
    placement = _model_placement(config)
    return placement if placement is not None else MeshPlacement.fit(mesh.vertices, config.grid, config.mesh_margin)


def _report_embedding(emb):
    if emb is None or tuple(emb.inner_dims) == tuple(emb.outer_dims):
        return None
    return emb


def build_report(xi, rho0, h, embedding):
    return mismatch_error(xi, rho0, h, _report_embedding(embedding))


# ---------------------------------------------------------------- subcommands


def run_solve(config, threads=0, kernels=None):
    """Solve and write artifacts. Returns ``(exit_code, SolveResult)``."""
    rho0 = load_density(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = config.grid.h

    t0 = time.perf_counter()
    result = solve(rho0, config.boundary, config.solver, h, kernels=kernels, threads=threads)
    elapsed = time.perf_counter() - t0
    log.info("solve: %d iterations in %.2f s (converged=%s)", result.iterations, elapsed, result.converged)

    if config.write_fields:
        write_field(out / XI_FILE, result.xi_final, h, "reference_map", result.embedding)
        write_field(out / RHO_FILE, result.rho_final, h, "density", result.embedding)
        write_field(out / RHO0_FILE, rho0, h, "density")
    if config.write_log:
        lines = result.log_lines()
        (out / LOG_FILE).write_text("".join(line + "\n" for line in lines))
    if config.write_snapshots and result.snapshots:
        snap = out / SNAPSHOT_DIR
        snap.mkdir(exist_ok=True)
        for old in snap.glob("xi_*.fld"):
            old.unlink()
        for n, xi in result.snapshots:
            write_field(snap / f"xi_{n:06d}.fld", xi, h, "reference_map", result.embedding)

    report = build_report(result.xi_final, rho0, h, result.embedding)
    if config.write_histogram:
        (out / REPORT_FILE).write_text(report.to_text())
    summary = [
        f"iterations {result.iterations}",
        f"converged {'true' if result.converged else 'false'}",
        f"dt {result.dt!r}" if result.dt is not None else "dt none",
        f"grid {' '.join(str(d) for d in result.grid.dims)}",
        f"mean_abs_e {report.mean_abs_e!r}",
    ]
    (out / SUMMARY_FILE).write_text("\n".join(summary) + "\n")
    if config.write_vtk:
        _write_vtk(out / "deformed_grid.vtk", result, rho0, kernels)
    print(f"iterations={result.iterations} converged={result.converged} mean_abs_e={report.mean_abs_e:.6g}")
    return (EXIT_OK if result.converged else EXIT_NOT_CONVERGED), result


def _write_vtk(path, result, rho0, kernels):
    fm = ForwardMap(result.xi_final, result.grid.h, kernels=kernels)
    inner = GridSpec(rho0.shape, result.grid.h)
    shift = np.asarray(result.embedding.offsets, dtype=float) * result.grid.h
    nodes = inner.identity_reference_map().reshape(3, -1, order="F").T
    deformed = fm.query(nodes + shift) - shift
    write_vtk_structured(path, deformed, rho0.shape, {"rho0": rho0})


def run_report(xi_file, rho0_file, out_file=None):
    """Regenerate the mismatch report from stored artifacts."""
    xi = read_field(xi_file)
    rho0 = read_field(rho0_file)
    if xi.ncomp != 3:
        raise FieldFileError(f"{xi_file}: expected a 3-component reference map, got {xi.ncomp}")
    if rho0.ncomp != 1:
        raise FieldFileError(f"{rho0_file}: expected a scalar density, got {rho0.ncomp} components")
    emb = _report_embedding(xi.embedding)
    expected = tuple(emb.inner_dims) if emb is not None else xi.dims
    if rho0.dims != expected:
        raise GridError(f"{rho0_file}: density grid {rho0.dims} does not match reference map object grid {expected}")
    report = build_report(xi.data, rho0.data, xi.h, emb)
    if out_file is not None:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        Path(out_file).write_text(report.to_text())
    return report


def _load_or_solve(config, threads, kernels, need_snapshots=False):
    out = Path(config.out_dir)
    xi_path = out / XI_FILE
    snaps = sorted((out / SNAPSHOT_DIR).glob("xi_*.fld")) if (out / SNAPSHOT_DIR).is_dir() else []
    if xi_path.is_file() and (snaps or not need_snapshots):
        ff = read_field(xi_path)
        grid = GridSpec(ff.dims, ff.h)
        snapshots = []
        for p in snaps:
            s = read_field(p)
            snapshots.append((int(p.stem.split("_")[1]), s.data))
        return SolveResult(ff.data, None, 0, True, grid, ff.embedding, snapshots=snapshots), EXIT_OK
    if need_snapshots and config.solver.snapshot_stride < 1:
        raise ConfigError(
            f"solver.snapshot_stride: morph needs snapshots; none found in {out / SNAPSHOT_DIR} "
            "and the stride is 0"
        )
    log.info("no stored solve in %s; solving inline", out)
    config.write_snapshots = config.write_snapshots or need_snapshots
    code, result = run_solve(config, threads, kernels)
    return result, code


def run_deform(config, mesh_path, threads=0, kernels=None):
    mesh = read_mesh(mesh_path)
    result, code = _load_or_solve(config, threads, kernels)
    fm = ForwardMap(result.xi_final, result.grid.h, kernels=kernels)
    placement = _mesh_placement(config, mesh)
    deformed = deform_mesh(mesh, fm, placement, result.embedding.offsets)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(deformed, out / "deformed.obj")
    print(f"volume_before={mesh.volume():.9g} volume_after={deformed.volume():.9g}")
    return code


def run_morph(config, mesh_path, threads=0, kernels=None):
    mesh = read_mesh(mesh_path)
    result, code = _load_or_solve(config, threads, kernels, need_snapshots=True)
    placement = _mesh_placement(config, mesh)
    frames = morph_frames(mesh, result, placement, kernels=kernels)
    out = Path(config.out_dir) / "frames"
    out.mkdir(parents=True, exist_ok=True)
    for old in out.glob("frame_*.obj"):
        old.unlink()
    width = max(4, len(str(len(frames.frames) - 1)))
    index_lines = []
    for idx, (iteration, m) in enumerate(frames.frames):
        name = f"frame_{idx:0{width}d}.obj"
        write_mesh(m, out / name)
        index_lines.append(f"{name} {iteration}")
    (out / "frames.txt").write_text("\n".join(index_lines) + "\n")
    print(f"frames={len(frames.frames)}")
    return code


def run_remesh_map(config, points_path, threads=0, kernels=None):
    points = read_points(points_path)
    result, code = _load_or_solve(config, threads, kernels)
    mapped = map_points_to_reference(points, result.xi_final, result.grid.h, result.embedding.offsets)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_points(out / "mapped_points.txt", mapped)
    print(f"points={len(mapped)}")
    return code


# ---------------------------------------------------------------- entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="vderm", description="Volumetric density-equalizing reference maps.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "report", "deform", "morph", "remesh-map"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--table1-mode", action="store_true", help="kappa = L/64, eps = 1e-2, n_max = 10000")
        p.add_argument("--backend", choices=("cython", "python"), default=None)
        if name in ("deform", "morph"):
            p.add_argument("--mesh", required=True, type=Path)
        if name == "remesh-map":
            p.add_argument("--points", required=True, type=Path)
        if name == "report":
            p.add_argument("--xi", type=Path, help=f"reference map file (default <out>/{XI_FILE})")
            p.add_argument("--rho0", type=Path, help=f"prescribed density file (default <out>/{RHO0_FILE})")
    return parser


def _dispatch(args):
    config = RunConfig.load(args.config, table1_mode=args.table1_mode)
    if args.out is not None:
        config.out_dir = args.out
    if args.threads < 1:
        raise ConfigError(f"--threads: must be >= 1, got {args.threads}")
    kernels = _backend.get(args.backend)
    if args.command == "solve":
        return run_solve(config, args.threads, kernels)[0]
    if args.command == "report":
        out = Path(config.out_dir)
        report = run_report(args.xi or out / XI_FILE, args.rho0 or out / RHO0_FILE, out / REPORT_FILE)
        print(f"mean_abs_e={report.mean_abs_e:.6g}")
        return EXIT_OK
    if args.command == "deform":
        return run_deform(config, args.mesh, args.threads, kernels)
    if args.command == "morph":
        return run_morph(config, args.mesh, args.threads, kernels)
    return run_remesh_map(config, args.points, args.threads, kernels)


def exit_code_for(exc):
    if isinstance(exc, (OutOfHull, OutOfDomain, DegenerateCell, SingularJacobian)):
        return EXIT_GEOMETRY
    if isinstance(exc, (NonConvergence, CflViolation, NonPositiveDensity)):
        return EXIT_SOLVER
    if isinstance(exc, (ConfigError, FieldFileError, GridError, OSError, ValueError)):
        return EXIT_USAGE
    return None


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = exit_code_for(exc)
        if code is None:
            raise
        print(f"vderm {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
