"""Triangle meshes: I/O, placement in the grid, inside tests and deformation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridError, OutOfDomain, OutOfHull
from .forward_map import ForwardMap
from .grid import trilinear

log = logging.getLogger(__name__)

# ray-origin perturbation used when a ray grazes an edge or vertex
_JITTER = 1e-7
_EDGE_EPS = 1e-12


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)

    def validate(self):
        n = len(self.vertices)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise GridError(f"triangle indices out of range for {n} vertices")
        area = self.areas()
        if np.any(area <= 0):
            raise GridError(f"triangle {int(np.argmax(area <= 0))} has zero area")
        return self

    def areas(self):
        a, b, c = (self.vertices[self.triangles[:, q]] for q in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def volume(self):
        """Signed enclosed volume by the divergence theorem (outward normals positive)."""
        a, b, c = (self.vertices[self.triangles[:, q]] for q in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def with_vertices(self, vertices):
        return SurfaceMesh(vertices, self.triangles.copy())


def read_mesh(path):
    """Read ``v x y z`` / ``f a b c`` records (1-indexed; polygons are fanned)."""
    verts, tris = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise GridError(f"{path}:{lineno}: vertex needs three coordinates")
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                if len(idx) < 3:
                    raise GridError(f"{path}:{lineno}: face needs at least three vertices")
                for q in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[q], idx[q + 1]])
    return SurfaceMesh(np.array(verts), np.array(tris, dtype=np.int64)).validate()


def write_mesh(mesh, path):
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def box_mesh(lo, hi):
    """Closed, outward-oriented 12-triangle box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    corners = np.array([[(hi if (c >> a) & 1 else lo)[a] for a in range(3)] for c in range(8)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return SurfaceMesh(corners, np.array(tris))


@dataclass(frozen=True)
class MeshPlacement:
    """Uniform scale + translation from model coordinates to grid coordinates."""

    scale: float = 1.0
    offset: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def fit(cls, vertices, grid, margin=0.1):
        """Fit the bounding box of ``vertices`` into the grid box, ``margin`` per side."""
        v = np.asarray(vertices, dtype=float)
        lo, hi = v.min(axis=0), v.max(axis=0)
        extent = np.array(grid.extent)
        usable = extent * (1.0 - 2.0 * margin)
        size = np.where(hi - lo > 0, hi - lo, 1.0)
        scale = float(np.min(usable / size))
        centre_model = 0.5 * (lo + hi)
        offset = 0.5 * extent - scale * centre_model
        return cls(scale, tuple(float(o) for o in offset))

    def to_grid(self, points):
        return np.asarray(points, dtype=float) * self.scale + np.asarray(self.offset)

    def to_model(self, points):
        return (np.asarray(points, dtype=float) - np.asarray(self.offset)) / self.scale


def _crossings(origins, mesh):
    """Count +x ray crossings for each origin; also flag grazing hits."""
    v = mesh.vertices[mesh.triangles]  # (T, 3, 3)
    y0, z0 = v[:, 0, 1], v[:, 0, 2]
    e1y, e1z = v[:, 1, 1] - y0, v[:, 1, 2] - z0
    e2y, e2z = v[:, 2, 1] - y0, v[:, 2, 2] - z0
    det = e1y * e2z - e1z * e2y
    usable = np.abs(det) > _EDGE_EPS
    v, y0, z0, e1y, e1z, e2y, e2z, det = (
        a[usable] for a in (v, y0, z0, e1y, e1z, e2y, e2z, det)
    )
    tymin = v[:, :, 1].min(axis=1)
    tymax = v[:, :, 1].max(axis=1)
    tzmin = v[:, :, 2].min(axis=1)
    tzmax = v[:, :, 2].max(axis=1)

    count = np.zeros(len(origins), dtype=np.int64)
    grazing = np.zeros(len(origins), dtype=bool)
    chunk = max(1, 4_000_000 // max(len(det), 1))
    for s in range(0, len(origins), chunk):
        o = origins[s:s + chunk]
        py, pz = o[:, 1:2], o[:, 2:3]
        near = (py >= tymin) & (py <= tymax) & (pz >= tzmin) & (pz <= tzmax)
        pi, ti = np.nonzero(near)
        if len(pi) == 0:
            continue
        dy = o[pi, 1] - y0[ti]
        dz = o[pi, 2] - z0[ti]
        l1 = (dy * e2z[ti] - dz * e2y[ti]) / det[ti]
        l2 = (e1y[ti] * dz - e1z[ti] * dy) / det[ti]
        l0 = 1.0 - l1 - l2
        lam_min = np.minimum(np.minimum(l0, l1), l2)
        inside = lam_min > _EDGE_EPS
        edge = np.abs(lam_min) <= _EDGE_EPS
        xs = l0 * v[ti, 0, 0] + l1 * v[ti, 1, 0] + l2 * v[ti, 2, 0]
        ahead = xs > o[pi, 0]
        np.add.at(count, s + pi[inside & ahead], 1)
        grazing[s + pi[edge & ahead]] = True
    return count, grazing


def inside_mesh(points, mesh, seed=0):
    """Ray-parity inside test along +x for a closed triangle mesh."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    count, grazing = _crossings(pts, mesh)
    rng = np.random.default_rng(seed)
    scale = float(np.max(np.ptp(mesh.vertices, axis=0))) or 1.0
    for _ in range(8):
        if not grazing.any():
            break
        idx = np.flatnonzero(grazing)
        jitter = np.zeros((len(idx), 3))
        jitter[:, 1:] = rng.uniform(-_JITTER, _JITTER, size=(len(idx), 2)) * scale
        c2, g2 = _crossings(pts[idx] + jitter, mesh)
        count[idx] = c2
        grazing[idx] = g2
    return (count % 2) == 1


def deform_points(points, fm, placement=None, offset=(0, 0, 0)):
    """Push model-space points through a forward map, returning model-space points.

    ``offset`` (in nodes) locates the object grid inside the solved grid.
    """
    placement = placement or MeshPlacement()
    shift = np.asarray(offset, dtype=float) * fm.grid.h
    pts = placement.to_grid(points) + shift
    moved = fm.query(pts, strict=False)
    missing = np.flatnonzero(np.isnan(moved[:, 0]))
    if len(missing):
        raise OutOfHull(missing, fm._nearest_distance(pts[missing[0]]))
    return placement.to_model(moved - shift)


def deform_mesh(mesh, fm, placement=None, offset=(0, 0, 0)):
    """Same connectivity, vertices moved by the forward map."""
    return mesh.with_vertices(deform_points(mesh.vertices, fm, placement, offset))


@dataclass
class FrameSequence:
    frames: list = field(default_factory=list)  # (iteration, SurfaceMesh)

    @property
    def iterations(self):
        return [it for it, _ in self.frames]


def morph_frames(mesh, result, placement=None, kernels=None):
    """One deformed mesh per stored snapshot of a solve."""
    if not result.snapshots:
        raise ValueError("solve result has no snapshots; rerun with snapshot_stride > 0")
    offset = result.embedding.offsets
    out = FrameSequence()
    for index, (iteration, xi) in enumerate(result.snapshots):
        fm = ForwardMap(xi, result.grid.h, kernels=kernels)
        try:
            out.frames.append((iteration, deform_mesh(mesh, fm, placement, offset)))
        except OutOfHull as exc:
            exc.args = (f"frame {index} (iteration {iteration}): {exc}",)
            raise
    return out


def map_points_to_reference(points, xi, h=1.0, offset=(0, 0, 0), tol=1e-9):
    """Sample the reference map at ``points`` (grid coordinates of the object grid).

    Returns reference locations in the same object-grid coordinates.
    """
    xi = np.asarray(xi, dtype=float)
    shift = np.asarray(offset, dtype=float) * h
    pts = np.atleast_2d(np.asarray(points, dtype=float)) + shift
    upper = (np.array(xi.shape[1:]) - 1) * h
    bad = np.flatnonzero(np.any((pts < -tol) | (pts > upper + tol), axis=1))
    if len(bad):
        raise OutOfDomain(bad)
    return trilinear(xi, pts, h) - shift


def subdivided_box_mesh(lo, hi, n=8):
    """Closed box surface with every face split into an ``n x n`` grid of quads."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    t = np.linspace(0.0, 1.0, n + 1)
    verts, tris = [], []
    index = {}

    def vid(p):
        key = tuple(np.round(p, 12))
        if key not in index:
            index[key] = len(verts)
            verts.append(p)
        return index[key]

    for axis in range(3):
        u, w = [a for a in range(3) if a != axis]
        for side in (0, 1):
            grid = np.empty((n + 1, n + 1), dtype=np.int64)
            for a in range(n + 1):
                for b in range(n + 1):
                    p = np.empty(3)
                    p[axis] = hi[axis] if side else lo[axis]
                    p[u] = lo[u] + t[a] * (hi[u] - lo[u])
                    p[w] = lo[w] + t[b] * (hi[w] - lo[w])
                    grid[a, b] = vid(p)
            # (u, w, axis) is right-handed for axis = 0, 2 and left-handed for axis = 1
            flip = (side == 0) != (axis == 1)
            for a in range(n):
                for b in range(n):
                    q = (grid[a, b], grid[a + 1, b], grid[a + 1, b + 1], grid[a, b + 1])
                    f1, f2 = (q[0], q[1], q[2]), (q[0], q[2], q[3])
                    if flip:
                        f1, f2 = f1[::-1], f2[::-1]
                    tris += [f1, f2]
    return SurfaceMesh(np.array(verts), np.array(tris))
