"""Forward deformation, Jacobians and the volume-density mismatch error.

The forward map is the piecewise-linear interpolant that sends each reference
location ``xi(node)`` back to the node position. Every grid cell is split
into six tetrahedra along its main diagonal (the Freudenthal split), which
is conforming across neighbouring cells.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DegenerateCell, GridError, OutOfHull, SingularJacobian
from .grid import GridSpec, trilinear

BARY_TOL = 1e-10
SINGULAR_DET = 1e-12
HIST_BINS = 64

_PERMS = list(itertools.permutations(range(3)))


def _tet_corners():
    # corner offsets (dx, dy, dz) of the four vertices of each of the six tets
    corners = []
    for perm in _PERMS:
        c = [0, 0, 0]
        path = [tuple(c)]
        for axis in perm:
            c[axis] = 1
            path.append(tuple(c))
        corners.append(path)
    return np.array(corners)  # (6, 4, 3)


_CORNERS = _tet_corners()
# sign of each tet's volume on the undeformed lattice
_PARITY = np.sign(np.linalg.det((_CORNERS[:, 1:] - _CORNERS[:, :1]).astype(float)))


class ForwardMap:
    """Queryable map from reference positions to deformed positions."""

    def __init__(self, xi, h=1.0, kernels=None, check=True):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim != 4 or xi.shape[0] != 3:
            raise GridError(f"reference map must have shape (3, L, M, N), got {xi.shape}")
        if not np.all(np.isfinite(xi)):
            raise GridError("reference map has non-finite values")
        self.grid = GridSpec(xi.shape[1:], h)
        self.kernels = kernels or _backend.kernels
        L, M, N = self.grid.dims

        self.abscissa = xi.reshape(3, -1, order="F").T.copy()
        self.ordinate = self.grid.identity_reference_map().reshape(3, -1, order="F").T.copy()

        ci, cj, ck = np.meshgrid(np.arange(L - 1), np.arange(M - 1), np.arange(N - 1), indexing="ij")
        base = (ci + L * (cj + M * ck)).ravel(order="F")
        offs = _CORNERS[..., 0] + L * (_CORNERS[..., 1] + M * _CORNERS[..., 2])  # (6, 4)
        self.tets = (base[:, None, None] + offs[None]).reshape(-1, 4)
        self.n_cells = len(base)

        P = self.abscissa[self.tets]  # (T, 4, 3)
        self.tet_origin = np.ascontiguousarray(P[:, 0])
        edges = np.transpose(P[:, 1:] - P[:, :1], (0, 2, 1))  # columns are edge vectors
        det = np.linalg.det(edges) * np.tile(_PARITY, self.n_cells)
        if check and np.any(det <= 0):
            bad = int(np.argmax(det <= 0))
            cell = self.grid.unravel(int(base[bad // 6]))
            raise DegenerateCell(cell, det[bad] / 6.0)
        with np.errstate(all="ignore"):
            self.tet_inverse = np.ascontiguousarray(np.linalg.inv(edges))
        self._build_hash(P)

    def _build_hash(self, P):
        h = self.grid.h
        lo = self.abscissa.min(axis=0)
        hi = self.abscissa.max(axis=0)
        pad = 1e-9 * max(float(np.max(hi - lo)), h)
        self.hash_size = h
        self.hash_lo = lo - pad
        self.hash_dims = np.floor((hi + pad - self.hash_lo) / h).astype(np.int64) + 1

        tlo = np.floor((P.min(axis=1) - pad - self.hash_lo) / h).astype(np.int64)
        thi = np.floor((P.max(axis=1) + pad - self.hash_lo) / h).astype(np.int64)
        tlo = np.clip(tlo, 0, self.hash_dims - 1)
        thi = np.clip(thi, 0, self.hash_dims - 1)
        span = thi - tlo + 1
        count = span.prod(axis=1)
        total = int(count.sum())
        tet = np.repeat(np.arange(len(P), dtype=np.int64), count)
        off = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(count) - count, count)
        sx = span[tet, 0]
        sy = span[tet, 1]
        cx = tlo[tet, 0] + off % sx
        cy = tlo[tet, 1] + (off // sx) % sy
        cz = tlo[tet, 2] + off // (sx * sy)
        nx, ny, nz = self.hash_dims
        cell = cx + nx * (cy + ny * cz)
        order = np.argsort(cell, kind="stable")
        self.cell_tets = np.ascontiguousarray(tet[order])
        self.cell_start = np.zeros(nx * ny * nz + 1, dtype=np.int64)
        np.cumsum(np.bincount(cell, minlength=nx * ny * nz), out=self.cell_start[1:])

    def locate(self, points):
        """Return ``(tet_id, barycentric)`` per point; ``tet_id`` is -1 when not found."""
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
        return self.kernels.locate(
            pts, self.tet_origin, self.tet_inverse, self.hash_lo, float(self.hash_size),
            self.hash_dims, self.cell_start, self.cell_tets, BARY_TOL,
        )

    def query(self, points, strict=True):
        """Deformed positions of reference points, shape ``(3,)`` or ``(P, 3)``.

        Points outside the deformed grid raise :class:`OutOfHull` when
        ``strict``; otherwise they come back as NaN.
        """
        single = np.ndim(points) == 1
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tet_id, bary = self.locate(pts)
        missing = tet_id < 0
        out = np.full(pts.shape, np.nan)
        found = ~missing
        verts = self.tets[tet_id[found]]
        out[found] = np.einsum("pv,pvd->pd", bary[found], self.ordinate[verts])
        if strict and missing.any():
            idx = np.flatnonzero(missing)
            raise OutOfHull(idx, self._nearest_distance(pts[idx[0]]))
        return out[0] if single else out

    def _nearest_distance(self, p):
        return float(np.sqrt(np.min(np.sum((self.abscissa - p) ** 2, axis=1))))

    def tet_volumes(self):
        P = self.abscissa[self.tets]
        edges = P[:, 1:] - P[:, :1]
        return np.linalg.det(edges) * np.tile(_PARITY, self.n_cells) / 6.0


def build_forward_map(xi, h=1.0, kernels=None):
    return ForwardMap(xi, h, kernels=kernels)


def query(fm, p):
    return fm.query(p)


@dataclass
class JacobianField:
    """Per-node ``grad`` = d(xi)/dx and its inverse ``F``; arrays end in ``(3, 3)``."""

    grad: np.ndarray
    F: np.ndarray
    det_grad: np.ndarray
    singular: np.ndarray

    @property
    def det_F(self):
        with np.errstate(divide="ignore"):
            return np.where(self.singular, np.nan, 1.0 / self.det_grad)


def jacobian_field(xi, h=1.0, allow_singular=False):
    """Central differences inside, two-point one-sided differences on faces."""
    xi = np.asarray(xi, dtype=float)
    grad = np.empty(xi.shape[1:] + (3, 3))
    for c in range(3):
        for a in range(3):
            grad[..., c, a] = np.gradient(xi[c], h, axis=a, edge_order=1)
    det = np.linalg.det(grad)
    singular = np.abs(det) < SINGULAR_DET
    if singular.any() and not allow_singular:
        raise SingularJacobian(int(singular.sum()), singular.size, tuple(int(i) for i in np.argwhere(singular)[0]))
    F = np.full_like(grad, np.nan)
    ok = ~singular
    F[ok] = np.linalg.inv(grad[ok])
    return JacobianField(grad, F, det, singular)


def trapezoid(field, grid):
    return float(np.add.reduce((grid.trapezoid_weights() * field).ravel(order="F")))


@dataclass
class MismatchReport:
    e: np.ndarray
    mean_abs_e: float
    bin_edges: np.ndarray
    counts: np.ndarray
    excluded: int
    grid_dims: tuple
    embedding: object = None

    def histogram_lines(self):
        return [
            f"{lo:.17g} {hi:.17g} {int(c)}"
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts)
        ]

    def to_text(self):
        emb = self.embedding
        lines = ["# vderm volume-density mismatch report", "grid {} {} {}".format(*self.grid_dims)]
        if emb is not None:
            lines.append(
                "embedding offsets {} {} {} inner {} {} {} outer {} {} {}".format(
                    *emb.offsets, *emb.inner_dims, *emb.outer_dims
                )
            )
        valid = np.isfinite(self.e)
        lines += [
            f"nodes {int(valid.sum())}",
            f"excluded {self.excluded}",
            f"mean_abs_e {self.mean_abs_e:.17g}",
            f"max_abs_e {float(np.max(np.abs(self.e[valid]))) if valid.any() else 0.0:.17g}",
            "# bin_left bin_right count",
        ]
        lines += self.histogram_lines()
        return "\n".join(lines) + "\n"


def histogram(e, bins=HIST_BINS):
    vals = np.abs(e[np.isfinite(e)])
    m = float(vals.max()) if vals.size else 0.0
    if m == 0.0:
        m = 1.0
    edges = np.linspace(-m, m, bins + 1)
    counts, _ = np.histogram(e[np.isfinite(e)], bins=edges)
    return edges, counts


def embedded_density(rho0, embedding):
    """Prescribed density on the solved grid, with the sea at ``mean(rho0)``."""
    if embedding is None or tuple(embedding.outer_dims) == tuple(rho0.shape):
        return np.asarray(rho0, dtype=float)
    out = np.full(embedding.outer_dims, float(np.mean(rho0)), order="F")
    embedding.inner(out)[...] = rho0
    return out


def mismatch_error(xi, rho0, h=1.0, embedding=None):
    """Log-ratio of normalized volume factor to normalized prescribed density.

    ``xi`` lives on the solved grid; ``rho0`` is the original prescribed
    density on the object grid. With an ``embedding`` the error is evaluated on
    the object block only. Nodes with a singular or inverted Jacobian are
    excluded; more than 1% of them raises :class:`SingularJacobian`.
    """
    xi = np.asarray(xi, dtype=float)
    rho0 = np.asarray(rho0, dtype=float)
    outer = xi.shape[1:]
    if embedding is None:
        if rho0.shape != outer:
            raise GridError(f"density grid {rho0.shape} does not match reference map grid {outer}")
    elif tuple(embedding.outer_dims) != outer or tuple(embedding.inner_dims) != rho0.shape:
        raise GridError(
            f"embedding {embedding.inner_dims} in {embedding.outer_dims} does not match "
            f"density {rho0.shape} and reference map {outer}"
        )
    jac = jacobian_field(xi, h, allow_singular=True)
    det_F = jac.det_F
    xi_in = xi if embedding is None else embedding.inner(xi)
    det_in = det_F if embedding is None else embedding.inner(det_F)
    bad = ~np.isfinite(det_in) | (det_in <= 0)
    if bad.sum() > 0.01 * bad.size:
        raise SingularJacobian(int(bad.sum()), bad.size, tuple(int(i) for i in np.argwhere(bad)[0]))

    inner = GridSpec(rho0.shape, h)
    # e ignores the scale of rho0; dividing by the max makes a uniform field exactly 1
    rho0 = rho0 / np.max(rho0)
    det_in = np.where(bad, 0.0, det_in)
    volume = trapezoid(det_in, inner)
    mass = trapezoid(rho0, inner)
    ref_pts = xi_in.reshape(3, -1, order="F").T
    rho_at_ref = trilinear(embedded_density(rho0, embedding), ref_pts, h).reshape(rho0.shape, order="F")
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.log((det_in / volume) / (rho_at_ref / mass))
    e = np.where(bad, np.nan, e)
    e = np.asfortranarray(e)
    valid = e[np.isfinite(e)]
    mean_abs = float(np.mean(np.abs(valid))) if valid.size else 0.0
    edges, counts = histogram(e)
    return MismatchReport(e, mean_abs, edges, counts, int(bad.sum()), outer, embedding)


def reference_volume_factor(xi, h=1.0, fm=None, points=None):
    """``det F`` carried back to reference positions.

    Evaluates the Eulerian ``det F`` field at the deformed image of each
    reference point (default: every grid node), giving the local ratio of
    deformed to reference volume in Lagrangian coordinates.
    """
    xi = np.asarray(xi, dtype=float)
    grid = GridSpec(xi.shape[1:], h)
    if fm is None:
        fm = ForwardMap(xi, h)
    if points is None:
        points = grid.identity_reference_map().reshape(3, -1, order="F").T
    deformed = fm.query(points)
    det_F = jacobian_field(xi, h).det_F
    return trilinear(det_F, deformed, h)


def region_volumes(xi, labels, h=1.0, fm=None, embedding=None):
    """Deformed volume of each labelled set of reference nodes.

    ``labels`` is an integer array on the object grid (negative = unlabelled).
    Each volume is the trapezoidal integral of ``det F`` carried back to the
    reference nodes, with the object grid's weights restricted to the label,
    so the labels partition the integral over the whole object.
    """
    xi = np.asarray(xi, dtype=float)
    grid = GridSpec(xi.shape[1:], h)
    factor = reference_volume_factor(xi, h, fm).reshape(grid.dims, order="F")
    if embedding is not None:
        factor = embedding.inner(factor)
    labels = np.asarray(labels)
    weights = GridSpec(labels.shape, h).trapezoid_weights() * factor
    n = int(labels.max()) + 1
    return np.bincount(labels[labels >= 0].ravel(), weights=weights[labels >= 0].ravel(), minlength=n)
