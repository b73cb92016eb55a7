"""Node-centred 3D grids and the dense fields stored on them.

Fields are plain ``numpy`` arrays indexed ``[i, j, k]`` with shape
``(L, M, N)``. They are allocated in Fortran order so that ``i`` is the
fastest-varying index in memory; the same order (``i`` fastest, then ``j``,
then ``k``) is used for every flattened representation, including field files.

A reference map (or any vector field) is an array of shape ``(3, L, M, N)``
whose leading axis holds the x, y and z components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError, NonPositiveDensity

MIN_NODES = 4
_MAX_NODES = np.iinfo(np.intp).max // (8 * 3)

REDUCTIONS = ("sum", "mean", "max_abs", "l2_norm")


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-centred grid with ``dims = (L, M, N)`` and spacing ``h``.

    Node ``(i, j, k)`` sits at ``(i*h, j*h, k*h)``.
    """

    dims: tuple[int, int, int]
    h: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3:
            raise GridError(f"grid.dims needs three entries, got {self.dims!r}")
        if any(d < MIN_NODES for d in dims):
            raise GridError(f"grid.dims must all be >= {MIN_NODES}, got {dims}")
        if math.prod(dims) > _MAX_NODES:
            raise GridError(f"grid.dims {dims} overflow the addressable node count")
        h = float(self.h)
        if not (h > 0 and math.isfinite(h)):
            raise GridError(f"grid.h must be a positive finite number, got {self.h!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "h", h)

    @property
    def shape(self):
        return self.dims

    @property
    def size(self):
        return math.prod(self.dims)

    @property
    def extent(self):
        """Physical side lengths ``((L-1)h, (M-1)h, (N-1)h)``."""
        return tuple((d - 1) * self.h for d in self.dims)

    def axis_coords(self, axis):
        return np.arange(self.dims[axis], dtype=float) * self.h

    def linear_index(self, i, j, k):
        L, M, _ = self.dims
        return i + L * (j + M * k)

    def unravel(self, index):
        L, M, _ = self.dims
        i = index % L
        j = (index // L) % M
        k = index // (L * M)
        return i, j, k

    def new_field(self, fill=0.0):
        return np.full(self.dims, float(fill), order="F")

    def identity_reference_map(self):
        """Reference map with every node mapped to its own coordinates."""
        xi = np.empty((3,) + self.dims, order="F")
        for axis in range(3):
            shape = [1, 1, 1]
            shape[axis] = self.dims[axis]
            xi[axis] = self.axis_coords(axis).reshape(shape)
        return xi

    def trapezoid_weights(self):
        """Tensor-product trapezoidal weights (node volume ``h^3`` included)."""
        w = [np.ones(d) for d in self.dims]
        for wa in w:
            wa[0] = wa[-1] = 0.5
        return (w[0][:, None, None] * w[1][None, :, None] * w[2][None, None, :]) * self.h**3

    def check_field(self, field, name="field"):
        if np.shape(field) != self.dims:
            raise GridError(f"{name} has shape {np.shape(field)}, expected {self.dims}")

    def check_vector(self, field, name="field"):
        if np.shape(field) != (3,) + self.dims:
            raise GridError(f"{name} has shape {np.shape(field)}, expected {(3,) + self.dims}")


def new_field(grid, fill=0.0):
    return grid.new_field(fill)


def identity_reference_map(grid):
    return grid.identity_reference_map()


def reduce(field, kind):
    """Reduce a field to a scalar; ``kind`` is one of :data:`REDUCTIONS`."""
    a = np.asarray(field, dtype=float)
    if a.size == 0:
        raise GridError("cannot reduce an empty field")
    flat = a.ravel(order="F")
    if kind == "sum":
        return float(np.add.reduce(flat))
    if kind == "mean":
        return float(np.add.reduce(flat)) / flat.size
    if kind == "max_abs":
        return float(np.max(np.abs(flat)))
    if kind == "l2_norm":
        return math.sqrt(float(np.add.reduce(flat * flat)))
    raise ValueError(f"unknown reduction {kind!r}; expected one of {REDUCTIONS}")


def as_density(values, grid=None):
    """Validate ``values`` as a strictly positive finite density field."""
    rho = np.asarray(values, dtype=float)
    if grid is not None:
        grid.check_field(rho, "density")
    if not np.all(np.isfinite(rho)):
        bad = np.argwhere(~np.isfinite(rho))[0]
        raise NonPositiveDensity(bad, rho[tuple(bad)])
    if not np.all(rho > 0):
        bad = np.argwhere(~(rho > 0))[0]
        raise NonPositiveDensity(bad, rho[tuple(bad)])
    return np.asfortranarray(rho)


def trilinear(field, points, h=1.0):
    """Sample a scalar ``(L,M,N)`` or vector ``(C,L,M,N)`` field at physical points.

    Points are clamped to the grid box. Returns shape ``(P,)`` or ``(P, C)``.
    """
    f = np.asarray(field, dtype=float)
    vector = f.ndim == 4
    if not vector:
        f = f[None]
    dims = np.array(f.shape[1:])
    pts = np.atleast_2d(np.asarray(points, dtype=float)) / h
    pts = np.clip(pts, 0.0, dims - 1)
    base = np.minimum(np.floor(pts).astype(np.int64), dims - 2)
    t = pts - base
    i, j, k = base.T
    tx, ty, tz = t.T
    out = np.zeros((len(pts), f.shape[0]))
    for dx in (0, 1):
        wx = tx if dx else 1.0 - tx
        for dy in (0, 1):
            wy = ty if dy else 1.0 - ty
            for dz in (0, 1):
                wz = tz if dz else 1.0 - tz
                out += (wx * wy * wz)[:, None] * f[:, i + dx, j + dy, k + dz].T
    return out if vector else out[:, 0]
