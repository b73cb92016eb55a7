"""Backward-Euler diffusion: the seven-point operator and its CG solve."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import GridError, NonConvergence


@dataclass(frozen=True)
class CgSettings:
    rel_tolerance: float = 1e-10
    max_iters: int | None = None  # None -> 10 * (L + M + N)

    def __post_init__(self):
        if not (0 < self.rel_tolerance < 1):
            raise ValueError(f"cg rel_tolerance must lie in (0, 1), got {self.rel_tolerance}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError(f"cg max_iters must be >= 1, got {self.max_iters}")

    def iteration_cap(self, grid):
        if self.max_iters is not None:
            return self.max_iters
        return 10 * sum(grid.dims)


class StencilMatrix:
    """Matrix-free ``A = I - dt*kappa*Laplacian`` with no-flux ghost nodes.

    Row ``(i,j,k)`` has diagonal ``1 + c*n`` and ``-c`` toward each of its
    ``n`` in-domain neighbours, where ``c = dt*kappa/h^2``. Every row sums to 1.
    """

    def __init__(self, grid, dt, kappa=1.0, kernels=None):
        if not (dt > 0 and math.isfinite(dt)):
            raise ValueError(f"dt must be positive and finite, got {dt!r}")
        if not (kappa > 0 and math.isfinite(kappa)):
            raise ValueError(f"kappa must be positive and finite, got {kappa!r}")
        self.grid = grid
        self.dt = float(dt)
        self.kappa = float(kappa)
        self.coupling = self.dt * self.kappa / grid.h**2
        self.kernels = kernels or _backend.kernels
        self.neighbours = neighbour_counts(grid)
        self.threads = 0

    @property
    def diag(self):
        return 1.0 + self.coupling * self.neighbours

    def matvec(self, u, out=None):
        if out is None:
            out = np.empty(self.grid.dims, order="F")
        return self.kernels.stencil_matvec(np.asarray(u, dtype=float), self.coupling, out, self.threads)

    __matmul__ = matvec

    def dense(self):
        """Explicit ``(LMN, LMN)`` matrix in i-fastest node order (small grids only)."""
        n = self.grid.size
        out = np.empty((n, n))
        e = np.zeros(self.grid.dims, order="F")
        flat = e.reshape(-1, order="F")
        for col in range(n):
            flat[col] = 1.0
            out[:, col] = self.matvec(e).ravel(order="F")
            flat[col] = 0.0
        return out


def neighbour_counts(grid):
    """Number of in-domain face neighbours of every node (3 to 6)."""
    counts = np.full(grid.dims, 6.0, order="F")
    counts[0] -= 1
    counts[-1] -= 1
    counts[:, 0] -= 1
    counts[:, -1] -= 1
    counts[:, :, 0] -= 1
    counts[:, :, -1] -= 1
    return counts


def assemble(grid, dt, kappa=1.0, kernels=None):
    return StencilMatrix(grid, dt, kappa, kernels=kernels)


def _dot(a, b):
    # fixed-order pairwise reduction, reproducible run to run
    return float(np.add.reduce((a * b).ravel(order="K")))


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual: float


def cg_solve(A, b, settings=None, warm_start=None):
    """Plain conjugate gradients on the stencil operator.

    Stops once ``||A x - b||_2 <= rel_tolerance * ||b||_2``; raises
    :class:`NonConvergence` if the iteration cap is reached first.
    """
    settings = settings or CgSettings()
    b = np.asarray(b, dtype=float)
    if b.shape != A.grid.dims:
        raise GridError(f"right-hand side has shape {b.shape}, expected {A.grid.dims}")
    x = np.array(b if warm_start is None else warm_start, dtype=float, order="F")
    target = settings.rel_tolerance * math.sqrt(_dot(b, b))
    cap = settings.iteration_cap(A.grid)

    Ap = np.empty(A.grid.dims, order="F")
    r = b - A.matvec(x, Ap)
    rr = _dot(r, r)
    if math.sqrt(rr) <= target:
        return CgResult(x, 0, math.sqrt(rr))
    p = r.copy(order="F")
    for it in range(1, cap + 1):
        A.matvec(p, Ap)
        alpha = rr / _dot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = _dot(r, r)
        if math.sqrt(rr_new) <= target:
            return CgResult(x, it, math.sqrt(rr_new))
        p *= rr_new / rr
        p += r
        rr = rr_new
    raise NonConvergence(cap, math.sqrt(rr), target)
