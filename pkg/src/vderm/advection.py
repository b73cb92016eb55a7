"""Density-driven velocity and second-order upwind transport of the reference map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._pykernels import _one_sided
from .errors import AlreadyEqualized, CflViolation, GridError
from .grid import as_density

# slack on the [0, 1] centre-coefficient check, for rounding in dt * |v|
COEF_TOL = 1e-12


def velocity(rho, h, kernels=None, threads=0):
    """Velocity ``-grad(rho)/rho`` by central differences, shape ``(3, L, M, N)``.

    The component normal to a boundary face is zero on that face; tangential
    components there use the ordinary central difference.
    """
    kernels = kernels or _backend.kernels
    rho = as_density(rho)
    out = np.empty((3,) + rho.shape, order="F")
    return kernels.velocity(rho, float(h), out, threads)


def max_speed_sum(v):
    """``max |v_x| + |v_y| + |v_z|`` over all nodes."""
    return float(np.max(np.abs(v[0]) + np.abs(v[1]) + np.abs(v[2])))


def cfl_timestep(v0, h):
    """Largest stable timestep ``2h / (3 max(|v_x|+|v_y|+|v_z|))``."""
    vmax = max_speed_sum(v0)
    if vmax == 0.0:
        raise AlreadyEqualized("initial velocity is zero everywhere; density is already uniform")
    return 2.0 * h / (3.0 * vmax)


@dataclass
class UpwindDerivatives:
    """One-sided derivative estimates of every reference-map component.

    ``minus[a]`` and ``plus[a]`` have shape ``(3, L, M, N)`` and hold the
    backward/forward estimates along axis ``a``.
    """

    minus: tuple
    plus: tuple


def upwind_derivatives(xi, h):
    xi = np.asarray(xi, dtype=float)
    parts = [_one_sided(xi, axis, h)[:2] for axis in range(3)]
    return UpwindDerivatives(tuple(p[0] for p in parts), tuple(p[1] for p in parts))


@dataclass
class StepReport:
    min_coef: float
    max_coef: float
    argmin: int


def upwind_step(xi, v, dt, h, kernels=None, threads=0, check=True, out=None):
    """Return ``(xi_next, report)`` after one upwind step of size ``dt``.

    With ``check`` set, raises :class:`CflViolation` when the centre-node
    coefficient ``1 - dt * sum_a w_a |v_a|`` leaves ``[0, 1]`` anywhere.
    """
    kernels = kernels or _backend.kernels
    xi = np.asarray(xi, dtype=float)
    v = np.asarray(v, dtype=float)
    if xi.shape != v.shape or xi.ndim != 4 or xi.shape[0] != 3:
        raise GridError(f"reference map {xi.shape} and velocity {v.shape} are on different grids")
    if out is None:
        out = np.empty(xi.shape, order="F")
    lo, hi, arg = kernels.upwind_step(xi, v, float(dt), float(h), out, threads)
    report = StepReport(lo, hi, arg)
    if check and (lo < -COEF_TOL or hi > 1.0 + COEF_TOL):
        L, M, _ = xi.shape[1:]
        index = (arg % L, (arg // L) % M, arg // (L * M))
        raise CflViolation(lo if lo < -COEF_TOL else hi, index)
    return out, report
