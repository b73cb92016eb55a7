"""The density-equalization loop: diffuse, take the velocity, advect the reference map."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .advection import cfl_timestep, max_speed_sum, upwind_step, velocity
from .diffusion import CgSettings, assemble, cg_solve
from .errors import AlreadyEqualized, ConfigError, NonPositiveDensity
from .grid import GridSpec, as_density, reduce

log = logging.getLogger(__name__)

NO_FLUX = "no_flux"
FREE = "free"
AXES = "xyz"


@dataclass(frozen=True)
class BoundarySpec:
    """Per-axis boundary treatment.

    ``modes[a]`` is ``"no_flux"`` or ``"free"``; a free axis is padded with
    ``padding[a]`` sea nodes on each side (ignored on no-flux axes).
    """

    modes: tuple = (NO_FLUX, NO_FLUX, NO_FLUX)
    padding: tuple = (0, 0, 0)

    def __post_init__(self):
        modes = (self.modes,) * 3 if isinstance(self.modes, str) else tuple(self.modes)
        padding = (self.padding,) * 3 if isinstance(self.padding, int) else tuple(self.padding)
        if len(modes) != 3 or len(padding) != 3:
            raise ConfigError("boundary modes and padding need one entry per axis")
        for axis, (mode, pad) in enumerate(zip(modes, padding)):
            if mode not in (NO_FLUX, FREE):
                raise ConfigError(f"boundary.{AXES[axis]}: unknown mode {mode!r}")
            if mode == FREE and int(pad) < 1:
                raise ConfigError(f"boundary.padding: free axis {AXES[axis]} needs padding >= 1")
        padding = tuple(int(p) if m == FREE else 0 for m, p in zip(modes, padding))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "padding", padding)

    @classmethod
    def no_flux(cls):
        return cls()

    @classmethod
    def free(cls, padding=8):
        return cls((FREE,) * 3, (padding,) * 3)

    @classmethod
    def mixed(cls, padding=8):
        """Free in x and y, no-flux top and bottom."""
        return cls((FREE, FREE, NO_FLUX), (padding, padding, 0))

    @property
    def embeds(self):
        return FREE in self.modes


@dataclass(frozen=True)
class Embedding:
    """Placement of the object grid ``D`` inside the padded grid."""

    offsets: tuple
    inner_dims: tuple
    outer_dims: tuple

    def inner(self, field_):
        """Restrict an outer-grid field (scalar or vector) to the object block."""
        sl = tuple(slice(o, o + d) for o, d in zip(self.offsets, self.inner_dims))
        if np.ndim(field_) == 4:
            return field_[(slice(None),) + sl]
        return field_[sl]

    @classmethod
    def trivial(cls, dims):
        dims = tuple(dims)
        return cls((0, 0, 0), dims, dims)


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-2
    n_max: int = 10000
    kappa: float = 1.0
    cg: CgSettings = field(default_factory=CgSettings)
    snapshot_stride: int = 0
    # multiplies the CFL timestep; values > 1 exist only to exercise the guard
    dt_scale: float = 1.0
    check_cfl: bool = True
    # scale the advecting velocity by kappa as well (off: kappa enters diffusion only)
    kappa_velocity: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"solver.epsilon must be > 0, got {self.epsilon}")
        if self.n_max < 1:
            raise ConfigError(f"solver.n_max must be >= 1, got {self.n_max}")
        if not self.kappa > 0:
            raise ConfigError(f"solver.kappa must be > 0, got {self.kappa}")
        if self.snapshot_stride < 0:
            raise ConfigError(f"solver.snapshot_stride must be >= 0, got {self.snapshot_stride}")
        if not self.dt_scale > 0:
            raise ConfigError(f"solver.dt_scale must be > 0, got {self.dt_scale}")

    @classmethod
    def table1(cls, L, **overrides):
        """Settings of the resolution study: ``kappa = L/64``, ``eps = 1e-2``."""
        return cls(epsilon=1e-2, n_max=10000, kappa=L / 64.0, **overrides)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    ratio: float
    vmax: float
    cg_iters: int
    mass: float
    rho_min: float
    rho_max: float
    min_coef: float

    def format(self):
        return f"iter={self.iteration} conv={self.ratio:.9e} vmax={self.vmax:.9e} cg_iters={self.cg_iters}"


@dataclass
class SolveResult:
    xi_final: np.ndarray
    rho_final: np.ndarray
    iterations: int
    converged: bool
    grid: GridSpec
    embedding: Embedding
    dt: float | None = None
    snapshots: list = field(default_factory=list)
    history: list = field(default_factory=list)
    rho_initial: np.ndarray | None = None

    def log_lines(self):
        return [rec.format() for rec in self.history]


def embed_in_sea(rho, spec, h=1.0):
    """Centre ``rho`` in a padded grid whose extra nodes hold ``mean(rho)``.

    Returns ``(rho_tilde, embedding)``.
    """
    rho = as_density(rho)
    lo = tuple(spec.padding)
    outer = tuple(d + 2 * p for d, p in zip(rho.shape, lo))
    sea = reduce(rho, "mean")
    out = np.full(outer, sea, order="F")
    emb = Embedding(lo, tuple(rho.shape), outer)
    emb.inner(out)[...] = rho
    return out, emb


def check_convergence(rho_n, rho_prev, epsilon):
    return convergence_ratio(rho_n, rho_prev) <= epsilon


def convergence_ratio(rho_n, rho_prev):
    return reduce(np.asarray(rho_n) - np.asarray(rho_prev), "l2_norm") / reduce(rho_prev, "mean")


def solve(rho0, spec=None, config=None, h=1.0, kernels=None, threads=0, callback=None):
    """Compute the density-equalizing reference map of ``rho0``.

    ``callback(n, rho, xi, record)`` is invoked after every iteration.
    """
    spec = spec or BoundarySpec()
    config = config or SolverConfig()
    kernels = kernels or _backend.kernels
    rho0 = as_density(rho0)
    GridSpec(rho0.shape, h)

    if spec.embeds:
        rho_t, emb = embed_in_sea(rho0, spec, h)
    else:
        rho_t, emb = rho0.copy(order="F"), Embedding.trivial(rho0.shape)
    grid = GridSpec(rho_t.shape, h)
    xi = grid.identity_reference_map()
    snapshots = [(0, xi.copy(order="F"))] if config.snapshot_stride > 0 else []

    v0 = velocity(rho_t, h, kernels, threads)
    try:
        dt = cfl_timestep(v0, h) * config.dt_scale
    except AlreadyEqualized:
        log.info("uniform density: identity map, no iterations")
        return SolveResult(xi, rho_t, 0, True, grid, emb, None, snapshots, [], rho_t)

    vmax0 = max_speed_sum(v0)
    A = assemble(grid, dt, config.kappa, kernels=kernels)
    A.threads = threads
    log.info("grid %s dt=%.6e kappa=%.6g", grid.dims, dt, config.kappa)

    rho_prev = rho_t
    history = []
    converged = False
    n = 0
    xi_next = np.empty_like(xi, order="F")
    while n < config.n_max:
        n += 1
        cg = cg_solve(A, rho_prev, config.cg, warm_start=rho_prev)
        rho = cg.x
        if not np.all(rho > 0):
            bad = np.argwhere(~(rho > 0))[0]
            raise NonPositiveDensity(bad, rho[tuple(bad)])
        v = kernels.velocity(rho, float(h), np.empty_like(xi, order="F"), threads)
        if config.kappa_velocity and config.kappa != 1.0:
            v *= config.kappa
        xi_next, step = upwind_step(xi, v, dt, h, kernels, threads, check=config.check_cfl, out=xi_next)
        xi, xi_next = xi_next, xi

        vmax = max_speed_sum(v)
        if vmax > vmax0 * (1 + 1e-12):
            log.warning("iteration %d: max |v| sum %.6e exceeds initial %.6e", n, vmax, vmax0)
        ratio = convergence_ratio(rho, rho_prev)
        record = IterationRecord(
            n, ratio, vmax, cg.iterations, reduce(rho, "sum"),
            float(rho.min()), float(rho.max()), step.min_coef,
        )
        history.append(record)
        log.debug(record.format())
        if callback is not None:
            callback(n, rho, xi, record)
        rho_prev = rho
        if config.snapshot_stride and n % config.snapshot_stride == 0:
            snapshots.append((n, xi.copy(order="F")))
        if ratio <= config.epsilon:
            converged = True
            break

    if config.snapshot_stride and snapshots[-1][0] != n:
        snapshots.append((n, xi.copy(order="F")))
    if not converged:
        log.warning("no convergence after %d iterations (ratio %.3e)", n, history[-1].ratio)
    return SolveResult(xi, rho_prev, n, converged, grid, emb, dt, snapshots, history, rho_t)
