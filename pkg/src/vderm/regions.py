"""Region-based density specifications and their rasterization onto a grid."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh import MeshPlacement, SurfaceMesh, inside_mesh, read_mesh

log = logging.getLogger(__name__)

_TOL = 1e-9


class EmptyRegion(UserWarning):
    """A region matched no grid nodes."""


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def contains(self, pts):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        return np.all((pts >= lo - _TOL) & (pts <= hi + _TOL), axis=1)


@dataclass(frozen=True)
class Ball:
    centre: tuple
    radius: float

    def contains(self, pts):
        d2 = np.sum((pts - np.asarray(self.centre, float)) ** 2, axis=1)
        return d2 <= self.radius**2 * (1 + _TOL) + _TOL


@dataclass(frozen=True, eq=False)
class MeshInterior:
    mesh: SurfaceMesh
    name: str = "mesh"

    def contains(self, pts):
        return inside_mesh(pts, self.mesh)


@dataclass
class Region:
    predicate: object
    value: float
    name: str = ""


@dataclass
class RegionDensitySpec:
    """Ordered regions over a background; later regions win on overlap.

    With ``normalize`` each region's value is a raw weight divided by the
    region's volume (node count times ``h**3``). ``background=None`` means the
    mean of the region densities over their nodes.
    """

    regions: list = field(default_factory=list)
    background: float | None = 1.0
    normalize: bool = False

    def __post_init__(self):
        for r in self.regions:
            if not r.value > 0:
                raise ConfigError(f"region {r.name or '?'}: density must be > 0, got {r.value}")
        if self.background is not None and not self.background > 0:
            raise ConfigError(f"background must be > 0, got {self.background}")
        if self.background is None and not self.regions:
            raise ConfigError("background = mean needs at least one region")


def rasterize_density(spec, grid):
    """Density on ``grid`` nodes. Warns :class:`EmptyRegion` for unmatched regions."""
    pts = grid.identity_reference_map().reshape(3, -1, order="F").T
    owner = np.full(len(pts), -1, dtype=np.int64)
    for r, region in enumerate(spec.regions):
        owner[region.predicate.contains(pts)] = r

    values = np.array([r.value for r in spec.regions], dtype=float)
    counts = np.bincount(owner[owner >= 0], minlength=len(values))
    for r, region in enumerate(spec.regions):
        if counts[r] == 0:
            warnings.warn(f"region {region.name or r} matches no grid nodes", EmptyRegion, stacklevel=2)
    if spec.normalize:
        with np.errstate(divide="ignore"):
            values = np.where(counts > 0, values / (counts * grid.h**3), values)

    covered = owner >= 0
    if spec.background is None:
        background = float(np.mean(values[owner[covered]])) if covered.any() else 1.0
    else:
        background = float(spec.background)
    flat = np.full(len(pts), background)
    flat[covered] = values[owner[covered]]
    return np.asfortranarray(flat.reshape(grid.dims, order="F"))


def eight_region_spec(grid):
    """Octant boxes reproducing the eight-region preset on ``grid``."""
    regions = []
    h = grid.h
    for octant in range(8):
        lo, hi = [], []
        for axis in range(3):
            n = grid.dims[axis]
            split = -(-n // 2)  # first index with i >= n/2
            if (octant >> axis) & 1:
                lo.append(split * h)
                hi.append((n - 1) * h)
            else:
                lo.append(0.0)
                hi.append((split - 1) * h)
        regions.append(Region(Box(tuple(lo), tuple(hi)), 2.0 * octant + 1.0, f"octant{octant}"))
    return RegionDensitySpec(regions, background=1.0)


def _floats(tokens, n, where):
    if len(tokens) != n:
        raise ConfigError(f"{where}: expected {n} numbers, got {len(tokens)}")
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def read_region_spec(path, placement=None, grid=None, margin=0.1):
    """Parse a region spec file.

    Lines::

        background = 1          # or "mean"
        normalize = true
        box   NAME x0 y0 z0 x1 y1 z1 = VALUE
        ball  NAME cx cy cz r        = VALUE
        mesh  NAME path/to/model.obj = VALUE

    Coordinates are grid coordinates. Mesh paths are relative to the spec
    file; with a ``placement`` the mesh is moved from model to grid space,
    otherwise, given a ``grid``, it is fitted into it with ``margin``.
    """
    path = Path(path)
    spec = RegionDensitySpec([], 1.0, False)
    regions = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"density.spec: cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected '... = value'")
        lhs, rhs = (s.strip() for s in line.rsplit("=", 1))
        words = lhs.split()
        if words == ["background"]:
            spec.background = None if rhs == "mean" else _floats([rhs], 1, where)[0]
            continue
        if words == ["normalize"]:
            spec.normalize = rhs.lower() in ("1", "true", "yes", "on")
            continue
        value = _floats([rhs], 1, where)[0]
        kind, name, args = words[0], words[1] if len(words) > 1 else "", words[2:]
        if kind == "box":
            c = _floats(args, 6, where)
            pred = Box(tuple(c[:3]), tuple(c[3:]))
        elif kind == "ball":
            c = _floats(args, 4, where)
            pred = Ball(tuple(c[:3]), c[3])
        elif kind == "mesh":
            if len(args) != 1:
                raise ConfigError(f"{where}: mesh region needs one path")
            mesh = read_mesh(path.parent / args[0])
            place = placement
            if place is None and grid is not None:
                place = MeshPlacement.fit(mesh.vertices, grid, margin)
            if place is not None:
                mesh = mesh.with_vertices(place.to_grid(mesh.vertices))
            pred = MeshInterior(mesh, name)
        else:
            raise ConfigError(f"{where}: unknown region kind {kind!r}")
        regions.append(Region(pred, value, name))
    return RegionDensitySpec(regions, spec.background, spec.normalize)
