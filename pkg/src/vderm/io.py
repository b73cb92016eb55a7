"""On-disk formats: binary field files, flat key=value configs, point lists, VTK."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FieldFileError, GridError
from .grid import GridSpec
from .solver import FREE, NO_FLUX, BoundarySpec, Embedding, SolverConfig
from .diffusion import CgSettings

MAGIC = b"VDERMFLD"
VERSION = 1
# magic, version, ncomp, kind, dims, h, offsets, inner dims
_HEADER = struct.Struct("<8sII16s3Qd3Q3Q")
HEADER_SIZE = _HEADER.size


@dataclass
class FieldFile:
    """A scalar or vector node field plus its grid and optional embedding record."""

    data: np.ndarray
    h: float = 1.0
    kind: str = "scalar"
    embedding: Embedding | None = None

    @property
    def ncomp(self):
        return 1 if self.data.ndim == 3 else self.data.shape[0]

    @property
    def dims(self):
        return tuple(self.data.shape[-3:])


def write_field(path, data, h=1.0, kind="scalar", embedding=None):
    data = np.asarray(data, dtype="<f8")
    if data.ndim not in (3, 4):
        raise GridError(f"field must be 3D or 4D, got shape {data.shape}")
    dims = data.shape[-3:]
    ncomp = 1 if data.ndim == 3 else data.shape[0]
    kind_b = kind.encode("ascii")
    if len(kind_b) > 16:
        raise FieldFileError(f"field kind {kind!r} longer than 16 bytes")
    emb = embedding or Embedding.trivial(dims)
    if tuple(emb.outer_dims) != tuple(dims):
        raise GridError(f"embedding outer dims {emb.outer_dims} do not match field {dims}")
    header = _HEADER.pack(MAGIC, VERSION, ncomp, kind_b, *dims, float(h), *emb.offsets, *emb.inner_dims)
    comps = data if data.ndim == 4 else data[None]
    with open(path, "wb") as fh:
        fh.write(header)
        for c in comps:
            fh.write(np.asarray(c, dtype="<f8").tobytes(order="F"))


def read_field(path):
    """Read a field file; corruption is reported with the byte offset."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FieldFileError(f"{path}: {exc.strerror}") from None
    if len(raw) < HEADER_SIZE:
        raise FieldFileError(
            f"{path}: truncated header at byte offset {len(raw)} (header is {HEADER_SIZE} bytes)"
        )
    magic, version, ncomp, kind_b, L, M, N, h, ox, oy, oz, il, im, in_ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFileError(f"{path}: bad magic at byte offset 0: {magic!r}")
    if version != VERSION:
        raise FieldFileError(f"{path}: unsupported version {version} at byte offset 8")
    if ncomp < 1:
        raise FieldFileError(f"{path}: component count {ncomp} at byte offset 12")
    dims = (L, M, N)
    try:
        GridSpec(dims, h)
    except GridError as exc:
        raise FieldFileError(f"{path}: bad grid in header at byte offset 32: {exc}") from None
    expected = HEADER_SIZE + 8 * ncomp * L * M * N
    if len(raw) != expected:
        where = "truncated" if len(raw) < expected else "trailing bytes"
        raise FieldFileError(
            f"{path}: {where} at byte offset {min(len(raw), expected)} "
            f"(expected {expected} bytes, file has {len(raw)})"
        )
    offsets, inner = (ox, oy, oz), (il, im, in_)
    if any(o + d > n for o, d, n in zip(offsets, inner, dims)):
        raise FieldFileError(f"{path}: embedding record at byte offset 72 exceeds grid {dims}")
    values = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).astype(float)
    n = L * M * N
    comps = [values[c * n:(c + 1) * n].reshape(dims, order="F") for c in range(ncomp)]
    data = np.asfortranarray(np.stack(comps)) if ncomp > 1 else np.asfortranarray(comps[0])
    kind = kind_b.rstrip(b"\0").decode("ascii", "replace")
    return FieldFile(data, float(h), kind, Embedding(offsets, inner, dims))


def read_points(path):
    """Whitespace-separated ``x y z`` per line; ``#`` comments allowed."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].split()
            if not line:
                continue
            if len(line) != 3:
                raise ConfigError(f"{path}:{lineno}: expected three coordinates")
            rows.append([float(x) for x in line])
    return np.array(rows, dtype=float).reshape(-1, 3)


def write_points(path, points):
    Path(path).write_text("".join(f"{x:.17g} {y:.17g} {z:.17g}\n" for x, y, z in points))


def write_vtk_structured(path, points, dims, scalars=None, title="vderm"):
    """Legacy ASCII VTK STRUCTURED_GRID: header, dims, point coordinates, point scalars.

    ``points`` has shape ``(L*M*N, 3)`` in i-fastest order; ``scalars`` maps
    names to node fields.
    """
    L, M, N = dims
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {L} {M} {N}",
        f"POINTS {L * M * N} double",
    ]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in points]
    if scalars:
        lines.append(f"POINT_DATA {L * M * N}")
        for name, values in scalars.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in np.asarray(values).ravel(order="F")]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- config

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")

KNOWN_KEYS = {
    "grid.dims", "grid.h",
    "density.preset", "density.value", "density.spec", "density.file",
    "boundary.mode", "boundary.x", "boundary.y", "boundary.z", "boundary.padding",
    "solver.epsilon", "solver.n_max", "solver.kappa", "solver.kappa_velocity",
    "solver.cg_tol", "solver.cg_max_iters", "solver.snapshot_stride", "solver.table1_mode",
    "output.dir", "output.fields", "output.snapshots", "output.histogram", "output.log",
    "output.vtk", "mesh.model", "mesh.margin", "mesh.placement",
}


def parse_flat(text, source="<config>"):
    """``key = value`` lines with ``#`` comments; duplicate keys are an error."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key}")
        out[key] = value
    return out


def _bool(cfg, key, default):
    if key not in cfg:
        return default
    v = cfg[key].lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {cfg[key]!r}")


def _num(cfg, key, default, cast=float):
    if key not in cfg:
        return default
    try:
        value = cast(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a {cast.__name__}, got {cfg[key]!r}") from None
    if cast is float and not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {cfg[key]!r}")
    return value


@dataclass
class RunConfig:
    grid: GridSpec
    density_source: str  # "preset" | "spec" | "file"
    density_arg: object
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: Path = Path("out")
    write_fields: bool = True
    write_snapshots: bool = False
    write_histogram: bool = True
    write_log: bool = True
    write_vtk: bool = False
    mesh_model: Path | None = None
    mesh_margin: float = 0.1
    mesh_placement: str = "fit"  # "grid": mesh coordinates already are grid coordinates
    table1_mode: bool = False
    source: Path | None = None

    @classmethod
    def load(cls, path, table1_mode=False):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
        return cls.from_dict(parse_flat(text, str(path)), base=path.parent, table1_mode=table1_mode, source=path)

    @classmethod
    def from_dict(cls, cfg, base=Path("."), table1_mode=False, source=None):
        unknown = sorted(set(cfg) - KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown configuration key")
        base = Path(base)

        if "grid.dims" not in cfg:
            raise ConfigError("grid.dims: required")
        try:
            dims = [int(t) for t in cfg["grid.dims"].replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"grid.dims: expected integers, got {cfg['grid.dims']!r}") from None
        if len(dims) == 1:
            dims *= 3
        h = _num(cfg, "grid.h", 1.0)
        try:
            grid = GridSpec(tuple(dims), h)
        except GridError as exc:
            raise ConfigError(f"grid.dims/grid.h: {exc}") from None

        sources = [k for k in ("density.preset", "density.spec", "density.file") if k in cfg]
        if len(sources) != 1:
            raise ConfigError(
                "density: exactly one of density.preset, density.spec, density.file is required"
                + (f" (got {', '.join(sources)})" if sources else "")
            )
        src = sources[0]
        if src == "density.preset":
            name = cfg[src]
            from .presets import PRESETS
            if name not in PRESETS:
                raise ConfigError(f"density.preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")
            value = _num(cfg, "density.value", 1.0)
            if not value > 0:
                raise ConfigError(f"density.value: must be > 0, got {value}")
            kind, arg = "preset", (name, value)
        else:
            p = base / cfg[src]
            if not p.is_file():
                raise ConfigError(f"{src}: file not found: {p}")
            kind, arg = src.split(".")[1], p
        if "density.value" in cfg and not (kind == "preset" and arg[0] == "uniform"):
            raise ConfigError("density.value: only valid with density.preset = uniform")

        mode = cfg.get("boundary.mode")
        modes = {"no_flux": (NO_FLUX,) * 3, "free": (FREE,) * 3, "mixed": (FREE, FREE, NO_FLUX)}
        if mode is not None and mode not in modes:
            raise ConfigError(f"boundary.mode: unknown mode {mode!r}; choose from {sorted(modes)}")
        axes = list(modes[mode or "no_flux"])
        for a, name in enumerate("xyz"):
            key = f"boundary.{name}"
            if key in cfg:
                if cfg[key] not in (NO_FLUX, FREE):
                    raise ConfigError(f"{key}: expected no_flux or free, got {cfg[key]!r}")
                axes[a] = cfg[key]
        padding = _num(cfg, "boundary.padding", 8, int)
        if padding < 0:
            raise ConfigError(f"boundary.padding: must be >= 0, got {padding}")
        try:
            boundary = BoundarySpec(tuple(axes), padding)
        except ConfigError as exc:
            raise ConfigError(f"boundary: {exc}") from None

        table1_mode = table1_mode or _bool(cfg, "solver.table1_mode", False)
        stride = _num(cfg, "solver.snapshot_stride", 0, int)
        cg_tol = _num(cfg, "solver.cg_tol", 1e-10)
        if not 0 < cg_tol < 1:
            raise ConfigError(f"solver.cg_tol: must lie in (0, 1), got {cg_tol}")
        cg_max = _num(cfg, "solver.cg_max_iters", None, int)
        if cg_max is not None and cg_max < 1:
            raise ConfigError(f"solver.cg_max_iters: must be >= 1, got {cg_max}")
        try:
            cg = CgSettings(cg_tol, cg_max)
            if table1_mode:
                solver = SolverConfig.table1(grid.dims[0], cg=cg, snapshot_stride=stride)
            else:
                solver = SolverConfig(
                    epsilon=_num(cfg, "solver.epsilon", 1e-2),
                    n_max=_num(cfg, "solver.n_max", 10000, int),
                    kappa=_num(cfg, "solver.kappa", 1.0),
                    cg=cg,
                    snapshot_stride=stride,
                    kappa_velocity=_bool(cfg, "solver.kappa_velocity", False),
                )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from None

        margin = _num(cfg, "mesh.margin", 0.1)
        if not 0 <= margin < 0.5:
            raise ConfigError(f"mesh.margin: must be in [0, 0.5), got {margin}")
        placement = cfg.get("mesh.placement", "fit")
        if placement not in ("fit", "grid"):
            raise ConfigError(f"mesh.placement: expected fit or grid, got {placement!r}")
        model = None
        if "mesh.model" in cfg:
            model = base / cfg["mesh.model"]
            if not model.is_file():
                raise ConfigError(f"mesh.model: file not found: {model}")

        return cls(
            grid=grid,
            density_source=kind,
            density_arg=arg,
            boundary=boundary,
            solver=solver,
            out_dir=base / cfg.get("output.dir", "out"),
            write_fields=_bool(cfg, "output.fields", True),
            write_snapshots=_bool(cfg, "output.snapshots", stride > 0),
            write_histogram=_bool(cfg, "output.histogram", True),
            write_log=_bool(cfg, "output.log", True),
            write_vtk=_bool(cfg, "output.vtk", False),
            mesh_model=model,
            mesh_margin=margin,
            mesh_placement=placement,
            table1_mode=table1_mode,
            source=source,
        )
