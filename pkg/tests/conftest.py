import functools

import numpy as np
import pytest

from vderm import _backend
from vderm.presets import eight_region, peaks
from vderm.solver import BoundarySpec, SolverConfig, solve

BACKENDS = ["python"] + (["cython"] if _backend.COMPILED else [])


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return _backend.get(request.param)


@functools.lru_cache(maxsize=None)
def cached_solve(kind, n, boundary="no_flux", table1=False, stride=0, padding=8):
    rho = {"peaks": peaks, "eight_region": eight_region}[kind]((n, n, n))
    spec = {
        "no_flux": BoundarySpec.no_flux(),
        "free": BoundarySpec.free(padding),
        "mixed": BoundarySpec.mixed(padding),
    }[boundary]
    cfg = SolverConfig.table1(n, snapshot_stride=stride) if table1 else SolverConfig(snapshot_stride=stride)
    return rho, solve(rho, spec, cfg)


def two_valued(n, lo=1.0, hi=10.0, block=None):
    """``hi`` in a centred cube of side ``block`` nodes, ``lo`` elsewhere."""
    block = block or n // 4
    rho = np.full((n, n, n), lo, order="F")
    a = (n - block) // 2
    rho[a:a + block, a:a + block, a:a + block] = hi
    return rho


@functools.lru_cache(maxsize=None)
def central_box_solve(n=32, stride=0, boundary="free"):
    """Density 10 on the central (n/4)^3 nodes, 1 elsewhere."""
    rho = two_valued(n, 1.0, 10.0, n // 4)
    spec = BoundarySpec.free(n // 4) if boundary == "free" else BoundarySpec.no_flux()
    return rho, solve(rho, spec, SolverConfig(snapshot_stride=stride))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def record(label, ok, detail):
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
