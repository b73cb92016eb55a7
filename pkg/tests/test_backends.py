import numpy as np
import pytest

from vderm import _backend
from vderm.forward_map import ForwardMap
from vderm.grid import GridSpec
from vderm.presets import peaks
from vderm.solver import SolverConfig, solve

pytestmark = pytest.mark.skipif(not _backend.COMPILED, reason="compiled kernels not built")

py = _backend.get("python")


@pytest.fixture(scope="module")
def cy():
    return _backend.get("cython")


def test_names(cy):
    assert py.NAME == "python" and cy.NAME == "cython"


def test_env_var_forces_fallback(monkeypatch):
    monkeypatch.setenv("VDERM_PURE_PYTHON", "1")
    assert _backend.get() is py


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


@pytest.mark.parametrize("threads", [0, 1, 3])
def test_matvec_bitwise(cy, threads):
    u = np.asfortranarray(np.random.default_rng(0).uniform(0, 3, (9, 7, 11)))
    a = py.stencil_matvec(u, 0.37, np.empty_like(u, order="F"))
    b = cy.stencil_matvec(u, 0.37, np.empty_like(u, order="F"), threads)
    assert np.array_equal(a, b)


def test_velocity_bitwise(cy):
    rho = peaks((9, 10, 11))
    out = np.empty((3,) + rho.shape, order="F")
    assert np.array_equal(py.velocity(rho, 0.5, out.copy(order="F")), cy.velocity(rho, 0.5, out, 2))


def test_upwind_bitwise(cy):
    rng = np.random.default_rng(4)
    X = GridSpec((8, 9, 10)).identity_reference_map()
    xi = np.asfortranarray(X + 0.1 * rng.standard_normal(X.shape))
    v = np.asfortranarray(0.2 * rng.standard_normal(X.shape))
    o1 = np.empty_like(xi, order="F")
    o2 = np.empty_like(xi, order="F")
    r1 = py.upwind_step(xi, v, 0.3, 1.0, o1)
    r2 = cy.upwind_step(xi, v, 0.3, 1.0, o2, 2)
    assert np.array_equal(o1, o2)
    assert r1 == pytest.approx(r2, abs=1e-15)


def test_locate_same(cy):
    X = GridSpec((6, 6, 6)).identity_reference_map()
    xi = X + 0.1 * np.sin(X[[1, 2, 0]])
    pts = np.random.default_rng(2).uniform(0.5, 4.5, (300, 3))
    a = ForwardMap(xi, kernels=py).locate(pts)
    b = ForwardMap(xi, kernels=cy).locate(pts)
    assert np.array_equal(a[0], b[0])
    assert np.allclose(a[1], b[1], atol=1e-14)


def test_full_solve_bitwise(cy):
    rho = peaks((10, 10, 10))
    a = solve(rho, config=SolverConfig(), kernels=py)
    b = solve(rho, config=SolverConfig(), kernels=cy, threads=2)
    assert a.iterations == b.iterations
    assert np.array_equal(a.xi_final, b.xi_final)
