import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cached_solve
from vderm.errors import DegenerateCell, GridError, OutOfHull, SingularJacobian
from vderm.forward_map import (
    HIST_BINS,
    ForwardMap,
    build_forward_map,
    histogram,
    jacobian_field,
    mismatch_error,
    query,
    trapezoid,
)
from vderm.grid import GridSpec
from vderm.presets import peaks


def random_affine(rng, scale=0.3):
    while True:
        A = np.eye(3) + scale * rng.uniform(-1, 1, (3, 3))
        if np.linalg.det(A) > 0.2:
            return A, rng.uniform(-2, 2, 3)


def affine_map(grid, A, b):
    X = grid.identity_reference_map()
    return np.asfortranarray(np.einsum("ab,b...->a...", A, X) + b[:, None, None, None])


def test_identity_query(kernels):
    g = GridSpec((6, 7, 8), 0.5)
    fm = ForwardMap(g.identity_reference_map(), 0.5, kernels)
    p = np.random.default_rng(0).uniform(0, 2.5, (200, 3))
    assert np.max(np.abs(fm.query(p) - p)) <= 1e-12


def test_uniform_shrink_halves(kernels):
    g = GridSpec((6, 6, 6))
    xi = 2.0 * g.identity_reference_map()
    fm = ForwardMap(xi, 1.0, kernels)
    p = np.random.default_rng(1).uniform(0, 10, (100, 3))
    assert np.allclose(fm.query(p), p / 2, atol=1e-12)


def test_single_point_query_shape():
    g = GridSpec((4, 4, 4))
    fm = build_forward_map(g.identity_reference_map())
    out = query(fm, np.array([1.5, 0.5, 2.25]))
    assert out.shape == (3,) and np.allclose(out, [1.5, 0.5, 2.25])


def test_tet_centroid_averages_ordinates():
    g = GridSpec((5, 5, 5))
    X = g.identity_reference_map()
    xi = X + 0.08 * np.sin(X[[1, 2, 0]])
    fm = ForwardMap(xi)
    t = 6 * 17 + 4
    centroid = fm.abscissa[fm.tets[t]].mean(axis=0)
    tid, bary = fm.locate(centroid[None])
    assert tid[0] == t
    assert np.allclose(fm.query(centroid), fm.ordinate[fm.tets[t]].mean(axis=0), atol=1e-12)


def test_shared_face_lowest_id():
    g = GridSpec((4, 4, 4))
    fm = ForwardMap(g.identity_reference_map())
    # the main diagonal of cell 0 is shared by all six of its tetrahedra
    tid, _ = fm.locate(np.array([[0.5, 0.5, 0.5]]))
    assert tid[0] == 0


def test_tet_volumes_partition_box():
    g = GridSpec((5, 6, 7), 0.5)
    fm = ForwardMap(g.identity_reference_map(), 0.5)
    vol = fm.tet_volumes()
    assert np.all(vol > 0)
    assert vol.sum() == pytest.approx(np.prod(g.extent), rel=1e-13)


@pytest.mark.parametrize("seed", range(10))
def test_affine_query_closed_form(seed, kernels):
    rng = np.random.default_rng(seed)
    g = GridSpec((6, 6, 6), 0.7)
    A, b = random_affine(rng)
    fm = ForwardMap(affine_map(g, A, b), 0.7, kernels)
    X = rng.uniform(0.05, 3.45, (200, 3))
    p = X @ A.T + b
    assert np.max(np.abs(fm.query(p) - X)) <= 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_affine_jacobian_closed_form(seed):
    rng = np.random.default_rng(100 + seed)
    g = GridSpec((5, 6, 7), 0.5)
    A, b = random_affine(rng)
    jac = jacobian_field(affine_map(g, A, b), 0.5)
    assert np.max(np.abs(jac.F - np.linalg.inv(A))) <= 1e-10
    assert np.allclose(jac.det_F, 1 / np.linalg.det(A), atol=1e-10)


def test_identity_jacobian():
    jac = jacobian_field(GridSpec((5, 5, 5)).identity_reference_map())
    assert np.allclose(jac.F, np.eye(3), atol=0) and np.all(jac.det_F == 1)


def test_doubling_jacobian():
    jac = jacobian_field(2 * GridSpec((5, 5, 5)).identity_reference_map())
    assert np.allclose(jac.grad, 2 * np.eye(3)) and np.allclose(jac.F, np.eye(3) / 2)
    assert np.allclose(jac.det_F, 1 / 8)


def test_singular_jacobian_reported():
    xi = GridSpec((5, 5, 5)).identity_reference_map()
    xi[0] = 0.0
    with pytest.raises(SingularJacobian) as exc:
        jacobian_field(xi)
    assert exc.value.count == 125


def test_degenerate_cell():
    xi = GridSpec((5, 5, 5)).identity_reference_map()
    xi[0, 2, 2, 2] = 4.0  # fold
    with pytest.raises(DegenerateCell) as exc:
        ForwardMap(xi)
    assert len(exc.value.cell) == 3 and exc.value.volume <= 0


def test_reflection_is_degenerate():
    g = GridSpec((4, 4, 4))
    xi = g.identity_reference_map()
    xi[0] = 3 - xi[0]
    with pytest.raises(DegenerateCell):
        ForwardMap(xi)


def test_out_of_hull():
    fm = ForwardMap(GridSpec((4, 4, 4)).identity_reference_map())
    with pytest.raises(OutOfHull) as exc:
        fm.query(np.array([[1, 1, 1], [5, 1, 1], [1, 1, 1], [-1, 0, 0]], dtype=float))
    assert exc.value.indices == [1, 3] and exc.value.distance == pytest.approx(2.0)
    soft = fm.query(np.array([[5.0, 1, 1]]), strict=False)
    assert np.all(np.isnan(soft))


def test_bad_shape():
    with pytest.raises(GridError):
        ForwardMap(np.zeros((2, 4, 4, 4)))


def test_round_trip_after_solve():
    _, res = cached_solve("peaks", 16)
    fm = ForwardMap(res.xi_final)
    nodes = res.xi_final.reshape(3, -1, order="F").T
    back = fm.query(nodes)
    assert np.max(np.abs(back - fm.ordinate)) <= 1e-9


def test_mismatch_identity_uniform_is_zero():
    g = GridSpec((6, 6, 6))
    rep = mismatch_error(g.identity_reference_map(), np.full(g.dims, 4.2))
    assert np.all(rep.e == 0) and rep.mean_abs_e == 0 and rep.excluded == 0
    assert rep.counts.sum() == 216 and len(rep.counts) == HIST_BINS


def test_mismatch_identity_nonuniform_closed_form():
    g = GridSpec((8, 8, 8))
    rho = peaks(g.dims)
    rep = mismatch_error(g.identity_reference_map(), rho)
    V = np.prod(g.extent)
    mass = trapezoid(rho, g)
    assert np.allclose(rep.e, -np.log(rho * V / mass), atol=1e-12)
    assert rep.e[np.unravel_index(np.argmax(rho), rho.shape)] < 0


def test_mismatch_scale_invariant():
    _, res = cached_solve("peaks", 16)
    rho = peaks((16, 16, 16))
    a = mismatch_error(res.xi_final, rho)
    b = mismatch_error(res.xi_final, 7.3 * rho)
    assert np.max(np.abs(a.e - b.e)) <= 1e-12


def test_normalized_volume_integrates_to_one():
    _, res = cached_solve("peaks", 16)
    det = jacobian_field(res.xi_final).det_F
    g = res.grid
    assert trapezoid(det / trapezoid(det, g), g) == pytest.approx(1.0, abs=1e-12)


def test_histogram_zero_field_fallback():
    edges, counts = histogram(np.zeros((4, 4, 4)))
    assert edges[0] == -1 and edges[-1] == 1 and counts.sum() == 64


def test_report_text_layout():
    g = GridSpec((6, 6, 6))
    rep = mismatch_error(g.identity_reference_map(), peaks(g.dims))
    lines = rep.to_text().splitlines()
    hist = [ln for ln in lines if not ln.startswith("#") and len(ln.split()) == 3 and ln.split()[0][0] in "-0123456789"]
    assert len(hist) == HIST_BINS
    assert sum(int(ln.split()[2]) for ln in hist) == 216
    assert any(ln.startswith("mean_abs_e ") for ln in lines)


@given(st.integers(0, 2**31))
@settings(max_examples=15, deadline=None)
def test_affine_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec((5, 5, 5))
    A, b = random_affine(rng, 0.25)
    xi = affine_map(g, A, b)
    fm = ForwardMap(xi)
    back = fm.query(xi.reshape(3, -1, order="F").T)
    assert np.max(np.abs(back - fm.ordinate)) <= 1e-10
