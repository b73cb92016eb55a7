"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_ckernels`` extension. Arrays are indexed ``[i, j, k]`` (vector fields carry
a leading component axis). ``out`` arguments are written in place and returned.
"""

import numpy as np

NAME = "python"


def _diff_accumulate(u, acc):
    # acc += sum over existing neighbours of (u - u_nbr)
    d = u[1:] - u[:-1]
    acc[1:] += d
    acc[:-1] -= d
    d = u[:, 1:] - u[:, :-1]
    acc[:, 1:] += d
    acc[:, :-1] -= d
    d = u[:, :, 1:] - u[:, :, :-1]
    acc[:, :, 1:] += d
    acc[:, :, :-1] -= d


def stencil_matvec(u, coupling, out, threads=0):
    """``out = (I - coupling * Laplacian) u`` with no-flux ghost nodes.

    ``coupling`` is ``dt * kappa / h**2``. Missing neighbours contribute
    nothing to the difference sum, which is the ghost-node substitution.
    """
    acc = np.zeros_like(u)
    _diff_accumulate(u, acc)
    np.multiply(acc, coupling, out=out)
    out += u
    return out


def velocity(rho, h, out, threads=0):
    """Central-difference ``-grad(rho) / rho``; normal component zero on faces."""
    out[...] = 0.0
    out[0, 1:-1] = -(rho[2:] - rho[:-2]) / (2.0 * h * rho[1:-1])
    out[1, :, 1:-1] = -(rho[:, 2:] - rho[:, :-2]) / (2.0 * h * rho[:, 1:-1])
    out[2, :, :, 1:-1] = -(rho[:, :, 2:] - rho[:, :, :-2]) / (2.0 * h * rho[:, :, 1:-1])
    return out


def _one_sided(xi, axis, h):
    """Backward and forward one-sided derivatives of every component along ``axis``.

    Returns ``(d_minus, d_plus, centre_weight)``; ``centre_weight`` is the
    magnitude of the centre-node coefficient of the stencil in use, per index
    along ``axis`` (zero on the two faces where no one-sided term is formed).
    """
    n = xi.shape[axis + 1]
    x = np.moveaxis(xi, axis + 1, 1)
    dm = np.zeros_like(x)
    dp = np.zeros_like(x)
    weight = np.zeros(n)

    dm[:, 2:n - 2] = (3.0 * x[:, 2:n - 2] - 4.0 * x[:, 1:n - 3] + x[:, 0:n - 4]) / (2.0 * h)
    dp[:, 2:n - 2] = (-x[:, 4:n] + 4.0 * x[:, 3:n - 1] - 3.0 * x[:, 2:n - 2]) / (2.0 * h)
    weight[2:n - 2] = 1.5 / h
    for i in (1, n - 2):
        dm[:, i] = (x[:, i] - x[:, i - 1]) / h
        dp[:, i] = (x[:, i + 1] - x[:, i]) / h
        weight[i] = 1.0 / h
    return np.moveaxis(dm, 1, axis + 1), np.moveaxis(dp, 1, axis + 1), weight


def upwind_step(xi, v, dt, h, out, threads=0):
    """Advance the reference map one second-order upwind step.

    ``out = xi - dt * sum_a v_a * (d_a^- if v_a > 0 else d_a^+)``.

    Returns ``(min_coef, max_coef, argmin)`` of the centre-node coefficient
    ``1 - dt * sum_a w_a |v_a|``, with ``argmin`` a flat index in ``i``-fastest
    order.
    """
    shape = xi.shape[1:]
    rate = np.zeros_like(xi)
    coef = np.ones(shape)
    for axis in range(3):
        dm, dp, weight = _one_sided(xi, axis, h)
        va = v[axis]
        rate += va * np.where(va > 0, dm, dp)
        wshape = [1, 1, 1]
        wshape[axis] = shape[axis]
        coef -= dt * weight.reshape(wshape) * np.abs(va)
    np.subtract(xi, dt * rate, out=out)
    flat = coef.ravel(order="F")
    arg = int(np.argmin(flat))
    return float(flat[arg]), float(flat.max()), arg


def locate(points, tet_origin, tet_inverse, hash_lo, hash_size, hash_dims,
           cell_start, cell_tets, tol):
    """Find the lowest-id tetrahedron containing each point.

    Returns ``(tet_id, bary)``; ``tet_id`` is -1 where no tetrahedron matches.
    """
    points = np.asarray(points, dtype=float)
    npts = len(points)
    tet_id = np.full(npts, -1, dtype=np.int64)
    bary = np.zeros((npts, 4))
    if npts == 0:
        return tet_id, bary

    dims = np.asarray(hash_dims, dtype=np.int64)
    cell3 = np.floor((points - hash_lo) / hash_size).astype(np.int64)
    inside = np.all((cell3 >= 0) & (cell3 < dims), axis=1)
    cell3 = np.clip(cell3, 0, dims - 1)
    cell = cell3[:, 0] + dims[0] * (cell3[:, 1] + dims[1] * cell3[:, 2])
    start = cell_start[cell]
    count = np.where(inside, cell_start[cell + 1] - start, 0)
    total = int(count.sum())
    if total == 0:
        return tet_id, bary

    owner = np.repeat(np.arange(npts), count)
    offset = np.arange(total) - np.repeat(np.cumsum(count) - count, count)
    cand = cell_tets[np.repeat(start, count) + offset]
    rel = points[owner] - tet_origin[cand]
    lam = np.einsum("nij,nj->ni", tet_inverse[cand], rel)
    lam0 = 1.0 - lam.sum(axis=1)
    ok = (lam0 >= -tol) & np.all(lam >= -tol, axis=1)

    pair = np.where(ok, np.arange(total), total)
    first = np.full(npts, total, dtype=np.int64)
    np.minimum.at(first, owner, pair)
    found = first < total
    hit = first[found]
    tet_id[found] = cand[hit]
    bary[found, 0] = lam0[hit]
    bary[found, 1:] = lam[hit]
    return tet_id, bary
