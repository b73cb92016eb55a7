"""Exception hierarchy shared by the solver, geometry and CLI layers."""


class VdermError(Exception):
    """Base class for all errors raised by this package."""


class GridError(VdermError, ValueError):
    """Invalid grid dimensions, spacing, or mismatched field shapes."""


class NonPositiveDensity(VdermError, ValueError):
    def __init__(self, index, value):
        self.index = tuple(int(i) for i in index)
        self.value = float(value)
        super().__init__(f"density must be > 0, got {self.value!r} at node {self.index}")


class NonConvergence(VdermError, RuntimeError):
    """Conjugate gradients hit its iteration cap before reaching tolerance."""

    def __init__(self, iterations, residual, target):
        self.iterations = iterations
        self.residual = residual
        self.target = target
        super().__init__(
            f"CG did not converge in {iterations} iterations "
            f"(residual {residual:.3e}, target {target:.3e})"
        )


class AlreadyEqualized(VdermError):
    """The initial velocity vanishes everywhere, so no timestep can be chosen."""


class CflViolation(VdermError, RuntimeError):
    """The centre coefficient of the upwind update left [0, 1]."""

    def __init__(self, coefficient, index=None, iteration=None):
        self.coefficient = coefficient
        self.index = index
        self.iteration = iteration
        where = f" at node {index}" if index is not None else ""
        when = f" (iteration {iteration})" if iteration is not None else ""
        super().__init__(
            f"upwind centre coefficient {coefficient:.6g} outside [0, 1]{where}{when}"
        )


class DegenerateCell(VdermError, ValueError):
    def __init__(self, cell, volume):
        self.cell = tuple(int(c) for c in cell)
        self.volume = float(volume)
        super().__init__(
            f"tetrahedron in cell {self.cell} has non-positive volume {self.volume:.3e}"
        )


class OutOfHull(VdermError, ValueError):
    """A query point is not covered by any tetrahedron of the forward map."""

    def __init__(self, indices, distance=None):
        self.indices = [int(i) for i in indices]
        self.distance = distance
        shown = ", ".join(str(i) for i in self.indices[:10])
        more = "" if len(self.indices) <= 10 else f" (+{len(self.indices) - 10} more)"
        msg = f"{len(self.indices)} point(s) outside the deformed grid: indices {shown}{more}"
        if distance is not None:
            msg += f"; nearest deformed node at distance {distance:.3e}"
        super().__init__(msg)


class OutOfDomain(VdermError, ValueError):
    def __init__(self, indices):
        self.indices = [int(i) for i in indices]
        super().__init__(
            f"{len(self.indices)} point(s) outside the grid box: indices "
            + ", ".join(str(i) for i in self.indices[:10])
        )


class SingularJacobian(VdermError, ValueError):
    def __init__(self, count, total, first_index=None):
        self.count = count
        self.total = total
        self.first_index = first_index
        super().__init__(
            f"{count} of {total} nodes have a singular reference-map Jacobian"
            + (f" (first at {first_index})" if first_index is not None else "")
        )


class FieldFileError(VdermError, ValueError):
    """Corrupt or mismatched field file."""


class ConfigError(VdermError, ValueError):
    """Invalid run configuration; the message names the offending key."""
