"""Analytic test densities used in the numerical experiments."""

import numpy as np

from .grid import GridSpec


def peaks(dims, amplitude=9.99, base=10.0):
    """``base + amplitude * sin(4 pi i/(L-1)) cos(2 pi j/(M-1)) cos(2 pi k/(N-1))``."""
    L, M, N = dims
    i = np.arange(L, dtype=float)
    j = np.arange(M, dtype=float)
    k = np.arange(N, dtype=float)
    sx = np.sin(4.0 * np.pi * i / (L - 1))
    cy = np.cos(2.0 * np.pi * j / (M - 1))
    cz = np.cos(2.0 * np.pi * k / (N - 1))
    rho = base + amplitude * sx[:, None, None] * cy[None, :, None] * cz[None, None, :]
    return np.asfortranarray(rho)


def eight_region(dims, values=(1, 3, 5, 7, 9, 11, 13, 15)):
    """Piecewise-constant octant density; octant index bits are (k, j, i) high."""
    L, M, N = dims
    i = (np.arange(L) >= L / 2).astype(int)
    j = (np.arange(M) >= M / 2).astype(int)
    k = (np.arange(N) >= N / 2).astype(int)
    octant = i[:, None, None] + 2 * j[None, :, None] + 4 * k[None, None, :]
    return np.asfortranarray(np.asarray(values, dtype=float)[octant])


def uniform(dims, value=1.0):
    return GridSpec(dims).new_field(value)


PRESETS = {"peaks": peaks, "eight_region": eight_region, "uniform": uniform}
