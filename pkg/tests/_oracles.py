"""Closed-form helpers shared by test modules (independent of library internals)."""

import numpy as np


def neumann_modes(grid):
    """Cosine eigenbasis of the Neumann lattice Laplacian (plain l2-orthonormal)."""
    n = grid.n_sites
    i = np.arange(n)
    k = np.arange(n)
    v = np.cos(np.outer(k, (i + 0.5)) * np.pi / n)
    v[0] *= np.sqrt(1.0 / n)
    v[1:] *= np.sqrt(2.0 / n)
    nu = (2.0 / grid.spacing ** 2) * (1.0 - np.cos(k * np.pi / n))
    return nu, v


def split_scheme_variance_oracle(grid, m2, dt, n_steps):
    """Per-site variance of the split scheme from zero start, free field."""
    nu, v = neumann_modes(grid)
    a = 1.0 / ((1.0 + dt * nu / 2.0) * (1.0 + dt * m2 / 2.0))
    var_noise = dt / grid.spacing
    a2 = a * a
    var_modes = var_noise * a2 * (1 - a2 ** n_steps) / (1 - a2)
    return (v ** 2 * var_modes[:, None]).sum(axis=0)
