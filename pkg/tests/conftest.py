import numpy as np
import pytest

from qgsync.fields import Basis, Field, GridSpec, retained_mask


@pytest.fixture
def grid32():
    return GridSpec(32)


@pytest.fixture
def grid64():
    return GridSpec(64)


def random_field(grid, basis=Basis.NEUMANN_COSINE, seed=0, scale=1.0, slope=0.0):
    """Gaussian coefficients on the retained modes, optional spectral slope."""
    rng = np.random.default_rng(seed)
    k = np.arange(grid.n + 1, dtype=float)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    envelope = (1.0 + kx**2 + ky**2) ** (-slope / 2.0)
    coeffs = scale * rng.standard_normal(grid.shape) * envelope
    coeffs[~retained_mask(grid, basis)] = 0.0
    return Field(grid, basis, coeffs=coeffs)


def trapezoid_quadrature(grid, values_a, values_b):
    """Independent trapezoid quadrature of a product on the closed lattice."""
    w = np.ones(grid.n + 1)
    w[0] = w[-1] = 0.5
    return grid.h**2 * float(np.sum(np.outer(w, w) * values_a * values_b))
