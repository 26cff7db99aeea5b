"""Elliptic solution operators, diffusion semigroup and the advection bilinear form.

The streamfunction solve, the Neumann boundary lift, the mean-zero Laplacian
with its heat semigroup, and an Arakawa-type discrete Jacobian are collected
here together with numerical estimates of the constants that enter the
contraction analysis.

The load-bearing discrete property is exact skew-symmetry of the advection
operator: `bilinear_b` antisymmetrizes the Jacobian trilinear form in its
last two arguments (via the exact weighted adjoint), so

    <B(v1, v2), v2> = 0      and      <B(v1, v2), v3> = -<B(v1, v3), v2>

hold to round-off for every retained field, not just asymptotically.  Every
energy estimate downstream relies on this.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import (
    Basis,
    BoundaryField,
    DimensionMismatch,
    Field,
    GridSpec,
    coeffs_from_nodal,
    gradient,
    inner,
    laplacian_eigenvalues,
    norm_h1,
    norm_l2,
    retained_mask,
)

LAMBDA1 = np.pi**2  # first eigenvalue of the mean-zero Neumann Laplacian
C_GX_EXACT = 1.0 / (2.0 * np.pi)  # max_k,l k*pi / (pi^2 (k^2+l^2)), at (1,1)


@dataclass(frozen=True)
class OperatorConstants:
    """Constants of the discrete operators used by the condition evaluator.

    c_b is an empirical supremum over random triples refined by local
    ascent, hence a lower bound of the true discrete trilinear norm; c_g
    is informational only.
    """

    lambda1: float
    c_b: float
    c_gx: float
    c_g: float

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "c_b": self.c_b,
            "c_gx": self.c_gx,
            "c_g": self.c_g,
        }


# ---------------------------------------------------------------------------
# Poisson solve and spectral Laplacian machinery
# ---------------------------------------------------------------------------


def dirichlet_poisson(u: Field) -> Field:
    """Solve lap(psi) = u with psi = 0 on the boundary.

    Works for any input basis: the source is read on the interior lattice
    and inverted mode-by-mode in the sine family, where the discrete
    Laplacian is diagonal with eigenvalue -pi^2 (k^2 + l^2).
    """
    grid = u.grid
    if u.basis is Basis.DIRICHLET_SINE:
        src = u.coeffs
    else:
        src = coeffs_from_nodal(u.nodal, Basis.DIRICHLET_SINE, grid)
    lam = laplacian_eigenvalues(grid)
    psi = np.zeros(grid.shape)
    mask = retained_mask(grid, Basis.DIRICHLET_SINE)
    psi[mask] = -src[mask] / lam[mask]
    return Field(grid, Basis.DIRICHLET_SINE, coeffs=psi)


def apply_a(f: Field, nu: float) -> Field:
    """Apply A = -nu * lap with natural (Neumann) boundary data."""
    _require_neumann(f)
    return Field(
        f.grid, Basis.NEUMANN_COSINE, coeffs=nu * laplacian_eigenvalues(f.grid) * f.coeffs
    )


def semigroup(f: Field, nu: float, t: float) -> Field:
    """Heat semigroup S(t) = exp(-t A) acting on a mean-zero cosine field."""
    _require_neumann(f)
    if t < 0:
        raise ValueError(f"semigroup requires t >= 0, got {t}")
    decay = np.exp(-nu * t * laplacian_eigenvalues(f.grid))
    return Field(f.grid, Basis.NEUMANN_COSINE, coeffs=decay * f.coeffs)


def _require_neumann(f: Field):
    if f.basis is not Basis.NEUMANN_COSINE:
        raise DimensionMismatch(f"operator expects NEUMANN_COSINE, got {f.basis.name}")


# ---------------------------------------------------------------------------
# Neumann lift of boundary data on the left edge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LiftingMatrix:
    """Cosine coefficients of the harmonic lift of each edge mode.

    Column k holds the x-mode coefficients of the field responding to the
    unit edge datum sqrt(2) cos(k pi y); its y-dependence is exactly the
    cosine mode k, so the full 2D coefficient of interior mode (m, k) is
    xcoeffs[m, k-1] = c_m / (nu pi^2 (k^2 + m^2)) with c_0 = 1 and
    c_m = sqrt(2).  This is the variational (Galerkin) solution on the
    retained modes and equals the projection of the classical profile
    cosh(k pi (1 - x)) cos(k pi y) / (nu k pi sinh(k pi)).

    The defining identity A(lift of g) = edge delta layer times g makes
    the flux readout and the interior-harmonicity residual exact: see
    `boundary_flux`.
    """

    grid: GridSpec
    nu: float
    xcoeffs: np.ndarray  # shape (n+1, K), column k-1 for edge mode k

    @property
    def n_modes(self) -> int:
        return self.xcoeffs.shape[1]

    def entry(self, m1: int, m2: int, k: int) -> float:
        """Dense accessor: coefficient of interior mode (m1, m2) for edge mode k."""
        if m2 != k or not 1 <= k <= self.n_modes:
            return 0.0
        return float(self.xcoeffs[m1, k - 1])

    def column_field(self, k: int) -> Field:
        coeffs = np.zeros(self.grid.shape)
        coeffs[:, k] = self.xcoeffs[:, k - 1]
        coeffs[~retained_mask(self.grid, Basis.NEUMANN_COSINE)] = 0.0
        return Field(self.grid, Basis.NEUMANN_COSINE, coeffs=coeffs)


@lru_cache(maxsize=None)
def _edge_scales(n: int) -> np.ndarray:
    c = np.full(n + 1, np.sqrt(2.0))
    c[0] = 1.0
    c[n] = 0.0  # Nyquist row is outside the retained set
    return c


def lifting_matrix(grid: GridSpec, nu: float, n_modes: int | None = None) -> LiftingMatrix:
    """Assemble the lift response for edge modes k = 1..n_modes."""
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    if n_modes is None:
        n_modes = grid.n - 1
    if not 1 <= n_modes <= grid.n - 1:
        raise ValueError(f"edge mode count must be in 1..{grid.n - 1}")
    c = _edge_scales(grid.n)
    m = np.arange(grid.n + 1, dtype=float)[:, np.newaxis]
    k = np.arange(1, n_modes + 1, dtype=float)[np.newaxis, :]
    xc = c[:, np.newaxis] / (nu * np.pi**2 * (k**2 + m**2))
    return LiftingMatrix(grid=grid, nu=nu, xcoeffs=xc)


def neumann_lift(g: BoundaryField, nu: float) -> Field:
    """Lift edge data to the interior: -nu lap(u) = 0 with flux datum g.

    The flux convention is variational, nu * du/dn = g on {0} x (0,1) and
    zero on the other sides; `boundary_flux` reads the datum back from the
    result exactly.
    """
    lift = lifting_matrix(g.grid, nu, n_modes=g.coeffs.size)
    coeffs = np.zeros(g.grid.shape)
    coeffs[:, 1 : 1 + g.coeffs.size] = lift.xcoeffs * g.coeffs[np.newaxis, :]
    coeffs[~retained_mask(g.grid, Basis.NEUMANN_COSINE)] = 0.0
    return Field(g.grid, Basis.NEUMANN_COSINE, coeffs=coeffs)


def boundary_flux(u: Field, nu: float) -> BoundaryField:
    """Left-edge flux readout: the edge-delta-layer content of A(u).

    A discretely harmonic field with edge datum g satisfies
    nu * lambda_(m,k) * u_(m,k) = c_m * g_k for every x-mode m, i.e. A(u)
    is exactly the truncated edge delta layer scaled by g.  The functional
    returns the least-squares layer coefficients; `harmonicity_residual`
    measures what A(u) leaves outside the layer.
    """
    grid = u.grid
    c = _edge_scales(grid.n)
    au = nu * laplacian_eigenvalues(grid) * u.coeffs
    flux = (c @ au[:, 1 : grid.n]) / float(np.sum(c**2))
    return BoundaryField(grid, flux)


def harmonicity_residual(u: Field, nu: float) -> float:
    """Relative part of A(u) not explained by a left-edge flux layer."""
    grid = u.grid
    c = _edge_scales(grid.n)
    au = nu * laplacian_eigenvalues(grid) * u.coeffs
    flux = (c @ au[:, 1 : grid.n]) / float(np.sum(c**2))
    layer = np.zeros(grid.shape)
    layer[:, 1 : grid.n] = np.outer(c, flux)
    denom = float(np.linalg.norm(au))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(au - layer)) / denom


# ---------------------------------------------------------------------------
# Arakawa Jacobian and exactly skew-symmetric bilinear form
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _difference_matrices(n: int):
    """Centered differences with reflection closures, and their weighted adjoints.

    'even' mirrors the neighbour value across the boundary (natural for
    cosine-family data), 'odd' mirrors with a sign flip (sine family, and
    the flux-form outer differences).  Adjoints are taken in the trapezoid
    inner product so the Jacobian's adjoint is exact, not approximate.
    """
    h = 1.0 / n
    eye = np.arange(1, n)
    De = np.zeros((n + 1, n + 1))
    De[eye, eye - 1] = -0.5 / h
    De[eye, eye + 1] = 0.5 / h
    Do = De.copy()
    Do[0, 1] = 1.0 / h
    Do[n, n - 1] = -1.0 / h
    w = np.ones(n + 1)
    w[0] = 0.5
    w[-1] = 0.5
    DeA = np.diag(1.0 / w) @ De.T @ np.diag(w)
    DoA = np.diag(1.0 / w) @ Do.T @ np.diag(w)
    return De, Do, DeA, DoA


def _jacobian_nodal(psi: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """Arakawa average of the three difference forms on the closed lattice."""
    De, Do, _, _ = _difference_matrices(n)
    px, py = Do @ psi, psi @ Do.T
    qx, qy = De @ q, q @ De.T
    t1 = px * qy - py * qx
    t2 = Do @ (psi * qy) - (psi * qx) @ Do.T
    t3 = (px * q) @ Do.T - Do @ (py * q)
    return (t1 + t2 + t3) / 3.0


def _jacobian_adjoint_nodal(psi: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of q -> J(psi, q) in the trapezoid inner product."""
    De, Do, DeA, DoA = _difference_matrices(n)
    px, py = Do @ psi, psi @ Do.T
    t1 = (px * b) @ DeA.T - DeA @ (py * b)
    t2 = (psi * (DoA @ b)) @ DeA.T - DeA @ (psi * (b @ DoA.T))
    t3 = px * (b @ DoA.T) - py * (DoA @ b)
    return (t1 + t2 + t3) / 3.0


def jacobian(psi: Field, q: Field) -> Field:
    """Discrete advection bracket J(psi, q) = psi_x q_y - psi_y q_x.

    psi must belong to the Dirichlet family (zero trace); q may be any
    field on the same grid.  The nodal result is projected onto the
    mean-zero cosine family.
    """
    if psi.basis is not Basis.DIRICHLET_SINE:
        raise DimensionMismatch("jacobian needs a Dirichlet-family streamfunction")
    if psi.grid != q.grid:
        raise DimensionMismatch("jacobian arguments live on different grids")
    grid = psi.grid
    out = _jacobian_nodal(psi.nodal, q.nodal, grid.n)
    return Field(grid, Basis.NEUMANN_COSINE, coeffs=coeffs_from_nodal(out, Basis.NEUMANN_COSINE, grid))


def bilinear_b(v1: Field, v2: Field) -> Field:
    """Advection operator B(v1, v2) = J(G v1, v2), skew-symmetrized exactly.

    The raw Jacobian is averaged with minus its weighted adjoint in the
    second slot, which enforces <B(v1,v2),v2> = 0 and the antisymmetry
    <B(v1,v2),v3> = -<B(v1,v3),v2> to round-off on the retained modes.
    """
    if v1.grid != v2.grid:
        raise DimensionMismatch("bilinear form arguments live on different grids")
    grid = v1.grid
    psi = dirichlet_poisson(v1).nodal
    a = v2.nodal
    skew = 0.5 * (_jacobian_nodal(psi, a, grid.n) - _jacobian_adjoint_nodal(psi, a, grid.n))
    return Field(
        grid, Basis.NEUMANN_COSINE, coeffs=coeffs_from_nodal(skew, Basis.NEUMANN_COSINE, grid)
    )


def beta_term(z: Field) -> Field:
    """x-derivative of the streamfunction response, G(z)_x, as a mean-zero field."""
    psi = dirichlet_poisson(z)
    dpsi_dx, _ = gradient(psi)
    grid = z.grid
    return Field(
        grid,
        Basis.NEUMANN_COSINE,
        coeffs=coeffs_from_nodal(dpsi_dx.nodal, Basis.NEUMANN_COSINE, grid),
    )


# ---------------------------------------------------------------------------
# Constant estimation
# ---------------------------------------------------------------------------


def _random_field(rng: np.random.Generator, grid: GridSpec, slope: float) -> Field:
    """Gaussian coefficients with an algebraic spectral envelope."""
    kx, ky = np.meshgrid(np.arange(grid.n + 1), np.arange(grid.n + 1), indexing="ij")
    envelope = (1.0 + kx**2 + ky**2) ** (-slope / 2.0)
    coeffs = rng.standard_normal(grid.shape) * envelope
    coeffs[~retained_mask(grid, Basis.NEUMANN_COSINE)] = 0.0
    return Field(grid, Basis.NEUMANN_COSINE, coeffs=coeffs)


def _triple_ratio(v1: Field, v2: Field, v3: Field) -> float:
    denom = norm_l2(v1) * norm_h1(v2) * norm_h1(v3)
    if denom == 0.0:
        return 0.0
    return abs(inner(bilinear_b(v1, v2), v3)) / denom


def estimate_constants(
    grid: GridSpec,
    nu: float,
    trials: int = 200,
    seed: int = 0,
    ascent_steps: int = 120,
) -> OperatorConstants:
    """Estimate the operator constants on a given grid.

    lambda1 and c_gx are computed exactly from the mode lattice.  c_b is
    the running supremum of the trilinear ratio over `trials` random
    triples, refined by a perturbation ascent anchored at the best triple
    among the first 100 samples; anchoring makes the estimate monotone
    nondecreasing in `trials` for a fixed seed.  It is a lower bound of
    the discrete operator norm.
    """
    if trials < 100:
        raise ValueError("constant estimation needs at least 100 trials")

    # exact mode-wise constants
    ks = np.arange(1, grid.n)
    kk, ll = np.meshgrid(ks, ks, indexing="ij")
    c_gx = float(np.max(kk * np.pi / (np.pi**2 * (kk**2 + ll**2))))
    lam_d = np.pi**2 * (kk**2 + ll**2)
    c_g = float(np.max(np.sqrt(1.0 + lam_d + lam_d**2) / lam_d))

    rng = np.random.default_rng(seed)
    slopes = (0.0, 0.6, 1.2)
    best_val = -1.0
    best_anchor = None
    sup = 0.0
    for t in range(trials):
        slope = slopes[t % len(slopes)]
        triple = tuple(_random_field(rng, grid, slope) for _ in range(3))
        r = _triple_ratio(*triple)
        sup = max(sup, r)
        if t < 100 and r > best_val:
            best_val = r
            best_anchor = triple

    # local perturbation ascent from the prefix-stable anchor
    ascent_rng = np.random.default_rng((seed, 0x5EED))
    cur = best_anchor
    cur_val = best_val
    step = 0.5
    stale = 0
    for _ in range(ascent_steps):
        cand = tuple(
            Field(
                grid,
                Basis.NEUMANN_COSINE,
                coeffs=(f.coeffs + step * ascent_rng.standard_normal(grid.shape))
                * retained_mask(grid, Basis.NEUMANN_COSINE),
            )
            for f in cur
        )
        val = _triple_ratio(*cand)
        if val > cur_val:
            cur, cur_val, stale = cand, val, 0
        else:
            stale += 1
            if stale >= 12:
                step *= 0.6
                stale = 0
    sup = max(sup, cur_val)

    return OperatorConstants(lambda1=LAMBDA1, c_b=sup, c_gx=c_gx, c_g=c_g)
