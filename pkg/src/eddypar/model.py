"""Semi-discrete eddy-current model on a structured 2D grid.

Cell-centered 5-point discretization of ``sigma dA/dt + curl(nu curl A) =
chi_s i(t)`` for the out-of-plane vector potential, with homogeneous
Dirichlet conditions on the outer boundary. Degrees of freedom are the
interior cells; boundary cells carry the Dirichlet value zero. The
conductivity mass matrix is lumped (diagonal), which makes the system a
DAE: conducting cells are differential unknowns, the rest algebraic.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

AIR = 0
CORE = 1
COIL_PLUS = 2
COIL_MINUS = 3

REGION_NAMES = {"air": AIR, "core": CORE, "coil_plus": COIL_PLUS, "coil_minus": COIL_MINUS}


class DimensionError(ValueError):
    """Grid too small to carry any interior degree of freedom."""


class NoConductingRegionError(ValueError):
    """All mass entries vanish; there is no differential block."""


class NoAlgebraicBlockError(ValueError):
    """All mass entries are positive; the system is a plain ODE."""


class SingularBlockError(RuntimeError):
    """The algebraic block is numerically singular (gauge/regularity failure)."""


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Structured rectangular grid of nx-by-ny cells with per-cell regions.

    ``region`` has shape (nx, ny), entries in {AIR, CORE, COIL_PLUS,
    COIL_MINUS}. Interior cells (not touching the outer boundary) carry the
    unknowns.
    """

    nx: int
    ny: int
    hx: float
    hy: float
    region: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be >= 1")
        if self.hx <= 0.0 or self.hy <= 0.0:
            raise ValueError("hx and hy must be positive")
        region = np.asarray(self.region, dtype=np.int8)
        if region.shape != (self.nx, self.ny):
            raise ValueError(f"region must have shape ({self.nx}, {self.ny})")
        if not np.isin(region, (AIR, CORE, COIL_PLUS, COIL_MINUS)).all():
            raise ValueError("unknown region label")
        object.__setattr__(self, "region", region)

    @property
    def n_dof(self):
        return max(self.nx - 2, 0) * max(self.ny - 2, 0)

    def dof_index(self, cx, cy):
        """Linear dof index of interior cell (cx, cy)."""
        return (cx - 1) + (self.nx - 2) * (cy - 1)


@dataclass(frozen=True)
class Materials:
    sigma_core: float = 1.0e6
    nu_air: float = 1.0 / (4.0e-7 * np.pi)
    nu_core: float = 1.0 / (4.0e-7 * np.pi * 1000.0)
    turns_per_area: float = 1.0e4

    def __post_init__(self):
        for name in ("sigma_core", "nu_air", "nu_core", "turns_per_area"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")


def window_transformer_grid(nx=16, ny=16, hx=0.00625, hy=0.00625,
                            core_outer=(3, 3, 12, 12), core_window=(5, 5, 10, 10),
                            coil_plus=(6, 6, 7, 9), coil_minus=(8, 6, 9, 9)):
    """Parameterized window-transformer geometry.

    The core is a rectangular ring (``core_outer`` minus ``core_window``),
    two coil rectangles of opposite polarity sit inside the window, air
    fills the rest. Rectangles are inclusive cell-index bounds
    (x0, y0, x1, y1).
    """
    region = np.full((nx, ny), AIR, dtype=np.int8)

    def check(rect, name):
        x0, y0, x1, y1 = rect
        if not (0 <= x0 <= x1 < nx and 0 <= y0 <= y1 < ny):
            raise ValueError(f"{name} rectangle {rect} does not fit a {nx}x{ny} grid")
        return rect

    x0, y0, x1, y1 = check(core_outer, "core_outer")
    region[x0:x1 + 1, y0:y1 + 1] = CORE
    x0, y0, x1, y1 = check(core_window, "core_window")
    region[x0:x1 + 1, y0:y1 + 1] = AIR
    x0, y0, x1, y1 = check(coil_plus, "coil_plus")
    region[x0:x1 + 1, y0:y1 + 1] = COIL_PLUS
    x0, y0, x1, y1 = check(coil_minus, "coil_minus")
    region[x0:x1 + 1, y0:y1 + 1] = COIL_MINUS
    return Grid2D(nx=nx, ny=ny, hx=hx, hy=hy, region=region)


@dataclass(frozen=True, eq=False)
class SemiDiscreteSystem:
    """Matrices of M_sigma da/dt = -K_nu a + X_s i(t).

    M_sigma is stored as its diagonal. idx_c / idx_nc partition the dofs
    into conducting (positive mass) and non-conducting (zero mass).
    """

    M_sigma: np.ndarray
    K_nu: sp.csr_matrix
    X_s: np.ndarray
    idx_c: np.ndarray
    idx_nc: np.ndarray

    @classmethod
    def from_matrices(cls, M_diag, K, X):
        M_diag = np.asarray(M_diag, dtype=float)
        X = np.asarray(X, dtype=float)
        K = sp.csr_matrix(K)
        idx_c = np.flatnonzero(M_diag > 0.0)
        idx_nc = np.flatnonzero(M_diag == 0.0)
        return cls(M_sigma=M_diag, K_nu=K, X_s=X, idx_c=idx_c, idx_nc=idx_nc)

    @property
    def n_dof(self):
        return self.M_sigma.shape[0]


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def assemble(grid, mat):
    """Assemble M_sigma, K_nu and X_s on the interior cells of ``grid``.

    K_nu is the 5-point stencil of the nu-weighted Laplacian with harmonic
    averaging of nu across cell interfaces; links to boundary cells keep
    their diagonal contribution (homogeneous Dirichlet). M_sigma lumps
    sigma over each cell area; X_s carries +-turns_per_area times the cell
    area on coil cells.
    """
    n = grid.n_dof
    if n == 0:
        raise DimensionError("grid has no interior cells")
    nxi, nyi = grid.nx - 2, grid.ny - 2

    nu = np.where(grid.region == CORE, mat.nu_core, mat.nu_air)
    sigma = np.where(grid.region == CORE, mat.sigma_core, 0.0)
    area = grid.hx * grid.hy

    M = np.zeros(n)
    X = np.zeros(n)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)

    for cy in range(1, grid.ny - 1):
        for cx in range(1, grid.nx - 1):
            j = grid.dof_index(cx, cy)
            r = grid.region[cx, cy]
            M[j] = sigma[cx, cy] * area
            if r == COIL_PLUS:
                X[j] = mat.turns_per_area * area
            elif r == COIL_MINUS:
                X[j] = -mat.turns_per_area * area
            for dx, dy, w_geom in ((1, 0, grid.hy / grid.hx), (-1, 0, grid.hy / grid.hx),
                                   (0, 1, grid.hx / grid.hy), (0, -1, grid.hx / grid.hy)):
                ox, oy = cx + dx, cy + dy
                w = w_geom * _harmonic(nu[cx, cy], nu[ox, oy])
                diag[j] += w
                if 1 <= ox <= grid.nx - 2 and 1 <= oy <= grid.ny - 2:
                    rows.append(j)
                    cols.append(grid.dof_index(ox, oy))
                    vals.append(-w)

    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    return SemiDiscreteSystem.from_matrices(M, K, X)


@dataclass(frozen=True, eq=False)
class PartitionedSystem:
    """Block view of a SemiDiscreteSystem in conducting/non-conducting order."""

    Mbar: np.ndarray
    K11: sp.csr_matrix
    K12: sp.csr_matrix
    K22: sp.csc_matrix
    Xbar: np.ndarray
    idx_c: np.ndarray
    idx_nc: np.ndarray
    n_dof: int


def partition(sys):
    """Extract the conducting/non-conducting blocks of the system."""
    if sys.idx_c.size == 0:
        raise NoConductingRegionError("no conducting region: mass matrix is zero")
    if sys.idx_nc.size == 0:
        raise NoAlgebraicBlockError("no algebraic block: system is a pure ODE")
    K = sys.K_nu.tocsr()
    c, nc = sys.idx_c, sys.idx_nc
    return PartitionedSystem(
        Mbar=sys.M_sigma[c],
        K11=K[np.ix_(c, c)].tocsr(),
        K12=K[np.ix_(c, nc)].tocsr(),
        K22=K[np.ix_(nc, nc)].tocsc(),
        Xbar=sys.X_s[nc],
        idx_c=c,
        idx_nc=nc,
        n_dof=sys.M_sigma.shape[0],
    )


@dataclass(frozen=True, eq=False)
class SchurReducedSystem:
    """Reduced-ODE data: d/dt a_c = -Mbar^{-1} S a_c + Ybar i(t).

    S = K11 - K12 K22^{-1} K12^T is never formed; its action goes through
    the stored K22 factorization. Ybar = -Mbar^{-1} K12 K22^{-1} Xbar is
    the effective winding vector of the reduced ODE (derived by
    eliminating the algebraic block, source included).
    """

    Mbar: np.ndarray
    K11: sp.csr_matrix
    K12: sp.csr_matrix
    K22: sp.csc_matrix
    Xbar: np.ndarray
    idx_c: np.ndarray
    idx_nc: np.ndarray
    n_dof: int
    K22_lu: object = field(repr=False)
    Ybar: np.ndarray = field(repr=False)

    @property
    def n_c(self):
        return self.idx_c.size

    def apply_schur(self, a_c):
        """S a_c via the factorization, S = K11 - K12 K22^{-1} K12^T."""
        return self.K11 @ a_c - self.K12 @ self.K22_lu.solve(self.K12.T @ a_c)

    def embed(self, a_c, a_nc):
        """Scatter block vectors back into a full-length dof vector."""
        a = np.zeros(self.n_dof)
        a[self.idx_c] = a_c
        a[self.idx_nc] = a_nc
        return a


def reduce_schur(p):
    """Factorize K22 and precompute the reduced-ODE winding vector.

    Raises SingularBlockError if K22 cannot be factorized (an ungauged or
    otherwise rank-deficient algebraic block).
    """
    try:
        # Equil=False keeps the bare L/U factors usable for external
        # triangular solves (compiled fast path).
        lu = splu(p.K22, options=dict(Equil=False))
        probe = lu.solve(np.ones(p.K22.shape[0]))
    except (RuntimeError, ValueError) as exc:
        raise SingularBlockError(f"algebraic block K22 is singular: {exc}") from exc
    if not np.all(np.isfinite(probe)):
        raise SingularBlockError("algebraic block K22 is numerically singular")
    Ybar = -(p.K12 @ lu.solve(p.Xbar)) / p.Mbar
    return SchurReducedSystem(
        Mbar=p.Mbar, K11=p.K11, K12=p.K12, K22=p.K22, Xbar=p.Xbar,
        idx_c=p.idx_c, idx_nc=p.idx_nc, n_dof=p.n_dof,
        K22_lu=lu, Ybar=Ybar,
    )


def reconstruct_nc(red, a_c, i_t):
    """Non-conducting potentials from the algebraic block row.

    a_nc = K22^{-1} (Xbar i(t) - K12^T a_c); the source term belongs to the
    block row and is included.
    """
    a_c = np.asarray(a_c, dtype=float)
    if a_c.shape[0] != red.idx_c.size:
        raise ValueError("a_c does not match the conducting block size")
    return red.K22_lu.solve(red.Xbar * i_t - red.K12.T @ a_c)
