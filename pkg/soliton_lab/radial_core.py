"""
Radial meshes, quadrature and the discrete radial Laplacian per angular-momentum sector.

Fields are sampled on the interior nodes r_i = i*h, i = 1..n, of [0, r_max] with
h = r_max / (n + 1).  Every operator matrix is stored in the orthonormal frame
q = sqrt(w) * f, where the volume inner product sum_i w_i f_i conj(g_i) becomes the
Euclidean one.  In that frame the Laplacian obtained from the substitution u = r*f is
exactly the symmetric tridiagonal matrix (1/h^2) tridiag(-1, 2, -1) + l(l+1)/r^2, with
u(0) = 0 and a Dirichlet condition at r_max.
"""
from dataclasses import (
    dataclass,
)
import enum
from functools import (
    cached_property,
)
import logging
import math
from typing import (
    Optional,
)

import numpy as np
from scipy import (
    sparse,
)

from soliton_lab.exceptions import (
    InvalidArgument,
    LabPanic,
)

logger = logging.getLogger(__name__)

MIN_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n: int

    @cached_property
    def h(self) -> float:
        return self.r_max / (self.n + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1, dtype=float)

    @cached_property
    def weights(self) -> np.ndarray:
        return 4.0 * np.pi * self.nodes ** 2 * self.h

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    @property
    def ball_volume(self) -> float:
        return 4.0 * np.pi * self.r_max ** 3 / 3.0

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def inner(self, f: np.ndarray, g: np.ndarray,
              sector: Optional['SectorIndex'] = None) -> complex:
        """
        Volume inner product <f, g> = sum w f conj(g), summed over any leading component axes.

        In a sector l > 0 the angular factor 1/(2l+1) of the harmonic normalization is included.
        """
        norm = 1.0 if sector is None else sector.angular_norm
        return complex(norm * np.sum(self.weights * f * np.conj(g)))

    def norm(self, f: np.ndarray, sector: Optional['SectorIndex'] = None) -> float:
        return math.sqrt(max(self.inner(f, f, sector).real, 0.0))

    def to_weighted(self, f: np.ndarray) -> np.ndarray:
        return f * self.sqrt_weights

    def from_weighted(self, q: np.ndarray) -> np.ndarray:
        return q / self.sqrt_weights


@dataclass(frozen=True)
class SectorIndex:
    ell: int

    def __post_init__(self):
        if isinstance(self.ell, bool) or int(self.ell) != self.ell or self.ell < 0:
            raise InvalidArgument(
                f"Angular momentum must be a non-negative integer, got {self.ell}"
            )

    @property
    def multiplicity(self) -> int:
        return 2 * self.ell + 1

    @property
    def angular_norm(self) -> float:
        # |Y|^2 integrates to 4*pi/(2l+1) for the harmonics used here (x_j/r when l = 1)
        return 1.0 / (2 * self.ell + 1)

    @property
    def centrifugal(self) -> int:
        return self.ell * (self.ell + 1)


RADIAL = SectorIndex(0)
DIPOLE = SectorIndex(1)


class OperatorKind(enum.Enum):
    LAPLACIAN = 'laplacian'
    L_MINUS = 'L_minus'
    L_PLUS = 'L_plus'
    H_MATRIX = 'H_matrix'
    H_UV = 'H_uv'
    FREE = 'free'


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """
    Dense matrix of a scalar (n x n) or 2x2-block (2n x 2n) operator on one sector,
    in the orthonormal frame.  `alpha` is the soliton frequency when one is attached.
    """
    sector: SectorIndex
    matrix: np.ndarray
    kind: OperatorKind
    grid: RadialGrid
    alpha: Optional[float] = None

    def __post_init__(self):
        size = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape[1] != size or size % self.grid.n:
            raise LabPanic(f"Operator matrix of shape {self.matrix.shape} does not fit the grid.")

    @property
    def components(self) -> int:
        return self.matrix.shape[0] // self.grid.n

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def to_frame(self, field: np.ndarray) -> np.ndarray:
        return self.grid.to_weighted(np.reshape(field, (self.components, self.grid.n))).ravel()

    def from_frame(self, vector: np.ndarray) -> np.ndarray:
        samples = self.grid.from_weighted(np.reshape(vector, (self.components, self.grid.n)))
        return samples[0] if self.components == 1 else samples

    def apply(self, field: np.ndarray) -> np.ndarray:
        """
        Apply to physical samples of shape (n,) or (2, n).
        """
        return self.from_frame(self.matrix @ self.to_frame(field))

    def adjoint(self) -> 'SectorOperator':
        return SectorOperator(
            self.sector, self.matrix.conj().T, self.kind, self.grid, self.alpha
        )

    def symmetry_defect(self) -> float:
        scale = max(np.abs(self.matrix).max(), 1.0)
        return float(np.abs(self.matrix - self.matrix.conj().T).max() / scale)


def make_grid(r_max: float, n: int) -> RadialGrid:
    if isinstance(n, bool) or int(n) != n:
        raise InvalidArgument(f"Node count must be an integer, got {n!r}")
    n = int(n)
    if not math.isfinite(r_max) or r_max <= 0:
        raise InvalidArgument(f"Grid radius must be positive and finite, got {r_max}")
    if n < MIN_NODES:
        raise InvalidArgument(f"Grid needs at least {MIN_NODES} nodes, got {n}")
    return RadialGrid(float(r_max), n)


def refine_grid(grid: RadialGrid) -> RadialGrid:
    """
    The grid with half the spacing on the same interval; every coarse node is a fine node.
    """
    return RadialGrid(grid.r_max, 2 * grid.n + 1)


def resolution_floor(grid: RadialGrid, alpha: float) -> float:
    # O(h^2) size of the discretization error in units of alpha^2
    return 50.0 * (alpha * grid.h) ** 2


def laplacian_diagonals(grid: RadialGrid, sector: SectorIndex):
    inv_h2 = 1.0 / grid.h ** 2
    main = 2.0 * inv_h2 + sector.centrifugal / grid.nodes ** 2
    off = np.full(grid.n - 1, -inv_h2)
    return main, off


def laplacian_sparse(grid: RadialGrid, sector: SectorIndex) -> sparse.csc_array:
    main, off = laplacian_diagonals(grid, sector)
    return sparse.diags_array([off, main, off], offsets=[-1, 0, 1], format='csc')


def radial_laplacian(grid: RadialGrid, sector: SectorIndex) -> SectorOperator:
    matrix = laplacian_sparse(grid, sector).toarray()
    return SectorOperator(sector, matrix, OperatorKind.LAPLACIAN, grid)


def kinetic_energy(grid: RadialGrid, f: np.ndarray, sector: SectorIndex = RADIAL) -> float:
    """
    <-Delta f, f> / <f, f>, the energy cap of a probe.
    """
    q = grid.to_weighted(f)
    lap = laplacian_sparse(grid, sector)
    norm2 = float(np.vdot(q, q).real)
    if norm2 == 0.0:
        return 0.0
    return float(np.vdot(q, lap @ q).real) / norm2
