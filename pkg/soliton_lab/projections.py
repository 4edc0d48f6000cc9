"""
The root-space families xi_j, eta_j = diag(-i, i) xi_j, their pairing matrix and the Riesz
projections built from biorthogonal bases.

Fields live on a `ChannelLayout`: the radial channel alone, or the radial channel together with
the three dipole channels x_j / r.  A channel field has shape (channels, 2, n).

Family (1-based as in the modulation equations, w the alpha mode):
    xi_1 = (phi, phi)                  eta_1 = (-i phi, i phi)
    xi_2 = (i w, -i w)                 eta_2 = (w, w)
    xi_(2+l) = (r phi, r phi) x_l/r    eta_(2+l) = (-i r phi, i r phi) x_l/r
    xi_(5+l) = (i phi', -i phi') x_l/r eta_(5+l) = (phi', phi') x_l/r
"""
from dataclasses import (
    dataclass,
)
import enum
import logging
from typing import (
    Dict,
    Optional,
    Tuple,
)

import numpy as np
from scipy import (
    linalg,
)

from soliton_lab.exceptions import (
    DegeneratePairing,
    InvalidArgument,
)
from soliton_lab.galilei_transforms import (
    SolitonParams,
)
from soliton_lab.ground_state import (
    GroundState,
    rescaled,
)
from soliton_lab.linearized_ops import (
    alpha_mode,
    apply_H,
    apply_H_adjoint,
)
from soliton_lab.radial_core import (
    DIPOLE as _DIPOLE_SECTOR,
    RADIAL as _RADIAL_SECTOR,
    RadialGrid,
    SectorIndex,
)
from soliton_lab.spectral_analysis import (
    EigenPair,
)
from soliton_lab.typing import (
    ChannelField,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-8
MAX_PAIRING_CONDITION = 1e12


class ChannelLayout(enum.Enum):
    RADIAL = (_RADIAL_SECTOR,)
    FULL = (_RADIAL_SECTOR, _DIPOLE_SECTOR, _DIPOLE_SECTOR, _DIPOLE_SECTOR)

    @property
    def sectors(self) -> Tuple[SectorIndex, ...]:
        return self.value

    @property
    def channels(self) -> int:
        return len(self.value)

    @property
    def family_size(self) -> int:
        return 2 if self is ChannelLayout.RADIAL else 8

    def shape(self, grid: RadialGrid) -> Tuple[int, int, int]:
        return (self.channels, 2, grid.n)

    def weights(self, grid: RadialGrid) -> np.ndarray:
        norms = np.array([sector.angular_norm for sector in self.sectors])
        return norms[:, None, None] * grid.weights[None, None, :] * np.ones((1, 2, 1))

    def inner(self, grid: RadialGrid, f: ChannelField, g: ChannelField) -> complex:
        return complex(np.sum(self.weights(grid) * f * np.conj(g)))

    def norm(self, grid: RadialGrid, f: ChannelField) -> float:
        return float(np.sqrt(max(self.inner(grid, f, f).real, 0.0)))

    def embed(self, grid: RadialGrid, radial_pair: np.ndarray, channel: int = 0) -> ChannelField:
        out = np.zeros(self.shape(grid), dtype=complex)
        out[channel] = radial_pair
        return out


def apply_hamiltonian(gs: GroundState, field: ChannelField, layout: ChannelLayout,
                      adjoint: bool = False) -> ChannelField:
    """
    H (or H*) applied channel by channel with each channel's centrifugal term.
    """
    action = apply_H_adjoint if adjoint else apply_H
    return np.stack([
        action(gs, field[c], sector) for c, sector in enumerate(layout.sectors)
    ])


@dataclass(frozen=True, eq=False)
class RootFamily:
    xi: np.ndarray
    eta: np.ndarray
    pairing: np.ndarray
    layout: ChannelLayout
    gs: GroundState

    @property
    def size(self) -> int:
        return self.xi.shape[0]

    @property
    def grid(self) -> RadialGrid:
        return self.gs.grid

    def pair(self, j: int, k: int) -> complex:
        """
        <eta_j, xi_k> for 1-based indices.
        """
        return self.layout.inner(self.grid, self.eta[j - 1], self.xi[k - 1])

    def condition(self) -> float:
        return float(np.linalg.cond(self.pairing))


def _family_fields(gs: GroundState, layout: ChannelLayout) -> np.ndarray:
    grid = gs.grid
    phi, dphi, r = gs.phi, gs.dphi_dr, grid.nodes
    w = alpha_mode(gs)
    members = [
        layout.embed(grid, np.stack((phi, phi))),
        layout.embed(grid, np.stack((1j * w, -1j * w))),
    ]
    if layout is ChannelLayout.FULL:
        members += [layout.embed(grid, np.stack((r * phi, r * phi)), c) for c in (1, 2, 3)]
        members += [layout.embed(grid, np.stack((1j * dphi, -1j * dphi)), c) for c in (1, 2, 3)]
    return np.stack(members)


def build_root_family(gs: GroundState, params: Optional[SolitonParams] = None,
                      layout: ChannelLayout = ChannelLayout.FULL) -> RootFamily:
    """
    The families at the frozen path point.  Only the frequency of `params` enters; the phase,
    velocity and translation drop out in the modulated frame.
    """
    if params is not None and params.alpha != gs.alpha:
        gs = rescaled(gs, params.alpha)
    xi = _family_fields(gs, layout)
    eta = xi * np.array([-1j, 1j])[None, None, :, None]
    size = xi.shape[0]
    pairing = np.empty((size, size), dtype=complex)
    for k in range(size):
        for j in range(size):
            pairing[k, j] = layout.inner(gs.grid, eta[j], xi[k])
    if np.abs(pairing.imag).max() > 1e-10 * np.abs(pairing).max():
        logger.warning("pairing matrix has an imaginary part %.2e", np.abs(pairing.imag).max())
    family = RootFamily(xi, eta, pairing.real.copy(), layout, gs)
    logger.debug("root family (%s, alpha=%g): cond(G) = %.3g",
                 layout.name, gs.alpha, family.condition())
    return family


def reference_pairing(gs: GroundState, layout: ChannelLayout = ChannelLayout.FULL) -> np.ndarray:
    """
    Closed-form G: <eta_2, xi_1> = -|phi|^2 / alpha, <eta_1, xi_2> = |phi|^2 / alpha,
    <eta_(5+l), xi_(2+l)> = -|phi|^2, <eta_(2+l), xi_(5+l)> = |phi|^2, zero otherwise.
    """
    mass = gs.mass
    size = layout.family_size
    G = np.zeros((size, size))
    G[0, 1] = -mass / gs.alpha
    G[1, 0] = mass / gs.alpha
    if layout is ChannelLayout.FULL:
        for ell in range(3):
            G[2 + ell, 5 + ell] = -mass
            G[5 + ell, 2 + ell] = mass
    return G


@dataclass(frozen=True, eq=False)
class FactoredProjection:
    """
    P x = sum_j right_j sum_k core_jk <x, left_k>, or x minus that when `complement` is set.
    `dual` holds conj(left) times the quadrature weights, flattened.
    """
    right: np.ndarray
    dual: np.ndarray
    core: np.ndarray
    shape: Tuple[int, int, int]
    weights: np.ndarray
    complement: bool = False

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def apply(self, field: np.ndarray) -> np.ndarray:
        field = np.asarray(field)
        flat = field.reshape(-1)
        if flat.size != self.size:
            raise InvalidArgument(
                f"field of shape {field.shape} does not match the projection shape {self.shape}"
            )
        out = self.right.T @ (self.core @ (self.dual @ flat))
        if self.complement:
            out = flat - out
        return out.reshape(field.shape)

    __call__ = apply

    def finite_rank(self) -> int:
        """
        Rank of the finite sum, from the singular values of its factored form.
        """
        sqrt_w = np.sqrt(self.weights)
        _, r_right = linalg.qr((self.right * sqrt_w).T, mode='economic')
        _, r_dual = linalg.qr((self.dual / sqrt_w).T, mode='economic')
        values = linalg.svdvals(r_right @ self.core @ r_dual.T)
        if not values.size or values[0] == 0:
            return 0
        return int(np.sum(values > RANK_TOL * values[0]))

    @property
    def rank(self) -> int:
        rank = self.finite_rank()
        return self.size - rank if self.complement else rank


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    P_root: FactoredProjection
    P_im_plus: FactoredProjection
    P_im_minus: FactoredProjection
    P_s: FactoredProjection
    P_u_plus: FactoredProjection
    layout: ChannelLayout
    grid: RadialGrid

    def members(self) -> Dict[str, FactoredProjection]:
        return {
            'P_root': self.P_root,
            'P_im_plus': self.P_im_plus,
            'P_im_minus': self.P_im_minus,
            'P_s': self.P_s,
            'P_u_plus': self.P_u_plus,
        }


def _factored(layout: ChannelLayout, grid: RadialGrid, right, left, core,
              complement: bool = False) -> FactoredProjection:
    weights = layout.weights(grid)
    shape = layout.shape(grid)
    right = np.stack([np.asarray(x).reshape(-1) for x in right])
    dual = np.stack([(np.conj(x) * weights).reshape(-1) for x in left])
    return FactoredProjection(
        right, dual, np.asarray(core, dtype=complex), shape, weights.reshape(-1), complement
    )


def _pairing_inverse(family: RootFamily) -> np.ndarray:
    condition = family.condition()
    if not np.isfinite(condition) or condition > MAX_PAIRING_CONDITION:
        raise DegeneratePairing("pairing matrix is singular", {'condition': condition})
    return np.linalg.inv(family.pairing)


def build_projections(gs: GroundState, family: RootFamily,
                      pairs: Tuple[EigenPair, EigenPair]) -> ProjectionSet:
    layout, grid = family.layout, family.grid
    if grid != gs.grid:
        raise InvalidArgument("root family and ground state live on different grids")
    plus, minus = pairs
    if plus.value.imag <= 0 or minus.value.imag >= 0:
        raise InvalidArgument("eigenpairs must be ordered (+i sigma, -i sigma)")
    g_inv = _pairing_inverse(family)
    f_plus, f_minus = layout.embed(grid, plus.right_vec), layout.embed(grid, minus.right_vec)
    t_plus, t_minus = layout.embed(grid, plus.left_vec), layout.embed(grid, minus.left_vec)
    eta, xi = list(family.eta), list(family.xi)
    one = np.eye(1)

    def block(*cores):
        return linalg.block_diag(*cores)

    projections = ProjectionSet(
        P_root=_factored(layout, grid, eta, xi, g_inv),
        P_im_plus=_factored(layout, grid, [f_plus], [t_plus], one),
        P_im_minus=_factored(layout, grid, [f_minus], [t_minus], one),
        P_s=_factored(layout, grid, eta + [f_plus, f_minus], xi + [t_plus, t_minus],
                      block(g_inv, one, one), complement=True),
        P_u_plus=_factored(layout, grid, eta + [f_plus], xi + [t_plus], block(g_inv, one)),
        layout=layout,
        grid=grid,
    )
    logger.info("projections (%s): rank P_root %d, P_u+ %d",
                layout.name, projections.P_root.rank, projections.P_u_plus.rank)
    return projections


def restricted_spectrum(gs: GroundState, projection: FactoredProjection,
                        layout: ChannelLayout) -> np.ndarray:
    """
    Eigenvalues of H P on the range of a finite-rank projection, from the small matrix
    core * <H right_j, left_k>.
    """
    images = np.stack([
        apply_hamiltonian(gs, x.reshape(projection.shape), layout).reshape(-1)
        for x in projection.right
    ])
    small = projection.core @ (projection.dual @ images.T)
    return linalg.eigvals(small)


def adjoint_action_residuals(gs: GroundState, family: RootFamily) -> Dict[str, float]:
    """
    Relative residuals of H* xi_1 = 0, H* xi_2 = -2 i alpha xi_1, and on the dipole channels
    H* xi_(2+l) = 2 i xi_(5+l), H* xi_(5+l) = 0.
    """
    layout, grid = family.layout, family.grid
    gs = family.gs

    def image(k):
        return apply_hamiltonian(gs, family.xi[k - 1], layout, adjoint=True)

    def rel(value, scale):
        return layout.norm(grid, value) / max(layout.norm(grid, scale), 1e-300)

    residuals = {
        'xi_1': rel(image(1), family.xi[0]),
        'xi_2': rel(image(2) + 2j * gs.alpha * family.xi[0], family.xi[0]),
    }
    if layout is ChannelLayout.FULL:
        for ell in (1, 2, 3):
            boost, shift = 2 + ell, 5 + ell
            residuals[f'xi_{boost}'] = rel(
                image(boost) - 2j * family.xi[shift - 1], family.xi[shift - 1]
            )
            residuals[f'xi_{shift}'] = rel(image(shift), family.xi[shift - 1])
    return residuals


def solve_aj_system(family: RootFamily, f_plus: EigenPair, h: float,
                    xi_ref: RootFamily) -> np.ndarray:
    """
    The coefficients a_j with h <f+, xi_l^ref> + sum_j a_j <eta_j, xi_l^ref> = 0 for every l.
    """
    if family.layout is not xi_ref.layout or family.grid != xi_ref.grid:
        raise InvalidArgument("families must share layout and grid")
    layout, grid = family.layout, family.grid
    size = family.size
    matrix = np.empty((size, size), dtype=complex)
    for ell in range(size):
        for j in range(size):
            matrix[ell, j] = layout.inner(grid, family.eta[j], xi_ref.xi[ell])
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > MAX_PAIRING_CONDITION:
        raise DegeneratePairing("a_j system is singular", {'condition': float(condition)})
    f_field = layout.embed(grid, f_plus.right_vec)
    rhs = np.array([layout.inner(grid, f_field, xi_ref.xi[ell]) for ell in range(size)])
    a = -h * np.linalg.solve(matrix, rhs)
    if np.abs(a.imag).max(initial=0.0) > 1e-8 * max(np.abs(a).max(initial=0.0), 1e-300):
        logger.debug("a_j carry an imaginary part %.2e", np.abs(a.imag).max())
    return a.real.copy()


def root_correction(family: RootFamily, a: np.ndarray) -> ChannelField:
    """
    sum_j a_j eta_j.
    """
    return np.tensordot(np.asarray(a, dtype=complex), family.eta, axes=1)
