"""
Scalar operators L_- = -Delta + alpha^2 - phi^2, L_+ = -Delta + alpha^2 - 3 phi^2 and the matrix
Hamiltonian

    H = [[-Delta + alpha^2 - 2 phi^2,  -phi^2                    ],
         [ phi^2,                        Delta - alpha^2 + 2 phi^2 ]]

acting on pairs (R, conj R), assembled per angular sector in the orthonormal frame.
"""
import logging

import numpy as np
from scipy import (
    sparse,
)
from scipy.sparse.linalg import (
    spsolve,
)

from soliton_lab.exceptions import (
    LabPanic,
)
from soliton_lab.ground_state import (
    GroundState,
)
from soliton_lab.radial_core import (
    RADIAL,
    OperatorKind,
    SectorIndex,
    SectorOperator,
    laplacian_diagonals,
    laplacian_sparse,
)
from soliton_lab.typing import (
    PairField,
)

logger = logging.getLogger(__name__)


L_MINUS_COUPLING = 1.0
L_PLUS_COUPLING = 3.0


def scalar_diagonals(gs: GroundState, sector: SectorIndex, coupling: float):
    """
    Main and off diagonal of -Delta + alpha^2 - coupling * phi^2 (tridiagonal in the frame).
    """
    main, off = laplacian_diagonals(gs.grid, sector)
    return main + gs.alpha ** 2 - coupling * gs.phi ** 2, off


def _scalar_sparse(gs: GroundState, sector: SectorIndex, coupling: float) -> sparse.csc_array:
    lap = laplacian_sparse(gs.grid, sector)
    potential = gs.alpha ** 2 - coupling * gs.phi ** 2
    return (lap + sparse.diags_array(potential, format='csc')).tocsc()


def l_minus_sparse(gs: GroundState, sector: SectorIndex = RADIAL) -> sparse.csc_array:
    return _scalar_sparse(gs, sector, L_MINUS_COUPLING)


def l_plus_sparse(gs: GroundState, sector: SectorIndex = RADIAL) -> sparse.csc_array:
    return _scalar_sparse(gs, sector, L_PLUS_COUPLING)


def assemble_L_minus(gs: GroundState, sector: SectorIndex) -> SectorOperator:
    return SectorOperator(
        sector, l_minus_sparse(gs, sector).toarray(), OperatorKind.L_MINUS, gs.grid, gs.alpha
    )


def assemble_L_plus(gs: GroundState, sector: SectorIndex) -> SectorOperator:
    return SectorOperator(
        sector, l_plus_sparse(gs, sector).toarray(), OperatorKind.L_PLUS, gs.grid, gs.alpha
    )


def h_matrix_sparse(gs: GroundState, sector: SectorIndex = RADIAL) -> sparse.csc_array:
    diagonal = _scalar_sparse(gs, sector, 2.0)
    coupling = sparse.diags_array(gs.phi ** 2, format='csc')
    return sparse.block_array(
        [[diagonal, -coupling], [coupling, -diagonal]], format='csc'
    )


def assemble_H(gs: GroundState, sector: SectorIndex) -> SectorOperator:
    """
    Dense real 2n x 2n block matrix of H on one sector.
    """
    return SectorOperator(
        sector, h_matrix_sparse(gs, sector).toarray(), OperatorKind.H_MATRIX, gs.grid, gs.alpha
    )


def change_of_basis(n: int) -> np.ndarray:
    # (v, u) -> (v + i u, v - i u)
    eye = np.eye(n)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]])


def assemble_H_uv(gs: GroundState, sector: SectorIndex) -> SectorOperator:
    """
    H in the (v, u) coordinates R = v + i u.  The similarity C^-1 H C reduces to the off-diagonal
    form [[0, i L_-], [-i L_+, 0]]; it is computed here by the similarity itself so the two forms
    can be compared.
    """
    h_op = assemble_H(gs, sector)
    basis = change_of_basis(gs.grid.n)
    inverse = 0.5 * basis.conj().T
    matrix = inverse @ h_op.matrix @ basis
    return SectorOperator(sector, matrix, OperatorKind.H_UV, gs.grid, gs.alpha)


def h_uv_block_form(gs: GroundState, sector: SectorIndex) -> np.ndarray:
    n = gs.grid.n
    l_minus = l_minus_sparse(gs, sector).toarray()
    l_plus = l_plus_sparse(gs, sector).toarray()
    zero = np.zeros((n, n))
    return np.block([[zero, 1j * l_minus], [-1j * l_plus, zero]])


def pauli_sigma3(n: int) -> np.ndarray:
    return np.diag(np.concatenate((np.ones(n), -np.ones(n))))


def adjoint_H(op: SectorOperator) -> SectorOperator:
    """
    H* = sigma_3 conj(H) sigma_3.  For the real Hamiltonian this is the transpose; an absorbing
    term -i s(r) on both blocks flips sign as it should.
    """
    if op.components != 2:
        raise LabPanic(f"adjoint_H expects a 2x2 block operator, got kind {op.kind}")
    signs = np.concatenate((np.ones(op.grid.n), -np.ones(op.grid.n)))
    matrix = signs[:, None] * op.matrix.conj() * signs[None, :]
    return SectorOperator(op.sector, matrix, op.kind, op.grid, op.alpha)


def j_map(field: PairField) -> PairField:
    """
    The conjugation symmetry J(f1, f2) = (conj f2, conj f1), on the last two axes (2, n).
    """
    field = np.asarray(field)
    return np.conj(field[..., ::-1, :])


def j_defect(field: PairField) -> float:
    scale = max(float(np.abs(field).max()), 1e-300)
    return float(np.abs(j_map(field) - field).max() / scale)


def conjugation_symmetry_defect(op: SectorOperator) -> float:
    """
    max |J H J + H| / max |H|, with J H J = S conj(H) S for the swap S.
    """
    n = op.grid.n
    perm = np.concatenate((np.arange(n, 2 * n), np.arange(n)))
    jhj = op.matrix.conj()[np.ix_(perm, perm)]
    scale = max(float(np.abs(op.matrix).max()), 1.0)
    return float(np.abs(jhj + op.matrix).max() / scale)


def apply_H(gs: GroundState, field: PairField, sector: SectorIndex = RADIAL) -> PairField:
    """
    H applied to physical samples of shape (2, n), through the sparse blocks.
    """
    grid = gs.grid
    q = grid.to_weighted(np.asarray(field)).ravel()
    out = h_matrix_sparse(gs, sector) @ q
    return grid.from_weighted(out.reshape(2, grid.n))


def apply_H_adjoint(gs: GroundState, field: PairField, sector: SectorIndex = RADIAL) -> PairField:
    grid = gs.grid
    q = grid.to_weighted(np.asarray(field)).ravel()
    out = h_matrix_sparse(gs, sector).T @ q
    return grid.from_weighted(out.reshape(2, grid.n))


def alpha_mode(gs: GroundState) -> np.ndarray:
    """
    The radial solution of L_+ w = -2 alpha phi.

    It agrees with d phi / d alpha to O(h^2) and closes the discrete Jordan chain exactly:
    H(w, w) = 2 i alpha (i phi, -i phi) holds for the assembled matrices.
    """
    grid = gs.grid
    rhs = -2.0 * gs.alpha * grid.to_weighted(gs.phi)
    solution = spsolve(l_plus_sparse(gs, RADIAL), rhs)
    mode = grid.from_weighted(solution)
    drift = np.linalg.norm(grid.to_weighted(mode - gs.dphi_dalpha))
    logger.debug("alpha mode differs from the scaling derivative by %.3e", drift)
    return mode
