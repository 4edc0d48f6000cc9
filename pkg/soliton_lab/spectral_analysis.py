"""
Certification of the discrete spectrum of H(alpha).

The scalar eigenproblems are tridiagonal in the orthonormal frame and are solved with
`eigh_tridiagonal`; the matrix Hamiltonian is handled through its (v, u) form
[[0, i L_-], [-i L_+, 0]], so powers of H reduce to products of L_- and L_+.
"""
from dataclasses import (
    asdict,
    dataclass,
    field,
)
import logging
import math
from typing import (
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)
import warnings

import numpy as np
from scipy.linalg import (
    eigh,
    eigh_tridiagonal,
    eigvals,
    eigvalsh,
    solve_banded,
    svdvals,
)
from scipy.optimize import (
    brentq,
)

from soliton_lab.exceptions import (
    AmbiguousCountWarning,
    CertificationFailure,
    DegeneratePairing,
    Inconclusive,
    InvalidArgument,
    ResolutionDriftWarning,
)
from soliton_lab.ground_state import (
    GroundState,
)
from soliton_lab.linearized_ops import (
    L_MINUS_COUPLING,
    L_PLUS_COUPLING,
    alpha_mode,
    apply_H,
    apply_H_adjoint,
    assemble_H,
    assemble_L_minus,
    assemble_L_plus,
    j_defect,
    l_plus_sparse,
    scalar_diagonals,
)
from soliton_lab.radial_core import (
    DIPOLE,
    RADIAL,
    RadialGrid,
    SectorIndex,
    resolution_floor,
)
from soliton_lab.utils import (
    relative_error,
)

logger = logging.getLogger(__name__)

KERNEL_TOL = 1e-4
EIG_TOL = 1e-6
GAP_FACTOR = 10.0
STRIP_FRACTION = 0.9
BS_AMBIGUITY = 1e-6
MARGIN_DRIFT = 0.2
REAL_DRIFT = 1e-3
ROOT_SECTORS = (0, 1, 2)
# kernel dimensions per sector for H and H^2 (one copy per m)
EXPECTED_ROOT_COUNTS = {0: (1, 2), 1: (1, 2), 2: (0, 0)}


@dataclass(frozen=True, eq=False)
class EigenPair:
    value: complex
    right_vec: np.ndarray
    left_vec: np.ndarray
    grid: RadialGrid
    sector: SectorIndex = RADIAL

    @property
    def normalization(self) -> complex:
        return self.grid.inner(self.right_vec, self.left_vec)

    @property
    def right_norm(self) -> float:
        return self.grid.norm(self.right_vec)

    @property
    def left_norm(self) -> float:
        return self.grid.norm(self.left_vec)


class VariationalMode(NamedTuple):
    sigma: float
    v: np.ndarray
    u: np.ndarray


class RootSpaceDims(NamedTuple):
    algebraic: int
    geometric: int


class SectorKernel(NamedTuple):
    ell: int
    geometric: int
    algebraic: int
    cubic: int
    thresholds: Tuple[float, float, float]
    smallest: Tuple[Tuple[float, ...], Tuple[float, ...], Tuple[float, ...]]


class RootSpaceDetails(NamedTuple):
    dims: RootSpaceDims
    sectors: Tuple[SectorKernel, ...]
    relations: Dict[str, float]


class ProjectedSpectrum(NamedTuple):
    lambda1: float
    zero_count: int


class BirmanSchwingerCount(NamedTuple):
    count: int
    eigenvalues_above_one: List[float]
    per_sector: Dict[int, int]


class StripSpectrum(NamedTuple):
    cluster_radius: float
    zero_cluster: Dict[int, int]
    imaginary: Dict[int, List[complex]]
    outliers: Dict[int, List[complex]]

    @property
    def single_imaginary_pair(self) -> bool:
        pairs = [ell for ell, values in self.imaginary.items() if values]
        return pairs == [0] and len(self.imaginary[0]) == 2 and not any(self.outliers.values())

    @property
    def zero_multiplicity(self) -> int:
        return sum((2 * ell + 1) * count for ell, count in self.zero_cluster.items())


@dataclass
class SpectralReport:
    alpha: float
    E0: float
    lambda1: float
    sigma: float
    root_dim_algebraic: int
    root_dim_geometric: int
    bs_count_minus: int
    bs_count_plus: int
    threshold_margin: float
    interval_clear: bool
    lambda1_projected: float
    projected_zero_count: int
    single_imaginary_pair: bool
    adjoint_norm: float
    resolution: Tuple[int, int]
    deltas: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def _sector(ell) -> SectorIndex:
    return ell if isinstance(ell, SectorIndex) else SectorIndex(ell)


def lowest_eigenvalues(gs: GroundState, coupling: float, sector: SectorIndex = RADIAL,
                       count: int = 1) -> np.ndarray:
    main, off = scalar_diagonals(gs, sector, coupling)
    return eigh_tridiagonal(
        main, off, eigvals_only=True, select='i', select_range=(0, count - 1)
    )


def ground_energy(gs: GroundState) -> float:
    """
    E_0, the lowest eigenvalue of L_+ on radial functions.
    """
    return float(lowest_eigenvalues(gs, L_PLUS_COUPLING)[0])


def negative_count(gs: GroundState, coupling: float, sector: SectorIndex = RADIAL) -> int:
    main, off = scalar_diagonals(gs, sector, coupling)
    values = eigh_tridiagonal(main, off, eigvals_only=True)
    return int(np.sum(values < -EIG_TOL * gs.alpha ** 2))


def _shifted_solve(gs: GroundState, shift: float, rhs: np.ndarray) -> np.ndarray:
    # (L_+ - shift) x = rhs on the radial sector, tridiagonal in the frame
    main, off = scalar_diagonals(gs, RADIAL, L_PLUS_COUPLING)
    banded = np.zeros((3, main.size))
    banded[0, 1:] = off
    banded[1] = main - shift
    banded[2, :-1] = off
    return solve_banded((1, 1), banded, rhs)


def g_function(gs: GroundState, lam: float) -> float:
    """
    g(lambda) = <(L_+ - lambda)^-1 phi, phi> on radial functions, for E_0 < lambda < alpha^2.
    """
    e_low = lowest_eigenvalues(gs, L_PLUS_COUPLING, count=2)
    if not e_low[0] < lam < gs.alpha ** 2:
        raise InvalidArgument(
            "g is defined between E_0 and the threshold",
            {'lambda': lam, 'E0': float(e_low[0]), 'threshold': gs.alpha ** 2},
        )
    gap = 1e-12 * gs.alpha ** 2
    if abs(lam - e_low[0]) < gap or abs(lam - e_low[1]) < gap:
        raise InvalidArgument("g evaluated at an eigenvalue of L_+", {'lambda': lam})
    q_phi = gs.grid.to_weighted(gs.phi)
    return float(q_phi @ _shifted_solve(gs, lam, q_phi))


def find_lambda1(gs: GroundState) -> float:
    """
    The root of g in (E_0, 0), located by Brent's method on the spectral representation
    g(lambda) = sum_k c_k^2 / (e_k - lambda) and certified by a direct solve.
    """
    main, off = scalar_diagonals(gs, RADIAL, L_PLUS_COUPLING)
    energies, vectors = eigh_tridiagonal(main, off)
    q_phi = gs.grid.to_weighted(gs.phi)
    weights = (vectors.T @ q_phi) ** 2
    e0 = float(energies[0])
    scale = gs.alpha ** 2

    def g(lam):
        return float(np.sum(weights / (energies - lam)))

    lower, upper = e0 + 1e-9 * scale, -1e-9 * scale
    if not (e0 < upper and g(lower) < 0 < g(upper)):
        raise CertificationFailure(
            "g has no sign change in (E_0, 0)",
            {'alpha': gs.alpha, 'E0': e0, 'g_upper': g(upper)},
        )
    lambda1 = brentq(g, lower, upper, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps,
                     maxiter=500)

    eta = _shifted_solve(gs, lambda1, q_phi)
    l_plus = l_plus_sparse(gs, RADIAL)
    phi_norm = float(np.linalg.norm(q_phi))
    residual = float(np.linalg.norm(l_plus @ eta - lambda1 * eta - q_phi)) / phi_norm
    overlap = abs(float(eta @ q_phi)) / (float(np.linalg.norm(eta)) * phi_norm)
    if residual > 1e-6 or overlap > 1e-6:
        raise CertificationFailure(
            "lambda_1 certificate failed",
            {'lambda1': lambda1, 'residual': residual, 'overlap': overlap},
        )
    logger.info("lambda_1 = %.10g (E_0 = %.10g), residual %.2e, <eta, phi> %.2e",
                lambda1, e0, residual, overlap)
    return float(lambda1)


def projected_spectrum(gs: GroundState, kernel_tol: float = KERNEL_TOL) -> ProjectedSpectrum:
    """
    Lowest eigenvalue of P L_+ P with P the orthogonal projection off phi, and the multiplicity of
    its eigenvalue 0 counted over the radial sector and the three dipole channels.
    """
    tol = max(kernel_tol, resolution_floor(gs.grid, gs.alpha)) * gs.alpha ** 2
    q_phi = gs.grid.to_weighted(gs.phi)
    q_phi = q_phi / np.linalg.norm(q_phi)
    projector = np.eye(gs.grid.n) - np.outer(q_phi, q_phi)
    matrix = projector @ assemble_L_plus(gs, RADIAL).matrix @ projector
    radial = eigh(matrix, eigvals_only=True, subset_by_index=[0, 2])
    dipole = lowest_eigenvalues(gs, L_PLUS_COUPLING, DIPOLE, count=2)
    zeros = int(np.sum(np.abs(radial) <= tol))
    zeros += DIPOLE.multiplicity * int(np.sum(np.abs(dipole) <= tol))
    return ProjectedSpectrum(float(radial[0]), zeros)


def lambda1_projected(gs: GroundState) -> float:
    return projected_spectrum(gs).lambda1


def compute_sigma(gs: GroundState, tol: float = 1e-5) -> VariationalMode:
    """
    Minimize <L_+ v, v> over v = sqrt(L_-) f, f orthogonal to phi, with ||f|| = 1.

    The minimum is -sigma^2; the minimizer gives L_- L_+ v = -sigma^2 v, and u is recovered from
    L_- u = sigma v with the component along phi fixed by L_+ v = -sigma u.
    """
    grid = gs.grid
    main, off = scalar_diagonals(gs, RADIAL, L_MINUS_COUPLING)
    mu, basis = eigh_tridiagonal(main, off)
    ground = basis[:, 0]
    logger.debug("L_- ground eigenvalue %.3e deflated", mu[0])
    mu, basis = np.maximum(mu[1:], 0.0), basis[:, 1:]

    l_plus = l_plus_sparse(gs, RADIAL)
    factor = basis * np.sqrt(mu)
    reduced = factor.T @ (l_plus @ factor)
    reduced = 0.5 * (reduced + reduced.T)
    lowest, vec = eigh(reduced, subset_by_index=[0, 0])
    if lowest[0] >= 0:
        raise CertificationFailure(
            "variational problem has no negative direction", {'alpha': gs.alpha, 'min': lowest[0]}
        )
    sigma = math.sqrt(-lowest[0])

    v = factor @ vec[:, 0]
    v /= np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    pseudo = basis @ ((basis.T @ v) / np.where(mu > 0, mu, np.inf))
    u = sigma * pseudo
    defect = l_plus @ v + sigma * u
    u -= (ground @ defect) / sigma * ground

    residual = float(np.linalg.norm(
        l_minus_apply(gs, l_plus @ v) + sigma ** 2 * v
    ))
    if residual > tol * gs.alpha ** 4:
        raise CertificationFailure(
            "L_- L_+ v = -sigma^2 v not satisfied", {'sigma': sigma, 'residual': residual}
        )
    logger.info("sigma = %.10g at alpha=%g (residual %.2e)", sigma, gs.alpha, residual)
    return VariationalMode(sigma, grid.from_weighted(v), grid.from_weighted(u))


def l_minus_apply(gs: GroundState, q: np.ndarray) -> np.ndarray:
    main, off = scalar_diagonals(gs, RADIAL, L_MINUS_COUPLING)
    out = main * q
    out[:-1] += off * q[1:]
    out[1:] += off * q[:-1]
    return out


def eigenpair_imaginary(gs: GroundState, sign: int,
                        mode: Optional[VariationalMode] = None,
                        eig_tol: float = EIG_TOL) -> EigenPair:
    """
    f = (v + i u, v - i u) with H f = i sigma f for sign = +1, and (v - i u, v + i u) with
    eigenvalue -i sigma for sign = -1.  Both are J-invariant.  The adjoint eigenvector
    (u + i v, u - i v) / (4 <u, v>) (resp. (u - i v, u + i v) / (4 <u, v>)) pairs to one.
    """
    if sign not in (1, -1):
        raise InvalidArgument(f"sign must be +1 or -1, got {sign}")
    if mode is None:
        mode = compute_sigma(gs)
    sigma, v, u = mode
    grid = gs.grid
    s = float(sign)
    right = np.stack((v + 1j * s * u, v - 1j * s * u))
    left_raw = np.stack((u + 1j * s * v, u - 1j * s * v))
    pairing = grid.inner(right, left_raw)
    if abs(pairing) < 1e-8 * grid.norm(right) * grid.norm(left_raw):
        raise DegeneratePairing(
            "eigenvector and adjoint eigenvector are orthogonal", {'pairing': abs(pairing)}
        )
    left = left_raw / np.conj(pairing)
    pair = EigenPair(1j * s * sigma, right, left, grid, RADIAL)

    right_res, left_res = eigenpair_residuals(gs, pair)
    if right_res > eig_tol * gs.alpha ** 2 or left_res > eig_tol * gs.alpha ** 2:
        raise CertificationFailure(
            "imaginary eigenpair residual too large",
            {'right': right_res, 'left': left_res, 'sign': sign},
        )
    logger.debug("eigenpair %+d: residuals %.2e / %.2e, J defect %.1e, |f~| = %.4g",
                 sign, right_res, left_res, j_defect(right), pair.left_norm)
    return pair


def eigenpair_residuals(gs: GroundState, pair: EigenPair) -> Tuple[float, float]:
    """
    ||H f - lambda f|| / ||f|| and ||H* f~ - conj(lambda) f~|| / ||f~||.
    """
    grid = gs.grid
    right = apply_H(gs, pair.right_vec, pair.sector) - pair.value * pair.right_vec
    left = apply_H_adjoint(gs, pair.left_vec, pair.sector) - np.conj(pair.value) * pair.left_vec
    return (grid.norm(right) / pair.right_norm, grid.norm(left) / pair.left_norm)


def _count_kernel(values: np.ndarray, threshold: float, what: str, ell: int) -> int:
    values = np.sort(values)
    count = int(np.sum(values <= threshold))
    if count and count < values.size and values[count] < GAP_FACTOR * values[count - 1]:
        raise CertificationFailure(
            "no spectral gap above the near-kernel singular values",
            {'operator': what, 'ell': ell, 'last': values[count - 1], 'next': values[count]},
        )
    return count


def _sector_kernel(gs: GroundState, sector: SectorIndex, kernel_tol: float) -> SectorKernel:
    l_minus = assemble_L_minus(gs, sector).matrix
    l_plus = assemble_L_plus(gs, sector).matrix
    base = max(kernel_tol, resolution_floor(gs.grid, gs.alpha))
    thresholds = tuple(base * gs.alpha ** (2 * k) for k in (1, 2, 3))

    first = np.abs(np.concatenate((eigvalsh(l_minus), eigvalsh(l_plus))))
    mixed = l_minus @ l_plus
    second = np.repeat(svdvals(mixed), 2)
    third = np.concatenate((svdvals(mixed @ l_minus), svdvals(l_plus @ mixed)))

    counts = [
        _count_kernel(values, threshold, name, sector.ell)
        for values, threshold, name in zip(
            (first, second, third), thresholds, ('H', 'H^2', 'H^3')
        )
    ]
    smallest = tuple(
        tuple(float(x) for x in np.sort(values)[:4]) for values in (first, second, third)
    )
    return SectorKernel(sector.ell, counts[0], counts[1], counts[2], thresholds, smallest)


def _relative(gs: GroundState, value: np.ndarray, scale: np.ndarray) -> float:
    return gs.grid.norm(value) / max(gs.grid.norm(scale), 1e-300)


def root_relations(gs: GroundState) -> Dict[str, float]:
    """
    Residuals of the generalized-kernel relations of the assembled H:
    H(i phi, -i phi) = 0, H(w, w) = (-2 alpha phi, 2 alpha phi) for the alpha mode w,
    H(phi', phi') = 0 and H(r phi, -r phi) = (-2 phi', -2 phi') on the dipole sector.
    """
    phi, dphi = gs.phi, gs.dphi_dr
    r = gs.grid.nodes
    w = alpha_mode(gs)
    phase = np.stack((1j * phi, -1j * phi))
    stretch = np.stack((w, w))
    stretch_image = np.stack((-2.0 * gs.alpha * phi, 2.0 * gs.alpha * phi))
    sampled = np.stack((gs.dphi_dalpha, gs.dphi_dalpha))
    shift = np.stack((dphi, dphi))
    boost = np.stack((r * phi, -r * phi))
    return {
        'phase': _relative(gs, apply_H(gs, phase), phase),
        'alpha_mode': _relative(gs, apply_H(gs, stretch) - stretch_image, stretch_image),
        'sampled_alpha_derivative': _relative(
            gs, apply_H(gs, sampled) - stretch_image, stretch_image
        ),
        'translation': _relative(gs, apply_H(gs, shift, DIPOLE), shift),
        'boost': _relative(gs, apply_H(gs, boost, DIPOLE) + 2.0 * shift, shift),
    }


def root_space_details(gs: GroundState, kernel_tol: float = KERNEL_TOL,
                       sectors: Sequence[int] = ROOT_SECTORS) -> RootSpaceDetails:
    kernels = tuple(_sector_kernel(gs, _sector(ell), kernel_tol) for ell in sectors)
    for kernel in kernels:
        if kernel.cubic != kernel.algebraic:
            raise CertificationFailure(
                "ker H^3 differs from ker H^2",
                {'ell': kernel.ell, 'H2': kernel.algebraic, 'H3': kernel.cubic},
            )
        logger.info("root space ell=%d: geometric %d, algebraic %d",
                    kernel.ell, kernel.geometric, kernel.algebraic)
    geometric = sum((2 * k.ell + 1) * k.geometric for k in kernels)
    algebraic = sum((2 * k.ell + 1) * k.algebraic for k in kernels)

    relations = root_relations(gs)
    tol = max(1e-3, resolution_floor(gs.grid, gs.alpha))
    failed = {
        name: value for name, value in relations.items()
        if name != 'sampled_alpha_derivative' and value > tol
    }
    if failed:
        raise CertificationFailure("root-space basis relations violated", failed)
    return RootSpaceDetails(RootSpaceDims(algebraic, geometric), kernels, relations)


def root_space_report(gs: GroundState, kernel_tol: float = KERNEL_TOL) -> RootSpaceDims:
    details = root_space_details(gs, kernel_tol)
    for kernel in details.sectors:
        expected = EXPECTED_ROOT_COUNTS.get(kernel.ell)
        if expected is not None and (kernel.geometric, kernel.algebraic) != expected:
            raise CertificationFailure(
                "singular-value kernel counts disagree with the root-space basis",
                {'ell': kernel.ell, 'geometric': kernel.geometric,
                 'algebraic': kernel.algebraic},
            )
    return details.dims


def strip_spectrum(gs: GroundState, sectors: Sequence[int] = ROOT_SECTORS) -> StripSpectrum:
    """
    Eigenvalues of H per sector with |Re lambda| < 0.9 alpha^2, split into the zero cluster, the
    imaginary pair and anything else.  On the grid the dipole Jordan block splits into a pair
    +-2 sqrt(lambda_s) with lambda_s the smallest |eigenvalue| of the dipole L_+.
    """
    scale = gs.alpha ** 2
    lambda_s = float(np.min(np.abs(lowest_eigenvalues(gs, L_PLUS_COUPLING, DIPOLE, count=2))))
    radius = max(1e-3 * scale, 4.0 * math.sqrt(lambda_s))
    zero_cluster, imaginary, outliers = {}, {}, {}
    for ell in sectors:
        values = eigvals(assemble_H(gs, _sector(ell)).matrix)
        strip = values[np.abs(values.real) < STRIP_FRACTION * scale]
        near_zero = np.abs(strip) <= radius
        on_axis = (~near_zero) & (np.abs(strip.real) <= 1e-3 * scale)
        zero_cluster[ell] = int(near_zero.sum())
        imaginary[ell] = sorted((complex(x) for x in strip[on_axis]), key=lambda z: z.imag)
        outliers[ell] = [complex(x) for x in strip[~near_zero & ~on_axis]]
        logger.info("strip ell=%d: %d near zero, imaginary %s, other %d",
                    ell, zero_cluster[ell], imaginary[ell], len(outliers[ell]))
    return StripSpectrum(radius, zero_cluster, imaginary, outliers)


def birman_schwinger_matrix(gs: GroundState, which: str, sector: SectorIndex,
                            beta: float = 1.0, coupling: float = 1.0) -> np.ndarray:
    """
    Quadrature of the sector-l kernel of V^1/2 (-Delta)^-1 V^1/2 on the u = r f line:
    c phi^b(r) phi^b(s) r s min(r, s)^l / max(r, s)^(l+1) / (2l+1), with c = 1 (minus) or
    2b+1 (plus), and phi scaled by `coupling`.
    """
    if which not in ('minus', 'plus'):
        raise InvalidArgument(f"Unknown Birman-Schwinger kernel {which!r}")
    c = 1.0 if which == 'minus' else 2.0 * beta + 1.0
    r = gs.grid.nodes
    amp = (coupling * gs.phi) ** beta
    lo = np.minimum.outer(r, r)
    hi = np.maximum.outer(r, r)
    radial = np.outer(r, r) * lo ** sector.ell / hi ** (sector.ell + 1)
    return gs.grid.h * c * np.outer(amp, amp) * radial / sector.multiplicity


def birman_schwinger_spectrum(gs: GroundState, which: str, ell_max: int = 3,
                              beta: float = 1.0, coupling: float = 1.0) -> Dict[int, np.ndarray]:
    return {
        ell: eigvalsh(birman_schwinger_matrix(gs, which, SectorIndex(ell), beta, coupling))[::-1]
        for ell in range(ell_max + 1)
    }


def birman_schwinger_count(gs: GroundState, which: str, ell_max: int = 3,
                           beta: float = 1.0, coupling: float = 1.0) -> BirmanSchwingerCount:
    """
    Number of eigenvalues of L_- (which='minus') or L_+ (which='plus') below alpha^2, counted as
    the eigenvalues above one of the Birman-Schwinger kernel, with angular multiplicity.
    """
    if ell_max < 2:
        raise InvalidArgument(f"ell_max must be at least 2, got {ell_max}")
    spectra = birman_schwinger_spectrum(gs, which, ell_max, beta, coupling)
    per_sector, above = {}, []
    for ell, values in spectra.items():
        close = values[np.abs(values - 1.0) <= BS_AMBIGUITY]
        if close.size:
            warnings.warn(
                f"Birman-Schwinger eigenvalue {close[0]:.9f} of K_{which} at ell={ell} is within "
                f"{BS_AMBIGUITY} of one",
                AmbiguousCountWarning,
            )
        hits = values[values > 1.0 + BS_AMBIGUITY]
        per_sector[ell] = int(hits.size)
        above.extend(float(x) for x in hits for _ in range(2 * ell + 1))
    count = sum((2 * ell + 1) * hits for ell, hits in per_sector.items())
    logger.info("K_%s count %d per sector %s", which, count, per_sector)
    return BirmanSchwingerCount(count, above, per_sector)


def spectral_margin(gs: GroundState, ell_max: int = 3, coupling: float = 1.0) -> float:
    """
    min |mu - 1| over the K_- eigenvalues of sectors 0..ell_max at one resolution.
    """
    spectra = birman_schwinger_spectrum(gs, 'minus', ell_max, coupling=coupling)
    return float(min(np.min(np.abs(values - 1.0)) for values in spectra.values()))


def threshold_margin(gs: GroundState, gs_fine: GroundState, ell_max: int = 3,
                     coupling: float = 1.0) -> float:
    """
    The K_- margin from one, certified against the refined resolution.
    """
    margin = spectral_margin(gs, ell_max, coupling)
    margin_fine = spectral_margin(gs_fine, ell_max, coupling)
    error = abs(margin - margin_fine)
    if margin < 2.0 * error or relative_error(margin, margin_fine) > MARGIN_DRIFT:
        raise Inconclusive(
            "threshold margin not resolved",
            {'margin': margin, 'margin_fine': margin_fine, 'error': error},
        )
    logger.info("threshold margin %.6g (refined %.6g)", margin, margin_fine)
    return margin


def interval_clear(gs: GroundState, kernel_tol: float = KERNEL_TOL) -> bool:
    """
    No eigenvalue of L_- or L_+ (sectors 0 and 1) inside (tol, alpha^2 - tol).
    """
    scale = gs.alpha ** 2
    low = max(kernel_tol, resolution_floor(gs.grid, gs.alpha)) * scale
    high = scale - kernel_tol * scale
    for coupling in (L_MINUS_COUPLING, L_PLUS_COUPLING):
        for sector in (RADIAL, DIPOLE):
            main, off = scalar_diagonals(gs, sector, coupling)
            values = eigh_tridiagonal(main, off, eigvals_only=True, select='v',
                                      select_range=(low, high))
            if values.size:
                logger.info("eigenvalues %s inside (0, alpha^2) at ell=%d", values, sector.ell)
                return False
    return True


def _integers(gs: GroundState, ell_max: int, kernel_tol: float) -> Dict[str, int]:
    dims = root_space_report(gs, kernel_tol)
    return {
        'negative_L_plus': negative_count(gs, L_PLUS_COUPLING),
        'bs_count_minus': birman_schwinger_count(gs, 'minus', ell_max).count,
        'bs_count_plus': birman_schwinger_count(gs, 'plus', ell_max).count,
        'root_dim_algebraic': dims.algebraic,
        'root_dim_geometric': dims.geometric,
    }


EXPECTED_INTEGERS = {
    'negative_L_plus': 1,
    'bs_count_minus': 1,
    'bs_count_plus': 4,
    'root_dim_algebraic': 8,
    'root_dim_geometric': 4,
}


def certify_spectrum(gs: GroundState, gs_fine: GroundState, ell_max: int = 3,
                     kernel_tol: float = KERNEL_TOL, eig_tol: float = EIG_TOL) -> SpectralReport:
    """
    Build the SpectralReport at the resolution of `gs` and check every certified integer again on
    `gs_fine`.  A second imaginary pair, an outlier in the strip or an eigenvalue of L_-/L_+ in
    (0, alpha^2) fails the certificate; real quantities that drift between the two resolutions
    only raise a warning.
    """
    coarse = _integers(gs, ell_max, kernel_tol)
    fine = _integers(gs_fine, ell_max, kernel_tol)
    for name, expected in EXPECTED_INTEGERS.items():
        if coarse[name] != fine[name]:
            raise CertificationFailure(
                f"{name} differs between resolutions",
                {'n': gs.grid.n, 'n_fine': gs_fine.grid.n, 'coarse': coarse[name],
                 'fine': fine[name]},
            )
        if coarse[name] != expected:
            raise CertificationFailure(
                f"{name} = {coarse[name]}, expected {expected}", {'alpha': gs.alpha}
            )

    strip = strip_spectrum(gs)
    if not strip.single_imaginary_pair:
        raise CertificationFailure(
            "strip spectrum is not {0, +-i sigma}",
            {'imaginary': strip.imaginary, 'outliers': strip.outliers},
        )
    clear = interval_clear(gs, kernel_tol)
    if not clear:
        raise CertificationFailure(
            "eigenvalue of L_- or L_+ inside (0, alpha^2)", {'alpha': gs.alpha}
        )

    mode = compute_sigma(gs)
    pair = eigenpair_imaginary(gs, +1, mode, eig_tol)
    values = {
        'E0': ground_energy(gs),
        'lambda1': find_lambda1(gs),
        'sigma': mode.sigma,
    }
    refined = {
        'E0': ground_energy(gs_fine),
        'lambda1': find_lambda1(gs_fine),
        'sigma': compute_sigma(gs_fine).sigma,
    }
    deltas = {name: relative_error(values[name], refined[name]) for name in values}
    for name, delta in deltas.items():
        if delta > REAL_DRIFT:
            warnings.warn(
                f"{name} changes by {delta:.2e} (relative) between n={gs.grid.n} and "
                f"n={gs_fine.grid.n}",
                ResolutionDriftWarning,
            )
    if not values['E0'] < values['lambda1'] < 0 < values['sigma']:
        raise CertificationFailure("ordering E0 < lambda1 < 0 < sigma violated", values)

    margin = threshold_margin(gs, gs_fine, ell_max)
    deltas['threshold_margin'] = relative_error(margin, spectral_margin(gs_fine, ell_max))
    projected = projected_spectrum(gs, kernel_tol)

    report = SpectralReport(
        alpha=gs.alpha,
        E0=values['E0'],
        lambda1=values['lambda1'],
        sigma=values['sigma'],
        root_dim_algebraic=coarse['root_dim_algebraic'],
        root_dim_geometric=coarse['root_dim_geometric'],
        bs_count_minus=coarse['bs_count_minus'],
        bs_count_plus=coarse['bs_count_plus'],
        threshold_margin=margin,
        interval_clear=clear,
        lambda1_projected=projected.lambda1,
        projected_zero_count=projected.zero_count,
        single_imaginary_pair=strip.single_imaginary_pair,
        adjoint_norm=pair.left_norm,
        resolution=(gs.grid.n, gs_fine.grid.n),
        deltas=deltas,
    )
    logger.info("spectral report: %s", report)
    return report
