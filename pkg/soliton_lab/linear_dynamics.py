"""
Linear flow i u' = H u + F on one sector, and the measurements made with it.

Propagation uses an ordered Schur form of the frame matrix, with the near-zero cluster split off
by a Sylvester solve: the cluster (a Jordan block on the radial sector) is propagated with
`expm`, the rest through its eigenbasis.  Crank-Nicolson stepping on the sparse matrix is the
fallback for large or ill-conditioned problems.
"""
from dataclasses import (
    asdict,
    dataclass,
)
import functools
import logging
import math
from typing import (
    Callable,
    Dict,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)
import warnings

import numpy as np
from scipy import (
    sparse,
)
from scipy.integrate import (
    quad,
    solve_ivp,
)
from scipy.linalg import (
    eig,
    eigh,
    expm,
    schur,
    solve_sylvester,
)
from scipy.sparse.linalg import (
    splu,
)
from scipy.stats import (
    linregress,
)

from soliton_lab.exceptions import (
    IllConditionedBasis,
    InvalidArgument,
    WindowTruncatedWarning,
)
from soliton_lab.linearized_ops import (
    j_defect,
)
from soliton_lab.projections import (
    ProjectionSet,
)
from soliton_lab.radial_core import (
    RADIAL,
    OperatorKind,
    RadialGrid,
    SectorIndex,
    SectorOperator,
    kinetic_energy,
    laplacian_sparse,
)
from soliton_lab.typing import (
    Forcing,
    PairField,
    ScalarForcing,
    TimeGrid,
)

logger = logging.getLogger(__name__)

EIGEN_MAX_NODES = 800
MAX_CONDITION = 1e10
CN_DT = 1e-3
SPONGE_FRACTION = 0.15
SPONGE_STRENGTH = 5.0
REFLECTION_FRACTION = 0.1
REFLECTION_LEVEL = 1e-3
DEGENERATE_PROBE = 1e-6
DECAY_WEIGHT_POWER = 2.0


@dataclass(frozen=True, eq=False)
class FieldState:
    time: float
    components: np.ndarray
    sector: SectorIndex = RADIAL
    j_invariant: bool = False

    def __post_init__(self):
        components = np.asarray(self.components, dtype=complex)
        if components.ndim != 2 or components.shape[0] != 2:
            raise InvalidArgument(f"field state needs shape (2, n), got {components.shape}")
        if not np.all(np.isfinite(components)):
            raise InvalidArgument("field state has non-finite entries", {'time': self.time})
        if self.j_invariant and j_defect(components) > 1e-8:
            raise InvalidArgument(
                "field flagged J-invariant is not", {'defect': j_defect(components)}
            )
        object.__setattr__(self, 'components', components)


@dataclass
class DecayReport:
    times: List[float]
    weighted_norms: List[float]
    fitted_exponent: float
    growth_rate: Optional[float]
    r_squared: float
    window: Tuple[float, float]
    truncated: bool

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


class HyperbolicSolution(NamedTuple):
    times: np.ndarray
    trajectory: np.ndarray
    stability_defect: float


def sponge_profile(grid: RadialGrid, alpha: float, fraction: float = SPONGE_FRACTION,
                   strength: float = SPONGE_STRENGTH) -> np.ndarray:
    """
    Cubic ramp on the outer `fraction` of the grid, reaching strength * alpha^2 at r_max.
    """
    start = (1.0 - fraction) * grid.r_max
    ramp = np.clip((grid.nodes - start) / (grid.r_max - start), 0.0, None)
    return strength * alpha ** 2 * ramp ** 3


def with_sponge(op: SectorOperator, fraction: float = SPONGE_FRACTION,
                strength: float = SPONGE_STRENGTH) -> SectorOperator:
    """
    H - i s(r) on both components.
    """
    alpha = op.alpha if op.alpha is not None else 1.0
    profile = np.tile(sponge_profile(op.grid, alpha, fraction, strength), op.components)
    matrix = op.matrix - 1j * np.diag(profile)
    return SectorOperator(op.sector, matrix, op.kind, op.grid, op.alpha)


def free_matrix_operator(grid: RadialGrid, alpha: float,
                         sector: SectorIndex = RADIAL) -> SectorOperator:
    """
    diag(-Delta + alpha^2, Delta - alpha^2): the matrix flow without potential.
    """
    scalar = (laplacian_sparse(grid, sector) + alpha ** 2 * sparse.identity(grid.n)).toarray()
    zero = np.zeros_like(scalar)
    matrix = np.block([[scalar, zero], [zero, -scalar]])
    return SectorOperator(sector, matrix, OperatorKind.FREE, grid, alpha)


class SpectralPropagator:
    """
    exp(-i t H) for a fixed frame matrix.
    """

    def __init__(self, op: SectorOperator, cluster_radius: Optional[float] = None,
                 max_condition: float = MAX_CONDITION):
        matrix = np.asarray(op.matrix, dtype=complex)
        self.dimension = matrix.shape[0]
        self.hermitian = op.symmetry_defect() < 1e-13
        if self.hermitian:
            values, vectors = eigh(matrix)
            self._values, self._vectors, self._inverse = values, vectors, vectors.conj().T
            self._cluster = 0
            return

        alpha = op.alpha if op.alpha is not None else 1.0
        radius = cluster_radius if cluster_radius is not None else 0.25 * alpha ** 2
        T, Z, sdim = schur(matrix, output='complex', sort=lambda x: abs(x) < radius)
        k = int(sdim)
        self._cluster = k
        self._schur_vectors = Z
        T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
        coupling = solve_sylvester(T11, -T22, -T12) if k else np.zeros((0, T22.shape[0]))
        self._cluster_block = T11
        self._exponentials: Dict[float, np.ndarray] = {}
        self._coupling = coupling
        values, vectors = eig(T22)
        condition = np.linalg.cond(vectors)
        coupling_size = float(np.abs(coupling).max(initial=0.0))
        if not np.isfinite(condition) or condition > max_condition or coupling_size > max_condition:
            raise IllConditionedBasis(
                "eigenbasis too ill-conditioned for spectral propagation",
                {'condition': float(condition), 'coupling': coupling_size},
            )
        self._values = values
        self._vectors = vectors
        self._inverse = np.linalg.inv(vectors)
        logger.debug("spectral propagator: cluster %d, cond %.3g", k, condition)

    def _cluster_exponential(self, t: float) -> np.ndarray:
        if t not in self._exponentials:
            self._exponentials[t] = expm(-1j * t * self._cluster_block)
        return self._exponentials[t]

    def evolve(self, q: np.ndarray, t: float) -> np.ndarray:
        if self.hermitian:
            return self._vectors @ (np.exp(-1j * t * self._values) * (self._inverse @ q))
        k = self._cluster
        x = self._schur_vectors.conj().T @ q
        head, tail = x[:k] - self._coupling @ x[k:], x[k:]
        tail = self._vectors @ (np.exp(-1j * t * self._values) * (self._inverse @ tail))
        if k:
            head = self._cluster_exponential(float(t)) @ head
            head = head + self._coupling @ tail
        return self._schur_vectors @ np.concatenate((head, tail))


@functools.lru_cache(maxsize=8)
def spectral_propagator(op: SectorOperator) -> SpectralPropagator:
    return SpectralPropagator(op)


class _CrankNicolson:

    def __init__(self, op: SectorOperator):
        self.matrix = sparse.csc_array(np.asarray(op.matrix, dtype=complex))
        self.identity = sparse.identity(op.dimension, dtype=complex, format='csc')
        self._factors = {}

    def _factor(self, dt: float):
        key = round(dt, 15)
        if key not in self._factors:
            self._factors[key] = splu((self.identity + 0.5j * dt * self.matrix).tocsc())
        return self._factors[key]

    def step(self, q: np.ndarray, dt: float, f0=None, f1=None) -> np.ndarray:
        rhs = q - 0.5j * dt * (self.matrix @ q)
        if f0 is not None:
            rhs = rhs - 0.5j * dt * (f0 + f1)
        return self._factor(dt).solve(rhs)


def _forcing_value(forcing: Optional[Forcing], t_grid: np.ndarray, t: float):
    if forcing is None:
        return None
    if callable(forcing):
        return np.asarray(forcing(t), dtype=complex)
    samples = np.asarray(forcing, dtype=complex)
    if samples.shape[0] != t_grid.size:
        raise InvalidArgument("forcing samples must match the time grid")
    index = int(np.clip(np.searchsorted(t_grid, t, side='right') - 1, 0, t_grid.size - 2))
    span = t_grid[index + 1] - t_grid[index]
    theta = 0.0 if span == 0 else (t - t_grid[index]) / span
    return (1.0 - theta) * samples[index] + theta * samples[index + 1]


def _to_frame(op: SectorOperator, field: Optional[np.ndarray]):
    return None if field is None else op.to_frame(field)


def _substeps(span: float, max_step: float) -> int:
    return max(1, int(math.ceil(span / max_step - 1e-12)))


def propagate_linear(H: SectorOperator, u0: FieldState, t_grid: TimeGrid,
                     forcing: Optional[Forcing] = None, method: str = 'auto',
                     dt: Optional[float] = None) -> List[FieldState]:
    """
    Solve i u' = H u + F from u0 and return the states at the times of `t_grid`.

    `method` is 'eigen', 'cn' or 'auto' (eigen up to 800 nodes, Crank-Nicolson beyond and
    whenever the eigenbasis is ill-conditioned).  Forcing enters through the trapezoid rule.
    """
    if u0.sector != H.sector or u0.components.shape[1] != H.grid.n:
        raise InvalidArgument("initial state does not live on the operator's sector and grid")
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) < 0) or times[0] < u0.time:
        raise InvalidArgument("time grid must be non-decreasing and start at or after u0.time")
    alpha = H.alpha if H.alpha is not None else 1.0
    dt = dt if dt is not None else CN_DT / alpha ** 2

    if method not in ('auto', 'eigen', 'cn'):
        raise InvalidArgument(f"unknown propagation method {method!r}")
    propagator = None
    if method == 'eigen' or (method == 'auto' and H.grid.n <= EIGEN_MAX_NODES):
        try:
            propagator = spectral_propagator(H)
        except IllConditionedBasis:
            if method == 'eigen':
                raise
            logger.warning("falling back to Crank-Nicolson propagation")
    stepper = _CrankNicolson(H) if propagator is None else None
    max_step = dt if propagator is None else 0.05 / alpha ** 2

    q = H.to_frame(u0.components)
    t = u0.time
    states = []
    for target in times:
        span = target - t
        if span > 0:
            m = 1 if forcing is None and propagator is not None else _substeps(span, max_step)
            h = span / m
            for i in range(m):
                t0 = t + i * h
                f0 = _to_frame(H, _forcing_value(forcing, times, t0))
                f1 = _to_frame(H, _forcing_value(forcing, times, t0 + h))
                if propagator is not None:
                    q = propagator.evolve(q, h)
                    if f0 is not None:
                        q = q - 0.5j * h * (propagator.evolve(f0, h) + f1)
                else:
                    q = stepper.step(q, h, f0, f1)
            t = float(target)
        field = H.from_frame(q)
        flagged = u0.j_invariant and forcing is None and j_defect(field) <= 1e-8
        states.append(FieldState(float(target), field, H.sector, flagged))
    return states


def _pair_energy(grid: RadialGrid, field: PairField, sector: SectorIndex) -> float:
    norms = [grid.norm(component) ** 2 for component in field]
    total = sum(norms)
    if total == 0:
        return 0.0
    energies = [kinetic_energy(grid, component, sector) for component in field]
    return sum(e * n for e, n in zip(energies, norms)) / total


def stability_trace(H: SectorOperator, P: ProjectionSet, probe: PairField, T: float,
                    samples: int = 101, project: bool = True,
                    reproject: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    ||exp(-i t H) u|| / ||u|| for u = P_s probe (the raw probe with `project=False`).

    The state is projected once at t = 0 and then evolves freely.  `reproject=True` applies P_s
    again at every sample, which gives a filtered trace of the stable flow alone.
    """
    grid = H.grid
    u = P.P_s(probe) if project else np.asarray(probe, dtype=complex)
    start = grid.norm(u)
    times = np.linspace(0.0, T, samples)
    norms = [1.0]
    state = FieldState(0.0, u, H.sector)
    for t in times[1:]:
        state = propagate_linear(H, state, [t])[0]
        if reproject:
            state = FieldState(t, P.P_s(state.components), H.sector)
        norms.append(grid.norm(state.components) / start)
    return times, np.asarray(norms)


def log_norm_slope(times: np.ndarray, norms: np.ndarray) -> float:
    fit = linregress(times, np.log(np.maximum(norms, 1e-300)))
    return float(fit.slope)


def measure_stability(H: SectorOperator, P: ProjectionSet, probes: Sequence[PairField],
                      T: float, samples: int = 101, project: bool = True) -> float:
    """
    max over probes and sample times of ||exp(-i t H) P_s u|| / ||P_s u||.  Probes whose stable
    part is negligible are skipped.
    """
    grid = H.grid
    ratios = []
    for index, probe in enumerate(probes):
        if isinstance(probe, FieldState):
            probe = probe.components
        stable = P.P_s(probe) if project else probe
        if grid.norm(stable) <= DEGENERATE_PROBE * grid.norm(probe):
            logger.warning("probe %d has no stable component (|P_s u| = %.2e), skipped",
                           index, grid.norm(stable))
            continue
        times, norms = stability_trace(H, P, probe, T, samples, project)
        ratios.append(float(norms.max()))
        logger.info("probe %d: max ratio %.4g, log slope %.3e",
                    index, ratios[-1], log_norm_slope(times, norms))
    if not ratios:
        raise InvalidArgument("no probe with a stable component")
    return max(ratios)


def weighted_norm(grid: RadialGrid, field: PairField, power: float = DECAY_WEIGHT_POWER) -> float:
    weight = (1.0 + grid.nodes ** 2) ** (-power / 2.0)
    return grid.norm(weight * np.asarray(field))


def _outer_fraction(grid: RadialGrid, field: PairField) -> float:
    field = np.asarray(field)
    total = grid.norm(field)
    if total == 0:
        return 0.0
    outer = grid.nodes >= (1.0 - REFLECTION_FRACTION) * grid.r_max
    return grid.norm(field * outer) / total


def measure_local_decay(H: SectorOperator, P: Optional[ProjectionSet], probe: PairField, T: float,
                        samples: int = 200, sponge: bool = True) -> DecayReport:
    """
    Weighted norm ||<r>^-2 u(t)|| of the stable evolution and its log-log slope over the
    pre-reflection window.  With `P` given the probe is projected by P_s and the growth rate of
    the raw probe's coefficient <u(t), f~+> is fitted as well.
    """
    grid = H.grid
    alpha = H.alpha if H.alpha is not None else 1.0
    op = with_sponge(H) if sponge else H
    u0 = P.P_s(probe) if P is not None else np.asarray(probe, dtype=complex)
    cap = max(_pair_energy(grid, u0, H.sector), alpha ** 2 * 1e-6)
    end = min(T, grid.r_max / (4.0 * math.sqrt(cap)))
    times = np.linspace(0.0, end, samples + 1)

    norms = [weighted_norm(grid, u0)]
    truncated = False
    state = FieldState(0.0, u0, H.sector)
    window_end = end
    for t in times[1:]:
        state = propagate_linear(op, state, [t])[0]
        field = P.P_s(state.components) if P is not None else state.components
        state = FieldState(t, field, H.sector)
        norms.append(weighted_norm(grid, field))
        if not truncated and _outer_fraction(grid, field) > REFLECTION_LEVEL:
            truncated = True
            window_end = float(t)
            warnings.warn(
                f"radiation reached the outer {REFLECTION_FRACTION:.0%} of the grid at t={t:.3g};"
                f" decay fit truncated",
                WindowTruncatedWarning,
            )
    norms = np.asarray(norms)
    start = max(1.0 / alpha ** 2, window_end / 4.0)
    mask = (times >= start) & (times <= window_end) & (times > 0)
    if mask.sum() < 3:
        raise InvalidArgument(
            "decay window holds too few samples", {'start': start, 'end': window_end}
        )
    fit = linregress(np.log(times[mask]), np.log(norms[mask]))

    growth = None
    if P is not None:
        coefficients = []
        raw = FieldState(0.0, np.asarray(probe, dtype=complex), H.sector)
        dual = P.P_im_plus.dual[0]
        for t in times[1:]:
            raw = propagate_linear(H, raw, [t])[0]
            coefficients.append(abs(dual @ raw.components.reshape(-1)))
        coefficients = np.asarray(coefficients)
        late = times[1:] >= start
        if np.all(coefficients[late] > 0):
            growth = float(linregress(times[1:][late], np.log(coefficients[late])).slope)

    report = DecayReport(
        times=[float(t) for t in times],
        weighted_norms=[float(x) for x in norms],
        fitted_exponent=float(fit.slope),
        growth_rate=growth,
        r_squared=float(fit.rvalue ** 2),
        window=(float(start), float(window_end)),
        truncated=truncated,
    )
    logger.info("local decay exponent %.3f (R^2 %.3f) on [%.3g, %.3g]",
                report.fitted_exponent, report.r_squared, start, window_end)
    return report


def _validate_rate(sigma: float) -> None:
    if not math.isfinite(sigma) or sigma <= 0:
        raise InvalidArgument(f"rate sigma must be positive, got {sigma}")


def solve_hyperbolic_ode(sigma: float, x0: Sequence[float], f: ScalarForcing, T: float,
                         samples: int = 201) -> HyperbolicSolution:
    """
    x1' = sigma x1 + f1, x2' = -sigma x2 + f2 on [0, T].

    x1 is taken from the bounded representation x1(t) = -int_t^inf exp(-sigma (s - t)) f1(s) ds,
    integrated backward from far beyond T; x2 is integrated forward from x0[1].  The defect
    |x0[0] + int_0^inf exp(-sigma t) f1(t) dt| vanishes exactly when x0 gives a bounded solution.
    """
    _validate_rate(sigma)
    times = np.linspace(0.0, T, samples)
    horizon = T + 40.0 / sigma

    backward = solve_ivp(
        lambda t, y: [sigma * y[0] + f(t)[0]], (horizon, 0.0), [0.0],
        method='DOP853', rtol=1e-11, atol=1e-13, dense_output=True,
    )
    forward = solve_ivp(
        lambda t, y: [-sigma * y[0] + f(t)[1]], (0.0, T), [float(x0[1])],
        method='DOP853', rtol=1e-11, atol=1e-13, dense_output=True,
    )
    trajectory = np.column_stack((backward.sol(times)[0], forward.sol(times)[0]))

    integral, _ = quad(lambda t: math.exp(-sigma * t) * f(t)[0], 0.0, np.inf, limit=200)
    defect = abs(float(x0[0]) + integral)
    logger.debug("hyperbolic ODE: stability defect %.3e", defect)
    return HyperbolicSolution(times, trajectory, defect)


def integrate_forward(sigma: float, x0: Sequence[float], f: ScalarForcing, T: float,
                      samples: int = 201) -> HyperbolicSolution:
    """
    Plain forward integration of both components; grows like exp(sigma t) unless the
    stability condition holds.
    """
    _validate_rate(sigma)
    times = np.linspace(0.0, T, samples)

    def rhs(t, y):
        forcing = f(t)
        return [sigma * y[0] + forcing[0], -sigma * y[1] + forcing[1]]

    sol = solve_ivp(rhs, (0.0, T), [float(x0[0]), float(x0[1])], method='DOP853',
                    rtol=1e-11, atol=1e-13, dense_output=True)
    integral, _ = quad(lambda t: math.exp(-sigma * t) * f(t)[0], 0.0, np.inf, limit=200)
    return HyperbolicSolution(times, sol.sol(times).T, abs(float(x0[0]) + integral))


def exponential_forcing(rate: float) -> Callable[[float], Tuple[float, float]]:
    """
    f = (exp(-rate t), 0), the forcing with a closed-form bounded solution.
    """
    return lambda t: (math.exp(-rate * t), 0.0)
