"""
Radial cubic NLS  i psi_t + Delta psi = -|psi|^2 psi  and the stable-manifold experiment.

The integrator splits the flow into Crank-Nicolson steps of the free radial flow and the exact
pointwise phase rotation psi -> exp(i |psi|^2 dt) psi.  Both pieces are unitary in the orthonormal
frame, so the discrete mass is conserved to rounding.  `scheme='yoshida4'` composes three
symmetric steps into a fourth-order method.

Shooting works on J-invariant data psi0 = phi + eps p + h q, with p the normalized first component
of (I - P_u+) R0 and q the normalized first component of f+, and bisects on h for the value whose
run stays near the soliton orbit.
"""
from concurrent.futures import (
    ThreadPoolExecutor,
)
from dataclasses import (
    dataclass,
    field,
)
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

import numpy as np
from scipy import (
    sparse,
)
from scipy.sparse.linalg import (
    splu,
)
from scipy.stats import (
    linregress,
)

from soliton_lab.exceptions import (
    BlowUpDetected,
    BracketFailure,
    Inconclusive,
    InvalidArgument,
    NoConvergence,
)
from soliton_lab.galilei_transforms import (
    GalileiFrame,
    SolitonParams,
    frame_change_Z_to_U,
)
from soliton_lab.ground_state import (
    GroundState,
    scaled_d_alpha,
    scaled_profile,
)
from soliton_lab.projections import (
    ChannelLayout,
    build_projections,
    build_root_family,
    root_correction,
    solve_aj_system,
)
from soliton_lab.radial_core import (
    RADIAL,
    RadialGrid,
    laplacian_sparse,
)
from soliton_lab.settings import (
    worker_count,
)
from soliton_lab.spectral_analysis import (
    EigenPair,
    VariationalMode,
    compute_sigma,
    eigenpair_imaginary,
)
from soliton_lab.typing import (
    PairField,
)

logger = logging.getLogger(__name__)

NLS_DT_LIMIT = 1e-3
BLOW_UP_FACTOR = 50.0
MODULATION_TOL = 1e-10
MODULATION_MAX_ITER = 50
MODULATION_RADIUS = 0.3
EXIT_THRESHOLD = 0.2
BRACKET_TOL = 1e-3
SAMPLE_INTERVAL = 0.1
TRACKING_BOUND = 5.0

_CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA_WEIGHTS = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))
SCHEMES = {
    'strang': (1.0,),
    'yoshida4': YOSHIDA_WEIGHTS,
}


@dataclass(frozen=True, eq=False)
class NLSTrajectory:
    times: np.ndarray
    states: Optional[np.ndarray]
    mass: np.ndarray
    energy: np.ndarray
    grid: RadialGrid
    alpha: float
    scheme: str
    dt: float
    stopped_early: bool = False

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        if self.states is None:
            raise InvalidArgument("trajectory was run without storing states")
        return self.states[-1]

    @property
    def mass_drift(self) -> float:
        return float(np.abs(self.mass - self.mass[0]).max() / self.mass[0])

    @property
    def energy_drift(self) -> float:
        scale = max(abs(self.energy[0]), 1e-300)
        return float(np.abs(self.energy - self.energy[0]).max() / scale)

    def as_dict(self) -> Dict[str, object]:
        return {
            'scheme': self.scheme,
            'dt': self.dt,
            'alpha': self.alpha,
            'final_time': self.final_time,
            'samples': int(self.times.size),
            'mass_drift': self.mass_drift,
            'energy_drift': self.energy_drift,
            'stopped_early': self.stopped_early,
        }


class _SplitStepper:
    """
    exp(-i tau T) by its Cayley approximation, one LU factorization per distinct step.
    """

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        self.kinetic = laplacian_sparse(grid, RADIAL).astype(complex)
        self.identity = sparse.identity(grid.n, dtype=complex, format='csc')
        self.inverse_weights = 1.0 / grid.weights
        self._factors = {}

    def _factor(self, tau: float):
        key = round(tau, 15)
        if key not in self._factors:
            lhs = (self.identity + 0.5j * tau * self.kinetic).tocsc()
            rhs = (self.identity - 0.5j * tau * self.kinetic).tocsc()
            self._factors[key] = (splu(lhs), rhs)
        return self._factors[key]

    def free(self, q: np.ndarray, tau: float) -> np.ndarray:
        solver, rhs = self._factor(tau)
        return solver.solve(rhs @ q)

    def intensity(self, q: np.ndarray) -> np.ndarray:
        return np.abs(q) ** 2 * self.inverse_weights

    def step(self, q: np.ndarray, tau: float) -> np.ndarray:
        q = self.free(q, 0.5 * tau)
        q = q * np.exp(1j * tau * self.intensity(q))
        return self.free(q, 0.5 * tau)

    def energy(self, q: np.ndarray) -> float:
        kinetic = float(np.vdot(q, self.kinetic @ q).real)
        return kinetic - 0.5 * float(np.sum(self.intensity(q) ** 2 * self.grid.weights))


def evolve_nls(psi0: np.ndarray, T: float, dt: float, *, grid: RadialGrid, alpha: float,
               sample_interval: Optional[float] = None,
               monitor: Optional[Callable[[float, np.ndarray], bool]] = None,
               scheme: str = 'strang', store_states: bool = True) -> NLSTrajectory:
    """
    Integrate the radial NLS from `psi0` up to time T with steps of at most dt.

    States, mass and energy are sampled every `sample_interval` (default 0.1 / alpha^2).  A
    `monitor(t, psi)` returning True stops the run at that sample.  Raises BlowUpDetected when
    max |psi| passes 50 alpha.
    """
    if scheme not in SCHEMES:
        raise InvalidArgument(f"unknown splitting scheme {scheme!r}", {'known': sorted(SCHEMES)})
    if not alpha > 0:
        raise InvalidArgument(f"Frequency alpha must be positive, got {alpha}")
    if not 0 < dt <= NLS_DT_LIMIT / alpha ** 2 * (1.0 + 1e-12):
        raise InvalidArgument(
            "time step must lie in (0, 1e-3 / alpha^2]", {'dt': dt, 'alpha': alpha}
        )
    if not T >= 0:
        raise InvalidArgument(f"final time must be non-negative, got {T}")
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (grid.n,) or not np.all(np.isfinite(psi0)):
        raise InvalidArgument("initial state must be finite radial samples on the grid")

    steps = max(1, int(math.ceil(T / dt - 1e-9))) if T > 0 else 0
    tau = T / steps if steps else dt
    if sample_interval is None:
        sample_interval = SAMPLE_INTERVAL / alpha ** 2
    stride = max(1, int(round(sample_interval / tau)))
    weights = SCHEMES[scheme]
    limit = (BLOW_UP_FACTOR * alpha) ** 2

    stepper = _SplitStepper(grid)
    q = grid.to_weighted(psi0)
    times, states, mass, energy = [], [], [], []

    def sample(t):
        psi = grid.from_weighted(q)
        times.append(t)
        mass.append(float(np.vdot(q, q).real))
        energy.append(stepper.energy(q))
        if store_states:
            states.append(psi)
        return monitor is not None and bool(monitor(t, psi))

    stopped = sample(0.0)
    for k in range(1, steps + 1):
        if stopped:
            break
        for weight in weights:
            q = stepper.step(q, weight * tau)
        t = k * tau
        peak = float(stepper.intensity(q).max())
        if not np.isfinite(peak) or peak > limit:
            raise BlowUpDetected(
                "solution left the blow-up bound", t,
                {'max_abs': math.sqrt(peak), 'bound': BLOW_UP_FACTOR * alpha},
            )
        if k % stride == 0 or k == steps:
            stopped = sample(t)

    logger.debug("NLS run (%s, dt=%.2e): %d samples up to t=%.4g", scheme, tau, len(times),
                 times[-1])
    return NLSTrajectory(
        times=np.asarray(times),
        states=np.asarray(states) if store_states else None,
        mass=np.asarray(mass),
        energy=np.asarray(energy),
        grid=grid,
        alpha=alpha,
        scheme=scheme,
        dt=tau,
        stopped_early=stopped and times[-1] < T,
    )


def soliton_deviation(trajectory: NLSTrajectory, gs: GroundState) -> np.ndarray:
    """
    ||psi(t) - exp(i t alpha^2) phi|| / ||phi|| at every sample.
    """
    if trajectory.states is None:
        raise InvalidArgument("trajectory was run without storing states")
    rotation = np.exp(1j * trajectory.times * gs.alpha ** 2)
    diff = trajectory.states - rotation[:, None] * gs.phi[None, :]
    return np.sqrt(np.sum(gs.grid.weights * np.abs(diff) ** 2, axis=1)) / gs.norm


def orbit_distance(trajectory: NLSTrajectory, gs: GroundState) -> np.ndarray:
    """
    min over gamma of ||psi(t) - exp(i gamma) phi||: the distance to the fixed-frequency orbit.
    """
    if trajectory.states is None:
        raise InvalidArgument("trajectory was run without storing states")
    weights = gs.grid.weights
    norms = np.sum(weights * np.abs(trajectory.states) ** 2, axis=1)
    overlap = np.abs(np.sum(weights * trajectory.states * gs.phi, axis=1))
    return np.sqrt(np.maximum(norms + gs.mass - 2.0 * overlap, 0.0))


def _orthogonality(gs: GroundState, psi: np.ndarray, gamma: float, alpha: float):
    grid = gs.grid
    phi = scaled_profile(gs, alpha)
    dphi = scaled_d_alpha(gs, alpha)
    rotated = np.exp(-1j * gamma) * psi
    values = np.array([
        grid.inner(rotated.real - phi, phi).real,
        grid.inner(rotated.imag, dphi).real,
    ])
    return values, phi, dphi, rotated


def modulation_decompose(psi: np.ndarray, guess: SolitonParams, *, gs: GroundState,
                         tol: float = MODULATION_TOL,
                         max_iter: int = MODULATION_MAX_ITER) -> Tuple[SolitonParams, PairField]:
    """
    Newton iteration on (gamma, alpha) for <Z, xi_1> = <Z, xi_2> = 0, Z = (R, conj R) and
    R = psi - exp(i gamma) phi(., alpha).  Returns the parameters and Z.
    """
    if not guess.radial:
        raise InvalidArgument("radial decomposition needs v = D = 0", {'v': guess.v, 'D': guess.D})
    grid = gs.grid
    psi = np.asarray(psi, dtype=complex)
    gamma, alpha = guess.gamma, guess.alpha
    for iteration in range(max_iter):
        values, phi, dphi, rotated = _orthogonality(gs, psi, gamma, alpha)
        scale = grid.inner(phi, phi).real
        if np.abs(values).max() <= tol * scale:
            break
        step = 1e-6 * alpha
        plus, *_ = _orthogonality(gs, psi, gamma, alpha + step)
        minus, *_ = _orthogonality(gs, psi, gamma, alpha - step)
        jacobian = np.column_stack((
            [grid.inner(rotated.imag, phi).real, -grid.inner(rotated.real, dphi).real],
            (plus - minus) / (2.0 * step),
        ))
        try:
            delta = np.linalg.solve(jacobian, -values)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("modulation Jacobian is singular", {'alpha': alpha}) from exc
        gamma, alpha = gamma + delta[0], alpha + delta[1]
        if not (np.isfinite(gamma) and np.isfinite(alpha)) or alpha <= 0:
            raise NoConvergence("modulation left the soliton family", {'iteration': iteration})
    else:
        raise NoConvergence(
            "modulation did not converge", {'max_iter': max_iter, 'residual': np.abs(values).max()}
        )

    residual = psi - np.exp(1j * gamma) * phi
    size = grid.norm(residual)
    if size > MODULATION_RADIUS * math.sqrt(scale):
        raise NoConvergence(
            "state is too far from the soliton family", {'residual': size, 'alpha': alpha}
        )
    return guess.replace(gamma=gamma, alpha=alpha), np.stack((residual, np.conj(residual)))


def modulated_field(Z: PairField, params: SolitonParams) -> PairField:
    """
    U at the frozen path point: Z seen in the frame rotating with the phase gamma.
    """
    return frame_change_Z_to_U(Z, GalileiFrame.from_params(params), 0.0)


def unstable_coefficient(Z: PairField, params: SolitonParams, f_plus: EigenPair) -> float:
    """
    b+ = <U, f~+>; real for J-invariant U.
    """
    U = modulated_field(Z, params)
    return f_plus.grid.inner(U, f_plus.left_vec).real


def nonlinearity(U: PairField, phi: np.ndarray) -> PairField:
    """
    N(U) at zero phase: the part of |phi + U1|^2 (phi + U1) beyond first order, with sign.
    """
    u1 = np.asarray(U[0], dtype=complex)
    density = np.abs(u1) ** 2
    first = -(2.0 * density * phi + phi * u1 ** 2 + density * u1)
    return np.stack((first, -np.conj(first)))


def modulation_rhs(Z: PairField, params: SolitonParams, params_ref: SolitonParams, *,
                   gs: GroundState) -> np.ndarray:
    """
    The eight right-hand sides -i <U, E xi_j> - i <N(U), xi_j> at the frozen path point, each
    divided by the size of its pairing partner in G.  E = (alpha_ref^2 - alpha^2) sigma_3.

    Z is radial, so only the rows of xi_1 and xi_2 can be nonzero.
    """
    if not (params.radial and params_ref.radial):
        raise InvalidArgument("modulation right-hand sides are computed for radial runs only")
    layout = ChannelLayout.FULL
    family = build_root_family(gs, params, layout)
    grid = family.grid
    U = modulated_field(Z, params)
    phi = scaled_profile(gs, params.alpha)
    u_field = layout.embed(grid, U)
    n_field = layout.embed(grid, nonlinearity(U, phi))
    shift = params_ref.alpha ** 2 - params.alpha ** 2
    sigma3 = np.array([1.0, -1.0])[None, :, None]
    partner = np.abs(family.pairing).max(axis=1)

    values = np.zeros(family.size)
    for j in range(family.size):
        xi = family.xi[j]
        total = layout.inner(grid, u_field, shift * sigma3 * xi)
        total += layout.inner(grid, n_field, xi)
        values[j] = (-1j * total).real / partner[j]
    return values


@dataclass(frozen=True, eq=False)
class TrialRun:
    h: float
    sign: int
    exit_time: float
    reason: str
    times: np.ndarray
    b_plus: np.ndarray
    residual_norms: np.ndarray

    @property
    def survived(self) -> bool:
        return self.reason == 'survived'


@dataclass(eq=False)
class ShootingResult:
    epsilon: float
    h_star: float
    bracket: Tuple[float, float]
    bracket_width: float
    departure_time: Dict[float, float]
    b_plus_times: np.ndarray
    b_plus_series: np.ndarray
    residual_norms: np.ndarray
    survived: bool
    sigma: float
    T_run: float
    exit_threshold: float
    a_j: List[float] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(self.residual_norms.max()) if self.residual_norms.size else 0.0

    @property
    def tracks_orbit(self) -> bool:
        """
        The run at h_star survived to T_run with sup ||R(t)|| <= 5 eps.
        """
        if not self.survived:
            return False
        return self.epsilon == 0 or self.max_residual <= TRACKING_BOUND * self.epsilon

    def as_dict(self) -> Dict[str, object]:
        return {
            'epsilon': self.epsilon,
            'h_star': self.h_star,
            'bracket': list(self.bracket),
            'bracket_width': self.bracket_width,
            'departure_time': {
                repr(h): (t if math.isfinite(t) else None)
                for h, t in sorted(self.departure_time.items())
            },
            'survived': self.survived,
            'tracks_orbit': self.tracks_orbit,
            'max_residual': self.max_residual,
            'sigma': self.sigma,
            'T_run': self.T_run,
            'exit_threshold': self.exit_threshold,
            'a_j': list(self.a_j),
        }


@dataclass(frozen=True, eq=False)
class _ShootingSetup:
    gs: GroundState
    f_plus: EigenPair
    base: np.ndarray
    direction: np.ndarray
    T_run: float
    threshold: float
    dt: float
    sample_interval: float
    scheme: str


def _unit_first_component(pair: np.ndarray, grid: RadialGrid, what: str) -> np.ndarray:
    first = np.asarray(pair[0], dtype=complex)
    size = grid.norm(first)
    if size == 0 or not np.isfinite(size):
        raise InvalidArgument(f"{what} has no component left to normalize")
    return first / size


def _run_trial(setup: _ShootingSetup, h: float) -> TrialRun:
    gs = setup.gs
    grid = gs.grid
    psi0 = setup.base + h * setup.direction
    record = {'params': SolitonParams(alpha=gs.alpha), 'last': 0.0,
              'reason': 'survived', 'exit': math.inf}
    times, b_plus, residuals = [], [], []

    def monitor(t, psi):
        params = record['params']
        guess = params.replace(gamma=params.gamma + (t - record['last']) * params.alpha ** 2)
        try:
            params, Z = modulation_decompose(psi, guess, gs=gs)
        except NoConvergence:
            record.update(reason='modulation', exit=t)
            return True
        record.update(params=params, last=t)
        b = unstable_coefficient(Z, params, setup.f_plus)
        times.append(t)
        b_plus.append(b)
        residuals.append(grid.norm(Z[0]))
        if abs(b) > setup.threshold:
            record.update(reason='threshold', exit=t)
            return True
        return False

    try:
        evolve_nls(psi0, setup.T_run, setup.dt, grid=grid, alpha=gs.alpha,
                   sample_interval=setup.sample_interval, monitor=monitor,
                   scheme=setup.scheme, store_states=False)
    except BlowUpDetected as exc:
        record.update(reason='blow-up', exit=exc.exit_time)

    if b_plus:
        sign = 1 if b_plus[-1] >= 0 else -1
    else:
        sign = 1 if h >= 0 else -1
    logger.debug("trial h=%.6e: %s at t=%.4g, sign %+d", h, record['reason'], record['exit'], sign)
    return TrialRun(h, sign, float(record['exit']), record['reason'],
                    np.asarray(times), np.asarray(b_plus), np.asarray(residuals))


def _check_monotone(trials: Dict[float, TrialRun]) -> None:
    signs = [trials[h].sign for h in sorted(trials)]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if changes > 1:
        raise BracketFailure(
            "departure sign is not monotone in h",
            {'h': sorted(trials), 'signs': signs},
        )


def _prepare(gs: GroundState, R0_profile: np.ndarray, epsilon: float, T_run: Optional[float],
             exit_threshold: float, dt: Optional[float], sample_interval: Optional[float],
             scheme: str, alpha_inf: Optional[float], mode: Optional[VariationalMode]):
    grid = gs.grid
    mode = mode if mode is not None else compute_sigma(gs)
    plus = eigenpair_imaginary(gs, 1, mode)
    minus = eigenpair_imaginary(gs, -1, mode)
    layout = ChannelLayout.RADIAL
    family = build_root_family(gs, layout=layout)
    projections = build_projections(gs, family, (plus, minus))

    base = gs.phi.astype(complex)
    if epsilon > 0:
        profile = np.asarray(R0_profile, dtype=complex)
        if profile.shape != (grid.n,):
            raise InvalidArgument("R0 profile must be radial samples on the grid")
        pair = layout.embed(grid, np.stack((profile, np.conj(profile))))
        stable = pair - projections.P_u_plus(pair)
        base = base + epsilon * _unit_first_component(stable[0], grid, "projected R0 profile")

    f_size = grid.norm(plus.right_vec[0])
    direction = plus.right_vec[0] / f_size
    a_j = np.zeros(family.size)
    if alpha_inf is not None and alpha_inf != gs.alpha:
        xi_ref = build_root_family(gs, SolitonParams(alpha=alpha_inf), layout)
        a_j = solve_aj_system(family, plus, 1.0 / f_size, xi_ref)
        direction = direction + root_correction(family, a_j)[0, 0]
        logger.info("a_j per unit h at alpha_inf=%g: %s", alpha_inf, a_j)

    alpha2 = gs.alpha ** 2
    if sample_interval is None:
        sample_interval = SAMPLE_INTERVAL / alpha2
    if T_run is None:
        T_run = max(10.0 / mode.sigma, 30.0 / alpha2)
    setup = _ShootingSetup(
        gs=gs,
        f_plus=plus,
        base=base,
        direction=direction,
        T_run=float(T_run),
        threshold=exit_threshold * gs.norm,
        dt=dt if dt is not None else NLS_DT_LIMIT / alpha2,
        sample_interval=sample_interval,
        scheme=scheme,
    )
    return setup, mode.sigma, a_j


def shoot_manifold(gs: GroundState, R0_profile: np.ndarray, epsilon: float,
                   T_run: Optional[float] = None, exit_threshold: float = EXIT_THRESHOLD, *,
                   dt: Optional[float] = None, sample_interval: Optional[float] = None,
                   scheme: str = 'strang', offsets: Sequence[float] = (),
                   alpha_inf: Optional[float] = None, bracket_tol: float = BRACKET_TOL,
                   mode: Optional[VariationalMode] = None) -> ShootingResult:
    """
    Bisection on the coefficient h of the unstable direction, from the bracket +-eps/2 (widened
    once to +-eps), until the bracket is narrower than bracket_tol * eps^2.

    `exit_threshold` is relative to ||phi||.  `offsets` adds trials at h_star + offset for the
    departure-time law; `alpha_inf` adds the a_j eta_j correction for a drifted frequency.
    The result's `tracks_orbit` tells whether the run at h_star met the tracking bound.
    """
    if not math.isfinite(epsilon) or epsilon < 0:
        raise InvalidArgument(f"epsilon must be non-negative, got {epsilon}")
    if not exit_threshold > 0:
        raise InvalidArgument(f"exit threshold must be positive, got {exit_threshold}")
    setup, sigma, a_j = _prepare(gs, R0_profile, epsilon, T_run, exit_threshold, dt,
                                 sample_interval, scheme, alpha_inf, mode)
    trials: Dict[float, TrialRun] = {}

    def trial(h):
        run = _run_trial(setup, h)
        trials[h] = run
        return run

    if epsilon == 0:
        lo = hi = 0.0
    else:
        lo, hi = -0.5 * epsilon, 0.5 * epsilon
        sign_lo, sign_hi = trial(lo).sign, trial(hi).sign
        if sign_lo == sign_hi:
            logger.warning("bracket +-%.3g exits with sign %+d on both ends, widening",
                           hi, sign_lo)
            lo, hi = 2.0 * lo, 2.0 * hi
            sign_lo, sign_hi = trial(lo).sign, trial(hi).sign
            if sign_lo == sign_hi:
                raise BracketFailure(
                    "both bracket ends exit with the same sign",
                    {'epsilon': epsilon, 'bracket': (lo, hi), 'sign': sign_lo},
                )
        target = bracket_tol * epsilon ** 2
        while hi - lo > target:
            mid = 0.5 * (lo + hi)
            if trial(mid).sign == sign_lo:
                lo = mid
            else:
                hi = mid
            _check_monotone(trials)
        logger.info("eps=%.3g: h_star bracket [%.6e, %.6e] after %d trials",
                    epsilon, lo, hi, len(trials))

    h_star = 0.5 * (lo + hi)
    final = trial(h_star)
    for offset in offsets:
        trial(h_star + offset)
    if not final.survived:
        logger.warning("run at h_star=%.6e left the orbit (%s at t=%.4g)",
                       h_star, final.reason, final.exit_time)
    elif epsilon > 0 and final.residual_norms.max() > TRACKING_BOUND * epsilon:
        logger.warning("run at h_star tracks the orbit only to %.3g (eps=%.3g)",
                       final.residual_norms.max(), epsilon)

    return ShootingResult(
        epsilon=epsilon,
        h_star=h_star,
        bracket=(lo, hi),
        bracket_width=hi - lo,
        departure_time={h: run.exit_time for h, run in trials.items()},
        b_plus_times=final.times,
        b_plus_series=final.b_plus,
        residual_norms=final.residual_norms,
        survived=final.survived,
        sigma=sigma,
        T_run=setup.T_run,
        exit_threshold=exit_threshold,
        a_j=[float(a) for a in a_j],
    )


class DepartureFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    rate: float
    points: int


def fit_departure_law(departure_time: Dict[float, float], h_star: float) -> DepartureFit:
    """
    Affine fit of exit time against log|h - h_star|; a linear instability gives slope -1/sigma,
    reported back as `rate`.
    """
    pairs = [
        (math.log(abs(h - h_star)), t) for h, t in departure_time.items()
        if h != h_star and math.isfinite(t)
    ]
    if len(pairs) < 3:
        raise InvalidArgument("departure law needs at least three exited trials",
                              {'available': len(pairs)})
    x, y = np.array(pairs).T
    fit = linregress(x, y)
    rate = -1.0 / fit.slope if fit.slope != 0 else math.inf
    return DepartureFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                        float(rate), len(pairs))


@dataclass(eq=False)
class QuadraticSweep:
    epsilons: List[float]
    h_stars: List[float]
    slope: float
    intercept: float
    r_squared: float
    results: List[ShootingResult]

    def as_dict(self) -> Dict[str, object]:
        return {
            'epsilons': self.epsilons,
            'h_stars': self.h_stars,
            'slope': self.slope,
            'intercept': self.intercept,
            'r_squared': self.r_squared,
            'results': [result.as_dict() for result in self.results],
        }


def sweep_quadratic(gs: GroundState, R0_profile: np.ndarray, epsilons: Sequence[float], *,
                    workers: Optional[int] = None, **shoot_options) -> QuadraticSweep:
    """
    shoot_manifold at every epsilon on a thread pool, then the slope of log|h_star| against
    log eps.  Results are ordered by epsilon whatever order the workers finish in.
    """
    epsilons = sorted(float(e) for e in epsilons)
    if len(epsilons) < 2 or epsilons[0] <= 0:
        raise InvalidArgument("sweep needs at least two positive epsilons", {'eps': epsilons})
    if 'mode' not in shoot_options:
        shoot_options['mode'] = compute_sigma(gs)

    with ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
        futures = {
            eps: pool.submit(shoot_manifold, gs, R0_profile, eps, **shoot_options)
            for eps in epsilons
        }
        results = [futures[eps].result() for eps in epsilons]

    h_stars = [result.h_star for result in results]
    if any(h == 0 for h in h_stars):
        raise Inconclusive("h_star vanished at some epsilon; the law cannot be fitted",
                           {'h_stars': h_stars})
    fit = linregress(np.log(epsilons), np.log(np.abs(h_stars)))
    logger.info("quadratic sweep: slope %.3f (r^2 %.3f) over eps %s",
                fit.slope, fit.rvalue ** 2, epsilons)
    return QuadraticSweep(epsilons, h_stars, float(fit.slope), float(fit.intercept),
                          float(fit.rvalue ** 2), results)
