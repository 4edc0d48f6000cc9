"""
Positive radial ground state of -Delta phi + alpha^2 phi = phi^3 on a RadialGrid.

The profile is located by bisection shooting on phi(0), then polished by a damped Newton
iteration on the discrete system, whose Jacobian is the tridiagonal L_+ matrix.
"""
from dataclasses import (
    dataclass,
)
from functools import (
    cached_property,
)
import logging
import math
from typing import (
    Optional,
    Tuple,
)

import numpy as np
from scipy import (
    sparse,
)
from scipy.integrate import (
    solve_ivp,
)
from scipy.interpolate import (
    CubicSpline,
)
from scipy.sparse.linalg import (
    spsolve,
)
from scipy.stats import (
    linregress,
)

from soliton_lab.exceptions import (
    InvalidArgument,
    NoConvergence,
)
from soliton_lab.radial_core import (
    RADIAL,
    RadialGrid,
    laplacian_sparse,
    refine_grid,
)

logger = logging.getLogger(__name__)

AMPLITUDE_RANGE = (0.1, 100.0)
SHOOTING_START = 1e-3
SHOOTING_REACH = 40.0
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


@dataclass(frozen=True, eq=False)
class GroundState:
    alpha: float
    grid: RadialGrid
    phi: np.ndarray
    dphi_dr: np.ndarray
    dphi_dalpha: np.ndarray
    mass: float
    amplitude: float
    shooting_amplitude: float
    residual: float

    @cached_property
    def profile_spline(self) -> CubicSpline:
        # clamped at the origin (even profile), zero at r_max (Dirichlet node)
        r = np.concatenate(([0.0], self.grid.nodes, [self.grid.r_max]))
        values = np.concatenate(([self.amplitude], self.phi, [0.0]))
        return CubicSpline(r, values, bc_type=((1, 0.0), 'not-a-knot'))

    @property
    def norm(self) -> float:
        return math.sqrt(self.mass)


def _extrapolate_origin(phi: np.ndarray) -> float:
    # even profile: phi(h) = A + c h^2, phi(2h) = A + 4c h^2
    return float((4.0 * phi[0] - phi[1]) / 3.0)


def _discrete_residual(grid: RadialGrid, alpha: float, phi: np.ndarray) -> np.ndarray:
    q = grid.to_weighted(phi)
    lap = laplacian_sparse(grid, RADIAL)
    return lap @ q + alpha ** 2 * q - phi ** 2 * q


def ground_state_residual(grid: RadialGrid, alpha: float, phi: np.ndarray) -> float:
    """
    ||-Delta phi + alpha^2 phi - phi^3||_2 / ||phi||_2 for the discrete operator.
    """
    res = _discrete_residual(grid, alpha, phi)
    return float(np.linalg.norm(res) / np.linalg.norm(grid.to_weighted(phi)))


def _shoot(alpha: float, amplitude: float, r_end: float, dense: bool = False):
    """
    Integrate phi'' + 2 phi'/r = alpha^2 phi - phi^3 outward from the origin.

    Returns (+1 | -1 | 0, solution): +1 when phi crosses zero (amplitude too large),
    -1 when phi turns back up (too small), 0 when neither happens before r_end.
    """
    r0 = SHOOTING_START / alpha
    curvature = (alpha ** 2 * amplitude - amplitude ** 3) / 3.0
    y0 = [amplitude + curvature * r0 ** 2 / 2.0, curvature * r0]
    if y0[1] > 0:
        return -1, None

    def rhs(r, y):
        return [y[1], -2.0 * y[1] / r + alpha ** 2 * y[0] - y[0] ** 3]

    def crossing(r, y):
        return y[0]
    crossing.terminal = True
    crossing.direction = -1

    def turning(r, y):
        return y[1]
    turning.terminal = True
    turning.direction = 1

    sol = solve_ivp(
        rhs, (r0, r_end), y0, method='DOP853', rtol=1e-12, atol=1e-14 * amplitude,
        events=(crossing, turning), dense_output=dense,
    )
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def shoot_amplitude(alpha: float, r_end: float):
    """
    Bisection on phi(0) for the separatrix between zero-crossing and turning solutions.
    Returns (amplitude, radius up to which the shot profile is trustworthy, dense solution
    on the turning side of the bracket).
    """
    lo, hi = AMPLITUDE_RANGE[0] * alpha, AMPLITUDE_RANGE[1] * alpha
    kind_lo, _ = _shoot(alpha, lo, r_end)
    kind_hi, _ = _shoot(alpha, hi, r_end)
    if kind_lo != -1 or kind_hi != 1:
        raise NoConvergence(
            "Shooting bracket not found in the amplitude range",
            {'alpha': alpha, 'low': kind_lo, 'high': kind_hi},
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        kind, _ = _shoot(alpha, mid, r_end)
        if kind == 0:
            lo = hi = mid
            break
        if kind > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    amplitude = 0.5 * (lo + hi)
    kind, sol = _shoot(alpha, lo, r_end, dense=True)
    if sol is None or kind == 0 or not sol.t_events[1].size:
        reach = r_end
    else:
        reach = float(sol.t_events[1][0])
    logger.info("shooting amplitude %.12g at alpha=%g (trusted to r=%.3g)", amplitude, alpha, reach)
    return amplitude, reach, sol


def _initial_profile(alpha: float, grid: RadialGrid, amplitude: float, reach: float,
                     sol) -> np.ndarray:
    r = grid.nodes
    # the shot deviates from the separatrix like exp(alpha r) while phi decays like exp(-alpha r)
    r_cut = min(max(reach - 5.0 / alpha, grid.nodes[1]), grid.r_max)
    if sol is not None:
        r_cut = min(r_cut, float(sol.t[-1]))
    inner = r <= r_cut
    phi = np.empty_like(r)
    r_start = SHOOTING_START / alpha
    if sol is not None:
        phi[inner] = sol.sol(np.maximum(r[inner], r_start))[0]
        phi_cut = float(sol.sol(r_cut)[0])
    else:
        phi[inner] = amplitude
        phi_cut = amplitude
    outer = ~inner
    phi[outer] = phi_cut * (r_cut / r[outer]) * np.exp(-alpha * (r[outer] - r_cut))
    return np.maximum(phi, 0.0)


def _newton_polish(alpha: float, grid: RadialGrid, phi: np.ndarray,
                   tol: float, max_iter: int) -> np.ndarray:
    lap = laplacian_sparse(grid, RADIAL)
    sqrt_w = grid.sqrt_weights
    q = phi * sqrt_w
    q_norm = np.linalg.norm(q)

    def residual(q_vec):
        phi_vec = q_vec / sqrt_w
        return lap @ q_vec + alpha ** 2 * q_vec - phi_vec ** 2 * q_vec

    res = residual(q)
    res_norm = np.linalg.norm(res)
    for iteration in range(max_iter):
        if res_norm <= tol * q_norm:
            logger.debug("newton converged after %d iterations", iteration)
            return q / sqrt_w
        phi_vec = q / sqrt_w
        jac = lap + sparse.diags_array(alpha ** 2 - 3.0 * phi_vec ** 2, format='csc')
        step = spsolve(jac, -res)
        damping = 1.0
        while damping >= 2.0 ** -12:
            trial = q + damping * step
            trial_res = residual(trial)
            trial_norm = np.linalg.norm(trial_res)
            if trial_norm < (1.0 - 1e-4 * damping) * res_norm:
                break
            damping *= 0.5
        else:
            if res_norm <= 1e3 * tol * q_norm:
                break
            raise NoConvergence(
                "Newton residual stagnated",
                {'alpha': alpha, 'residual': res_norm / q_norm, 'iteration': iteration},
            )
        q, res, res_norm = trial, trial_res, trial_norm
        q_norm = np.linalg.norm(q)
        logger.debug("newton iteration %d: relative residual %.3e (damping %g)",
                     iteration, res_norm / q_norm, damping)
    if res_norm > tol * q_norm:
        raise NoConvergence(
            "Newton iteration did not reach the requested residual",
            {'alpha': alpha, 'residual': res_norm / q_norm},
        )
    return q / sqrt_w


def _assemble(alpha: float, grid: RadialGrid, phi: np.ndarray,
              shooting_amplitude: float) -> GroundState:
    amplitude = _extrapolate_origin(phi)
    r = np.concatenate(([0.0], grid.nodes, [grid.r_max]))
    spline = CubicSpline(
        r, np.concatenate(([amplitude], phi, [0.0])), bc_type=((1, 0.0), 'not-a-knot')
    )
    dphi_dr = spline.derivative()(grid.nodes)
    return GroundState(
        alpha=float(alpha),
        grid=grid,
        phi=phi,
        dphi_dr=dphi_dr,
        dphi_dalpha=(phi + grid.nodes * dphi_dr) / alpha,
        mass=grid.integrate(phi ** 2),
        amplitude=amplitude,
        shooting_amplitude=float(shooting_amplitude),
        residual=ground_state_residual(grid, alpha, phi),
    )


def solve_ground_state(alpha: float, grid: RadialGrid, newton_tol: float = NEWTON_TOL,
                       max_iter: int = NEWTON_MAX_ITER,
                       initial_guess: Optional[np.ndarray] = None) -> GroundState:
    if not math.isfinite(alpha) or alpha <= 0:
        raise InvalidArgument(f"Frequency alpha must be positive, got {alpha}")
    if newton_tol <= 0:
        raise InvalidArgument(f"Newton tolerance must be positive, got {newton_tol}")

    if initial_guess is None:
        amplitude, reach, sol = shoot_amplitude(alpha, max(grid.r_max, SHOOTING_REACH / alpha))
        guess = _initial_profile(alpha, grid, amplitude, reach, sol)
    else:
        guess = np.asarray(initial_guess, dtype=float)
        amplitude = _extrapolate_origin(guess)

    phi = _newton_polish(alpha, grid, guess, newton_tol, max_iter)
    if np.any(phi <= 0):
        raise NoConvergence("Newton iteration left the positive cone", {'alpha': alpha})
    gs = _assemble(alpha, grid, phi, amplitude)
    logger.info("ground state alpha=%g n=%d: phi(0)=%.10g mass=%.10g residual=%.2e",
                alpha, grid.n, gs.amplitude, gs.mass, gs.residual)
    return gs


def d_alpha_profile(gs: GroundState) -> np.ndarray:
    """
    d phi / d alpha from the scaling law phi(r, alpha) = alpha phi(alpha r, 1), which on a fixed
    grid reads (phi + r phi') / alpha.
    """
    return (gs.phi + gs.grid.nodes * gs.dphi_dr) / gs.alpha


def finite_difference_d_alpha(gs: GroundState, rel_step: float = 1e-3) -> np.ndarray:
    step = rel_step * gs.alpha
    upper = solve_ground_state(
        gs.alpha + step, gs.grid, initial_guess=scaled_profile(gs, gs.alpha + step)
    )
    lower = solve_ground_state(
        gs.alpha - step, gs.grid, initial_guess=scaled_profile(gs, gs.alpha - step)
    )
    return (upper.phi - lower.phi) / (2.0 * step)


def scaled_profile(gs: GroundState, alpha: float) -> np.ndarray:
    """
    phi(., alpha) on the grid of `gs`, by rescaling and spline interpolation.
    """
    s = alpha / gs.alpha
    x = s * gs.grid.nodes
    values = s * gs.profile_spline(np.minimum(x, gs.grid.r_max))
    values[x >= gs.grid.r_max] = 0.0
    return values


def scaled_d_alpha(gs: GroundState, alpha: float) -> np.ndarray:
    s = alpha / gs.alpha
    x = s * gs.grid.nodes
    derivative = s ** 2 * gs.profile_spline.derivative()(np.minimum(x, gs.grid.r_max))
    derivative[x >= gs.grid.r_max] = 0.0
    return (scaled_profile(gs, alpha) + gs.grid.nodes * derivative) / alpha


def rescaled(gs: GroundState, alpha: float) -> GroundState:
    """
    The ground state at a nearby frequency on the same grid, from the scaling law (no solve).
    """
    if alpha == gs.alpha:
        return gs
    phi = scaled_profile(gs, alpha)
    return _assemble(alpha, gs.grid, phi, gs.shooting_amplitude * alpha / gs.alpha)


def tail_decay_rate(gs: GroundState, window: Tuple[float, float] = (0.6, 0.9)) -> float:
    """
    Slope of log(r phi) on the tail window; r phi = u removes the 1/r prefactor of the
    Yukawa tail, leaving exp(-alpha r).
    """
    r = gs.grid.nodes
    mask = (r >= window[0] * gs.grid.r_max) & (r <= window[1] * gs.grid.r_max) & (gs.phi > 0)
    if mask.sum() < 3:
        raise InvalidArgument("Tail window holds too few positive samples")
    fit = linregress(r[mask], np.log(r[mask] * gs.phi[mask]))
    return float(fit.slope)


def extrapolated_amplitude(coarse: GroundState, fine: GroundState) -> float:
    """
    Richardson extrapolation of phi(0) from resolutions n and 2n (second-order scheme).
    """
    ratio = (coarse.grid.h / fine.grid.h) ** 2
    return (ratio * fine.amplitude - coarse.amplitude) / (ratio - 1.0)


def refined(gs: GroundState, newton_tol: float = NEWTON_TOL) -> GroundState:
    """
    The ground state on the grid of half the spacing, started from the spline of `gs`.
    """
    grid = refine_grid(gs.grid)
    return solve_ground_state(
        gs.alpha, grid, newton_tol, initial_guess=gs.profile_spline(grid.nodes)
    )
