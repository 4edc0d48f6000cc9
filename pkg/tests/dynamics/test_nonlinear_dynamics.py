import math

import numpy as np
import pytest

from soliton_lab.exceptions import (
    BlowUpDetected,
    BracketFailure,
    InvalidArgument,
    NoConvergence,
)
from soliton_lab.galilei_transforms import (
    SolitonParams,
)
from soliton_lab.ground_state import (
    scaled_profile,
)
from soliton_lab.nonlinear_dynamics import (
    ShootingResult,
    TrialRun,
    _check_monotone,
    evolve_nls,
    fit_departure_law,
    modulation_decompose,
    modulation_rhs,
    nonlinearity,
    orbit_distance,
    shoot_manifold,
    soliton_deviation,
    sweep_quadratic,
    unstable_coefficient,
)


def run(ground, psi0, T, **kwargs):
    kwargs.setdefault('dt', 1e-3)
    return evolve_nls(psi0, T, grid=ground.grid, alpha=ground.alpha, **kwargs)


def trial(h, sign):
    empty = np.zeros(0)
    return TrialRun(h, sign, 1.0, 'threshold', empty, empty, empty)


def shooting_result(epsilon, residuals, survived=True):
    empty = np.zeros(0)
    return ShootingResult(epsilon, 0.0, (0.0, 0.0), 0.0, {}, empty, empty,
                          np.asarray(residuals, dtype=float), survived, 0.3, 10.0, 0.2)


@pytest.mark.parametrize('kwargs', [
    {'scheme': 'euler'},
    {'dt': 2e-3},
    {'dt': 0.0},
    {'T': -1.0},
])
def test_evolve_rejects(ground, kwargs):
    options = {'T': 1.0, 'dt': 1e-3}
    options.update(kwargs)
    T = options.pop('T')
    with pytest.raises(InvalidArgument):
        evolve_nls(ground.phi, T, grid=ground.grid, alpha=ground.alpha, **options)


def test_evolve_rejects_wrong_samples(ground):
    with pytest.raises(InvalidArgument):
        run(ground, ground.phi[:-1], 1.0)
    with pytest.raises(InvalidArgument):
        run(ground, np.full(ground.grid.n, np.nan), 1.0)


def test_soliton_rotates_in_phase(ground):
    strang = run(ground, ground.phi, 1.0)
    yoshida = run(ground, ground.phi, 1.0, scheme='yoshida4')
    assert soliton_deviation(strang, ground).max() < 1e-3
    assert soliton_deviation(yoshida, ground).max() < 1e-6
    assert soliton_deviation(yoshida, ground).max() < soliton_deviation(strang, ground).max()
    assert yoshida.times[0] == 0.0
    assert yoshida.final_time == pytest.approx(1.0)


def test_orbit_distance_ignores_phase(ground):
    trajectory = run(ground, np.exp(0.7j) * ground.phi, 0.5, scheme='yoshida4')
    assert soliton_deviation(trajectory, ground)[0] == pytest.approx(2 * math.sin(0.35))
    assert orbit_distance(trajectory, ground).max() < 1e-5 * ground.norm


def test_mass_and_energy_are_conserved(ground, gaussian):
    psi0 = ground.phi + 0.05 * gaussian(1.0) * (1 + 1j)
    trajectory = run(ground, psi0, 1.0)
    assert trajectory.mass_drift < 1e-10
    assert trajectory.energy_drift < 1e-2
    summary = trajectory.as_dict()
    assert summary['samples'] == 11
    assert not summary['stopped_early']


def test_monitor_stops_the_run(ground):
    trajectory = run(ground, ground.phi, 1.0, sample_interval=0.1,
                     monitor=lambda t, psi: t >= 0.5 - 1e-9)
    assert trajectory.stopped_early
    assert trajectory.final_time == pytest.approx(0.5)


def test_states_may_be_dropped(ground):
    trajectory = run(ground, ground.phi, 0.2, store_states=False)
    assert trajectory.mass.size == trajectory.times.size
    with pytest.raises(InvalidArgument):
        trajectory.final
    with pytest.raises(InvalidArgument):
        soliton_deviation(trajectory, ground)
    with pytest.raises(InvalidArgument):
        orbit_distance(trajectory, ground)


def test_blow_up_is_detected(ground, gaussian):
    with pytest.raises(BlowUpDetected) as excinfo:
        run(ground, 60.0 * gaussian(), 1.0)
    assert excinfo.value.exit_time == pytest.approx(1e-3)
    assert excinfo.value.details['bound'] == 50.0


def test_modulation_recovers_parameters(ground):
    psi = np.exp(0.7j) * scaled_profile(ground, 1.1)
    params, Z = modulation_decompose(psi, SolitonParams(gamma=0.6, alpha=1.05), gs=ground)
    assert params.gamma == pytest.approx(0.7, abs=1e-7)
    assert params.alpha == pytest.approx(1.1, rel=1e-7)
    assert ground.grid.norm(Z[0]) < 1e-6 * ground.norm
    assert np.array_equal(Z[1], np.conj(Z[0]))


def test_modulation_needs_radial_guess(ground):
    guess = SolitonParams(v=(0.1, 0.0, 0.0))
    with pytest.raises(InvalidArgument):
        modulation_decompose(ground.phi, guess, gs=ground)


@pytest.mark.parametrize('factor', [0.0, 2.0])
def test_modulation_fails_far_from_the_family(ground, factor):
    with pytest.raises(NoConvergence):
        modulation_decompose(factor * ground.phi, SolitonParams(), gs=ground)


def test_nonlinearity_is_quadratic(ground, gaussian):
    u = gaussian(1.0) * (0.4 + 1.0j)
    U = np.stack((u, np.conj(u)))
    small = nonlinearity(1e-3 * U, ground.phi)
    double = nonlinearity(2e-3 * U, ground.phi)
    ratio = ground.grid.norm(double[0]) / ground.grid.norm(small[0])
    assert ratio == pytest.approx(4.0, rel=0.1)
    assert np.array_equal(small[1], -np.conj(small[0]))
    assert not np.any(nonlinearity(0 * U, ground.phi))


def test_modulation_rhs(ground, gaussian):
    params = SolitonParams(alpha=1.0)
    zero = np.zeros((2, ground.grid.n), dtype=complex)
    assert not np.any(modulation_rhs(zero, params, params, gs=ground))

    g = 0.01 * gaussian(1.0) * (1 + 0.5j)
    values = modulation_rhs(np.stack((g, np.conj(g))), params, SolitonParams(alpha=1.05),
                            gs=ground)
    assert values.shape == (8,)
    assert np.any(values[:2])
    assert not np.any(values[2:])
    with pytest.raises(InvalidArgument):
        modulation_rhs(zero, params.replace(D=(1.0, 0.0, 0.0)), params, gs=ground)


def test_unstable_coefficient_reads_off_h(eigenpairs):
    plus = eigenpairs[0]
    Z = 0.25 * plus.right_vec
    assert unstable_coefficient(Z, SolitonParams(), plus) == pytest.approx(0.25)
    assert unstable_coefficient(-Z, SolitonParams(), plus) == pytest.approx(-0.25)


def test_monotone_signs_pass():
    _check_monotone({h: trial(h, -1 if h < 0.1 else 1) for h in (-0.5, 0.0, 0.2, 0.5)})


def test_sign_flipping_twice_is_a_bracket_failure():
    trials = {-0.5: trial(-0.5, -1), 0.0: trial(0.0, 1), 0.5: trial(0.5, -1)}
    with pytest.raises(BracketFailure):
        _check_monotone(trials)


def test_departure_law_recovers_rate():
    sigma, h_star = 0.8, 1e-4
    departure = {h_star + d: 2.0 - math.log(d) / sigma for d in (1e-2, -1e-3, 1e-4, 1e-5)}
    departure[h_star] = math.inf
    departure[0.3] = math.inf
    fit = fit_departure_law(departure, h_star)
    assert fit.points == 4
    assert fit.rate == pytest.approx(sigma, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def test_departure_law_needs_three_points():
    with pytest.raises(InvalidArgument):
        fit_departure_law({0.1: 3.0, 0.2: 2.0, 0.3: math.inf}, 0.0)


@pytest.mark.parametrize('kwargs', [
    {'epsilon': -0.1},
    {'epsilon': math.nan},
    {'epsilon': 0.01, 'exit_threshold': 0.0},
])
def test_shoot_rejects(ground, gaussian, mode, kwargs):
    with pytest.raises(InvalidArgument):
        shoot_manifold(ground, gaussian(1.0), mode=mode, **kwargs)


def test_unperturbed_soliton_needs_no_correction(ground, gaussian, mode):
    result = shoot_manifold(ground, gaussian(1.0), 0.0, T_run=2.0, mode=mode)
    assert result.h_star == 0.0
    assert result.bracket_width == 0.0
    assert result.survived
    assert np.abs(result.b_plus_series).max() < 1e-3
    assert result.tracks_orbit
    assert result.max_residual < 1e-3 * ground.norm
    assert result.as_dict()['departure_time'] == {'0.0': None}


def test_shooting_finds_the_stabilizing_coefficient(ground, gaussian, mode):
    epsilon = 0.01
    result = shoot_manifold(ground, gaussian(1.0, 1.5), epsilon, T_run=10.0 / mode.sigma,
                            bracket_tol=0.1, offsets=(1e-3, 1e-4), mode=mode)
    assert result.bracket_width <= 0.1 * epsilon ** 2
    assert result.bracket[0] <= result.h_star <= result.bracket[1]
    assert abs(result.h_star) < epsilon
    assert result.survived
    assert result.max_residual <= 5 * epsilon
    assert result.tracks_orbit
    assert math.isfinite(result.departure_time[result.h_star + 1e-3])

    fit = fit_departure_law(result.departure_time, result.h_star)
    assert fit.r_squared >= 0.9
    assert fit.rate == pytest.approx(mode.sigma, rel=0.25)


def test_sweep_needs_two_positive_epsilons(ground, gaussian):
    with pytest.raises(InvalidArgument):
        sweep_quadratic(ground, gaussian(1.0), [0.01])
    with pytest.raises(InvalidArgument):
        sweep_quadratic(ground, gaussian(1.0), [0.0, 0.01])


@pytest.mark.parametrize('epsilon,residuals,survived,expected', [
    (0.01, [0.01, 0.04], True, True),
    (0.01, [0.01, 0.06], True, False),
    (0.01, [0.01], False, False),
    (0.0, [1.0], True, True),
    (0.0, [], False, False),
])
def test_tracks_orbit(epsilon, residuals, survived, expected):
    result = shooting_result(epsilon, residuals, survived)
    assert result.tracks_orbit is expected
    assert result.as_dict()['tracks_orbit'] is expected
