import math

import hypothesis
import numpy as np
import pytest

from soliton_lab.exceptions import (
    InvalidArgument,
)
from soliton_lab.galilei_transforms import (
    CartesianSampling,
    GalileiFrame,
    SolitonParams,
    apply_galilei,
    fourier_shift,
    frame_change_U_to_Z,
    frame_change_Z_to_U,
    free_evolve,
    gaussian_free_solution,
    inverse_galilei,
)

LINE = CartesianSampling((40.0,), (512,))
PLANE = CartesianSampling((24.0, 24.0), (96, 96))

small = hypothesis.strategies.floats(min_value=-1.0, max_value=1.0)
phase = hypothesis.strategies.floats(min_value=-math.pi, max_value=math.pi)
times = hypothesis.strategies.floats(min_value=0.0, max_value=1.0)


def line_frame(gamma, v, D, alpha=1.0):
    return GalileiFrame(gamma, (v, 0.0, 0.0), (D, 0.0, 0.0), alpha)


@pytest.mark.parametrize('kwargs', [
    {'alpha': 0.0},
    {'alpha': -1.0},
    {'gamma': math.nan},
    {'v': (1.0, 0.0)},
    {'D': (0.0, math.inf, 0.0)},
])
def test_soliton_params_rejects(kwargs):
    with pytest.raises(InvalidArgument):
        SolitonParams(**kwargs)


def test_soliton_params_radial():
    params = SolitonParams(gamma=0.5, alpha=2)
    assert params.radial
    assert params.alpha == 2.0
    moved = params.replace(v=[0.1, 0, 0])
    assert not moved.radial
    assert moved.v == (0.1, 0.0, 0.0)
    assert GalileiFrame.from_params(moved).v_inf == moved.v


def test_frame_rotation_rate():
    frame = GalileiFrame(alpha_inf=2.0)
    assert frame.omega(0.5) == pytest.approx(-2.0)
    assert np.allclose(line_frame(0, 0.5, 1.0).shift(2.0), [3.0, 0.0, 0.0])


@pytest.mark.parametrize('kwargs', [
    {'lengths': (1.0, 2.0), 'counts': (8,)},
    {'lengths': (0.0,), 'counts': (8,)},
    {'lengths': (1.0,), 'counts': (1,)},
    {'lengths': (1.0,), 'counts': (8,), 'padding': 0.5},
    {'lengths': (1.0,) * 4, 'counts': (8,) * 4},
])
def test_sampling_rejects(kwargs):
    with pytest.raises(InvalidArgument):
        CartesianSampling(**kwargs)


def test_radial_samples_admit_only_phase_frames():
    f = np.ones(10, dtype=complex)
    with pytest.raises(InvalidArgument):
        apply_galilei(line_frame(0.0, 0.3, 0.0), 0.0, f)
    assert np.allclose(apply_galilei(GalileiFrame(1.0), 0.0, f), np.exp(1j) * f)


def test_shift_limited_by_padding():
    f = np.exp(-LINE.mesh[0] ** 2)
    with pytest.raises(InvalidArgument):
        fourier_shift(f, (11.0, 0.0, 0.0), LINE)


def test_planar_sampling_rejects_out_of_plane_vectors():
    frame = GalileiFrame(v_inf=(0.0, 0.0, 0.2))
    with pytest.raises(InvalidArgument):
        apply_galilei(frame, 0.0, np.ones(PLANE.shape), PLANE)


def test_fourier_shift_moves_gaussian():
    x = LINE.mesh[0]
    shifted = fourier_shift(np.exp(-x ** 2), (1.5, 0.0, 0.0), LINE)
    assert np.allclose(shifted, np.exp(-(x - 1.5) ** 2), atol=1e-10)


@pytest.mark.parametrize('t', [0.0, 0.3, 1.0])
def test_free_evolution_of_gaussian(t):
    start = np.exp(-LINE.mesh[0] ** 2 / 2)
    assert np.allclose(free_evolve(start, t, LINE), gaussian_free_solution(t, LINE), atol=1e-10)


def test_free_evolution_conserves_norm():
    start = gaussian_free_solution(0.0, PLANE)
    evolved = free_evolve(start, 0.7, PLANE)
    assert PLANE.norm(evolved) == pytest.approx(PLANE.norm(start), rel=1e-12)


@hypothesis.given(gamma=phase, v=small, D=small, t=times)
@hypothesis.settings(deadline=1000)
def test_galilei_maps_free_solutions_to_free_solutions(gamma, v, D, t):
    frame = line_frame(gamma, v, D)
    start = gaussian_free_solution(0.0, LINE)
    moved_then_evolved = free_evolve(apply_galilei(frame, 0.0, start, LINE), t, LINE)
    evolved_then_moved = apply_galilei(frame, t, free_evolve(start, t, LINE), LINE)
    assert np.allclose(moved_then_evolved, evolved_then_moved, atol=1e-8)


@hypothesis.given(gamma=phase, v=small, D=small, t=times)
@hypothesis.settings(deadline=1000)
def test_inverse_undoes_transform(gamma, v, D, t):
    frame = line_frame(gamma, v, D)
    f = gaussian_free_solution(0.2, LINE)
    back = inverse_galilei(frame, t, apply_galilei(frame, t, f, LINE), LINE)
    assert np.allclose(back, f, atol=1e-10)


@hypothesis.given(gamma=phase, t=times, alpha=hypothesis.strategies.floats(0.5, 2.0))
def test_frame_change_preserves_j_invariance(gamma, t, alpha):
    r = np.linspace(0.1, 5.0, 50)
    R = np.exp(-r ** 2) * (1.0 + 0.5j * r)
    frame = GalileiFrame(gamma, alpha_inf=alpha)
    U = frame_change_Z_to_U(np.stack((R, np.conj(R))), frame, t)
    assert np.allclose(U[1], np.conj(U[0]))
    assert np.allclose(frame_change_U_to_Z(U, frame, t), np.stack((R, np.conj(R))))


def test_frame_change_on_plane():
    frame = GalileiFrame(0.4, (0.3, -0.2, 0.0), (0.5, 0.5, 0.0), 1.2)
    f = gaussian_free_solution(0.1, PLANE)
    Z = np.stack((f, np.conj(f)))
    U = frame_change_Z_to_U(Z, frame, 0.5, PLANE)
    assert np.allclose(U[1], np.conj(U[0]))
    assert PLANE.norm(U[0]) == pytest.approx(PLANE.norm(f), rel=1e-10)
