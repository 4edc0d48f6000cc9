import numpy as np
import pytest

from soliton_lab import (
    spectral_analysis,
)
from soliton_lab.exceptions import (
    CertificationFailure,
    Inconclusive,
    InvalidArgument,
)
from soliton_lab.ground_state import (
    refined,
    solve_ground_state,
)
from soliton_lab.linearized_ops import (
    L_MINUS_COUPLING,
    L_PLUS_COUPLING,
    alpha_mode,
)
from soliton_lab.radial_core import (
    DIPOLE,
    make_grid,
    resolution_floor,
)
from soliton_lab.spectral_analysis import (
    EXPECTED_INTEGERS,
    RootSpaceDims,
    StripSpectrum,
    birman_schwinger_count,
    birman_schwinger_spectrum,
    certify_spectrum,
    compute_sigma,
    eigenpair_imaginary,
    eigenpair_residuals,
    find_lambda1,
    g_function,
    ground_energy,
    interval_clear,
    lowest_eigenvalues,
    negative_count,
    projected_spectrum,
    root_relations,
    root_space_details,
    root_space_report,
    spectral_margin,
    strip_spectrum,
    threshold_margin,
)


def test_negative_directions(ground):
    assert negative_count(ground, L_PLUS_COUPLING) == 1
    assert negative_count(ground, L_MINUS_COUPLING) == 0


def test_ordering_of_real_quantities(ground, mode):
    e0 = ground_energy(ground)
    lambda1 = find_lambda1(ground)
    assert e0 < lambda1 < 0 < mode.sigma


def test_lambda1_is_root_of_g(ground):
    lambda1 = find_lambda1(ground)
    assert abs(g_function(ground, lambda1)) < 1e-6
    e0 = ground_energy(ground)
    assert g_function(ground, 0.5 * (e0 + lambda1)) < 0
    assert g_function(ground, 0.5 * lambda1) > 0


def test_g_at_zero(ground):
    # L_+ d_alpha phi = -2 alpha phi, so g(0) = -<d_alpha phi, phi> / 2 alpha = |phi|^2 / 4 alpha^2
    alpha, grid = ground.alpha, ground.grid
    g0 = g_function(ground, 0.0)
    discrete = -grid.inner(alpha_mode(ground), ground.phi).real / (2 * alpha)
    assert g0 == pytest.approx(discrete, rel=1e-8)
    assert g0 == pytest.approx(ground.mass / (4 * alpha ** 2), rel=1e-2)
    assert g0 > 0


def test_g_plunges_above_ground_energy(ground):
    e0 = ground_energy(ground)
    assert g_function(ground, e0 + 1e-3 * ground.alpha ** 2) < -10 * g_function(ground, 0.0)


@pytest.mark.parametrize('lam', [-100.0, 1.0, 2.0])
def test_g_outside_its_interval(ground, lam):
    with pytest.raises(InvalidArgument):
        g_function(ground, lam)


def test_projected_operator(ground):
    projected = projected_spectrum(ground)
    assert projected.lambda1 == pytest.approx(find_lambda1(ground), rel=1e-8)
    # phi itself plus the three translation directions
    assert projected.zero_count == 4


def test_sigma_scales_like_alpha_squared(ground, mode):
    grid = make_grid(ground.grid.r_max / 2, ground.grid.n)
    other = compute_sigma(solve_ground_state(2.0, grid))
    assert other.sigma == pytest.approx(4 * mode.sigma, rel=1e-6)


def test_eigenpairs(ground, eigenpairs):
    plus, minus = eigenpairs
    assert plus.value == pytest.approx(1j * compute_sigma(ground).sigma)
    assert minus.value == pytest.approx(np.conj(plus.value))
    for pair in eigenpairs:
        assert pair.normalization == pytest.approx(1.0)
        right, left = eigenpair_residuals(ground, pair)
        assert right < 1e-6
        assert left < 1e-6
        # J-invariant: (f1, f2) = (conj f2, conj f1)
        assert np.allclose(pair.right_vec[0], np.conj(pair.right_vec[1]))


def test_eigenpair_tails_decay_exponentially(ground, eigenpairs):
    # far out each component solves (-Delta + alpha^2 -+ i sigma) f = 0
    sigma = eigenpairs[0].value.imag
    rate = np.sqrt(ground.alpha ** 2 + 1j * sigma).real
    r = ground.grid.nodes
    window = (r > 3.0 / ground.alpha) & (r < 10.0 / ground.alpha)
    for pair in eigenpairs:
        for vec in (pair.right_vec, pair.left_vec):
            for component in vec:
                slope = np.polyfit(r[window], np.log(r[window] * np.abs(component[window])), 1)[0]
                assert slope == pytest.approx(-rate, rel=0.05)
            assert np.abs(vec[:, -1]).max() < 1e-6 * np.abs(vec).max()


def test_eigenpair_sign_must_be_unit(ground, mode):
    with pytest.raises(InvalidArgument):
        eigenpair_imaginary(ground, 0, mode)


def test_root_relations(dense_ground):
    relations = root_relations(dense_ground)
    assert relations['phase'] < 1e-8
    assert relations['alpha_mode'] < 1e-8
    floor = resolution_floor(dense_ground.grid, dense_ground.alpha)
    for name in ('translation', 'boost'):
        assert relations[name] < floor


def test_root_space_dimensions(dense_ground):
    assert root_space_report(dense_ground) == RootSpaceDims(algebraic=8, geometric=4)
    details = root_space_details(dense_ground)
    by_sector = {kernel.ell: (kernel.geometric, kernel.algebraic) for kernel in details.sectors}
    assert by_sector == {0: (1, 2), 1: (1, 2), 2: (0, 0)}
    assert all(kernel.cubic == kernel.algebraic for kernel in details.sectors)


def test_strip_has_single_imaginary_pair(dense_ground):
    strip = strip_spectrum(dense_ground)
    sigma = compute_sigma(dense_ground).sigma
    assert strip.single_imaginary_pair
    assert strip.zero_multiplicity == 8
    low, high = strip.imaginary[0]
    assert high.imag == pytest.approx(sigma, rel=1e-6)
    assert low.imag == pytest.approx(-sigma, rel=1e-6)


def test_birman_schwinger_counts(ground):
    minus = birman_schwinger_count(ground, 'minus', ell_max=3)
    plus = birman_schwinger_count(ground, 'plus', ell_max=3)
    assert minus.count == 1
    assert plus.count == 4
    assert minus.per_sector == {0: 1, 1: 0, 2: 0, 3: 0}
    assert plus.per_sector == {0: 1, 1: 1, 2: 0, 3: 0}
    # an l = 1 eigenvalue is listed once per harmonic
    assert len(plus.eigenvalues_above_one) == 4
    assert all(value > 1 for value in plus.eigenvalues_above_one)


def test_birman_schwinger_spectra_are_sorted(ground):
    spectra = birman_schwinger_spectrum(ground, 'plus', ell_max=2)
    assert sorted(spectra) == [0, 1, 2]
    for values in spectra.values():
        assert np.all(np.diff(values) <= 0)
    # higher sectors see a weaker kernel
    assert spectra[0][0] > spectra[1][0] > spectra[2][0]


@pytest.mark.parametrize('which,ell_max', [('minus', 1), ('plus', 0), ('neutral', 3)])
def test_birman_schwinger_arguments(ground, which, ell_max):
    with pytest.raises(InvalidArgument):
        birman_schwinger_count(ground, which, ell_max)


def test_threshold_margin_is_resolved(ground, ground_fine):
    margin = threshold_margin(ground, ground_fine)
    assert margin == spectral_margin(ground)
    assert margin > 0.05
    assert interval_clear(ground)


def test_collapsed_margin_is_inconclusive(ground, ground_fine):
    # scale phi so that the top K_- eigenvalue sits exactly at one
    top = birman_schwinger_spectrum(ground, 'minus', ell_max=2)[0][0]
    coupling = 1.0 / np.sqrt(top)
    assert spectral_margin(ground, ell_max=2, coupling=coupling) < 1e-10
    with pytest.raises(Inconclusive):
        threshold_margin(ground, ground_fine, ell_max=2, coupling=coupling)


def test_dipole_near_kernel_is_below_floor(dense_ground):
    lowest = lowest_eigenvalues(dense_ground, L_PLUS_COUPLING, DIPOLE)[0]
    assert abs(lowest) < resolution_floor(dense_ground.grid, dense_ground.alpha)


def test_certified_report(dense_ground):
    report = certify_spectrum(dense_ground, refined(dense_ground))
    assert report.resolution == (dense_ground.grid.n, 2 * dense_ground.grid.n + 1)
    assert report.E0 < report.lambda1 < 0 < report.sigma
    assert (report.bs_count_minus, report.bs_count_plus) == (1, 4)
    assert (report.root_dim_algebraic, report.root_dim_geometric) == (8, 4)
    assert report.projected_zero_count == 4
    assert report.single_imaginary_pair
    assert report.interval_clear
    assert report.lambda1_projected == pytest.approx(report.lambda1, rel=1e-8)
    assert set(report.deltas) >= {'E0', 'lambda1', 'sigma', 'threshold_margin'}
    assert report.as_dict()['sigma'] == report.sigma


@pytest.fixture
def counted(monkeypatch):
    # skip the integer counts; only the strip and interval checks run
    monkeypatch.setattr(spectral_analysis, '_integers', lambda *args: dict(EXPECTED_INTEGERS))
    return monkeypatch


def test_second_imaginary_pair_fails_certificate(ground, ground_fine, counted):
    strip = StripSpectrum(0.1, {0: 1}, {0: [-1j, 1j], 1: [-0.5j, 0.5j]}, {})
    counted.setattr(spectral_analysis, 'strip_spectrum', lambda gs: strip)
    assert not strip.single_imaginary_pair
    with pytest.raises(CertificationFailure) as excinfo:
        certify_spectrum(ground, ground_fine)
    assert excinfo.value.details['imaginary'][1] == [-0.5j, 0.5j]


def test_strip_outlier_fails_certificate(ground, ground_fine, counted):
    strip = StripSpectrum(0.1, {0: 1}, {0: [-1j, 1j]}, {2: [0.3 + 0.1j]})
    counted.setattr(spectral_analysis, 'strip_spectrum', lambda gs: strip)
    with pytest.raises(CertificationFailure):
        certify_spectrum(ground, ground_fine)


def test_eigenvalue_below_threshold_fails_certificate(ground, ground_fine, counted):
    strip = StripSpectrum(0.1, {0: 1}, {0: [-1j, 1j]}, {})
    counted.setattr(spectral_analysis, 'strip_spectrum', lambda gs: strip)
    counted.setattr(spectral_analysis, 'interval_clear', lambda gs, tol: False)
    assert strip.single_imaginary_pair
    with pytest.raises(CertificationFailure) as excinfo:
        certify_spectrum(ground, ground_fine)
    assert 'inside (0, alpha^2)' in excinfo.value.message


def test_margin_is_scale_invariant(ground):
    grid = make_grid(ground.grid.r_max / 2, ground.grid.n)
    other = solve_ground_state(2.0, grid)
    assert spectral_margin(other) == pytest.approx(spectral_margin(ground), rel=1e-6)
