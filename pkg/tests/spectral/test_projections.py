import numpy as np
import pytest

from soliton_lab.exceptions import (
    InvalidArgument,
)
from soliton_lab.galilei_transforms import (
    SolitonParams,
)
from soliton_lab.projections import (
    ChannelLayout,
    adjoint_action_residuals,
    apply_hamiltonian,
    build_projections,
    build_root_family,
    reference_pairing,
    restricted_spectrum,
    root_correction,
    solve_aj_system,
)
from soliton_lab.radial_core import (
    resolution_floor,
)


@pytest.fixture(scope='module')
def radial_family(ground):
    return build_root_family(ground, layout=ChannelLayout.RADIAL)


@pytest.fixture(scope='module')
def projections(ground, radial_family, eigenpairs):
    return build_projections(ground, radial_family, eigenpairs)


@pytest.fixture
def bump(ground, gaussian):
    f = gaussian(1.0, 1.5) + 0.5j * gaussian(0.0, 0.8)
    return ChannelLayout.RADIAL.embed(ground.grid, np.stack((f, np.conj(f))))


def layout_norm(ground, field):
    return ChannelLayout.RADIAL.norm(ground.grid, field)


def test_layout_shapes(grid):
    assert ChannelLayout.RADIAL.shape(grid) == (1, 2, grid.n)
    assert ChannelLayout.FULL.shape(grid) == (4, 2, grid.n)
    assert ChannelLayout.RADIAL.family_size == 2
    assert ChannelLayout.FULL.family_size == 8


@pytest.mark.parametrize('layout', list(ChannelLayout))
def test_pairing_matches_closed_form(ground, layout):
    family = build_root_family(ground, layout=layout)
    reference = reference_pairing(ground, layout)
    assert family.pairing.shape == reference.shape
    assert np.abs(family.pairing - reference).max() < 1e-2 * np.abs(reference).max()
    assert family.pair(2, 1) == pytest.approx(family.pairing[0, 1])


def test_adjoint_action_on_family(ground):
    family = build_root_family(ground, layout=ChannelLayout.FULL)
    residuals = adjoint_action_residuals(ground, family)
    assert len(residuals) == 8
    assert residuals['xi_1'] < 1e-8
    assert residuals['xi_2'] < 1e-8
    floor = resolution_floor(ground.grid, ground.alpha)
    assert all(value < floor for value in residuals.values())


def test_ranks(ground, projections):
    size = 2 * ground.grid.n
    assert projections.P_root.rank == 2
    assert projections.P_im_plus.rank == 1
    assert projections.P_im_minus.rank == 1
    assert projections.P_u_plus.rank == 3
    assert projections.P_s.rank == size - 4


def test_projections_are_idempotent(ground, projections, bump):
    for name, projection in projections.members().items():
        once = projection(bump)
        twice = projection(once)
        assert layout_norm(ground, twice - once) <= 1e-6 * layout_norm(ground, bump), name


def test_eigenvectors_are_split_off(ground, projections, eigenpairs):
    layout = ChannelLayout.RADIAL
    plus, minus = (layout.embed(ground.grid, pair.right_vec) for pair in eigenpairs)
    scale = layout_norm(ground, plus)
    assert layout_norm(ground, projections.P_im_plus(plus) - plus) <= 1e-6 * scale
    assert layout_norm(ground, projections.P_im_plus(minus)) <= 1e-5 * scale
    assert layout_norm(ground, projections.P_s(plus)) <= 1e-5 * scale
    assert layout_norm(ground, projections.P_s(minus)) <= 1e-5 * scale


def test_stable_part_removes_root_space(ground, radial_family, projections):
    for eta in radial_family.eta:
        assert layout_norm(ground, projections.P_s(eta)) <= 1e-6 * layout_norm(ground, eta)


def test_projections_resolve_identity(ground, projections, bump):
    total = (projections.P_root(bump) + projections.P_im_plus(bump)
             + projections.P_im_minus(bump) + projections.P_s(bump))
    assert layout_norm(ground, total - bump) <= 1e-10 * layout_norm(ground, bump)


def test_stable_projection_keeps_j_invariance(projections, bump):
    stable = projections.P_s(bump)[0]
    assert np.allclose(stable[0], np.conj(stable[1]))


def test_restricted_spectra(ground, projections, mode):
    layout = ChannelLayout.RADIAL
    root = restricted_spectrum(ground, projections.P_root, layout)
    # a perturbed 2x2 Jordan block: eigenvalues of the size of the square root of the defect
    assert np.abs(root).max() < 1e-4
    (plus,) = restricted_spectrum(ground, projections.P_im_plus, layout)
    assert plus == pytest.approx(1j * mode.sigma, rel=1e-6)


def test_projection_rejects_wrong_shape(ground, projections):
    with pytest.raises(InvalidArgument):
        projections.P_s(np.zeros((2, ground.grid.n + 1)))


def test_eigenpairs_must_be_ordered(ground, radial_family, eigenpairs):
    plus, minus = eigenpairs
    with pytest.raises(InvalidArgument):
        build_projections(ground, radial_family, (minus, plus))


def test_aj_vanish_at_frozen_frequency(ground, radial_family, eigenpairs):
    a = solve_aj_system(radial_family, eigenpairs[0], 1.0, radial_family)
    assert np.abs(a).max() < 1e-5


def test_aj_solve_their_system(ground, radial_family, eigenpairs):
    layout, grid = radial_family.layout, radial_family.grid
    xi_ref = build_root_family(ground, SolitonParams(alpha=1.05), layout)
    h = 0.01
    a = solve_aj_system(radial_family, eigenpairs[0], h, xi_ref)
    assert np.abs(a).max() > 0
    field = layout.embed(grid, eigenpairs[0].right_vec) * h + root_correction(radial_family, a)
    for xi in xi_ref.xi:
        assert abs(layout.inner(grid, field, xi)) <= 1e-8 * layout.norm(grid, field)


def test_aj_requires_matching_layouts(ground, radial_family, eigenpairs):
    full = build_root_family(ground, layout=ChannelLayout.FULL)
    with pytest.raises(InvalidArgument):
        solve_aj_system(radial_family, eigenpairs[0], 1.0, full)


def test_projections_commute_with_hamiltonian(ground, projections, gaussian):
    layout = ChannelLayout.RADIAL
    f = gaussian(0.5, 2.0) * (1 + 0.3j)
    field = layout.embed(ground.grid, np.stack((f, np.conj(f))))

    def H(x):
        return apply_hamiltonian(ground, x, layout)

    scale = layout_norm(ground, H(field))
    for name in ('P_root', 'P_im_plus', 'P_s'):
        projection = getattr(projections, name)
        defect = H(projection(field)) - projection(H(field))
        assert layout_norm(ground, defect) <= 1e-4 * scale, name


def test_full_layout_projections(ground, eigenpairs, gaussian):
    family = build_root_family(ground, layout=ChannelLayout.FULL)
    projections = build_projections(ground, family, eigenpairs)
    size = 4 * 2 * ground.grid.n
    assert projections.P_root.rank == 8
    assert projections.P_u_plus.rank == 9
    assert projections.P_s.rank == size - 10

    layout = ChannelLayout.FULL
    f = gaussian(1.0, 1.5)
    field = np.stack([layout.embed(ground.grid, np.stack((f, f)), c) for c in range(4)]).sum(0)
    stable = projections.P_s(field)
    assert layout.norm(ground.grid, projections.P_s(stable) - stable) <= 1e-5 * layout.norm(
        ground.grid, field)
    for eta in family.eta:
        assert layout.norm(ground.grid, projections.P_s(eta)) <= 1e-6 * layout.norm(
            ground.grid, eta)


def test_aj_scale_with_frequency_offset_and_h(ground, radial_family, eigenpairs):
    ratios = []
    for delta in (-0.02, 0.01, 0.02, 0.04):
        xi_ref = build_root_family(ground, SolitonParams(alpha=ground.alpha + delta),
                                   radial_family.layout)
        for h in (1e-3, 1e-2, 1e-1):
            a = solve_aj_system(radial_family, eigenpairs[0], h, xi_ref)
            ratios.append(np.abs(a).max() / (abs(delta) * h))
    assert max(ratios) < 1.5 * min(ratios)
