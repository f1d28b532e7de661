import time

import numpy as np
import pytest
from pydantic import ValidationError

from metamorph.energy import MaterialParams, ModelKind, path_energy
from metamorph.geodesic import (
    DiscretePath,
    SolverConfig,
    accumulated_material_derivative,
    alternate,
    gaussian_kernel,
    invert_transport,
    presmooth,
    prolongate,
    run_cascadic,
    time_interpolate,
    transport_path,
    warp_midpoint,
)
from metamorph.grid_fem import ScalarField, VectorField, eval_field, make_grid
from metamorph.image_solve import assemble_system, solve_images
from metamorph.registration import RegistrationOptions
from metamorph.utils.errors import ConvergenceError, InvalidInputError, NonContractiveError, SweepError

from tests.helpers import FULL_MODEL, disk_image, sine_displacement, wave_image


def _config(**overrides):
    settings = dict(
        levels=1,
        workers=1,
        sigma2=0.0,
        material=MaterialParams(gamma=1e-3, delta=1e-2),
        registration=RegistrationOptions(max_iterations=20),
    )
    settings.update(overrides)
    return SolverConfig(**settings)


def _path(grid, images, displacements=None, level=1):
    images = np.stack(images)
    if displacements is None:
        displacements = np.zeros((images.shape[0] - 1, 2, grid.n_nodes))
    return DiscretePath(grid, level, images, np.stack(list(displacements)))


def test_presmooth_keeps_constants_and_zero_variance(grid8, rng):
    constant = ScalarField(grid8, np.full(grid8.n_nodes, 0.3))
    np.testing.assert_allclose(presmooth(constant, 0.05).values, 0.3, atol=1e-14)

    noisy = ScalarField(grid8, rng.uniform(size=grid8.n_nodes))
    np.testing.assert_array_equal(presmooth(noisy, 0.0).values, noisy.values)
    with pytest.raises(InvalidInputError):
        presmooth(noisy, -1.0)


def test_presmooth_impulse_has_unit_mass():
    grid = make_grid(17, 17)
    impulse = np.zeros(grid.n_nodes)
    impulse[8 * 17 + 8] = 1.0
    smoothed = presmooth(ScalarField(grid, impulse), (2 * grid.h) ** 2)
    assert smoothed.values.sum() == pytest.approx(1.0, abs=1e-12)
    assert smoothed.values.max() < 1.0


def test_gaussian_kernel_is_normalized():
    kernel = gaussian_kernel(1.7)
    assert kernel.size == 2 * 6 + 1
    assert kernel.sum() == pytest.approx(1.0, abs=1e-15)


def test_warp_midpoint_identity_and_affine(grid8, rng):
    u = ScalarField(grid8, wave_image(grid8))
    np.testing.assert_allclose(warp_midpoint(u, None).values, u.values, atol=1e-14)

    disp = sine_displacement(grid8, 0.03, rng)
    linear = ScalarField(grid8, grid8.node_coords[:, 0])
    warped = warp_midpoint(linear, VectorField(grid8, disp))
    np.testing.assert_allclose(warped.values[0], grid8.node_coords[:, 0] + 0.5 * disp[0], atol=1e-13)


def test_warp_midpoint_matches_pointwise_evaluation(grid8, rng):
    u = ScalarField(grid8, wave_image(grid8, 0.3))
    disp = sine_displacement(grid8, 0.05, rng)
    warped = warp_midpoint(u, VectorField(grid8, disp))
    for node in range(grid8.n_nodes):
        point = grid8.node_coords[node] + 0.5 * disp[:, node]
        assert warped.values[0, node] == pytest.approx(eval_field(u, point), abs=1e-14)


def test_prolongate_doubles_steps_and_keeps_endpoints(grid8):
    u_a, u_b = wave_image(grid8), wave_image(grid8, 0.3)
    coarse = _path(grid8, [u_a, u_b], level=0)
    fine = prolongate(coarse, _config())
    assert fine.K == 2
    assert fine.level == 1
    assert fine.images.shape[0] == 3
    np.testing.assert_array_equal(fine.images[0], u_a)
    np.testing.assert_array_equal(fine.images[-1], u_b)
    assert np.all(fine.displacements == 0.0)


def test_prolongate_identical_images(grid8):
    u = wave_image(grid8)
    fine = prolongate(_path(grid8, [u, u, u], level=1), _config())
    assert fine.K == 4
    for image in fine.images:
        np.testing.assert_allclose(image, u, atol=1e-14)


def test_alternate_identical_images_converges_in_one_sweep(grid8):
    u = wave_image(grid8)
    config = _config(material=MaterialParams(**FULL_MODEL, gamma=1e-3))
    path = alternate(_path(grid8, [u, u, u, u, u], level=2), config)
    assert max(r.sweep for r in path.history) == 1
    assert path.energy(config.material).scaled_total == 0.0


def test_alternate_images_solve_final_system(grid8):
    u_a, u_b = wave_image(grid8), wave_image(grid8, 0.5)
    config = _config(cg={"tol": 1e-12}, max_sweeps=5)
    path = alternate(_path(grid8, [u_a, 0.5 * (u_a + u_b), u_b]), config)

    system = assemble_system(grid8, list(path.displacements))
    dense = system.matrix.toarray()
    oracle = np.linalg.solve(dense, system.rhs(u_a, u_b)[0])
    np.testing.assert_allclose(path.images[1, 0], oracle, atol=1e-8)


def test_alternate_energy_is_non_increasing(grid8):
    u_a, u_b = wave_image(grid8), wave_image(grid8, 0.6)
    config = _config(cg={"tol": 1e-12}, max_sweeps=6)
    path = alternate(_path(grid8, [u_a, u_a, u_b, u_b]), config)
    energies = [r.energy for r in path.history]
    assert len(energies) >= 3
    assert all(later <= earlier + 1e-10 for earlier, later in zip(energies, energies[1:]))
    assert path.level_images[path.level].shape == path.images.shape


def test_alternate_reports_failing_sweep(grid8, monkeypatch):
    def fail(*args, **kwargs):
        raise ConvergenceError("inner solve", 1.0, 3)

    monkeypatch.setattr("metamorph.geodesic.cascade.register", fail)
    u = wave_image(grid8)
    with pytest.raises(SweepError) as info:
        alternate(_path(grid8, [u, u, u]), _config())
    assert info.value.sweep == 1
    assert str(info.value).startswith("sweep 1:")


def test_workers_do_not_change_results(grid8):
    u_a, u_b = wave_image(grid8), wave_image(grid8, 0.4)
    single = alternate(_path(grid8, [u_a, u_a, u_b, u_b]), _config(max_sweeps=3))
    pooled = alternate(_path(grid8, [u_a, u_a, u_b, u_b]), _config(max_sweeps=3, workers=3))
    np.testing.assert_array_equal(single.images, pooled.images)
    np.testing.assert_array_equal(single.displacements, pooled.displacements)


def test_run_cascadic_identical_inputs_gives_constant_path(grid8):
    u = ScalarField(grid8, wave_image(grid8))
    config = _config(material=MaterialParams(**FULL_MODEL, gamma=1e-3), sigma2=None)
    path = run_cascadic(u, u, config)
    smoothed = presmooth(u, config.smoothing_variance(grid8, 1))
    assert path.K == 2
    assert path.energy(config.material).scaled_total <= 1e-12
    np.testing.assert_array_equal(path.images[0], smoothed.values)
    np.testing.assert_array_equal(path.images[-1], smoothed.values)


def test_run_cascadic_beats_linear_blend():
    grid = make_grid(12, 12)
    u_a = ScalarField(grid, disk_image(grid, 0.45, 0.25))
    u_b = ScalarField(grid, disk_image(grid, 0.45 + 2 * grid.h, 0.25))
    config = _config(levels=2, sigma2=None, max_sweeps=10)
    path = run_cascadic(u_a, u_b, config)

    a, b = path.images[0], path.images[-1]
    blend = [(1 - k / path.K) * a + (k / path.K) * b for k in range(path.K + 1)]
    blend_energy = path_energy(grid, blend, [None] * path.K, config.material).scaled_total
    assert path.K == 4
    assert sorted(path.level_images) == [0, 1, 2]
    assert path.energy(config.material).scaled_total < blend_energy


def test_run_cascadic_rejects_mismatched_inputs(grid8):
    u = ScalarField(grid8, wave_image(grid8))
    other = ScalarField(make_grid(6, 6), np.zeros(36))
    with pytest.raises(InvalidInputError):
        run_cascadic(u, other, _config())
    with pytest.raises(InvalidInputError):
        run_cascadic(u, ScalarField(grid8, np.zeros((3, grid8.n_nodes))), _config())


def test_transport_path_composes_deformations(grid8, rng):
    identity = [VectorField.identity(grid8)] * 3
    x = np.array([0.3, 0.6])
    np.testing.assert_array_equal(transport_path(identity, x), np.tile(x, (4, 1)))

    phis = [VectorField(grid8, sine_displacement(grid8, 0.05, rng)) for _ in range(3)]
    points = rng.uniform(0, 1, size=(10, 2))
    X = transport_path(phis, points)
    np.testing.assert_allclose(X[1], phis[0](points))
    np.testing.assert_allclose(X[3], phis[2](phis[1](phis[0](points))))


def test_material_derivative_with_identity_telescopes(grid8):
    images = [wave_image(grid8, p) for p in (0.0, 0.3, 0.7)]
    path = _path(grid8, images)
    z = accumulated_material_derivative(path, 2)
    np.testing.assert_allclose(z.values, 2 * (images[2] - images[0]), atol=1e-13)

    constant = _path(grid8, [images[0]] * 3)
    np.testing.assert_allclose(accumulated_material_derivative(constant, 1).values, 0.0, atol=1e-14)
    with pytest.raises(InvalidInputError):
        accumulated_material_derivative(path, 3)


def test_material_derivative_matches_hand_composition(grid8, rng):
    images = [wave_image(grid8, p) for p in (0.0, 0.3, 0.7)]
    disps = [sine_displacement(grid8, 0.04, rng) for _ in range(2)]
    path = _path(grid8, images, disps)
    phi1, phi2 = VectorField(grid8, disps[0]), VectorField(grid8, disps[1])
    u0, u1, u2 = (ScalarField(grid8, im) for im in images)

    x = grid8.node_coords
    x1 = phi1(x)
    x2 = phi2(x1)
    expected = 2 * ((eval_field(u1, x1) - eval_field(u0, x)) + (eval_field(u2, x2) - eval_field(u1, x1)))
    np.testing.assert_allclose(accumulated_material_derivative(path, 2).values[0], expected, atol=1e-12)


def test_time_interpolate_hits_path_images(grid8, rng):
    images = [wave_image(grid8, p) for p in (0.0, 0.3, 0.7, 1.0)]
    disps = [sine_displacement(grid8, 0.03, rng) for _ in range(3)]
    path = _path(grid8, images, disps)
    for k in range(4):
        np.testing.assert_array_equal(time_interpolate(path, k / 3).values, path.images[k])
    with pytest.raises(InvalidInputError):
        time_interpolate(path, 1.5)


def test_time_interpolate_identity_midpoint_is_average(grid8):
    images = [wave_image(grid8, p) for p in (0.0, 0.5)]
    path = _path(grid8, images)
    mid = time_interpolate(path, 0.5)
    np.testing.assert_allclose(mid.values, 0.5 * (images[0] + images[1]), atol=1e-14)


def test_fixed_point_inversion_residual(grid8, rng):
    disp = sine_displacement(grid8, 0.05, rng)
    scale = 0.6
    y = grid8.node_coords
    x = invert_transport(grid8, disp, scale, y)
    residual = x + scale * grid8.interpolate(disp, x).T - y
    assert np.max(np.abs(residual)) < 1e-9


def test_non_contractive_segment_is_reported(grid8):
    disp = np.zeros((2, grid8.n_nodes))
    interior = ~grid8.boundary_mask
    disp[0, interior] = 0.5 - grid8.node_coords[interior, 0]
    path = _path(grid8, [wave_image(grid8)] * 3, [np.zeros_like(disp), disp])
    with pytest.raises(NonContractiveError) as info:
        time_interpolate(path, 0.99)
    assert info.value.segment == 2


def test_solver_config_validation(grid8):
    with pytest.raises(ValidationError):
        SolverConfig(levels=0)
    with pytest.raises(ValidationError):
        SolverConfig(threshold=0.0)
    config = SolverConfig()
    assert config.smoothing_variance(grid8, 1) == pytest.approx(0.625 * grid8.h)
    assert config.smoothing_variance(grid8, 3) == pytest.approx(1.25 * grid8.h)
    assert SolverConfig(sigma2=0.0).smoothing_variance(grid8, 3) == 0.0


def test_workers_default_from_environment(monkeypatch):
    monkeypatch.setenv("METAMORPH_WORKERS", "3")
    assert SolverConfig().workers == 3


@pytest.mark.slow
def test_translating_disk_descent_and_threshold():
    grid = make_grid(33, 33)
    u_a = ScalarField(grid, disk_image(grid, 0.45, 0.25))
    u_b = ScalarField(grid, disk_image(grid, 0.45 + 3 * grid.h, 0.25))
    config = SolverConfig(
        levels=3, workers=1,
        material=MaterialParams(kind=ModelKind.SIMPLIFIED, gamma=1e-3, delta=1e-2),
    )
    started = time.perf_counter()
    path = run_cascadic(u_a, u_b, config)
    assert time.perf_counter() - started < 60.0

    records = [r for r in path.history if r.level == 3]
    energies = [r.energy for r in records]
    assert all(later <= earlier + 1e-10 for earlier, later in zip(energies, energies[1:]))
    assert max(r.sweep for r in records) < config.max_sweeps

    a, b = path.images[0], path.images[-1]
    blend = [(1 - k / 8) * a + (k / 8) * b for k in range(9)]
    assert energies[-1] < path_energy(grid, blend, [None] * 8, config.material).scaled_total

    for k in range(9):
        np.testing.assert_array_equal(time_interpolate(path, k / 8).values, path.images[k])
    for k in range(1, 9):
        y = grid.node_coords
        x = invert_transport(grid, path.displacements[k - 1], 0.5, y, segment=k)
        residual = x + 0.5 * grid.interpolate(path.displacements[k - 1], x).T - y
        assert np.max(np.abs(residual)) < 1e-9
