import numpy as np
import pytest
from scipy import sparse

from metamorph.energy import MaterialParams, path_energy
from metamorph.grid_fem import assemble_warped_mass, make_grid, standard_mass
from metamorph.image_solve import assemble_system, pcg, pointwise_image_formula, solve_images
from metamorph.utils.errors import ConvergenceError, InvalidInputError

from tests.helpers import sine_displacement, wave_image


def _random_warps(grid, count, rng, amplitude=0.1):
    warps = []
    interior = ~grid.boundary_mask
    for _ in range(count):
        d = np.zeros((2, grid.n_nodes))
        d[:, interior] = rng.uniform(-amplitude, amplitude, size=(2, int(interior.sum())))
        warps.append(d)
    return warps


def test_pcg_matches_direct_solve(rng):
    B = rng.normal(size=(30, 30))
    A = sparse.csr_matrix(B @ B.T + 30 * np.eye(30))
    b = rng.normal(size=30)
    x, iterations, residual = pcg(A, b, A.diagonal(), tol=1e-12, maxiter=200)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-10)
    assert residual <= 1e-12
    assert iterations > 0


def test_pcg_zero_rhs_and_budget():
    A = sparse.identity(5, format="csr") * 2.0
    x, iterations, _ = pcg(A, np.zeros(5), A.diagonal())
    assert np.all(x == 0.0) and iterations == 0

    B = sparse.diags([np.arange(1.0, 51.0)], [0], format="csr")
    with pytest.raises(ConvergenceError) as info:
        pcg(B, np.ones(50), np.ones(50), tol=1e-14, maxiter=2)
    assert info.value.iterations == 2


def test_system_matches_dense_oracle(grid4, rng):
    warps = _random_warps(grid4, 3, rng)
    u_a, u_b = rng.uniform(size=(1, grid4.n_nodes)), rng.uniform(size=(1, grid4.n_nodes))
    system = assemble_system(grid4, warps)
    dense = system.matrix.toarray()

    np.testing.assert_array_equal(dense, dense.T)
    assert np.min(np.linalg.eigvalsh(dense)) > 0.0

    direct = np.linalg.solve(dense, system.rhs(u_a, u_b)[0])
    images = solve_images(system, u_a, u_b, tol=1e-12)
    assert images.shape == (2, 1, grid4.n_nodes)
    np.testing.assert_allclose(images.reshape(-1), direct, atol=1e-8)


def test_solution_minimizes_path_energy(grid8, rng):
    params = MaterialParams(gamma=0.0)
    warps = [sine_displacement(grid8, 0.03, rng) for _ in range(3)]
    u_a, u_b = wave_image(grid8), wave_image(grid8, 0.8)
    interior = solve_images(assemble_system(grid8, warps), u_a, u_b, tol=1e-12)

    def energy(inner):
        return path_energy(grid8, [u_a, *inner, u_b], warps, params).scaled_total

    best = energy(list(interior))
    for _ in range(5):
        v = rng.normal(size=interior.shape)
        eps = 1e-4
        assert energy(list(interior + v)) > best
        slope = (energy(list(interior + eps * v)) - energy(list(interior - eps * v))) / (2 * eps)
        assert abs(slope) < 1e-6 * max(1.0, best)


def test_identity_warps_give_linear_blend(grid8):
    zeros, ones = np.zeros((1, grid8.n_nodes)), np.ones((1, grid8.n_nodes))
    images = solve_images(assemble_system(grid8, [None] * 4), zeros, ones, tol=1e-12)
    for k in range(1, 4):
        np.testing.assert_allclose(images[k - 1], k / 4.0, atol=1e-8)


def test_identity_warps_keep_endpoint_bounds(grid8, rng):
    u_a, u_b = rng.uniform(size=(1, grid8.n_nodes)), rng.uniform(size=(1, grid8.n_nodes))
    images = solve_images(assemble_system(grid8, [None] * 5), u_a, u_b, tol=1e-12)
    low, high = min(u_a.min(), u_b.min()), max(u_a.max(), u_b.max())
    assert images.min() >= low - 1e-9
    assert images.max() <= high + 1e-9


def test_linear_blend_energy_is_closed_form():
    grid = make_grid(6, 6)
    params = MaterialParams()
    zeros, ones = np.zeros((1, grid.n_nodes)), np.ones((1, grid.n_nodes))
    interior = solve_images(assemble_system(grid, [None] * 4), zeros, ones, tol=1e-12)
    energy = path_energy(grid, [zeros, *interior, ones], [None] * 4, params).scaled_total
    assert energy == pytest.approx(4 * 4 * 0.25 ** 2 * grid.area / params.delta, rel=1e-8)


def test_channels_are_solved_independently(grid4, rng):
    warps = _random_warps(grid4, 2, rng)
    u_a = rng.uniform(size=(2, grid4.n_nodes))
    u_b = rng.uniform(size=(2, grid4.n_nodes))
    u_a[1], u_b[1] = 2.0 * u_a[0], 2.0 * u_b[0]
    images = solve_images(assemble_system(grid4, warps), u_a, u_b, tol=1e-12)
    np.testing.assert_allclose(images[:, 1], 2.0 * images[:, 0], atol=1e-10)


def test_system_needs_two_steps(grid4):
    with pytest.raises(InvalidInputError):
        assemble_system(grid4, [None])


def test_pointwise_formula_averages_for_unit_jacobian():
    assert pointwise_image_formula(0.2, 0.6, 1.0) == pytest.approx(0.4)
    assert pointwise_image_formula(0.0, 1.0, 3.0) == pytest.approx(0.25)


def test_pointwise_formula_limits():
    assert pointwise_image_formula(0.2, 0.6, 1e8) == pytest.approx(0.2, abs=1e-7)
    assert pointwise_image_formula(0.0, 1.0, 0.5) == pytest.approx(2.0 / 3.0, rel=1e-15)


def test_two_step_system_is_a_single_block(grid4, rng):
    first, second = _random_warps(grid4, 2, rng)
    u_a, u_b = rng.uniform(size=(1, grid4.n_nodes)), rng.uniform(size=(1, grid4.n_nodes))
    system = assemble_system(grid4, [first, second])
    assert system.K == 2
    assert system.lower == []
    assert system.matrix.shape == (grid4.n_nodes, grid4.n_nodes)

    block = (assemble_warped_mass(grid4, first, first) + standard_mass(grid4)).toarray()
    np.testing.assert_allclose(system.matrix.toarray(), block, rtol=1e-14, atol=1e-16)

    rhs = assemble_warped_mass(grid4, first, None) @ u_a[0] + assemble_warped_mass(grid4, second, None).T @ u_b[0]
    images = solve_images(system, u_a, u_b, tol=1e-12)
    assert images.shape == (1, 1, grid4.n_nodes)
    np.testing.assert_allclose(images[0, 0], np.linalg.solve(block, rhs), atol=1e-8)
