import numpy as np
import pytest
from pydantic import ValidationError

from metamorph.energy import (
    MaterialParams,
    ModelKind,
    deformation_gradient,
    density_W,
    density_W_derivative,
    gradient_values,
    higher_order_energy,
    ogden_coeffs,
    pair_energy,
    path_energy,
    second_derivative_check,
)
from metamorph.energy.functional import deformation_gradients
from metamorph.grid_fem import make_grid, stiffness, lumped_mass, standard_mass
from metamorph.utils.errors import InadmissibleStateError, InvalidInputError, ParameterError

from tests.helpers import FULL_MODEL, sine_displacement, wave_image


def test_ogden_coefficients_match_closed_form():
    a1, a2, a3, a4 = ogden_coeffs(1.0, 0.5, 1.5, 1.5, 0.5)
    assert a1 == pytest.approx(2.0 ** -1.5 * 0.5 / 1.5, rel=1e-12)
    assert a2 == pytest.approx(1.0 / 6.0, rel=1e-12)
    assert a3 == pytest.approx(1.5, rel=1e-12)
    assert a4 == pytest.approx(-2.0, rel=1e-12)


def test_ogden_coefficients_reject_inadmissible_parameters():
    with pytest.raises(ParameterError):
        ogden_coeffs(1.0, 10.0, 1.5, 1.5, 0.5)
    with pytest.raises(ValidationError):
        MaterialParams(kind=ModelKind.OGDEN, lam=1.0, mu=10.0)


@pytest.mark.parametrize("kind", [ModelKind.OGDEN, ModelKind.SIMPLIFIED])
def test_density_vanishes_at_identity(kind):
    params = MaterialParams(kind=kind)
    assert density_W(np.eye(2), params) == 0.0
    assert np.linalg.norm(density_W_derivative(np.eye(2), params)) < 1e-10


def test_ogden_second_derivative_matches_linear_elasticity(rng):
    params = MaterialParams(**FULL_MODEL)
    for _ in range(10):
        fd, analytic = second_derivative_check(rng.normal(size=(2, 2)), params)
        assert fd == pytest.approx(analytic, rel=1e-4)


def test_ogden_density_is_infinite_for_reflections():
    params = MaterialParams(**FULL_MODEL)
    reflection = np.diag([-1.0, 1.0])
    assert density_W(reflection, params) == np.inf
    with pytest.raises(InadmissibleStateError):
        density_W_derivative(reflection, params)


def test_density_derivative_matches_finite_differences(rng):
    params = MaterialParams(**FULL_MODEL)
    A = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
    analytic = density_W_derivative(A, params)
    eps = 1e-6
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = eps
            fd = (density_W(A + E, params) - density_W(A - E, params)) / (2 * eps)
            assert fd == pytest.approx(analytic[i, j], rel=1e-6, abs=1e-9)


def test_material_params_defaults_and_validation():
    assert MaterialParams(kind=ModelKind.OGDEN).order == 4
    assert MaterialParams(kind=ModelKind.SIMPLIFIED).order == 2
    with pytest.raises(ValidationError):
        MaterialParams(m=3)
    with pytest.raises(ValidationError):
        MaterialParams(delta=0.0)
    with pytest.raises(ValidationError):
        MaterialParams(channel_weights=(1.0, -1.0))


def test_pair_energy_of_identical_images_is_zero(grid8, ogden):
    u = wave_image(grid8)
    energy = pair_energy(grid8, u, u, None, ogden)
    assert energy.total == 0.0


def test_pair_energy_of_constant_blend(grid8, simplified):
    zeros, ones = np.zeros((1, grid8.n_nodes)), np.ones((1, grid8.n_nodes))
    energy = pair_energy(grid8, zeros, ones, None, simplified)
    assert energy.density == 0.0
    assert energy.higher_order == 0.0
    assert energy.matching == pytest.approx(grid8.area / simplified.delta, rel=1e-13)


def test_identity_offset_adds_domain_area(grid8):
    u = wave_image(grid8)
    plain = pair_energy(grid8, u, u, None, MaterialParams())
    offset = pair_energy(grid8, u, u, None, MaterialParams(identity_offset=True))
    assert offset.total - plain.total == pytest.approx(2.0 * grid8.area)


def test_channel_weights_scale_matching(grid8):
    u_prev, u_next = wave_image(grid8), wave_image(grid8, 0.5)
    base = pair_energy(grid8, u_prev, u_next, None, MaterialParams())
    heavy = pair_energy(grid8, u_prev, u_next, None, MaterialParams(channel_weights=(2.0,)))
    assert heavy.matching == pytest.approx(2.0 * base.matching, rel=1e-14)
    with pytest.raises(InvalidInputError):
        pair_energy(grid8, u_prev, u_next, None, MaterialParams(channel_weights=(1.0, 1.0)))


def test_pair_energy_rejects_mismatched_images(grid8):
    with pytest.raises(InvalidInputError):
        pair_energy(grid8, wave_image(grid8), np.zeros((3, grid8.n_nodes)), None, MaterialParams())


def test_higher_order_energy(grid8, rng, ogden):
    assert higher_order_energy(grid8, None, ogden) == 0.0
    disp = sine_displacement(grid8, 0.02, rng)
    assert higher_order_energy(grid8, disp, ogden) > 0.0
    assert higher_order_energy(grid8, disp, MaterialParams(**FULL_MODEL, gamma=0.0)) == 0.0


def test_path_energy_sums_segments(grid8, rng, simplified):
    images = [wave_image(grid8, p) for p in (0.0, 0.2, 0.4)]
    deformations = [sine_displacement(grid8, 0.02, rng), None]
    energy = path_energy(grid8, images, deformations, simplified)
    first = pair_energy(grid8, images[0], images[1], deformations[0], simplified).total
    second = pair_energy(grid8, images[1], images[2], None, simplified).total
    assert energy.K == 2
    assert energy.scaled_total == pytest.approx(2.0 * (first + second), rel=1e-14)
    with pytest.raises(InvalidInputError):
        path_energy(grid8, images, deformations[:1], simplified)


def test_inadmissible_deformation_has_infinite_ogden_energy(grid8, ogden):
    disp = np.zeros((2, grid8.n_nodes))
    interior = ~grid8.boundary_mask
    disp[0, interior] = -grid8.node_coords[interior, 0] * 2.0 + grid8.width
    disp[:, grid8.boundary_mask] = 0.0
    dets = np.linalg.det(deformation_gradients(grid8, disp))
    assert np.min(dets) <= 0.0
    assert pair_energy(grid8, wave_image(grid8), wave_image(grid8), disp, ogden).total == np.inf


@pytest.mark.parametrize("model", ["ogden", "simplified"])
def test_gradient_matches_central_differences(grid8, rng, model):
    params = MaterialParams(**FULL_MODEL, gamma=1e-3) if model == "ogden" else MaterialParams(gamma=1e-3)
    u_prev, u_next = wave_image(grid8), wave_image(grid8, 0.4)
    disp = sine_displacement(grid8, 0.02, rng)
    grad = gradient_values(grid8, u_prev, u_next, disp, params)
    eps = 1e-6
    for _ in range(20):
        v = sine_displacement(grid8, 1.0, rng)
        e_plus = pair_energy(grid8, u_prev, u_next, disp + eps * v, params).total
        e_minus = pair_energy(grid8, u_prev, u_next, disp - eps * v, params).total
        fd = (e_plus - e_minus) / (2 * eps)
        assert fd == pytest.approx(float(np.sum(grad * v)), rel=1e-5, abs=1e-8)


def test_gradient_vanishes_on_boundary_and_at_optimum(grid8, rng, ogden):
    u = wave_image(grid8)
    at_identity = deformation_gradient(grid8, u, u, None, ogden)
    assert np.max(np.abs(at_identity.displacement)) < 1e-12

    grad = gradient_values(grid8, u, wave_image(grid8, 0.3), sine_displacement(grid8, 0.02, rng), ogden)
    assert np.all(grad[:, grid8.boundary_mask] == 0.0)


def test_ogden_density_is_frame_indifferent(rng):
    params = MaterialParams(**FULL_MODEL)
    for _ in range(10):
        A = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
        if np.linalg.det(A) <= 0.0:
            continue
        theta = rng.uniform(0.0, 2.0 * np.pi)
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        assert density_W(R @ A, params) == pytest.approx(density_W(A, params), rel=1e-12, abs=1e-10)


def test_pair_energy_ignores_channel_order(grid8, rng, simplified):
    disp = sine_displacement(grid8, 0.05, rng)
    u_prev = np.vstack([wave_image(grid8, p) for p in (0.0, 0.4, 1.1)])
    u_next = np.vstack([wave_image(grid8, p) for p in (0.3, 0.9, 1.7)])
    forward = pair_energy(grid8, u_prev, u_next, disp, simplified)
    backward = pair_energy(grid8, np.ascontiguousarray(u_prev[::-1]), np.ascontiguousarray(u_next[::-1]),
                           disp, simplified)
    assert forward.total == backward.total


def _cell_value_and_gradient(values, grid, i, j, s, t):
    """Bilinear value and gradient of nodal values inside cell (i, j) at local coordinates (s, t)."""
    v = values.reshape(grid.ny, grid.nx)
    d00, d10, d01, d11 = v[j, i], v[j, i + 1], v[j + 1, i], v[j + 1, i + 1]
    value = (1 - s) * (1 - t) * d00 + s * (1 - t) * d10 + (1 - s) * t * d01 + s * t * d11
    gx = ((1 - t) * (d10 - d00) + t * (d11 - d01)) / grid.h
    gy = ((1 - s) * (d01 - d00) + s * (d11 - d10)) / grid.h
    return value, np.array([gx, gy])


def _point_value(values, grid, x, y):
    x = min(max(x, 0.0), grid.width)
    y = min(max(y, 0.0), grid.height)
    i = min(int(x / grid.h), grid.nx - 2)
    j = min(int(y / grid.h), grid.ny - 2)
    value, _ = _cell_value_and_gradient(values, grid, i, j, x / grid.h - i, y / grid.h - j)
    return value


def test_pair_energy_matches_dense_quadrature_oracle(rng):
    grid = make_grid(6, 6)
    params = MaterialParams(**FULL_MODEL, gamma=0.0, delta=0.1)
    disp = sine_displacement(grid, 0.03, rng)
    u_prev, u_next = wave_image(grid)[0], wave_image(grid, 0.7)[0]
    simpson = ((0.0, 1.0 / 6.0), (0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0))

    density = matching = 0.0
    for j in range(grid.ny - 1):
        for i in range(grid.nx - 1):
            for s, ws in simpson:
                for t, wt in simpson:
                    w = ws * wt * grid.h ** 2
                    x, y = (i + s) * grid.h, (j + t) * grid.h
                    d0, g0 = _cell_value_and_gradient(disp[0], grid, i, j, s, t)
                    d1, g1 = _cell_value_and_gradient(disp[1], grid, i, j, s, t)
                    density += w * density_W(np.eye(2) + np.vstack([g0, g1]), params)
                    prev, _ = _cell_value_and_gradient(u_prev, grid, i, j, s, t)
                    matching += w * (_point_value(u_next, grid, x + d0, y + d1) - prev) ** 2

    energy = pair_energy(grid, u_prev, u_next, disp, params)
    assert energy.density == pytest.approx(density, rel=1e-12, abs=1e-15)
    assert energy.higher_order == 0.0
    assert energy.matching == pytest.approx(matching / params.delta, rel=1e-12)


@pytest.mark.parametrize("model", ["ogden", "simplified"])
def test_higher_order_energy_matches_dense_matrix_powers(rng, model):
    grid = make_grid(5, 5)
    params = MaterialParams(**FULL_MODEL, gamma=1e-3) if model == "ogden" else MaterialParams(gamma=1e-3)
    disp = sine_displacement(grid, 0.05, rng)

    S = stiffness(grid).toarray()
    M = standard_mass(grid).toarray()
    operator = np.diag(1.0 / lumped_mass(grid)) @ S
    power = np.linalg.matrix_power(operator, params.order // 2)
    expected = params.gamma * sum(float(y @ M @ y) for y in (power @ disp[0], power @ disp[1]))

    value = higher_order_energy(grid, disp, params)
    assert value == pytest.approx(expected, rel=1e-10)

    doubled = params.model_copy(update={"gamma": 2.0 * params.gamma})
    assert higher_order_energy(grid, disp, doubled) == 2.0 * value
