import numpy as np
import pytest
import scipy.linalg

from sobolev_gpe import (CgConfig, DomainError, ModelParams, assemble_A_u,
                         assemble_a0, assemble_laplacian, build_grid, l2h_inner,
                         l2h_norm, manifold_gradient, retract, single_well_potential,
                         tangent_project)
from sobolev_gpe.manifold import State
from sobolev_gpe.operators import a_u_inner, a_u_norm, energy


@pytest.fixture
def setup(grid2d, lap2d, well2d, rng, tight_cg):
    params = ModelParams.gpe(1.0)
    u = np.abs(rng.standard_normal(grid2d.n_points)) + 0.1
    state = retract(u, grid2d)
    A = assemble_A_u(grid2d, lap2d, well2d, params, state.values)
    return grid2d, lap2d, well2d, params, state, A, tight_cg


class TestRetract:
    def test_idempotent(self, grid2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        once = retract(u, grid2d)
        twice = retract(once.values, grid2d)
        np.testing.assert_allclose(twice.values, once.values, rtol=1e-14)
        assert abs(l2h_norm(once.values, grid2d) - 1.0) < 1e-12

    def test_scale_invariant(self, grid2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        np.testing.assert_allclose(retract(2.0 * u, grid2d).values,
                                   retract(u, grid2d).values, rtol=1e-14)

    def test_zero_vector_rejected(self, grid2d):
        with pytest.raises(DomainError):
            retract(np.zeros(grid2d.n_points), grid2d)


class TestTangentProject:
    def test_projection_is_orthogonal(self, setup, rng):
        grid, _, _, _, state, A, cg = setup
        xi = rng.standard_normal(grid.n_points)
        zeta = tangent_project(xi, state, A, grid, cg)
        assert abs(l2h_inner(zeta, state.values, grid)) < 1e-8

    def test_fixed_point_on_tangent_vectors(self, setup, rng):
        grid, _, _, _, state, A, cg = setup
        xi = tangent_project(rng.standard_normal(grid.n_points), state, A, grid, cg)
        again = tangent_project(xi, state, A, grid, cg)
        assert np.abs(again - xi).max() < 1e-8 * max(1.0, np.abs(xi).max())

    def test_kernel_direction_maps_to_zero(self, setup):
        from sobolev_gpe import greens_apply
        grid, _, _, _, state, A, cg = setup
        g = greens_apply(state.values, A, cg)
        zeta = tangent_project(g, state, A, grid, cg)
        assert np.abs(zeta).max() < 1e-8 * np.abs(g).max()


class TestManifoldGradient:
    def test_zero_at_linear_eigenstate(self, grid2d, lap2d, well2d, tight_cg):
        A0 = assemble_a0(lap2d, well2d)
        w, Q = scipy.linalg.eigh(A0.to_dense())
        v = Q[:, 0] / l2h_norm(Q[:, 0], grid2d)
        mg = manifold_gradient(State(v, True), A0, grid2d, tight_cg)
        assert mg.grad_norm < 1e-8

    def test_norm_identity(self, setup):
        grid, _, _, _, state, A, cg = setup
        mg = manifold_gradient(state, A, grid, cg)
        direct = a_u_inner(mg.direction, mg.direction, A, grid)
        assert direct == pytest.approx(mg.grad_norm_sq_a_u, rel=1e-8)
        assert mg.grad_norm_sq_a_u >= -1e-10

    def test_tangency(self, setup):
        grid, _, _, _, state, A, cg = setup
        mg = manifold_gradient(state, A, grid, cg)
        assert abs(l2h_inner(mg.direction, state.values, grid)) < 1e-8

    def test_gradient_matches_directional_derivative(self, setup, rng):
        # central finite difference of the energy along a retracted tangent path;
        # the adaptive-metric pairing with the gradient must reproduce half of it
        # (the energy derivative carries a factor 2 relative to the metric).
        grid, lap, V, params, state, A, cg = setup
        mg = manifold_gradient(state, A, grid, cg)
        w = tangent_project(rng.standard_normal(grid.n_points), state, A, grid, cg)
        w /= a_u_norm(w, A, grid)
        t = 1e-5

        def e_at(s):
            return energy(grid, lap, V, params, retract(state.values + s * w, grid).values)

        fd = (e_at(t) - e_at(-t)) / (2 * t)
        pairing = 2.0 * a_u_inner(mg.direction, w, A, grid)
        assert fd == pytest.approx(pairing, rel=1e-3)

    def test_greens_cache_consistency(self, setup):
        from sobolev_gpe import greens_apply
        grid, _, _, _, state, A, cg = setup
        mg = manifold_gradient(state, A, grid, cg)
        g = greens_apply(state.values, A, cg)
        np.testing.assert_allclose(mg.greens_of_u, g, atol=1e-10)
        assert mg.inner_u_Gu == pytest.approx(l2h_inner(state.values, g, grid), rel=1e-10)


class TestRetractionOrder:
    def test_second_order_scaling(self, setup, rng):
        grid, _, _, _, state, A, cg = setup
        xi = tangent_project(rng.standard_normal(grid.n_points), state, A, grid, cg)
        xi /= a_u_norm(xi, A, grid)
        scales = [2.0**-k for k in range(3, 11)]
        devs = []
        for t in scales:
            w = state.values + t * xi
            devs.append(a_u_norm(retract(w, grid).values - w, A, grid))
        slope = np.polyfit(np.log(scales), np.log(devs), 1)[0]
        assert 1.9 <= slope <= 2.1
        # bounded ratio dev / t^2
        ratios = np.array(devs) / np.array(scales) ** 2
        assert ratios.max() / ratios.min() < 1.2
