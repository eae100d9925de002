import numpy as np
import pytest
import scipy.linalg

from sobolev_gpe import (ConfigurationError, DomainError, ModelParams, NumericError,
                         Potential, a_u_inner, a_u_norm, assemble_A_u, assemble_a0,
                         assemble_laplacian, build_grid, eigenvalue_estimate, energy,
                         l2h_norm, residual_norm, single_well_potential)


def zero_potential(grid):
    return Potential(values=np.zeros(grid.n_points), tag="custom")


class TestModelParams:
    def test_variant_consistency(self):
        ModelParams.gpe(2.0)
        ModelParams.hoi(1.0, 3.0)
        ModelParams.alpha_power(1.0, 2.5)
        with pytest.raises(ConfigurationError):
            ModelParams(beta=1.0, delta=1.0, variant="gpe")
        with pytest.raises(ConfigurationError):
            ModelParams(beta=1.0, alpha=2.0, variant="hoi")
        with pytest.raises(ConfigurationError):
            ModelParams(beta=-1.0)
        with pytest.raises(ConfigurationError):
            ModelParams(beta=1.0, alpha=0.0, variant="alpha-power")

    def test_json_roundtrip(self):
        p = ModelParams.hoi(10.0, 1.0)
        assert ModelParams.from_json(p.to_json()) == p


class TestEnergy:
    def test_first_sine_mode_energy_near_pi_squared(self):
        # dense eigendecomposition oracle for the smallest eigenvalue
        grid = build_grid(1, (0.0, 1.0), 127)
        lap = assemble_laplacian(grid)
        V = zero_potential(grid)
        mu1, vec = None, None
        w, Q = scipy.linalg.eigh(lap.to_dense())
        mu1, vec = w[0], Q[:, 0]
        u = vec / l2h_norm(vec, grid)
        e = energy(grid, lap, V, ModelParams.gpe(0.0), u)
        assert e == pytest.approx(mu1)
        assert abs(e - np.pi**2) / np.pi**2 < 1e-3

    def test_zero_vector(self, grid2d, lap2d, well2d):
        assert energy(grid2d, lap2d, well2d, ModelParams.gpe(1.0),
                      np.zeros(grid2d.n_points)) == 0.0

    def test_linear_in_beta(self, grid2d, lap2d, well2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        e0 = energy(grid2d, lap2d, well2d, ModelParams.gpe(0.0), u)
        e1 = energy(grid2d, lap2d, well2d, ModelParams.gpe(1.0), u)
        quartic = 0.5 * np.sum(u**4) * grid2d.cell_volume
        assert e1 - e0 == pytest.approx(quartic, rel=1e-12)

    def test_rejects_non_finite(self, grid2d, lap2d, well2d):
        u = np.zeros(grid2d.n_points)
        u[0] = np.nan
        with pytest.raises(NumericError):
            energy(grid2d, lap2d, well2d, ModelParams.gpe(1.0), u)


class TestAssembly:
    def test_beta_zero_reduces_to_a0(self, grid2d, lap2d, well2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        A = assemble_A_u(grid2d, lap2d, well2d, ModelParams.gpe(0.0), u)
        A0 = assemble_a0(lap2d, well2d)
        assert (A.matrix - A0.matrix).nnz == 0

    def test_m_matrix_for_nonnegative_state(self, grid2d, lap2d, well2d, rng):
        u = np.abs(rng.standard_normal(grid2d.n_points))
        for params in (ModelParams.gpe(1.0), ModelParams.hoi(1.0, 2.0)):
            A = assemble_A_u(grid2d, lap2d, well2d, params, u)
            assert A.is_m_matrix()
            assert A.symmetry_defect() < 1e-10

    def test_hoi_matvec_composition(self, grid2d, lap2d, well2d, rng):
        # independent oracle: apply each term of the operator by hand
        u = rng.standard_normal(grid2d.n_points)
        z = rng.standard_normal(grid2d.n_points)
        A = assemble_A_u(grid2d, lap2d, well2d, ModelParams.hoi(1.0, 1.0), u)
        by_parts = (lap2d.matvec(z) + (well2d.values + u * u) * z
                    + u * lap2d.matvec(u * z))
        assert np.abs(A.matvec(z) - by_parts).max() < 1e-12 * max(1.0, np.abs(by_parts).max())

    def test_alpha_power_diagonal(self, grid2d, lap2d, well2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        params = ModelParams.alpha_power(2.0, 1.5)
        A = assemble_A_u(grid2d, lap2d, well2d, params, u)
        expected_diag = (lap2d.diagonal() + well2d.values + 2.0 * (u * u) ** 1.5)
        np.testing.assert_allclose(A.diagonal(), expected_diag, rtol=1e-13)


class TestAdaptiveInner:
    def test_positive_for_nonzero(self, grid2d, lap2d, well2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        A = assemble_A_u(grid2d, lap2d, well2d, ModelParams.gpe(1.0), u)
        z = rng.standard_normal(grid2d.n_points)
        assert a_u_inner(z, z, A, grid2d) > 0.0

    def test_symmetry(self, grid2d, lap2d, well2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        A = assemble_A_u(grid2d, lap2d, well2d, ModelParams.hoi(1.0, 0.5), u)
        z = rng.standard_normal(grid2d.n_points)
        w = rng.standard_normal(grid2d.n_points)
        zw = a_u_inner(z, w, A, grid2d)
        wz = a_u_inner(w, z, A, grid2d)
        assert zw == pytest.approx(wz, rel=1e-12)


class TestEigenvalueEstimate:
    def test_exact_eigenvector(self, grid2d, lap2d, well2d):
        A0 = assemble_a0(lap2d, well2d)
        w, Q = scipy.linalg.eigh(A0.to_dense())
        u = Q[:, 0] / l2h_norm(Q[:, 0], grid2d)
        assert eigenvalue_estimate(u, A0, grid2d) == pytest.approx(w[0], rel=1e-12)

    def test_scale_invariance(self, grid2d, lap2d, well2d, rng):
        u = rng.standard_normal(grid2d.n_points)
        A = assemble_A_u(grid2d, lap2d, well2d, ModelParams.gpe(1.0), u)
        assert eigenvalue_estimate(u, A, grid2d) == pytest.approx(
            eigenvalue_estimate(2.0 * u, A, grid2d), rel=1e-12)

    def test_first_sine_mode_near_pi_squared(self):
        grid = build_grid(1, (0.0, 1.0), 127)
        lap = assemble_laplacian(grid)
        x = grid.axis_coordinates(0)
        u = np.sin(np.pi * x)
        u /= l2h_norm(u, grid)
        lam = eigenvalue_estimate(u, lap, grid)
        assert abs(lam - np.pi**2) / np.pi**2 < 1e-3

    def test_zero_state_rejected(self, grid2d, lap2d, well2d):
        A0 = assemble_a0(lap2d, well2d)
        with pytest.raises(DomainError):
            eigenvalue_estimate(np.zeros(grid2d.n_points), A0, grid2d)


class TestResidualNorm:
    def test_zero_at_eigenvector(self, grid2d, lap2d, well2d):
        A0 = assemble_a0(lap2d, well2d)
        w, Q = scipy.linalg.eigh(A0.to_dense())
        u = Q[:, 0] / l2h_norm(Q[:, 0], grid2d)
        assert residual_norm(u, A0, grid2d) < 1e-9

    def test_positive_for_random_state(self, grid2d, lap2d, well2d, rng):
        A0 = assemble_a0(lap2d, well2d)
        u = rng.standard_normal(grid2d.n_points)
        u /= l2h_norm(u, grid2d)
        assert residual_norm(u, A0, grid2d) > 1e-3


class TestVariationalIdentities:
    """Exact discrete identities connecting energy and operator."""

    @pytest.mark.parametrize("params", [
        ModelParams.gpe(1.5),
        ModelParams.hoi(2.0, 0.7),
        ModelParams.alpha_power(1.2, 1.7),
    ], ids=["gpe", "hoi", "alpha"])
    def test_finite_difference_gradient(self, grid2d_small, rng, params):
        grid = grid2d_small
        lap = assemble_laplacian(grid)
        V = single_well_potential(grid)
        u = rng.standard_normal(grid.n_points)
        A = assemble_A_u(grid, lap, V, params, u)
        Au = A.matvec(u)
        eps = 1e-5
        for i in rng.choice(grid.n_points, 20, replace=False):
            up, um = u.copy(), u.copy()
            up[i] += eps
            um[i] -= eps
            fd = (energy(grid, lap, V, params, up) - energy(grid, lap, V, params, um)) / (2 * eps)
            exact = 2.0 * grid.cell_volume * Au[i]
            assert abs(fd - exact) <= 1e-4 * max(1e-12, abs(exact))

    def test_quartic_convexity_identity(self, grid2d_small, rng):
        # E(w) - E(u) - [a_u(w,w) - a_u(u,u)] = +(beta/2) sum (w^2-u^2)^2 h^d,
        # with the metric adapted to u (the subtracted state)
        grid = grid2d_small
        lap = assemble_laplacian(grid)
        V = single_well_potential(grid)
        beta = 2.3
        params = ModelParams.gpe(beta)
        for _ in range(5):
            u = rng.standard_normal(grid.n_points)
            w = rng.standard_normal(grid.n_points)
            A = assemble_A_u(grid, lap, V, params, u)
            lhs = (energy(grid, lap, V, params, w) - energy(grid, lap, V, params, u)
                   - (a_u_inner(w, w, A, grid) - a_u_inner(u, u, A, grid)))
            rhs = 0.5 * beta * np.sum((w * w - u * u) ** 2) * grid.cell_volume
            assert lhs == pytest.approx(rhs, rel=1e-10)


def test_matrix_market_export(tmp_path, grid2d, lap2d, well2d):
    import scipy.io
    A0 = assemble_a0(lap2d, well2d)
    path = tmp_path / "a0.mtx"
    A0.to_matrix_market(path)
    back = scipy.io.mmread(str(path)).tocsr()
    assert (abs(back - A0.matrix)).max() < 1e-14
