import math

import numpy as np
import pytest
from scipy import integrate

from vptrap.core import GridField, grid_axis
from vptrap.poisson import (
    SingularEvaluationError,
    SourceSet,
    grid_force_from_density,
    grid_potential_from_density,
    kernel_bound_quadrature,
    pairwise_force,
    scaled_kernel_decay,
)
from vptrap.vfalgebra import deriv4

TWO_PI = 2.0 * math.pi


def gaussian_density_grid(mass, sigma, m, s, dim=2):
    ax = grid_axis(m, s)
    mesh = np.meshgrid(*([ax] * dim), indexing="ij")
    r2 = sum(g**2 for g in mesh)
    vals = mass * (2 * math.pi * sigma**2) ** (-dim / 2) * np.exp(-r2 / (2 * sigma**2))
    return GridField(vals, scale=s, dim=dim)


class TestPairwiseForce:
    def test_single_source_closed_form(self):
        src = SourceSet([[0.0, 0.0]], [TWO_PI])
        F = pairwise_force([[1.0, 0.0]], src, softening=0.0)
        np.testing.assert_allclose(F, [[1.0, 0.0]], rtol=1e-14)

    def test_3d_single_source_closed_form(self):
        src = SourceSet([[0.0, 0.0, 0.0]], [4.0 * math.pi])
        F = pairwise_force([[2.0, 0.0, 0.0]], src, softening=0.0)
        np.testing.assert_allclose(F, [[0.25, 0.0, 0.0]], rtol=1e-14)

    def test_midpoint_symmetry(self):
        src = SourceSet([[1.0, 0.0], [-1.0, 0.0]], [3.0, 3.0])
        F = pairwise_force([[0.0, 0.0]], src, softening=0.1)
        np.testing.assert_allclose(F, [[0.0, 0.0]], atol=1e-16)

    def test_zero_self_contribution_when_softened(self):
        src = SourceSet([[0.5, 0.5]], [1.0])
        F = pairwise_force([[0.5, 0.5]], src, softening=0.05)
        np.testing.assert_allclose(F, [[0.0, 0.0]], atol=0.0)

    def test_singular_without_softening(self):
        src = SourceSet([[0.5, 0.5]], [1.0])
        with pytest.raises(SingularEvaluationError):
            pairwise_force([[0.5, 0.5]], src, softening=0.0)

    def test_newtons_third_law(self):
        rng = np.random.default_rng(0)
        pos = rng.normal(size=(200, 2))
        w = rng.random(200) + 0.1
        src = SourceSet(pos, w)
        F = pairwise_force(pos, src, softening=0.05)
        total = (w[:, None] * F).sum(axis=0)
        scale = np.abs(w[:, None] * F).sum()
        assert np.linalg.norm(total) <= 1e-12 * scale

    def test_translation_equivariance(self):
        rng = np.random.default_rng(1)
        pos = rng.normal(size=(50, 3))
        w = rng.random(50)
        tg = rng.normal(size=(7, 3))
        shift = np.array([10.0, -4.0, 2.0])
        F0 = pairwise_force(tg, SourceSet(pos, w), softening=0.1)
        F1 = pairwise_force(tg + shift, SourceSet(pos + shift, w), softening=0.1)
        np.testing.assert_allclose(F0, F1, atol=1e-13)


class TestGridForce:
    def test_zero_density(self):
        rho = GridField(np.zeros((32, 32)), scale=4.0, dim=2)
        F = grid_force_from_density(rho)
        assert F.is_vector
        assert np.all(F.values == 0.0)

    def test_enclosed_mass_law_2d(self):
        mass, sigma = 2.0, 0.8
        rho = gaussian_density_grid(mass, sigma, m=160, s=4.0)
        F = grid_force_from_density(rho)
        ax = rho.axis()
        # radial 1D quadrature oracle: F_r(r) = M(r) / (2 pi r)
        def oracle(r):
            M, _ = integrate.quad(
                lambda u: mass
                * (2 * math.pi * sigma**2) ** -1
                * math.exp(-(u**2) / (2 * sigma**2))
                * 2
                * math.pi
                * u,
                0.0,
                r,
            )
            return M / (TWO_PI * r)

        mid = 80
        for i in [104, 118, 130]:
            got = F.values[i, mid, 0]  # row closest to the +x1 axis
            rr = math.hypot(ax[i], ax[mid])
            want = oracle(rr) * ax[i] / rr
            assert got == pytest.approx(want, rel=0.01)

    def test_far_field_matches_point_mass(self):
        mass, sigma = 1.5, 0.3
        rho = gaussian_density_grid(mass, sigma, m=128, s=4.0)
        F = grid_force_from_density(rho)
        ax = rho.axis()
        i, j = 124, 64  # |x| ~ 3.9, far outside the 0.3-width core
        x = np.array([ax[i], ax[j]])
        r2 = x @ x
        want = mass * x / (TWO_PI * r2)
        np.testing.assert_allclose(F.values[i, j], want, rtol=0.01)

    def test_grid_matches_pairwise_of_deposit_at_nodes(self):
        # identical sums by construction: grid convolution vs direct summation
        rho = gaussian_density_grid(1.0, 0.5, m=32, s=4.0)
        ax = rho.axis()
        X1, X2 = np.meshgrid(ax, ax, indexing="ij")
        pos = np.stack([X1.ravel(), X2.ravel()], axis=-1)
        w = rho.values.ravel() * rho.cell_width**2
        F = grid_force_from_density(rho)
        ref = pairwise_force(pos, SourceSet(pos, w), softening=rho.cell_width)
        np.testing.assert_allclose(
            F.values.reshape(-1, 2), ref, atol=1e-12 * np.abs(ref).max()
        )

    def test_grid_converges_to_continuum_force(self):
        # against a near-continuum direct-sum reference, halving h should
        # shrink the error at rate O(h) or better
        mass, sigma = 1.0, 0.5
        targets = np.array([[0.9, 0.4], [-1.3, 0.2], [0.1, -1.7]])
        fine = gaussian_density_grid(mass, sigma, m=512, s=4.0)
        axf = fine.axis()
        Xf1, Xf2 = np.meshgrid(axf, axf, indexing="ij")
        pos = np.stack([Xf1.ravel(), Xf2.ravel()], axis=-1)
        w = fine.values.ravel() * fine.cell_width**2
        ref = pairwise_force(targets, SourceSet(pos, w), softening=1e-6)
        errors = []
        from vptrap.core import grid_interpolate

        for m in (32, 64, 128):
            rho = gaussian_density_grid(mass, sigma, m=m, s=4.0)
            got = grid_interpolate(grid_force_from_density(rho), targets)
            errors.append(np.max(np.abs(got - ref)))
        assert errors[1] <= errors[0] / 1.8
        assert errors[2] <= errors[1] / 1.8

    def test_potential_gradient_matches_force(self):
        rho = gaussian_density_grid(1.0, 0.5, m=96, s=4.0)
        phi = grid_potential_from_density(rho)
        F = grid_force_from_density(rho)
        gx = deriv4(phi.values, 0, phi.cell_width)
        inner = (slice(8, -8),) * 2
        np.testing.assert_allclose(
            gx[inner], F.values[..., 0][inner], atol=5e-4 * np.abs(F.values).max()
        )

    def test_3d_far_field(self):
        mass, sigma = 1.0, 0.4
        rho = gaussian_density_grid(mass, sigma, m=48, s=3.0, dim=3)
        F = grid_force_from_density(rho)
        ax = rho.axis()
        i = 45
        x = np.array([ax[i], ax[24], ax[24]])
        r = np.linalg.norm(x)
        want = mass * x / (4 * math.pi * r**3)
        np.testing.assert_allclose(F.values[i, 24, 24], want, rtol=0.02)


class TestKernelBound:
    def test_radial_oracle_2d(self):
        assert kernel_bound_quadrature(2, [0.0, 0.0]) == pytest.approx(
            TWO_PI, abs=1e-3
        )

    def test_radial_oracle_3d(self):
        assert kernel_bound_quadrature(3, [0.0, 0.0, 0.0]) == pytest.approx(
            TWO_PI, abs=1e-3
        )

    def test_uniform_in_x(self):
        base = kernel_bound_quadrature(2, [0.0, 0.0])
        vals = [kernel_bound_quadrature(2, [r, 0.0]) for r in (1.0, 5.0, 20.0)]
        assert all(v <= 2.0 * base for v in vals)
        assert vals[2] < vals[1] < 2.0 * base

    def test_uniform_in_x_3d(self):
        base = kernel_bound_quadrature(3, [0.0, 0.0, 0.0])
        vals = [kernel_bound_quadrature(3, [r, 0.0, 0.0]) for r in (1.0, 5.0, 20.0)]
        assert all(v <= 2.0 * base for v in vals)
        assert vals[2] < vals[1]


class TestScaledKernelDecay:
    def test_reduces_to_kernel_bound_at_t0(self):
        a = scaled_kernel_decay(2, 0.0, [0.5, 0.0])
        b = kernel_bound_quadrature(2, [0.5, 0.0])
        assert a == pytest.approx(b, rel=1e-4)

    def test_change_of_variables_2d(self):
        got = scaled_kernel_decay(2, 1.0, [0.0, 0.0])
        assert got == pytest.approx(math.exp(-1.0) * TWO_PI, rel=1e-3)

    def test_change_of_variables_3d(self):
        got = scaled_kernel_decay(3, 2.0, [0.0, 0.0, 0.0])
        assert got == pytest.approx(math.exp(-4.0) * TWO_PI, rel=1e-3)

    def test_nonzero_offset(self):
        for t in (0.0, 1.0, 2.0):
            val = scaled_kernel_decay(2, t, [1.5, 0.0])
            assert val > 0
