import math

import numpy as np
import pytest

from vptrap.core import PhasePoint, validate_config
from vptrap.linear import (
    QuadratureBudgetError,
    eval_linear_solution,
    flow_arrays,
    hamiltonian_invariants,
    initial_data,
    linear_density_on_grid,
    linear_flow,
)

ORIGIN2 = PhasePoint([0.0, 0.0], [0.0, 0.0])


def gaussian_density_closed_form(f0, t, x):
    """Independent oracle: per-axis gaussian velocity integral in closed form."""
    c, s = math.cosh(t), math.sinh(t)
    wx2, wv2 = f0.width_x**2, f0.width_v**2
    alpha = s**2 / (2 * wx2) + c**2 / (2 * wv2)
    gamma = c**2 / (2 * wx2) + s**2 / (2 * wv2)
    beta_over_x = c * s * (1 / wx2 + 1 / wv2)
    quad = beta_over_x**2 / (4 * alpha) - gamma
    n = f0.dim
    norm = f0.value(np.zeros(n), np.zeros(n))  # includes product normalization
    r2 = float(np.dot(x, x))
    return norm * (math.pi / alpha) ** (n / 2) * math.exp(quad * r2)


def density_w_integral_oracle(f0, t, x, nodes=300):
    """Brute-force oracle via the substitution w = x cosh t - v sinh t."""
    s, c = math.sinh(t), math.cosh(t)
    rx, _ = f0.support_radii()
    cx = np.asarray(f0.center_x)
    axes = [
        cx[a] - rx + 2 * rx * (np.arange(nodes) + 0.5) / nodes for a in range(f0.dim)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    w = np.stack(mesh, axis=-1)
    vals = f0.value(w, (np.asarray(x) - w * c) / s)
    return vals.sum() * (2 * rx / nodes) ** f0.dim / s**f0.dim


class TestLinearFlow:
    def test_identity_at_zero(self):
        p = PhasePoint([1.0, -2.0], [0.3, 0.7])
        assert linear_flow(0.0, p) == p

    def test_trapped_line_decays(self):
        p = PhasePoint([1.0, 0.0], [-1.0, 0.0])
        for t in (0.5, 1.0, 3.0):
            q = linear_flow(t, p)
            # cosh t - sinh t cancels, so tolerate cosh(t)*ulp absolute error
            tol = math.cosh(t) * 1e-14
            np.testing.assert_allclose(q.x, [math.exp(-t), 0.0], atol=tol)
            np.testing.assert_allclose(q.v, [-math.exp(-t), 0.0], atol=tol)

    def test_log2_closed_form(self):
        q = linear_flow(math.log(2.0), PhasePoint([1.0, 0.0], [0.0, 0.0]))
        np.testing.assert_allclose(q.x, [1.25, 0.0], rtol=1e-15)
        np.testing.assert_allclose(q.v, [0.75, 0.0], rtol=1e-15)

    def test_group_property(self):
        rng = np.random.default_rng(7)
        p = PhasePoint(rng.normal(size=2), rng.normal(size=2))
        for t, s in [(0.5, 1.5), (-2.0, 3.0), (2.5, 2.5), (-4.0, -1.0)]:
            lhs = linear_flow(t, linear_flow(s, p))
            rhs = linear_flow(t + s, p)
            scale = max(rhs.norm(), 1.0)
            assert (
                math.hypot(
                    np.linalg.norm(lhs.x - rhs.x), np.linalg.norm(lhs.v - rhs.v)
                )
                <= 1e-12 * scale
            )

    def test_unstable_stable_splitting_exact(self):
        rng = np.random.default_rng(11)
        x, v = rng.normal(size=3), rng.normal(size=3)
        for t in (0.5, 2.0, 5.0):
            X, V = flow_arrays(t, x, v)
            tol = math.cosh(t) * 1e-14
            np.testing.assert_allclose(X + V, math.exp(t) * (x + v), rtol=1e-13)
            np.testing.assert_allclose(X - V, math.exp(-t) * (x - v), atol=tol)

    def test_overflow_guard(self):
        with pytest.raises(OverflowError, match="horizon too large"):
            linear_flow(701.0, PhasePoint([1.0, 0.0], [0.0, 0.0]))


class TestHamiltonians:
    def test_direct_formula(self):
        h = hamiltonian_invariants(PhasePoint([1.0, 0.0], [0.0, 1.0]))
        np.testing.assert_allclose(h, [-0.5, 0.5])

    def test_diagonal_gives_zeros(self):
        h = hamiltonian_invariants(PhasePoint([0.7, -0.3], [0.7, -0.3]))
        np.testing.assert_allclose(h, [0.0, 0.0])

    def test_conserved_along_flow(self):
        p = PhasePoint([0.4, -1.1, 0.2], [0.9, 0.1, -0.5])
        h0 = hamiltonian_invariants(p)
        for t in (0.5, 1.0, 2.0):
            ht = hamiltonian_invariants(linear_flow(t, p))
            np.testing.assert_allclose(ht, h0, atol=1e-12)


class TestInitialData:
    def test_kinds_validated(self):
        with pytest.raises(ValueError):
            initial_data("box", 1.0, ORIGIN2, 0.5)

    def test_product_mass_is_amplitude(self):
        f0 = initial_data("product", 0.01, ORIGIN2, 0.5)
        assert f0.mass() == pytest.approx(0.01, rel=1e-14)

    def test_gaussian_mass_closed_form(self):
        f0 = initial_data("gaussian", 2.0, ORIGIN2, 0.5, 0.7)
        want = 2.0 * (2 * math.pi * 0.25) * (2 * math.pi * 0.49)
        assert f0.mass() == pytest.approx(want, rel=1e-14)

    def test_bump_mass_against_grid_quadrature(self):
        f0 = initial_data("bump", 1.0, ORIGIN2, 0.4, 0.6)
        n, m = 2, 60
        rx, rv = f0.support_radii()
        axx = -rx + 2 * rx * (np.arange(m) + 0.5) / m
        axv = -rv + 2 * rv * (np.arange(m) + 0.5) / m
        X1, X2, V1, V2 = np.meshgrid(axx, axx, axv, axv, indexing="ij")
        x = np.stack([X1, X2], axis=-1)
        v = np.stack([V1, V2], axis=-1)
        est = f0.value(x, v).sum() * (2 * rx / m) ** n * (2 * rv / m) ** n
        assert f0.mass() == pytest.approx(est, rel=1e-6)

    def test_bump_compact_support(self):
        f0 = initial_data("bump", 1.0, ORIGIN2, 0.5)
        assert f0.value(np.array([1.51, 0.0]), np.zeros(2)) == 0.0
        assert f0.value(np.array([1.49, 0.0]), np.zeros(2)) > 0.0
        assert f0.value(np.zeros(2), np.zeros(2)) == pytest.approx(1.0)

    @pytest.mark.parametrize("kind", ["gaussian", "product", "bump"])
    def test_gradient_matches_finite_differences(self, kind):
        f0 = initial_data(kind, 1.3, PhasePoint([0.1, -0.2], [0.0, 0.3]), 0.5, 0.6)
        rng = np.random.default_rng(3)
        pts_x = rng.normal(scale=0.4, size=(20, 2))
        pts_v = rng.normal(scale=0.4, size=(20, 2))
        gx, gv = f0.grad(pts_x, pts_v)
        delta = 1e-6
        for a in range(2):
            e = np.zeros(2)
            e[a] = delta
            fd_x = (f0.value(pts_x + e, pts_v) - f0.value(pts_x - e, pts_v)) / (2 * delta)
            fd_v = (f0.value(pts_x, pts_v + e) - f0.value(pts_x, pts_v - e)) / (2 * delta)
            np.testing.assert_allclose(gx[:, a], fd_x, atol=2e-8)
            np.testing.assert_allclose(gv[:, a], fd_v, atol=2e-8)


class TestLinearSolution:
    def test_initial_time(self):
        f0 = initial_data("gaussian", 1.0, ORIGIN2, 0.5)
        p = PhasePoint([0.2, -0.1], [0.3, 0.0])
        assert eval_linear_solution(f0, 0.0, p) == pytest.approx(
            float(f0.value(p.x, p.v))
        )

    def test_transport_along_characteristics(self):
        f0 = initial_data("bump", 1.0, ORIGIN2, 0.5)
        q = PhasePoint([0.3, -0.2], [0.1, 0.4])
        for t in (0.5, 1.0, 2.0):
            p = linear_flow(t, q)
            assert eval_linear_solution(f0, t, p) == pytest.approx(
                float(f0.value(q.x, q.v)), rel=1e-10
            )

    def test_gaussian_backward_composition(self):
        # direct substitution oracle: evaluate f0 at the hand-written backward map
        f0 = initial_data("gaussian", 1.0, ORIGIN2, 0.5, 0.8)
        t = 1.0
        p = PhasePoint([1.0, 0.0], [1.0, 0.0])
        c, s = math.cosh(t), math.sinh(t)
        b_x = p.x * c - p.v * s
        b_v = p.v * c - p.x * s
        assert eval_linear_solution(f0, t, p) == pytest.approx(
            float(f0.value(b_x, b_v)), rel=1e-14
        )


@pytest.fixture(scope="module")
def cfg2d():
    return validate_config({"dim": 2, "grid_cells": 64, "grid_radius0": 4.0})


class TestDensityOnGrid:
    def test_product_reduces_to_spatial_gaussian_at_t0(self, cfg2d):
        f0 = initial_data("product", 1.0, ORIGIN2, 0.5)
        rho = linear_density_on_grid(f0, 0.0, cfg2d)
        ax = rho.axis()
        X1, X2 = np.meshgrid(ax, ax, indexing="ij")
        norm = (2 * math.pi * 0.25) ** -1
        want = norm * np.exp(-(X1**2 + X2**2) / (2 * 0.25))
        np.testing.assert_allclose(rho.values, want, atol=1e-8)

    def test_mass_conserved_in_time(self, cfg2d):
        f0 = initial_data("gaussian", 0.7, ORIGIN2, 0.5, 0.6)
        masses = [
            linear_density_on_grid(f0, t, cfg2d).integral() for t in (0.0, 1.0, 2.5)
        ]
        for m in masses:
            assert m == pytest.approx(f0.mass(), rel=1e-8)

    def test_matches_closed_form_at_positive_time(self, cfg2d):
        f0 = initial_data("gaussian", 1.0, ORIGIN2, 0.5, 0.7)
        t = 1.2
        rho = linear_density_on_grid(f0, t, cfg2d)
        ax = rho.axis()
        for i, j in [(32, 32), (30, 34), (36, 28)]:
            want = gaussian_density_closed_form(f0, t, np.array([ax[i], ax[j]]))
            assert rho.values[i, j] == pytest.approx(want, rel=1e-8)

    def test_w_integral_oracle_agrees(self, cfg2d):
        f0 = initial_data("gaussian", 1.0, ORIGIN2, 0.5)
        t = 2.0
        rho = linear_density_on_grid(f0, t, cfg2d)
        ax = rho.axis()
        x = np.array([ax[32], ax[32]])
        assert rho.values[32, 32] == pytest.approx(
            density_w_integral_oracle(f0, t, x), rel=1e-6
        )

    def test_weighted_sup_approaches_constant(self, cfg2d):
        # Theorem-rate check: sup_x rho * e^{n t} levels off as t grows.
        f0 = initial_data("gaussian", 1.0, ORIGIN2, 0.5)
        sups = []
        for t in (2.0, 3.0, 4.0):
            rho = linear_density_on_grid(f0, t, cfg2d)
            sups.append(rho.values.max() * math.exp(2 * t))
            # the grid sup equals the closed form at the argmax node
            i, j = np.unravel_index(np.argmax(rho.values), rho.values.shape)
            ax = rho.axis()
            want = gaussian_density_closed_form(f0, t, np.array([ax[i], ax[j]]))
            assert rho.values[i, j] == pytest.approx(want, rel=1e-7)
        sups = np.array(sups)
        assert sups.max() / sups.min() < 1.02
        # limiting constant at x=0: e^{2t} (pi/alpha(t)) -> pi for width 0.5
        at_zero = math.exp(8.0) * gaussian_density_closed_form(
            f0, 4.0, np.zeros(2)
        )
        assert at_zero == pytest.approx(math.pi, rel=1e-3)

    def test_budget_guard(self):
        cfg3 = validate_config({"dim": 3, "grid_cells": 32})
        f0 = initial_data(
            "gaussian", 1.0, PhasePoint([0.0] * 3, [0.0] * 3), 0.5
        )
        with pytest.raises(QuadratureBudgetError):
            linear_density_on_grid(f0, 1.0, cfg3)

    def test_zero_amplitude_gives_zero_density(self, cfg2d):
        f0 = initial_data("gaussian", 0.0, ORIGIN2, 0.5)
        rho = linear_density_on_grid(f0, 1.0, cfg2d)
        assert np.all(rho.values == 0.0)
