import math

import numpy as np
import pytest

from vptrap.core import (
    ConfigError,
    DecaySeries,
    GridField,
    PhasePoint,
    grid_axis,
    grid_interpolate,
    grid_scale,
    node_radii,
    parse_config_file,
    validate_config,
)


class TestPhasePoint:
    def test_basic(self):
        p = PhasePoint([1.0, 0.0], [0.0, 1.0])
        assert p.dim == 2
        assert p.norm() == pytest.approx(math.sqrt(2.0))

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            PhasePoint([1.0, 0.0], [0.0, 1.0, 2.0])

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            PhasePoint([1.0], [2.0])
        with pytest.raises(ValueError):
            PhasePoint([1.0] * 4, [2.0] * 4)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            PhasePoint([np.nan, 0.0], [0.0, 0.0])

    def test_immutable(self):
        p = PhasePoint([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            p.x[0] = 5.0


class TestValidateConfig:
    def test_defaults_applied(self):
        cfg = validate_config({"dim": 2, "eps": 0.01})
        assert cfg.dim == 2
        assert cfg.mu == 1
        assert cfg.eps == 0.01
        assert cfg.grid_cells >= 16

    def test_bad_dimension(self):
        with pytest.raises(ConfigError, match="dimension must be 2 or 3"):
            validate_config({"dim": 4})

    def test_outside_small_data_regime(self):
        with pytest.raises(ConfigError, match="outside small-data regime"):
            validate_config({"dim": 2, "eps": 0.5})

    def test_nonpositive_values_rejected(self):
        with pytest.raises(ConfigError):
            validate_config({"dt": -0.01})
        with pytest.raises(ConfigError):
            validate_config({"eps": 0.0})
        with pytest.raises(ConfigError):
            validate_config({"t_max": 0.001, "dt": 0.02})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            validate_config({"dim": 2, "nonsense": 1})

    def test_idempotent(self):
        cfg = validate_config({"dim": 3, "eps": 0.05, "seed": 99})
        again = validate_config(cfg.as_dict())
        assert again == cfg

    def test_string_coercion(self):
        cfg = validate_config({"dim": "3", "eps": "0.02", "mu": "-1"})
        assert (cfg.dim, cfg.eps, cfg.mu) == (3, 0.02, -1)

    def test_invariants(self):
        with pytest.raises(ConfigError):
            validate_config({"dt": 0.1})
        with pytest.raises(ConfigError):
            validate_config({"grid_cells": 8})


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# reference run\n"
            "dim = 2\n"
            "eps = 0.01   # small data\n"
            "\n"
            "seed=42\n",
            encoding="utf-8",
        )
        cfg = validate_config(parse_config_file(path))
        assert (cfg.dim, cfg.eps, cfg.seed) == (2, 0.01, 42)

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("dim=2\ndim=3\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_file(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("dim 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="key=value"):
            parse_config_file(path)


class TestGridScale:
    def test_closed_forms(self):
        cfg = validate_config({"grid_radius0": 4.0})
        assert grid_scale(0.0, cfg) == 4.0
        assert grid_scale(math.log(2.0), cfg) == pytest.approx(8.0, rel=1e-15)
        cfg1 = validate_config({"grid_radius0": 1.0})
        assert grid_scale(1.0, cfg1) == pytest.approx(2.718281828, rel=1e-9)

    def test_semigroup_property(self):
        cfg = validate_config({"grid_radius0": 2.5})
        for t in (0.0, 0.7, 2.0):
            for u in (0.3, 1.1):
                assert grid_scale(t + u, cfg) == pytest.approx(
                    grid_scale(t, cfg) * math.exp(u), rel=1e-12
                )

    def test_strictly_increasing(self):
        cfg = validate_config({})
        ts = np.linspace(0, 5, 40)
        ss = [grid_scale(t, cfg) for t in ts]
        assert np.all(np.diff(ss) > 0)


class TestDecaySeries:
    def test_validation(self):
        s = DecaySeries([0.0, 1.0, 2.0], [3.0, 2.0, 1.0])
        assert len(s) == 3
        with pytest.raises(ValueError):
            DecaySeries([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            DecaySeries([0.0, 1.0], [1.0])

    def test_window(self):
        s = DecaySeries([0.0, 1.0, 2.0, 3.0], [4.0, 3.0, 2.0, 1.0])
        w = s.window(0.5, 2.5)
        assert w.times.tolist() == [1.0, 2.0]


class TestGridField:
    def test_scalar_round_trip(self):
        m = 16
        vals = np.ones((m, m))
        f = GridField(vals, scale=4.0, dim=2)
        assert not f.is_vector
        assert f.cells == m
        assert f.cell_width == pytest.approx(0.5)
        # box volume is (2*4)^2 = 64
        assert f.integral() == pytest.approx(64.0)

    def test_vector_shape(self):
        f = GridField(np.zeros((8, 8, 2)), scale=1.0, dim=2)
        assert f.is_vector

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            GridField(np.zeros((8, 9)), scale=1.0, dim=2)
        with pytest.raises(ValueError):
            GridField(np.zeros((8, 8, 3)), scale=1.0, dim=2)

    def test_axis_centers(self):
        ax = grid_axis(4, 2.0)
        assert ax.tolist() == [-1.5, -0.5, 0.5, 1.5]

    def test_node_radii(self):
        f = GridField(np.zeros((4, 4)), scale=2.0, dim=2)
        r = node_radii(f)
        assert r[0, 0] == pytest.approx(math.hypot(1.5, 1.5))


class TestInterpolation:
    def test_linear_function_exact_inside(self):
        m, s = 32, 2.0
        ax = grid_axis(m, s)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        f = GridField(2.0 * X - 3.0 * Y + 1.0, scale=s, dim=2)
        pts = np.array([[0.1, -0.4], [1.0, 1.0], [-0.33, 0.17]])
        got = grid_interpolate(f, pts)
        want = 2.0 * pts[:, 0] - 3.0 * pts[:, 1] + 1.0
        np.testing.assert_allclose(got, want, rtol=1e-13)

    def test_zero_outside_hull(self):
        f = GridField(np.ones((16, 16)), scale=1.0, dim=2)
        got = grid_interpolate(f, np.array([[2.0, 0.0], [0.0, -1.5]]))
        assert np.all(got == 0.0)

    def test_vector_field(self):
        m, s = 16, 1.0
        ax = grid_axis(m, s)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        vals = np.stack([X, Y], axis=-1)
        f = GridField(vals, scale=s, dim=2)
        got = grid_interpolate(f, np.array([[0.25, -0.5]]))
        np.testing.assert_allclose(got, [[0.25, -0.5]], atol=1e-14)

    def test_trilinear_3d(self):
        m, s = 8, 1.0
        ax = grid_axis(m, s)
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        f = GridField(X + 2 * Y - Z, scale=s, dim=3)
        pts = np.array([[0.1, 0.2, -0.3]])
        np.testing.assert_allclose(grid_interpolate(f, pts), [0.1 + 0.4 + 0.3], rtol=1e-12)
