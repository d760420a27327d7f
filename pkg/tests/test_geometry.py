"""Projection geometry: examples, oracles, and invariants."""

import numpy as np
import pytest

from linecfm import geometry as g
from linecfm.geometry import DegenerateLineError, PathParams, VariantLine
from linecfm.verify import dense_projector, rel_err


def line_of(direction, offset=None):
    direction = np.asarray(direction, dtype=float)
    if offset is None:
        offset = np.zeros_like(direction)
    return VariantLine(direction=direction, offset=offset)


def random_line(rng, dim):
    return VariantLine(direction=rng.standard_normal(dim), offset=rng.standard_normal(dim))


class TestProject:
    def test_axis_aligned(self):
        assert np.allclose(g.project(line_of([1.0, 0.0]), [3.0, 4.0]), [3.0, 0.0])

    def test_diagonal(self):
        assert np.allclose(g.project(line_of([1.0, 1.0]), [2.0, 0.0]), [1.0, 1.0])

    def test_all_ones_projects_to_mean(self):
        rng = np.random.default_rng(3)
        v = rng.standard_normal(1024)
        out = g.project(line_of(np.ones(1024)), v)
        assert np.allclose(out, np.full(1024, v.mean()))

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            line = random_line(rng, 8)
            v = rng.standard_normal(8)
            assert rel_err(g.project(line, v), dense_projector(line.direction) @ v) < 1e-12

    def test_batch_matches_per_row(self):
        # batched dot products may round differently than per-row ones
        rng = np.random.default_rng(1)
        line = random_line(rng, 6)
        vs = rng.standard_normal((10, 6))
        batch = g.project(line, vs)
        for i in range(10):
            assert np.allclose(batch[i], g.project(line, vs[i]), rtol=1e-13, atol=1e-15)

    def test_degenerate_direction_rejected(self):
        with pytest.raises(DegenerateLineError):
            g.project(line_of([0.0, 0.0]), [1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            g.project(line_of([1.0, 0.0]), [1.0, 2.0, 3.0])


class TestReject:
    def test_axis_aligned(self):
        assert np.allclose(g.reject(line_of([1.0, 0.0]), [3.0, 4.0]), [0.0, 4.0])

    def test_direction_annihilated(self):
        rng = np.random.default_rng(2)
        line = random_line(rng, 8)
        assert np.linalg.norm(g.reject(line, line.direction)) < 1e-12 * np.linalg.norm(
            line.direction
        )

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            line = random_line(rng, 8)
            v = rng.standard_normal(8)
            expected = (np.eye(8) - dense_projector(line.direction)) @ v
            assert rel_err(g.reject(line, v), expected) < 1e-12


class TestScaleOrthogonal:
    def test_identity_at_one(self):
        rng = np.random.default_rng(5)
        line = random_line(rng, 4)
        v = rng.standard_normal(4)
        assert np.allclose(g.scale_orthogonal(line, 1.0, v), v)

    def test_parallel_kept_orthogonal_halved(self):
        out = g.scale_orthogonal(line_of([1.0, 0.0]), 0.5, [2.0, 4.0])
        assert np.allclose(out, [2.0, 2.0])

    def test_tiny_factor_on_orthogonal_vector(self):
        # the production-scale factor: an orthogonal vector is scaled outright
        line = line_of([1.0, 0.0])
        out = g.scale_orthogonal(line, 1e-4, [0.0, 3.0])
        assert np.allclose(out, [0.0, 3e-4])

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.5])
    def test_factor_out_of_range(self, bad):
        with pytest.raises(ValueError):
            g.scale_orthogonal(line_of([1.0, 0.0]), bad, [1.0, 1.0])


class TestTargetMean:
    def test_orthogonal_offset_unchanged(self):
        line = line_of([1.0, 0.0], [0.0, 2.0])
        assert np.allclose(g.target_mean(line), [0.0, 2.0])

    def test_offset_equal_direction_gives_zero(self):
        a = np.array([1.0, 2.0, -1.0])
        assert np.allclose(g.target_mean(VariantLine(a, a.copy())), 0.0)

    def test_matches_brute_force_minimizer(self):
        # target_mean is the closest point of the line to the origin
        rng = np.random.default_rng(6)
        line = random_line(rng, 8)
        grid = np.linspace(-20.0, 20.0, 400_001)
        points = np.multiply.outer(grid, line.direction) + line.offset
        best = points[np.argmin(np.linalg.norm(points, axis=1))]
        assert np.allclose(g.target_mean(line), best, atol=1e-3)

    def test_lies_on_line(self):
        rng = np.random.default_rng(7)
        line = random_line(rng, 5)
        assert g.distance_to_line(line, g.target_mean(line)) < 1e-12


class TestSampleTarget:
    def test_zero_source_gives_mean(self):
        rng = np.random.default_rng(8)
        line = random_line(rng, 4)
        assert np.allclose(g.sample_target(line, 0.3, np.zeros(4)), g.target_mean(line))

    def test_identity_when_width_one_and_zero_offset(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal(4)
        line = VariantLine(a, np.zeros(4))
        x0 = rng.standard_normal(4)
        assert np.allclose(g.sample_target(line, 1.0, x0), x0)

    def test_monte_carlo_moments(self):
        rng = np.random.default_rng(10)
        line = random_line(rng, 16)
        width = 0.1
        draws = 100_000
        x0 = rng.standard_normal((draws, 16))
        endpoints = g.sample_target(line, width, x0)
        mean_true = g.target_mean(line)
        se = endpoints.std(axis=0, ddof=1) / np.sqrt(draws)
        assert np.all(np.abs(endpoints.mean(axis=0) - mean_true) < 4.0 * se)
        residual = g.reject(line, endpoints - line.offset)
        ortho_std = np.sqrt((residual**2).sum() / (draws * 15))
        assert abs(ortho_std - width) < 0.05 * width
        unit = line.direction / np.linalg.norm(line.direction)
        par_var = np.var((endpoints - mean_true) @ unit, ddof=1)
        assert abs(par_var - 1.0) < 0.05


class TestPathPoint:
    def test_endpoints(self):
        x0 = np.array([2.0, 0.0])
        x1 = np.array([0.0, 2.0])
        assert np.array_equal(g.path_point(x0, x1, 0.0), x0)
        assert np.array_equal(g.path_point(x0, x1, 1.0), x1)

    def test_midpoint(self):
        assert np.allclose(g.path_point([2.0, 0.0], [0.0, 2.0], 0.5), [1.0, 1.0])

    @pytest.mark.parametrize("t", [-0.1, 1.1])
    def test_time_out_of_range(self, t):
        with pytest.raises(ValueError):
            g.path_point([0.0], [1.0], t)

    def test_batch_times(self):
        x0 = np.zeros((3, 2))
        x1 = np.ones((3, 2))
        out = g.path_point(x0, x1, np.array([0.0, 0.5, 1.0]))
        assert np.allclose(out, [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])


class TestConditionalVelocity:
    def test_zero_source(self):
        rng = np.random.default_rng(11)
        line = random_line(rng, 4)
        u = g.conditional_velocity(line, 0.37, np.zeros(4))
        assert np.allclose(u, g.target_mean(line))

    def test_zero_offset_full_width(self):
        rng = np.random.default_rng(12)
        a = rng.standard_normal(4)
        line = VariantLine(a, np.zeros(4))
        assert np.allclose(g.conditional_velocity(line, 1.0, rng.standard_normal(4)), 0.0)

    def test_orthogonal_to_direction_and_closed_form(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            line = random_line(rng, 8)
            width = rng.uniform(1e-4, 1.0)
            x0 = rng.standard_normal(8)
            u = g.conditional_velocity(line, width, x0)
            cos = abs(line.direction @ u) / (np.linalg.norm(line.direction) * np.linalg.norm(u))
            assert cos < 1e-10
            closed = g.reject(line, line.offset - (1.0 - width) * x0)
            assert rel_err(u, closed) < 1e-12

    def test_conditional_draw_consistency(self):
        rng = np.random.default_rng(14)
        line = random_line(rng, 6)
        draw = g.conditional_draw(line, 0.2, rng.standard_normal(6))
        assert np.array_equal(draw.velocity, draw.x1_prime - draw.x0)

    def test_conditional_draw_rejects_inconsistent_velocity(self):
        line = line_of([1.0, 0.0])
        with pytest.raises(ValueError):
            g.ConditionalDraw(
                x0=np.zeros(2), x1_prime=np.ones(2), velocity=np.zeros(2), line=line
            )


class TestOtReduction:
    def test_zero_sigma(self):
        x1 = np.array([1.0, 2.0])
        x0 = np.array([0.5, -1.0])
        endpoint, velocity = g.ot_target_and_velocity(x1, 0.0, x0)
        assert np.array_equal(endpoint, x1)
        assert np.array_equal(velocity, x1 - x0)

    def test_zero_source(self):
        x1 = np.array([1.0, 2.0])
        endpoint, velocity = g.ot_target_and_velocity(x1, 0.3, np.zeros(2))
        assert np.array_equal(endpoint, x1)
        assert np.array_equal(velocity, x1)

    def test_matches_degenerate_line_machinery(self):
        rng = np.random.default_rng(15)
        sigma = 1e-4
        for _ in range(100):
            x1 = rng.standard_normal(8)
            x0 = rng.standard_normal(8)
            endpoint, velocity = g.ot_target_and_velocity(x1, sigma, x0)
            # zero-projector substitution into the line-aligned formulas
            endpoint_sub = (x1 - 0.0) + (sigma * x0 + (1.0 - sigma) * 0.0)
            assert rel_err(endpoint, endpoint_sub) < 1e-14
            assert rel_err(velocity, endpoint_sub - x0) < 1e-14
            assert rel_err(velocity, x1 - (1.0 - sigma) * x0) < 1e-14


class TestDistanceToLine:
    def test_point_on_line(self):
        rng = np.random.default_rng(16)
        line = random_line(rng, 5)
        on_line = line.direction * 3.0 + line.offset
        assert g.distance_to_line(line, on_line) < 1e-12

    def test_axis_aligned(self):
        assert g.distance_to_line(line_of([1.0, 0.0]), [5.0, 2.0]) == pytest.approx(2.0)

    def test_matches_grid_search(self):
        rng = np.random.default_rng(17)
        line = random_line(rng, 8)
        x = rng.standard_normal(8)
        grid = np.linspace(-30.0, 30.0, 600_001)
        points = np.multiply.outer(grid, line.direction) + line.offset
        brute = np.min(np.linalg.norm(points - x, axis=1))
        assert g.distance_to_line(line, x) == pytest.approx(brute, abs=1e-4)

    def test_nearest_variant_is_on_line(self):
        rng = np.random.default_rng(18)
        line = random_line(rng, 6)
        x = rng.standard_normal(6)
        nearest = g.nearest_variant(line, x)
        assert g.distance_to_line(line, nearest) < 1e-10
        assert np.linalg.norm(x - nearest) == pytest.approx(g.distance_to_line(line, x))


class TestInvariants:
    def test_projector_idempotent(self):
        rng = np.random.default_rng(19)
        for dim in (2, 8, 1024):
            for _ in range(50):
                line = random_line(rng, dim)
                v = rng.standard_normal(dim)
                p = g.project(line, v)
                assert rel_err(g.project(line, p), p) < 1e-12

    def test_project_plus_reject_recomposes(self):
        rng = np.random.default_rng(20)
        line = random_line(rng, 16)
        v = rng.standard_normal(16)
        assert rel_err(g.project(line, v) + g.reject(line, v), v) < 1e-14

    def test_direction_scale_invariance(self):
        rng = np.random.default_rng(21)
        line = random_line(rng, 8)
        v = rng.standard_normal(8)
        for c in (1e-3, -2.0, 7.5):
            scaled = VariantLine(c * line.direction, line.offset)
            assert rel_err(g.project(scaled, v), g.project(line, v)) < 1e-12


class TestTypes:
    def test_line_validation(self):
        with pytest.raises(ValueError):
            VariantLine(direction=np.ones(3), offset=np.ones(4))
        with pytest.raises(ValueError):
            VariantLine(direction=np.ones((2, 2)), offset=np.ones(4))

    def test_degenerate_flag(self):
        assert VariantLine(np.zeros(3), np.ones(3)).is_degenerate
        assert not VariantLine(np.ones(3), np.ones(3)).is_degenerate

    def test_path_params_validation(self):
        assert PathParams("LP", 0.5).mode == "lp"
        with pytest.raises(ValueError):
            PathParams("lp", 0.0)
        with pytest.raises(ValueError):
            PathParams("lp", 1.5)
        with pytest.raises(ValueError):
            PathParams("ot", -0.1)
        PathParams("ot", 0.0)  # allowed
        with pytest.raises(ValueError):
            PathParams("bogus", 0.5)
