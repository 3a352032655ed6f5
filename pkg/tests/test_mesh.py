import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pageflat import synth
from pageflat.errors import MeshFoldError
from pageflat.mesh import (
    EPSILON,
    GridLattice,
    GridSpec,
    block_indices,
    build_lattice,
    build_series,
    extract_blocks,
    interval_points,
    scale_factor,
)
from pageflat.polyfit import PolyCurve, evolve_family, fit

curv = st.floats(-50, 50, allow_nan=False)


def line(c0, c1=0.0, axis="x", domain=(-1.0, 1.0)):
    return PolyCurve([c0, c1, 0.0], axis, domain)


class TestScaleFactor:
    def test_worked_example(self):
        assert scale_factor(-0.5, 0.5) == pytest.approx(2.0)
        assert scale_factor(-0.5, 0.5) == pytest.approx(1 / 0.5)

    @pytest.mark.parametrize("k", [-3.0, 0.0, 1e-9, 0.7])
    def test_equal_curvatures(self, k):
        assert scale_factor(k, k) == 1.0

    def test_concave_case(self):
        assert scale_factor(0.25, -0.25) == pytest.approx(0.25)

    def test_epsilon_guard(self):
        assert scale_factor(0.0, 1.9e-6) == 1.0
        assert scale_factor(0.0, 2.2e-6) == pytest.approx(1 / 1.1e-6)

    def test_vectorized(self):
        out = scale_factor(np.array([0.0, -1.0]), np.array([0.0, 1.0]))
        np.testing.assert_allclose(out, [1.0, 1.0])

    @given(curv, curv)
    def test_positive_and_reciprocal(self, ki, kf):
        g = scale_factor(ki, kf)
        assert g > 0
        if abs(kf - ki) / 2 >= EPSILON:
            assert g * scale_factor(kf, ki) == pytest.approx(1.0, rel=1e-12)


class TestSeries:
    def test_straight_lines_uniform(self):
        s = build_series(line(0.0), line(5.0), 9)
        assert np.all(s.gammas == 1)
        np.testing.assert_allclose(s.Gammas, np.full(8, 1 / 8))
        assert s.clamped == 0

    def _widths(self, top, bottom, n=21):
        s = build_series(PolyCurve(top, "x", (-1, 1)), PolyCurve(bottom, "x", (-1, 1)), n)
        return s.Gammas

    def test_cap_over_bowl_denser_at_peak(self):
        # in image rows (y down) top = -x^2 sags in the middle and bottom = x^2 bulges down
        w = self._widths([0, 0, -1], [1, 0, 1])
        assert np.all(np.diff(w[:10]) < 0) and np.all(np.diff(w[10:]) > 0)

    def test_mirrored_pair_sparser_at_peak(self):
        w = self._widths([0, 0, 1], [1, 0, -1])
        assert np.all(np.diff(w[:10]) > 0) and np.all(np.diff(w[10:]) < 0)

    def test_kappa_roles(self):
        s = build_series(PolyCurve([0, 0, -1], "x", (-1, 1)), PolyCurve([0, 0, 1], "x", (-1, 1)), 3)
        np.testing.assert_allclose(s.kappa_i[1], -2)
        np.testing.assert_allclose(s.kappa_f[1], 2)
        np.testing.assert_allclose(s.gammas[1], 0.5)

    def test_clamp_counts(self):
        s = build_series(PolyCurve([0, 0, -1e-4], "x", (0, 1)), PolyCurve([0, 0, 1e-4], "x", (0, 1)), 5)
        assert s.clamped == 5 and np.all(s.used == 10)
        raw = build_series(PolyCurve([0, 0, -1e-4], "x", (0, 1)), PolyCurve([0, 0, 1e-4], "x", (0, 1)), 5,
                           clamp=None)
        assert raw.clamped == 0 and np.all(raw.used > 10)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            build_series(line(0), line(1), 1)
        with pytest.raises(ValueError):
            build_series(line(0), line(1, domain=(0, 2)), 5)
        with pytest.raises(ValueError):
            build_series(line(0), line(1), 5, clamp=(0.0, 1.0))

    def test_printed_formula_undefined(self):
        steep = PolyCurve([0, -3, 1], "x", (-1, 1))
        with pytest.raises(ValueError, match="curvature undefined"):
            build_series(steep, steep, 5, as_printed=True)

    @given(st.lists(st.floats(-2, 2), min_size=3, max_size=5), st.lists(st.floats(-2, 2), min_size=3, max_size=5),
           st.integers(2, 40))
    def test_normalization(self, a, b, n):
        s = build_series(PolyCurve(a, "x", (-1, 1)), PolyCurve(b, "x", (-1, 1)), n)
        assert abs(s.Gammas.sum() - 1.0) <= 1e-9
        assert np.all(s.gammas > 0)
        xs = interval_points(s, -3.0, 11.0)
        assert np.all(np.diff(xs) > 0)
        assert xs[0] == -3.0 and abs(xs[-1] - 11.0) <= 1e-6


class TestIntervals:
    def test_uniform(self):
        np.testing.assert_allclose(interval_points(np.full(4, 0.25), 0, 100), [0, 25, 50, 75, 100])

    def test_cumulative(self):
        np.testing.assert_allclose(interval_points(np.array([0.5, 0.25, 0.25]), 0, 8), [0, 4, 6, 8])

    def test_reversed_interval(self):
        with pytest.raises(ValueError):
            interval_points(np.array([1.0]), 5, 5)


def vertical_lines(x_left, x_right, y_dom):
    return evolve_family(PolyCurve([x_left, 0, 0], "y", y_dom), PolyCurve([x_right, 0, 0], "y", y_dom), 64)


class TestLattice:
    def test_orthogonal_lines_are_cartesian(self):
        xs = np.array([0.0, 3.0, 7.5, 10.0])
        ys = np.array([2.0, 4.0, 9.0])
        vert = vertical_lines(0.0, 10.0, (2.0, 9.0))
        horiz = evolve_family(line(2.0, domain=(0.0, 10.0)), line(9.0, domain=(0.0, 10.0)), 64)
        lat = build_lattice(vert, xs, horiz, ys)
        X, Y = np.meshgrid(xs, ys)
        np.testing.assert_allclose(lat.grid, np.stack([X, Y], -1), atol=1e-9)

    def test_row_major_layout(self):
        lat = build_lattice(vertical_lines(0, 4, (0, 2)), [0, 2, 4],
                            evolve_family(line(0, domain=(0, 4)), line(2, domain=(0, 4)), 8), [0, 1, 2])
        assert lat.points[1].tolist() == pytest.approx([2, 0])
        assert lat.points[3].tolist() == pytest.approx([0, 1])

    def test_double_crossing_is_a_fold(self):
        # x = 10 - y meets y = (x - 5)^2 / 2 + 1 at x = 1 and x = 7
        vert = evolve_family(PolyCurve([10.0, -1.0, 0], "y", (0, 10)), PolyCurve([12.0, -1.0, 0], "y", (0, 10)), 4)
        horiz = evolve_family(PolyCurve([13.5, -5.0, 0.5], "x", (0, 10)), PolyCurve([15.5, -5.0, 0.5], "x", (0, 10)), 4)
        with pytest.raises(MeshFoldError, match="mesh fold") as err:
            build_lattice(vert, [0.0, 10.0], horiz, [0.0, 10.0])
        assert (err.value.i, err.value.j) == (0, 0)

    def test_axis_check(self):
        fam = evolve_family(line(0), line(1), 4)
        with pytest.raises(ValueError):
            build_lattice(fam, [0, 1], fam, [0, 1])

    def test_cylinder_mesh_within_half_pixel(self):
        scene, spec = synth.scene_from_dict({"grid": [12, 10]})
        truth = synth.render(scene, spec)
        W, H = scene.width, scene.height
        cam = synth.Camera(scene.distance, scene.tilt, W, H, scene.margin)
        u = np.linspace(0, W - 1, 3001)

        def edge(v):
            x, y = cam.project(u - (W - 1) / 2, np.full_like(u, v - (H - 1) / 2), scene.z(u))
            return np.c_[x, y]

        top, bottom = edge(0.0), edge(H - 1.0)
        dom = (top[0, 0], top[-1, 0])
        horiz = evolve_family(fit(top, 8, "x", dom), fit(bottom, 8, "x", dom), 256)
        g = truth.mesh.grid
        y_dom = (g[0, 0, 1], g[-1, 0, 1])
        vert = vertical_lines(g[0, 0, 0], g[0, -1, 0], y_dom)
        lat = build_lattice(vert, g[0, :, 0], horiz, g[:, 0, 1])
        assert np.abs(lat.points - truth.mesh.points).max() <= 0.5

    def test_json_round_trip(self):
        lat = GridLattice(np.arange(12.0).reshape(6, 2), GridSpec(3, 2))
        back = GridLattice.from_json(lat.to_json())
        assert back.spec == lat.spec and np.array_equal(back.points, lat.points)

    def test_size_checked(self):
        with pytest.raises(ValueError):
            GridLattice(np.zeros((5, 2)), GridSpec(3, 2))
        with pytest.raises(ValueError):
            GridSpec(1, 5)


class TestBlocks:
    def lattice(self, M, N):
        X, Y = np.meshgrid(np.arange(M, dtype=float), np.arange(N, dtype=float))
        return GridLattice(np.stack([X, Y], -1).reshape(-1, 2), GridSpec(M, N))

    def test_single_block(self):
        (b,) = extract_blocks(self.lattice(2, 2))
        assert b.k == 0
        assert b.corners.tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]

    def test_four_by_three(self):
        assert [b.k for b in extract_blocks(self.lattice(4, 3))] == [0, 1, 2, 4, 5, 6]

    def test_right_edge_excluded(self):
        assert 3 not in block_indices(4, 3) and 7 not in block_indices(4, 3)

    @given(st.integers(2, 15), st.integers(2, 15))
    def test_count_and_coverage(self, M, N):
        ks = block_indices(M, N)
        assert len(ks) == (M - 1) * (N - 1)
        covered = set()
        for k in ks:
            covered |= {k, k + 1, k + M, k + M + 1}
        assert covered == set(range(M * N))
        origins = set(ks)
        assert origins == {k for k in range(M * N) if k % M != M - 1 and k // M != N - 1}
