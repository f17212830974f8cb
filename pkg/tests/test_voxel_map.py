import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_esdf, dense_first_occupied, dense_segment_blocked, trilinear
from pathguide.exceptions import RejectedInput
from pathguide.voxel_map import GridSpec, QueryPolicy, build_esdf, load_map, save_map
from scenarios import box_field


def single_voxel_field():
    spec = GridSpec((0, 0, 0), 0.1, (20, 20, 20))
    occ = np.zeros(spec.dims, dtype=bool)
    occ[5, 5, 5] = True
    return build_esdf(occ, spec)


def random_field(seed, dims=(12, 10, 8), density=0.1, vs=0.1):
    rng = np.random.default_rng(seed)
    spec = GridSpec(rng.uniform(-1, 1, 3), vs, dims)
    return build_esdf(rng.random(dims) < density, spec)


class TestGridSpec:
    def test_rejects_bad_voxel_size_and_dims(self):
        with pytest.raises(RejectedInput):
            GridSpec((0, 0, 0), 0.0, (2, 2, 2))
        with pytest.raises(RejectedInput):
            GridSpec((0, 0, 0), 0.1, (2, 0, 2))

    def test_center_index_round_trip(self):
        spec = GridSpec((-1.0, 0.5, 2.0), 0.25, (7, 5, 3))
        idx = np.indices(spec.dims).reshape(3, -1).T
        assert np.array_equal(spec.index_of(spec.center(idx)), idx)

    def test_negative_margin_rejected(self):
        with pytest.raises(RejectedInput):
            QueryPolicy(margin=-0.1)


class TestBuildEsdf:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(RejectedInput):
            build_esdf(np.zeros((3, 3, 3), bool), GridSpec((0, 0, 0), 0.1, (3, 3, 4)))

    def test_all_free_is_clamped_positive(self):
        spec = GridSpec((0, 0, 0), 0.1, (6, 6, 6))
        field = build_esdf(np.zeros(spec.dims, bool), spec)
        assert np.all(field.esdf >= field.policy.out_of_bounds_distance)

    def test_all_occupied_is_negative(self):
        spec = GridSpec((0, 0, 0), 0.1, (4, 4, 4))
        field = build_esdf(np.ones(spec.dims, bool), spec)
        assert np.all(field.esdf < 0)

    def test_face_neighbour_of_single_voxel(self):
        field = single_voxel_field()
        assert field.esdf[6, 5, 5] == pytest.approx(0.1)
        assert field.esdf[5, 5, 5] == pytest.approx(-0.1)
        assert field.esdf[6, 6, 6] == pytest.approx(0.1 * np.sqrt(3))

    def test_random_20_cube_matches_all_pairs(self):
        rng = np.random.default_rng(3)
        spec = GridSpec((0, 0, 0), 0.1, (20, 20, 20))
        occ = rng.random(spec.dims) < 0.1
        field = build_esdf(occ, spec)
        np.testing.assert_allclose(field.esdf, brute_force_esdf(occ, 0.1), atol=1e-9)

    def test_deterministic(self):
        a, b = random_field(8), random_field(8)
        assert np.array_equal(a.esdf, b.esdf)

    def test_field_is_read_only(self):
        field = random_field(1)
        with pytest.raises(ValueError):
            field.esdf[0, 0, 0] = 1.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.02, 0.6))
    def test_sign_agrees_with_occupancy(self, seed, density):
        field = random_field(seed, dims=(9, 7, 5), density=density)
        assert np.all(field.esdf[field.occupancy] <= 0)
        assert np.all(field.esdf[~field.occupancy] >= 0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.02, 0.5))
    def test_oracle_equivalence_small_grids(self, seed, density):
        rng = np.random.default_rng(seed)
        dims = tuple(int(d) for d in rng.integers(1, 11, 3))
        occ = rng.random(dims) < density
        field = build_esdf(occ, GridSpec((0, 0, 0), 0.2, dims))
        assert np.abs(field.esdf - brute_force_esdf(occ, 0.2)).max() <= 0.2


class TestDistance:
    def test_voxel_center_returns_stored_value(self):
        field = random_field(2)
        for idx in [(0, 0, 0), (3, 4, 5), (11, 9, 7)]:
            assert field.distance_at(field.spec.center(idx)) == pytest.approx(field.esdf[idx], abs=1e-12)

    def test_midpoint_between_face_neighbours(self):
        field = single_voxel_field()
        # esdf 0.1 at (6,5,5), 0.2 at (7,5,5)
        p = (field.spec.center((6, 5, 5)) + field.spec.center((7, 5, 5))) / 2
        assert field.distance_at(p) == pytest.approx(0.15)
        p = (field.spec.center((7, 5, 5)) + field.spec.center((9, 5, 5))) / 2
        assert field.distance_at(p) == pytest.approx(0.3)

    def test_matches_eight_corner_oracle(self):
        field = random_field(4)
        rng = np.random.default_rng(0)
        pts = rng.uniform(field.spec.lower, field.spec.upper, (100, 3))
        got = field.distance_at(pts)
        want = [trilinear(field.esdf, field.spec.origin, 0.1, p) for p in pts]
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_out_of_bounds(self):
        field = random_field(5)
        p = field.spec.upper + 0.5
        assert field.distance_at(p) == field.policy.out_of_bounds_distance
        assert np.array_equal(field.gradient_at(p), np.zeros(3))

    def test_scalar_and_batch_shapes(self):
        field = random_field(5)
        assert isinstance(field.distance_at(np.zeros(3)), float)
        assert field.distance_at(np.zeros((4, 3))).shape == (4,)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_lipschitz_with_grid_slack(self, seed):
        field = random_field(seed % 50, density=0.15)
        rng = np.random.default_rng(seed)
        p, q = rng.uniform(field.spec.lower, field.spec.upper, (2, 3))
        lhs = abs(field.distance_at(p) - field.distance_at(q))
        assert lhs <= np.linalg.norm(p - q) + 2 * field.spec.voxel_size


class TestGradient:
    def test_linear_slope_far_from_obstacle(self):
        # a wall at x = 0 makes distance grow with slope 1 along +x
        field = box_field([((0, 0, 0), (0.1, 4, 1))], dims=(40, 40, 10))
        g = field.gradient_at((2.03, 2.01, 0.52))
        np.testing.assert_allclose(g, [1, 0, 0], atol=1e-9)

    def test_symmetric_midpoint(self):
        field = box_field([((0.5, 1.5, 0), (1.0, 2.5, 1)), ((3.0, 1.5, 0), (3.5, 2.5, 1))])
        g = field.gradient_at((2.0, 2.03, 0.52))
        assert abs(g[0]) < 1e-9

    def test_matches_finite_differences(self):
        field = random_field(6, dims=(16, 16, 16), density=0.08)
        rng = np.random.default_rng(1)
        vs = field.spec.voxel_size
        h = 1e-4 * vs
        checked = 0
        while checked < 100:
            p = rng.uniform(field.spec.lower + vs, field.spec.upper - vs)
            # stay off the interpolation cell planes, where the gradient jumps
            frac = ((p - field.spec.lower) / vs - 0.5) % 1.0
            if np.any(np.minimum(frac, 1 - frac) < 0.05):
                continue
            checked += 1
            g = field.gradient_at(p)
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                fd = (field.distance_at(p + e) - field.distance_at(p - e)) / (2 * h)
                assert abs(fd - g[k]) <= 1e-4 * max(1.0, abs(fd))


class TestVisibility:
    def test_degenerate_segment_in_free_space(self):
        field = single_voxel_field()
        p = np.array([1.5, 1.5, 1.5])
        assert field.line_visible(p, p) == (True, None)

    def test_segment_through_single_voxel(self):
        field = single_voxel_field()
        a, b = np.array([0.05, 0.55, 0.55]), np.array([1.95, 0.55, 0.55])
        visible, block = field.line_visible(a, b)
        assert not visible
        assert block == (5, 5, 5)
        assert dense_first_occupied(field.occupancy, field.spec.origin, 0.1, a, b) == (5, 5, 5)

    def test_grazing_segment_blocked_by_margin(self):
        field = single_voxel_field()
        # closest approach is 0.2 m, centre to centre
        a, b = np.array([0.05, 0.75, 0.55]), np.array([1.95, 0.75, 0.55])
        assert field.line_visible(a, b, margin=0.0)[0]
        assert not field.line_visible(a, b, margin=0.25)[0]

    def test_batch_matches_single(self):
        field = random_field(7, density=0.05)
        rng = np.random.default_rng(2)
        a = rng.uniform(field.spec.lower, field.spec.upper, (40, 3))
        b = rng.uniform(field.spec.lower, field.spec.upper, (40, 3))
        batch = field.lines_visible(a, b, 0.05)
        single = [field.line_visible(x, y, 0.05)[0] for x, y in zip(a, b)]
        assert batch.tolist() == single
        assert field.all_visible(a, b, 0.05) == bool(batch.all())

    def test_one_point_broadcast(self):
        field = random_field(7, density=0.05)
        a = field.spec.center((1, 1, 1))
        b = field.spec.center(np.array([[5, 5, 5], [9, 2, 3]]))
        assert field.lines_visible(a, b).tolist() == [field.line_visible(a, q)[0] for q in b]

    def test_mismatched_batches_rejected(self):
        field = random_field(7)
        with pytest.raises(RejectedInput):
            field.lines_visible(np.zeros((3, 3)), np.ones((2, 3)))

    def test_agrees_with_dense_oracle(self):
        field = random_field(9, dims=(16, 16, 8), density=0.04)
        rng = np.random.default_rng(5)
        disagree = 0
        for _ in range(200):
            a, b = rng.uniform(field.spec.lower, field.spec.upper, (2, 3))
            fine = dense_segment_blocked(field, a, b, 0.0) is None
            disagree += fine != field.line_visible(a, b)[0]
        # the half-voxel step can only miss sliver intersections
        assert disagree <= 4

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 0.3))
    def test_symmetric(self, seed, margin):
        field = random_field(seed % 20, density=0.08)
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(field.spec.lower, field.spec.upper, (2, 3))
        assert field.line_visible(a, b, margin)[0] == field.line_visible(b, a, margin)[0]


class TestMapFile:
    def test_round_trip(self, tmp_path):
        field = random_field(11)
        save_map(tmp_path / "m.txt", field.occupancy, field.spec)
        occ, spec = load_map(tmp_path / "m.txt")
        assert spec == field.spec
        assert np.array_equal(occ, field.occupancy)
        save_map(tmp_path / "n.txt", occ, spec)
        assert (tmp_path / "m.txt").read_bytes() == (tmp_path / "n.txt").read_bytes()

    def test_x_fastest_order(self, tmp_path):
        spec = GridSpec((0, 0, 0), 1.0, (2, 3, 1))
        occ = np.zeros(spec.dims, bool)
        occ[1, 0, 0] = True
        save_map(tmp_path / "m.txt", occ, spec)
        values = (tmp_path / "m.txt").read_text().split()[7:]
        assert values == ["0", "1", "0", "0", "0", "0"]

    def test_truncated_file_rejected(self, tmp_path):
        (tmp_path / "bad.txt").write_text("0 0 0 0.1 2 2 2\n0 1 0\n")
        with pytest.raises(RejectedInput):
            load_map(tmp_path / "bad.txt")
