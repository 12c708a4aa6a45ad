import math

import numpy as np
import pytest

from mapstitch.errors import (
    DegenerateConfiguration,
    DegenerateRay,
    ParallelRays,
    ZeroIntersectionAngle,
)
from mapstitch.geometry import (
    IntersectionGeometry,
    Pose,
    SimilarityTransform,
    depth_error,
    estimate_similarity,
    estimate_similarity_robust,
    intersection_angle,
    intersection_angles,
    random_rotation,
    triangulate,
)


def random_sim3(rng, scale_range=(0.5, 2.0)):
    return SimilarityTransform(
        rng.uniform(*scale_range), random_rotation(rng), rng.normal(0, 5, 3)
    )


class TestEstimateSimilarity:
    def test_identity_on_equal_point_sets(self, rng):
        pts = rng.normal(0, 2, (4, 3))
        transform, rms = estimate_similarity(pts, pts)
        assert transform.allclose(SimilarityTransform.identity(), atol=1e-9)
        assert rms < 1e-12

    def test_pure_translation(self, rng):
        pts = rng.normal(0, 2, (5, 3))
        transform, rms = estimate_similarity(pts, pts + np.array([1.0, 2.0, 3.0]))
        assert abs(transform.scale - 1.0) < 1e-9
        assert np.allclose(transform.rotation, np.eye(3), atol=1e-9)
        assert np.allclose(transform.translation, [1, 2, 3], atol=1e-9)
        assert rms < 1e-12

    def test_recovers_quarter_turn_with_scale(self, rng):
        rot_z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        truth = SimilarityTransform(2.0, rot_z, np.array([1.0, 0.0, 0.0]))
        src = rng.normal(0, 3, (10, 3))
        transform, rms = estimate_similarity(src, truth.apply(src))
        assert transform.allclose(truth, atol=1e-9)
        assert rms < 1e-9

    def test_apply_then_recover_oracle(self, rng):
        for _ in range(50):
            truth = random_sim3(rng)
            src = rng.normal(0, 4, (rng.integers(3, 30), 3))
            transform, rms = estimate_similarity(src, truth.apply(src))
            assert transform.allclose(truth, atol=1e-9)
            assert rms < 1e-9

    def test_rejects_too_few_points(self):
        with pytest.raises(DegenerateConfiguration):
            estimate_similarity(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_rejects_collinear_sources(self):
        src = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
        with pytest.raises(DegenerateConfiguration):
            estimate_similarity(src, src)

    def test_coplanar_sources_are_fine(self, rng):
        truth = random_sim3(rng)
        src = np.column_stack([rng.normal(0, 2, (6, 2)), np.zeros(6)])
        transform, _ = estimate_similarity(src, truth.apply(src))
        assert np.allclose(transform.apply(src), truth.apply(src), atol=1e-9)

    def test_robust_wrapper_ignores_outliers(self, rng):
        truth = random_sim3(rng)
        src = rng.normal(0, 4, (40, 3))
        dst = truth.apply(src)
        dst[:5] += rng.normal(0, 3, (5, 3)) + 5.0
        transform, rms, inliers = estimate_similarity_robust(src, dst, 0.05, rng=rng)
        assert inliers.sum() >= 35
        assert transform.allclose(truth, atol=1e-6)


class TestIntersectionAngle:
    def test_symmetric_isoceles_is_right_angle(self):
        angle = intersection_angle((0, 0, 0), (1, 0, 0), (0.5, 0, 0.5))
        assert angle == pytest.approx(90.0, abs=1e-9)

    def test_unit_right_triangle(self):
        angle = intersection_angle((0, 0, 0), (1, 0, 0), (0, 0, 1))
        assert angle == pytest.approx(45.0, abs=1e-9)

    def test_small_angle_limit(self):
        # Far point: angle approaches (baseline/height) in radians.
        angle = intersection_angle((0, 0, 0), (1, 0, 0), (0.5, 0, 1000.0))
        assert angle == pytest.approx(math.degrees(1.0 / 1000.0), rel=1e-6)
        assert angle == pytest.approx(0.0573, abs=1e-4)

    def test_symmetry_and_rigid_invariance(self, rng):
        for _ in range(50):
            a, b, p = rng.normal(0, 3, (3, 3))
            if min(np.linalg.norm(p - a), np.linalg.norm(p - b)) < 1e-3:
                continue
            angle = intersection_angle(a, b, p)
            assert angle == pytest.approx(intersection_angle(b, a, p), abs=1e-9)
            rot = random_rotation(rng)
            shift = rng.normal(0, 10, 3)
            moved = [rot @ x + shift for x in (a, b, p)]
            assert angle == pytest.approx(intersection_angle(*moved), abs=1e-9)

    def test_degenerate_rays(self):
        with pytest.raises(DegenerateRay):
            intersection_angle((0, 0, 0), (1, 0, 0), (0, 0, 0))
        with pytest.raises(DegenerateRay):
            intersection_angle((0, 0, 0), (0, 0, 0), (1, 1, 1))

    def test_vectorized_matches_scalar(self, rng):
        pts = rng.normal(0, 3, (20, 3)) + np.array([0, 0, 5.0])
        batch = intersection_angles((0, 0, 0), (1, 0, 0), pts)
        for k in range(20):
            assert batch[k] == pytest.approx(
                intersection_angle((0, 0, 0), (1, 0, 0), pts[k]), abs=1e-9
            )


class TestDepthError:
    def test_tan45_is_unity(self):
        assert depth_error(1.0, 45.0) == pytest.approx(1.0, abs=1e-12)

    def test_colmap_floor_angle(self):
        # 16 degrees is the classic lower bound for two-view initialization.
        assert depth_error(1.0, 16.0) == pytest.approx(1.0 / math.tan(math.radians(16.0)), abs=1e-12)
        assert depth_error(1.0, 16.0) == pytest.approx(3.4874, abs=1e-4)

    def test_zero_plane_error(self):
        assert depth_error(0.0, 30.0) == 0.0

    def test_rejects_zero_angle(self):
        with pytest.raises(ZeroIntersectionAngle):
            depth_error(1.0, 0.0)
        with pytest.raises(ZeroIntersectionAngle):
            depth_error(1.0, 180.0)

    def test_monotone_decreasing_below_90(self):
        grid = np.linspace(1.0, 89.0, 89)
        values = [depth_error(1.0, t) for t in grid]
        assert all(a > b for a, b in zip(values, values[1:]))


class TestTriangulate:
    def test_exact_intersection(self):
        pose_a = Pose(np.eye(3), np.zeros(3))
        pose_b = Pose(np.eye(3), np.array([1.0, 0, 0]))
        ray_a = np.array([0.5, 0, 1.0])
        ray_a /= np.linalg.norm(ray_a)
        ray_b = np.array([-0.5, 0, 1.0])
        ray_b /= np.linalg.norm(ray_b)
        point = triangulate(pose_a, pose_b, ray_a, ray_b)
        assert np.allclose(point, [0.5, 0, 1.0], atol=1e-12)

    def test_parallel_rays_rejected(self):
        pose = Pose(np.eye(3), np.zeros(3))
        ray = np.array([0.0, 0, 1.0])
        with pytest.raises(ParallelRays):
            triangulate(pose, pose, ray, ray)

    def test_render_then_intersect_oracle(self, rng):
        for _ in range(50):
            pose_a = Pose(random_rotation(rng), rng.normal(0, 2, 3))
            pose_b = Pose(random_rotation(rng), rng.normal(0, 2, 3) + np.array([3.0, 0, 0]))
            point = rng.normal(0, 5, 3) + np.array([0, 0, 12.0])
            ray_a = pose_a.to_camera(point)
            ray_b = pose_b.to_camera(point)
            ray_a /= np.linalg.norm(ray_a)
            ray_b /= np.linalg.norm(ray_b)
            try:
                recovered = triangulate(pose_a, pose_b, ray_a, ray_b)
            except ParallelRays:
                continue
            assert np.allclose(recovered, point, atol=1e-9)


class TestApplySimilarity:
    def test_identity(self, rng):
        pts = rng.normal(0, 2, (10, 3))
        assert np.allclose(SimilarityTransform.identity().apply(pts), pts)

    def test_pure_scale(self):
        transform = SimilarityTransform(2.0, np.eye(3), np.zeros(3))
        assert np.allclose(transform.apply(np.array([1.0, 1.0, 1.0])), [2.0, 2.0, 2.0])

    def test_inverse_composition_roundtrip(self, rng):
        transform = random_sim3(rng)
        pts = rng.normal(0, 5, (100, 3))
        back = transform.inverse().apply(transform.apply(pts))
        assert np.allclose(back, pts, atol=1e-9)

    def test_pose_transport_matches_point_transport(self, rng):
        transform = random_sim3(rng)
        pose = Pose(random_rotation(rng), rng.normal(0, 3, 3))
        moved = transform.apply_pose(pose)
        assert np.allclose(moved.center, transform.apply(pose.center), atol=1e-12)
        # Transported pose keeps a valid rotation.
        assert np.allclose(moved.rotation.T @ moved.rotation, np.eye(3), atol=1e-9)

    def test_compose_associates_with_apply(self, rng):
        t1, t2 = random_sim3(rng), random_sim3(rng)
        pts = rng.normal(0, 2, (20, 3))
        assert np.allclose(t1.compose(t2).apply(pts), t1.apply(t2.apply(pts)), atol=1e-9)


class TestTwoViewGeometry:
    def test_tan_theta_equals_baseline_over_height(self):
        baseline, height = 5.0, 50.0
        # Camera centers at altitude, point at the nadir of the first camera.
        angle = intersection_angle((0, 0, height), (baseline, 0, height), (0, 0, 0))
        assert math.tan(math.radians(angle)) == pytest.approx(baseline / height, abs=1e-6)

    def test_intersection_geometry_consistency(self):
        geom = IntersectionGeometry.from_two_view(
            baseline_m=5.0, height_m=50.0, focal_px=1000.0, plane_error_m=0.02
        )
        tan_theta = math.tan(math.radians(geom.theta_deg))
        assert tan_theta == pytest.approx(geom.baseline_m / geom.height_m, abs=1e-9)
        assert tan_theta == pytest.approx(geom.image_baseline_px / geom.focal_px, abs=1e-9)
        assert geom.depth_error_m == pytest.approx(geom.plane_error_m / tan_theta, abs=1e-9)
