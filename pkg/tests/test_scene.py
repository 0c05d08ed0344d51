import numpy as np
import pytest

from cliplab.scene import (
    BehindCamera,
    Camera,
    PoseSpec,
    apply_pose,
    full_protocol_grid,
    parse_view_spec,
    pose_grid,
    pose_matrix,
    project,
    project_plane,
    rotation_matrix,
    to_pixels,
    view_points,
)


def test_rotation_orthonormality(rng):
    for _ in range(50):
        axis = rng.choice(["x", "y", "z"])
        R = rotation_matrix(axis, rng.uniform(-720, 720))
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-12
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_rotation_known_values():
    Ry = rotation_matrix("y", 90.0)
    assert np.allclose(Ry @ np.array([0, 0, 1.0]), [1, 0, 0], atol=1e-12)
    assert np.allclose(Ry @ np.array([1.0, 0, 0]), [0, 0, -1], atol=1e-12)
    Rx = rotation_matrix("x", 90.0)
    assert np.allclose(Rx @ np.array([0, 1.0, 0]), [0, 0, 1], atol=1e-12)
    Rz = rotation_matrix("z", 90.0)
    assert np.allclose(Rz @ np.array([1.0, 0, 0]), [0, 1, 0], atol=1e-12)
    with pytest.raises(ValueError):
        rotation_matrix("w", 10.0)


def test_pose_matrix_composition_order():
    pose = PoseSpec("xy", (31.0, -47.0))
    want = rotation_matrix("y", -47.0) @ rotation_matrix("x", 31.0)
    assert np.allclose(pose_matrix(pose), want, atol=1e-15)


def test_apply_pose_rigid(clips10, rng):
    clip = clips10[0]
    pose = PoseSpec("xz", (33.0, 121.0))
    moved = apply_pose(clip, pose)
    assert np.allclose(moved.mean(axis=0), clip.vertices.mean(axis=0), atol=1e-12)
    d0 = np.linalg.norm(clip.vertices[:, None] - clip.vertices[None, :], axis=-1)
    d1 = np.linalg.norm(moved[:, None] - moved[None, :], axis=-1)
    assert np.allclose(d0, d1, atol=1e-12)


def test_z_rotation_is_in_plane(clips10):
    """Rotating the object about z equals rotating its projected view in 2D."""
    cam = Camera()
    clip = clips10[1]
    theta = 37.0
    rotated = project_plane(apply_pose(clip, PoseSpec("z", (theta,))), cam)
    t = np.radians(theta)
    R2 = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    direct = project_plane(clip.vertices, cam) @ R2.T
    assert np.allclose(rotated, direct, atol=1e-12)


def test_pose_grid_counts():
    assert len(pose_grid(["y"])) == 360
    assert len(pose_grid(["xy"])) == 1296
    grid = full_protocol_grid()
    assert len(grid) == 3 * 360 + 3 * 1296 == 4968
    assert len({(p.axes, p.angles_deg) for p in grid}) == 4968
    with pytest.raises(ValueError):
        pose_grid(["y"], single_stride=7.0)


def test_orthographic_drops_z(rng):
    pts = rng.normal(size=(8, 3))
    assert np.array_equal(project_plane(pts, Camera()), pts[:, :2])


def test_perspective_identity_on_focal_plane(rng):
    pts = rng.normal(size=(8, 3))
    pts[:, 2] = 0.0
    cam = Camera(mode="perspective", distance=3.0)
    assert np.allclose(project_plane(pts, cam), pts[:, :2], atol=1e-15)


def test_perspective_distance_halves_extent():
    # Translating the object twice as far from the camera halves its image.
    cam = Camera(mode="perspective", distance=4.0)
    pts = np.array([[1.0, 0.5, 0.0], [-1.0, -0.5, 0.0]])
    near = project_plane(pts, cam)
    far = project_plane(pts - [0, 0, 4.0], cam)
    assert np.allclose(far, near / 2.0, atol=1e-12)


def test_perspective_behind_camera():
    cam = Camera(mode="perspective", distance=2.0)
    with pytest.raises(BehindCamera):
        project_plane(np.array([[0.0, 0.0, 2.0]]), cam)


def test_pixel_mapping():
    cam = Camera(image_size=224, scale=2.5)
    assert np.allclose(to_pixels(np.zeros((1, 2)), cam), [[112, 112]])
    # scale units span the image: plane x = scale/2 lands on the right edge.
    assert np.allclose(to_pixels(np.array([[1.25, -1.25]]), cam), [[224.0, 0.0]])
    pts = np.array([[0.3, -0.2, 0.1]])
    assert np.allclose(project(pts, cam), to_pixels(project_plane(pts, cam), cam))


def test_view_points_matches_manual(clips10):
    cam = Camera()
    pose = PoseSpec("y", (75.0,))
    assert np.allclose(view_points(clips10[0], pose, cam),
                       project_plane(apply_pose(clips10[0], pose), cam), atol=1e-15)


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera(mode="isometric")
    with pytest.raises(ValueError):
        Camera(mode="perspective", distance=1.0)
    with pytest.raises(ValueError):
        Camera(scale=0.0)
    cam = Camera(mode="perspective", distance=2.0, scale=3.0, image_size=128)
    assert Camera.from_json(cam.to_json()) == cam


def test_pose_spec_validation():
    with pytest.raises(ValueError):
        PoseSpec("xy", (10.0,))
    with pytest.raises(ValueError):
        PoseSpec("q", (10.0,))
    pose = PoseSpec("yz", (10, 20))
    assert pose.angles_deg == (10.0, 20.0)
    assert PoseSpec.from_json(pose.to_json()) == pose


def test_parse_view_spec_forms():
    assert [p.angles_deg[0] for p in parse_view_spec("y:0,30,60")] == [0.0, 30.0, 60.0]
    uni = parse_view_spec("y:uniform:12")
    assert [p.angles_deg[0] for p in uni] == [30.0 * k for k in range(12)]
    assert all(p.axes == "y" for p in uni)
    offset = parse_view_spec("y:uniform:4:45")
    assert [p.angles_deg[0] for p in offset] == [45.0, 135.0, 225.0, 315.0]
    rng7 = parse_view_spec("y:range:-30:30:7")
    assert [p.angles_deg[0] for p in rng7] == [330.0, 340.0, 350.0, 0.0, 10.0, 20.0, 30.0]
    combo = parse_view_spec("y:0; x:90")
    assert [(p.axes, p.angles_deg[0]) for p in combo] == [("y", 0.0), ("x", 90.0)]


def test_parse_view_spec_errors():
    with pytest.raises(ValueError):
        parse_view_spec("xy:0,10")
    with pytest.raises(ValueError):
        parse_view_spec(" ; ")
