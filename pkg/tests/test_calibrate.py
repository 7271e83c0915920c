import numpy as np
import pytest

from courtpose.calibrate import (LineMask, load_pgm, rasterize_court_lines,
                                 refine_camera_lines, save_pgm,
                                 solve_pnp_planar)
from courtpose.camera import Camera, project
from courtpose.court import make_court_model
from courtpose.errors import (DegenerateGeometryError, NumericalError,
                              ValidationError)
from courtpose.transforms import axis_angle_to_matrix, look_at_rotation

SIZE = (1280, 720)


def broadcast_camera(seed=0, f=1500.0):
    rng = np.random.default_rng(seed)
    eye = np.array([rng.uniform(-6, 6), rng.uniform(6, 12), 7.62 + rng.uniform(9, 16)])
    R = look_at_rotation(eye, np.array([rng.uniform(-4, 4), 1.0, 0.0]))
    return Camera(f, SIZE[0] / 2, SIZE[1] / 2, R, -R @ eye)


def court_corrs(cam, pts):
    return [(tuple(project(cam, p)), tuple(p)) for p in pts]


CORR_POINTS = np.array([
    [-14.325, 0.0, -7.62], [-14.325, 0.0, 7.62],
    [14.325, 0.0, 7.62], [0.0, 0.0, -7.62],
])


def test_pnp_recovers_synthesized_camera():
    cam = broadcast_camera(1)
    est, rms = solve_pnp_planar(court_corrs(cam, CORR_POINTS), SIZE)
    assert rms < 1e-3
    assert est.f == pytest.approx(cam.f, abs=1e-3)
    for p in CORR_POINTS:
        assert np.abs(project(est, p) - project(cam, p)).max() < 1e-3


def test_pnp_fronto_parallel():
    # camera straight above the court: x_cam = +x world, looking down -y
    R = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    eye = np.array([0.0, 12.0, 0.0])
    cam = Camera(1400.0, SIZE[0] / 2, SIZE[1] / 2, R, -R @ eye)
    square = np.array([[-3.0, 0, -3.0], [-3.0, 0, 3.0], [3.0, 0, 3.0], [3.0, 0, -3.0]])
    corrs = court_corrs(cam, square)
    # the focal length is unobservable from a fronto-parallel plane
    with pytest.raises(DegenerateGeometryError):
        solve_pnp_planar(corrs, SIZE)
    # pinning f resolves the ambiguity exactly
    est, rms = solve_pnp_planar(corrs, SIZE, focal=1400.0)
    assert rms < 1e-6
    assert est.f == 1400.0
    assert np.abs(est.R - R).max() < 1e-6
    assert np.abs(est.center - eye).max() < 1e-6


def test_pnp_degenerate_collinear():
    cam = broadcast_camera(2)
    pts = np.array([[-5.0, 0, 0.0], [0.0, 0, 0.0], [5.0, 0, 0.0], [10.0, 0, 0.0]])
    with pytest.raises(DegenerateGeometryError):
        solve_pnp_planar(court_corrs(cam, pts), SIZE)


def test_pnp_needs_four_points():
    cam = broadcast_camera(3)
    with pytest.raises(ValidationError):
        solve_pnp_planar(court_corrs(cam, CORR_POINTS[:3]), SIZE)


def test_rasterize_camera_looking_away_is_empty():
    eye = np.array([0.0, 8.0, 30.0])
    R = look_at_rotation(eye, eye + np.array([0.0, 0.0, 10.0]))  # away from court
    cam = Camera(1500.0, SIZE[0] / 2, SIZE[1] / 2, R, -R @ eye)
    mask = rasterize_court_lines(cam, make_court_model(), SIZE)
    assert not mask.pixels.any()


def test_rasterize_fronto_parallel_circle_radius():
    height = 20.0
    R = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    eye = np.array([0.0, height, 0.0])
    f = 1500.0
    cam = Camera(f, SIZE[0] / 2, SIZE[1] / 2, R, -R @ eye)
    court = make_court_model()
    mask = rasterize_court_lines(cam, court, SIZE)
    ys, xs = np.nonzero(mask.pixels)
    center = np.array([SIZE[0] / 2, SIZE[1] / 2])
    r_px = np.hypot(xs - center[0], ys - center[1])
    # center circle projects to radius f*r/height
    expect = f * 1.8288 / height
    ring = np.abs(r_px - expect) < 3.0
    assert ring.sum() > 50
    assert np.abs(np.median(r_px[ring]) - expect) < 1.0


def test_rasterize_nonempty_iff_visible():
    cam = broadcast_camera(4)
    mask = rasterize_court_lines(cam, make_court_model(), SIZE)
    assert mask.pixels.any()


def test_rasterize_deterministic():
    cam = broadcast_camera(8)
    court = make_court_model()
    a = rasterize_court_lines(cam, court, SIZE)
    b = rasterize_court_lines(cam, court, SIZE)
    assert np.array_equal(a.pixels, b.pixels)


def test_refine_fixed_point_at_ground_truth():
    cam = broadcast_camera(5)
    court = make_court_model()
    mask = rasterize_court_lines(cam, court, SIZE)
    ref = refine_camera_lines(cam, mask, court)
    assert ref.final_cost <= ref.initial_cost
    assert abs(ref.camera.f - cam.f) < 1e-6
    assert np.abs(ref.camera.T - cam.T).max() < 1e-6
    assert np.abs(ref.camera.R - cam.R).max() < 1e-6


def test_refine_recovers_perturbed_camera():
    cam = broadcast_camera(6)
    court = make_court_model()
    mask = rasterize_court_lines(cam, court, SIZE)
    rng = np.random.default_rng(0)
    axis = rng.normal(size=3)
    axis *= np.deg2rad(2.0) / np.linalg.norm(axis)
    pert = Camera(cam.f, cam.px, cam.py, axis_angle_to_matrix(axis) @ cam.R,
                  cam.T + np.array([0.12, -0.1, 0.1]))
    ref = refine_camera_lines(pert, mask, court)
    assert ref.final_cost <= ref.initial_cost
    # mean reprojection error of court landmarks under the refined camera
    from courtpose.synth import court_landmark_reprojection
    err = court_landmark_reprojection(ref.camera, cam, court, SIZE)
    assert err < 0.5


def test_refine_rejects_empty_mask():
    cam = broadcast_camera(7)
    with pytest.raises(ValidationError):
        refine_camera_lines(cam, LineMask(np.zeros((720, 1280), bool)),
                            make_court_model())


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mask = LineMask(rng.random((40, 60)) > 0.8)
    path = tmp_path / "m.pgm"
    save_pgm(path, mask)
    back = load_pgm(path)
    assert np.array_equal(back.pixels, mask.pixels)


def test_pgm_bad_magic(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 2\n255\n....")
    with pytest.raises(ValidationError):
        load_pgm(path)
