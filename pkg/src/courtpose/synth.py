"""Deterministic synthetic scenes: a broadcast-style camera over a court, a
randomly posed capsule-bodied player with ground-truth poses, jump state,
line mask and calibration correspondences. Every pipeline stage can be
exercised end-to-end against the bundled ground truth.

All randomness flows through one seeded 64-bit generator; the same seed
yields a bit-identical bundle.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .calibrate import (LineMask, load_pgm, rasterize_court_lines,
                        refine_camera_lines, save_pgm, solve_pnp_planar)
from .camera import Camera, camera_from_json, camera_to_json, project
from .composer import resolve_interpenetration
from .court import CourtConfig, CourtModel, make_court_model
from .errors import StageError, ValidationError
from .mesh import BodyMesh, PartMesh, load_obj, save_obj
from .metrics import chamfer, emd, mpvpe
from .model import (BoneTransforms, Frame, Pose2D, Pose3D, Skeleton,
                    forward_kinematics, pose2d_from_json, pose2d_to_json,
                    pose3d_from_json, pose3d_to_json, skeleton_from_json,
                    skeleton_to_json, transforms_from_json, transforms_to_json)
from .placement import place_player
from .posemaps import (JumpInfo, decode_heatmaps, decode_location_maps,
                       encode_heatmaps, encode_location_maps, jump_from_json,
                       jump_to_json)
from .primitives import capsule, tube
from .skinning import FitConfig, fit_pose_to_keypoints, heat_diffusion_weights, lbs
from .transforms import axis_angle_to_matrix, look_at_rotation


@dataclass(frozen=True)
class SceneConfig:
    image_size: tuple = (1280, 720)
    focal_range: tuple = (800.0, 3000.0)
    elevation_range: tuple = (5.0, 15.0)
    standoff_range: tuple = (8.0, 20.0)   # camera distance beyond the sideline
    jump_range: tuple = (0.0, 1.2)
    pose_angle_std: float = 0.12          # radians, per-joint randomization
    crop_margin: float = 1.4
    voxel_res: int = 22
    court: CourtConfig = field(default_factory=CourtConfig)


@dataclass(frozen=True)
class SceneBundle:
    seed: int
    config: SceneConfig
    court: CourtModel
    camera: Camera                 # full-frame broadcast camera
    crop_origin: tuple             # person crop window in the full frame
    crop_scale: float
    skeleton: Skeleton
    transforms: BoneTransforms
    pose_root: Pose3D              # root-relative
    pose_world: Pose3D
    pose2d: Pose2D                 # crop coordinates
    jump: JumpInfo
    rest_body: BodyMesh
    posed_body: BodyMesh           # world frame
    line_mask: LineMask
    correspondences: tuple         # ((pixel xy), (world xyz)) pairs

    @property
    def crop_camera(self) -> Camera:
        return self.camera.cropped(self.crop_origin, self.crop_scale)

    def validate(self) -> None:
        if self.skeleton.num_joints != 35:
            raise ValidationError("bundle skeleton must be the full 35-joint rig")
        reproj = project(self.crop_camera, self.pose_world.positions)
        if not np.array_equal(reproj, self.pose2d.pixels):
            raise ValidationError("bundle invariant broken: pose2d != project(camera, pose3d)")
        if not np.all(self.pose2d.in_crop()):
            raise ValidationError("bundle pose2d leaves the crop")
        if self.jump.airborne != (self.jump.height > JumpInfo.JUMP_THRESHOLD):
            raise ValidationError("bundle jump class does not match the 0.1 m rule")
        w, h = self.config.image_size
        if self.line_mask.size != (w, h):
            raise ValidationError("line mask size does not match the frame")


# the rest body and its diffusion weights depend only on the config resolution
_BODY_CACHE: dict = {}


def build_rest_body(skeleton: Skeleton) -> BodyMesh:
    """Six-part capsule body around the canonical rest skeleton."""
    pose = forward_kinematics(skeleton, BoneTransforms.identity(skeleton.num_joints),
                              frame=Frame.WORLD).positions

    def seg(a, b):
        return pose[skeleton.index(a)], pose[skeleton.index(b)]

    def caps(pairs, radius, part, **kw):
        ms = [capsule(p0, p1, radius, part=part, **kw) for p0, p1 in pairs]
        offsets = np.cumsum([0] + [m.num_vertices for m in ms[:-1]])
        verts = np.concatenate([m.vertices for m in ms])
        faces = np.concatenate([m.faces + off for m, off in zip(ms, offsets)])
        return PartMesh(verts, faces, part)

    neck, head = seg("neck", "head")
    up = head - neck
    pelvis = pose[skeleton.index("pelvis")]

    def sleeve(shoulder_name, elbow_name):
        s, e = seg(shoulder_name, elbow_name)
        u = (e - s) / np.linalg.norm(e - s)
        return tube(s - 0.04 * u, s + 0.62 * (e - s), 0.065, n_seg=8,
                    n_rings=4, part="shirt")

    torso = capsule(pelvis, neck + 1.4 * up, 0.20, part="shirt")
    sv_l, sv_r = sleeve("shoulder_l", "elbow_l"), sleeve("shoulder_r", "elbow_r")
    shirt_verts = np.concatenate([torso.vertices, sv_l.vertices, sv_r.vertices])
    shirt_faces = np.concatenate([
        torso.faces,
        sv_l.faces + torso.num_vertices,
        sv_r.faces + torso.num_vertices + sv_l.num_vertices,
    ])
    parts = [
        caps([(neck + 0.4 * up, head + 0.6 * up)], 0.10, "head"),
        caps([seg("shoulder_l", "elbow_l"), seg("elbow_l", "wrist_l"),
              seg("shoulder_r", "elbow_r"), seg("elbow_r", "wrist_r")], 0.042, "arms"),
        PartMesh(shirt_verts, shirt_faces, "shirt"),
        caps([seg("hip_l", "knee_l"), seg("hip_r", "knee_r")], 0.085, "pants"),
        caps([seg("hip_l", "knee_l"), seg("knee_l", "ankle_l"),
              seg("hip_r", "knee_r"), seg("knee_r", "ankle_r")], 0.055, "legs"),
        caps([seg("ankle_l", "toe_l"), seg("ankle_r", "toe_r")], 0.058, "shoes"),
    ]
    return BodyMesh(tuple(parts))


def canonical_body(voxel_res: int):
    """(skeleton, rest body, heat-diffusion weights), cached per resolution."""
    if voxel_res not in _BODY_CACHE:
        skeleton = Skeleton.canonical()
        rest_body = build_rest_body(skeleton)
        rest_pose = forward_kinematics(skeleton,
                                       BoneTransforms.identity(skeleton.num_joints),
                                       frame=Frame.WORLD)
        weights = heat_diffusion_weights(rest_body, skeleton, rest_pose,
                                         voxel_res=voxel_res)
        _BODY_CACHE[voxel_res] = (skeleton, rest_body, weights)
    return _BODY_CACHE[voxel_res]


def random_pose_transforms(skeleton: Skeleton, rng: np.random.Generator,
                           angle_std: float) -> BoneTransforms:
    J = skeleton.num_joints
    rots = np.empty((J, 3, 3))
    yaw = rng.uniform(-np.pi, np.pi)
    rots[0] = axis_angle_to_matrix(np.array([0.0, yaw, 0.0]))
    for j in range(1, J):
        rots[j] = axis_angle_to_matrix(rng.normal(0.0, angle_std, size=3))
    return BoneTransforms(rots, np.zeros((J, 3)))


def synth_scene(seed: int, config: SceneConfig = SceneConfig()) -> SceneBundle:
    rng = np.random.default_rng(seed)
    court = make_court_model(config.court)
    skeleton, rest_body, weights = canonical_body(config.voxel_res)

    transforms = random_pose_transforms(skeleton, rng, config.pose_angle_std)
    pose_root = forward_kinematics(skeleton, transforms)

    # heights in (0, threshold] are not representable as consistent scenes
    # (the class gates them to ground), so grounded players sit exactly at 0
    height = float(rng.uniform(*config.jump_range))
    if height <= JumpInfo.JUMP_THRESHOLD:
        height = 0.0
    jump = JumpInfo.from_height(height)
    px = float(rng.uniform(-court.length * 0.35, court.length * 0.35))
    pz = float(rng.uniform(-court.width * 0.33, court.width * 0.33))
    min_y = pose_root.positions[:, 1].min()
    offset = np.array([px, height - min_y, pz])
    pose_world = pose_root.translated(offset)

    eye = np.array([
        px + rng.uniform(-8.0, 8.0),
        rng.uniform(*config.elevation_range),
        court.width / 2.0 + rng.uniform(*config.standoff_range),
    ])
    target = np.array([px, 1.0, pz * 0.5])
    R = look_at_rotation(eye, target)
    cam = Camera(float(rng.uniform(*config.focal_range)),
                 config.image_size[0] / 2.0, config.image_size[1] / 2.0,
                 R, -R @ eye)

    uv_full = project(cam, pose_world.positions)
    lo = uv_full.min(axis=0)
    hi = uv_full.max(axis=0)
    side = float(max(hi[0] - lo[0], hi[1] - lo[1], 8.0)) * config.crop_margin
    center = (lo + hi) / 2.0
    origin = (float(center[0] - side / 2.0), float(center[1] - side / 2.0))
    scale = Pose2D.CROP_SIZE / side
    crop_cam = cam.cropped(origin, scale)
    pose2d = Pose2D(project(crop_cam, pose_world.positions),
                    np.ones(skeleton.num_joints, dtype=bool))

    posed_root = lbs(rest_body, weights, transforms, skeleton)
    posed_body = posed_root.with_parts(
        [p.with_vertices(p.vertices + offset) for p in posed_root.parts])

    mask = rasterize_court_lines(cam, court, config.image_size)
    corrs = _pick_correspondences(cam, court, config.image_size)

    bundle = SceneBundle(seed, config, court, cam, origin, scale, skeleton,
                         transforms, pose_root, pose_world, pose2d, jump,
                         rest_body, posed_body, mask, corrs)
    bundle.validate()
    return bundle


def _pick_correspondences(camera: Camera, court: CourtModel, image_size):
    """Four well-spread in-frame court landmarks with their exact pixels.

    No three selected court points may be collinear, otherwise the planar
    PnP homography is rank deficient.
    """
    W, H = image_size
    pts = court.landmarks3d()
    from .camera import project_with_depth
    uv, z = project_with_depth(camera, pts)
    ok = (z > 0.1) & (uv[:, 0] >= 0) & (uv[:, 0] < W) & (uv[:, 1] >= 0) & (uv[:, 1] < H)
    cand = np.nonzero(ok)[0]
    if len(cand) < 4:
        cand = np.arange(len(pts))  # fall back to any landmarks; PnP is happy

    def keeps_general_position(sel, c):
        for i in range(len(sel)):
            for j in range(i + 1, len(sel)):
                a, b = pts[sel[i]], pts[sel[j]]
                area = np.linalg.norm(np.cross(b - a, pts[c] - a))
                if area < 1e-6:
                    return False
        return True

    sel = [int(cand[np.argmax(np.linalg.norm(uv[cand] - uv[cand].mean(axis=0), axis=1))])]
    while len(sel) < 4:
        dmin = np.min(
            [np.linalg.norm(uv[cand] - uv[s], axis=1) for s in sel], axis=0)
        order = np.argsort(-dmin, kind="stable")
        pick = None
        for k in order:
            c = int(cand[k])
            if c not in sel and keeps_general_position(sel, c):
                pick = c
                break
        if pick is None:
            raise ValidationError("cannot pick four court landmarks in general position")
        sel.append(pick)
    return tuple((tuple(project(camera, pts[i])), tuple(pts[i])) for i in sel)


def court_landmark_reprojection(cam_est: Camera, cam_gt: Camera,
                                court: CourtModel, image_size) -> float:
    """Mean pixel error of estimated vs true projections of in-frame landmarks."""
    W, H = image_size
    pts = court.landmarks3d()
    from .camera import project_with_depth
    uv_gt, z = project_with_depth(cam_gt, pts)
    ok = (z > 0.1) & (uv_gt[:, 0] >= 0) & (uv_gt[:, 0] < W) \
        & (uv_gt[:, 1] >= 0) & (uv_gt[:, 1] < H)
    if not ok.any():
        raise ValidationError("no court landmarks visible in frame")
    uv_est, _ = project_with_depth(cam_est, pts)
    return float(np.mean(np.linalg.norm(uv_est[ok] - uv_gt[ok], axis=1)))


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------

def run_pipeline(bundle: SceneBundle, fit_max_iters: int = 20,
                 emd_subsample: int = 256) -> dict:
    """calibrate -> codec -> place -> skin -> compose -> eval, against the
    bundle's ground truth. Raises StageError with the failing stage's tag."""
    report = {"seed": bundle.seed, "stages": {}}
    skeleton = bundle.skeleton
    _, _, weights = canonical_body(bundle.config.voxel_res)

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as e:
            raise StageError(name, e) from e
        out["seconds"] = round(time.perf_counter() - t0, 4)
        report["stages"][name] = out
        return out

    def s_calibrate():
        cam0, pnp_rms = solve_pnp_planar(bundle.correspondences, bundle.config.image_size)
        ref = refine_camera_lines(cam0, bundle.line_mask, bundle.court)
        reproj = court_landmark_reprojection(ref.camera, bundle.camera,
                                             bundle.court, bundle.config.image_size)
        return {"pnp_rms_px": pnp_rms, "initial_cost": ref.initial_cost,
                "final_cost": ref.final_cost, "landmark_reproj_px": reproj,
                "camera": camera_to_json(ref.camera)}

    cal = stage("calibrate", s_calibrate)
    cam_est = camera_from_json(cal["camera"])

    def s_codec():
        heat = encode_heatmaps(bundle.pose2d)
        loc = encode_location_maps(bundle.pose_root, bundle.pose2d)
        p2 = decode_heatmaps(heat)
        p3 = decode_location_maps(loc, heat)
        err2 = float(np.abs(p2.pixels - bundle.pose2d.pixels).max())
        err3 = float(np.abs(p3.positions - bundle.pose_root.positions).max())
        return {"max_2d_err_px": err2, "max_3d_err_m": err3,
                "pose2d": pose2d_to_json(p2), "pose3d": pose3d_to_json(p3)}

    codec = stage("codec", s_codec)
    pose3d_dec = pose3d_from_json(codec["pose3d"])

    def s_place():
        crop_est = cam_est.cropped(bundle.crop_origin, bundle.crop_scale)
        placed, offset = place_player(crop_est, bundle.pose2d, bundle.pose_root,
                                      bundle.jump)
        j = int(np.argmin(bundle.pose_root.positions[:, 1]))
        err = float(np.linalg.norm(placed.positions[j] - bundle.pose_world.positions[j]))
        return {"lowest_joint_err_m": err, "offset": offset.tolist(),
                "pose_world": pose3d_to_json(placed)}

    stage("place", s_place)

    def s_skin():
        cfg = FitConfig(max_iters=fit_max_iters, tol=1e-8)
        fitted, info = fit_pose_to_keypoints(skeleton, pose3d_dec, cfg=cfg)
        posed = lbs(bundle.rest_body, weights, fitted, skeleton)
        mean_res = float(np.mean(info["joint_residuals"]))
        return {"fit_joint_residual_m": mean_res,
                "final_cost": info["final_cost"],
                "_posed": posed}

    skin_out = stage("skin", s_skin)
    posed_fit = skin_out.pop("_posed")

    def s_compose():
        combined, rep = resolve_interpenetration(posed_fit)
        return {"residual_collisions": rep["residual_collisions"],
                "outer_iterations": len(rep["iterations"]),
                "_body": combined}

    comp_out = stage("compose", s_compose)
    body_final = comp_out.pop("_body")

    def s_eval():
        pred, _ = body_final.merged()
        gt, _ = bundle.posed_body.merged()
        # compare in the root frame: strip the ground-truth world offset
        true_off = bundle.pose_world.positions[0] - bundle.pose_root.positions[0]
        gt_root = gt - true_off
        return {"mpvpe_mm": mpvpe(pred, gt_root),
                "mpvpe_pa_mm": mpvpe(pred, gt_root, procrustes=True),
                "chamfer": chamfer(pred, gt_root),
                "emd": emd(pred, gt_root, subsample=emd_subsample)}

    stage("eval", s_eval)
    return report


# ---------------------------------------------------------------------------
# Scene directory I/O (used by the CLI)
# ---------------------------------------------------------------------------

def save_scene(bundle: SceneBundle, outdir) -> None:
    import os
    os.makedirs(outdir, exist_ok=True)
    p = lambda name: os.path.join(outdir, name)
    with open(p("scene.json"), "w") as fh:
        json.dump({
            "seed": bundle.seed,
            "image_size": list(bundle.config.image_size),
            "crop_origin": list(bundle.crop_origin),
            "crop_scale": bundle.crop_scale,
            "camera": camera_to_json(bundle.camera),
            "skeleton": skeleton_to_json(bundle.skeleton),
            "transforms": transforms_to_json(bundle.transforms),
            "pose_root": pose3d_to_json(bundle.pose_root),
            "pose_world": pose3d_to_json(bundle.pose_world),
            "pose2d": pose2d_to_json(bundle.pose2d),
            "jump": jump_to_json(bundle.jump),
            "correspondences": [[list(px), list(w)] for px, w in bundle.correspondences],
        }, fh, indent=1)
    save_pgm(p("mask.pgm"), bundle.line_mask)
    save_obj(p("rest.obj"), bundle.rest_body)
    save_obj(p("posed.obj"), bundle.posed_body)


def load_scene(scenedir, config: SceneConfig = SceneConfig()) -> SceneBundle:
    import os
    path = os.path.join(scenedir, "scene.json")
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as e:
        raise ValidationError(f"cannot read scene file {path}: {e}") from e
    cfg = SceneConfig(image_size=tuple(d["image_size"]), court=config.court,
                      voxel_res=config.voxel_res)
    rest = load_obj(os.path.join(scenedir, "rest.obj"))
    posed = load_obj(os.path.join(scenedir, "posed.obj"))
    bundle = SceneBundle(
        seed=d["seed"], config=cfg, court=make_court_model(cfg.court),
        camera=camera_from_json(d["camera"]),
        crop_origin=tuple(d["crop_origin"]), crop_scale=d["crop_scale"],
        skeleton=skeleton_from_json(d["skeleton"]),
        transforms=transforms_from_json(d["transforms"]),
        pose_root=pose3d_from_json(d["pose_root"]),
        pose_world=pose3d_from_json(d["pose_world"]),
        pose2d=pose2d_from_json(d["pose2d"]),
        jump=jump_from_json(d["jump"]),
        rest_body=rest, posed_body=posed,
        line_mask=load_pgm(os.path.join(scenedir, "mask.pgm")),
        correspondences=tuple((tuple(px), tuple(w)) for px, w in d["correspondences"]),
    )
    return bundle
