import json

import numpy as np
import pytest

from courtpose.errors import ValidationError
from courtpose.mesh import BodyMesh
from courtpose.model import (BoneTransforms, Frame, Pose3D, Skeleton,
                             forward_kinematics)
from courtpose.primitives import capsule
from courtpose.skinning import (FitConfig, SkinningWeights,
                                fit_pose_to_keypoints, heat_diffusion_weights,
                                lbs, weights_from_json, weights_to_json)
from courtpose.transforms import axis_angle_to_matrix, random_rotation


def chain(n, step=0.3):
    return Skeleton([f"j{i}" for i in range(n)], [-1] + list(range(n - 1)),
                    [[0, 0, 0]] + [[0, step, 0]] * (n - 1))


def world_rest(sk):
    return forward_kinematics(sk, BoneTransforms.identity(sk.num_joints),
                              frame=Frame.WORLD)


def test_single_bone_capsule_full_weight():
    sk = chain(2, 0.4)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.4, 0), 0.08, part="arms"),))
    w = heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=20)
    assert np.allclose(w.W[:, 0], 1.0)
    assert np.abs(w.W.sum(axis=1) - 1.0).max() < 1e-6


def test_two_bone_capsule_nearer_bone_dominates():
    sk = chain(3, 0.3)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.6, 0), 0.07, part="arms",
                             n_seg=12, shaft_rings=6),))
    rest = world_rest(sk)
    w = heat_diffusion_weights(body, sk, rest, voxel_res=24)
    assert np.abs(w.W.sum(axis=1) - 1.0).max() < 1e-6
    assert np.all(w.W >= 0)
    assert np.abs(w.W[:, 2]).max() == 0.0  # leaf joint has no heat source

    # interior-distance oracle on this straight capsule: closeness to the
    # bone segments orders the weights
    V = body.merged()[0]

    def seg_dist(p, a, b):
        ab = b - a
        t = np.clip((p - a) @ ab / (ab @ ab), 0, 1)
        return np.linalg.norm(p - (a + t * ab))

    a0, a1 = rest.positions[0], rest.positions[1]
    b0, b1 = rest.positions[1], rest.positions[2]
    for vi in range(0, len(V), 7):
        d0 = seg_dist(V[vi], a0, a1)
        d1 = seg_dist(V[vi], b0, b1)
        if d0 < d1 - 1e-9:
            assert w.W[vi, 0] >= w.W[vi, 1] - 1e-12
        elif d1 < d0 - 1e-9:
            assert w.W[vi, 1] >= w.W[vi, 0] - 1e-12


def test_heat_weights_deterministic():
    sk = chain(3, 0.3)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.6, 0), 0.07, part="arms"),))
    w1 = heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=16)
    w2 = heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=16)
    assert np.array_equal(w1.W, w2.W)


def test_heat_weights_top4_pruning():
    sk = chain(8, 0.12)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.84, 0), 0.06, part="arms",
                             n_seg=10, shaft_rings=8),))
    w = heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=24)
    nonzeros = (w.W > 0).sum(axis=1)
    assert nonzeros.max() <= 4
    assert np.abs(w.W.sum(axis=1) - 1.0).max() < 1e-6


def test_bone_outside_volume_error():
    # the only bone runs from (3,0,0) to (5,0,0), far outside the capsule
    sk = Skeleton(["root", "far"], [-1, 0], [[3.0, 0, 0], [2.0, 0, 0]])
    body = BodyMesh((capsule((0, 0, 0), (0, 0.3, 0), 0.05, part="arms"),))
    with pytest.raises(ValidationError):
        heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=12)


def test_weights_json_round_trip():
    W = np.array([[0.5, 0.5, 0.0], [0.0, 0.25, 0.75]])
    w = SkinningWeights(W)
    back = weights_from_json(json.loads(json.dumps(weights_to_json(w))))
    assert np.array_equal(back.W, W)


def test_weights_validation():
    with pytest.raises(ValidationError):
        SkinningWeights(np.array([[0.5, 0.1]]))
    with pytest.raises(ValidationError):
        SkinningWeights(np.array([[-0.1, 1.1]]))


def test_lbs_identity_is_exact():
    sk = chain(3, 0.3)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.6, 0), 0.07, part="arms"),))
    w = heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=16)
    posed = lbs(body, w, BoneTransforms.identity(3), sk)
    assert np.abs(posed.merged()[0] - body.merged()[0]).max() <= 1e-12


def test_lbs_single_bone_rigid_equivariance():
    sk = chain(2, 0.4)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.4, 0), 0.08, part="arms"),))
    w = SkinningWeights(np.column_stack([np.ones(body.total_vertices),
                                         np.zeros(body.total_vertices)]))
    rng = np.random.default_rng(0)
    g = random_rotation(rng)
    t = rng.normal(size=3)
    bt = BoneTransforms(np.stack([g, np.eye(3)]), np.vstack([t, np.zeros(3)]))
    posed = lbs(body, w, bt, sk)
    expect = body.merged()[0] @ g.T + t
    assert np.abs(posed.merged()[0] - expect).max() < 1e-12


def test_lbs_blend_of_translations_is_average():
    sk = Skeleton(["root", "a", "b"], [-1, 0, 0],
                  [[0, 0, 0], [0.2, 0, 0], [-0.2, 0, 0]])
    body = BodyMesh((capsule((0, 0, 0), (0, 0.3, 0), 0.05, part="arms"),))
    n = body.total_vertices
    w = SkinningWeights(np.column_stack([np.zeros(n), np.full(n, 0.5), np.full(n, 0.5)]))
    t1 = np.array([0.1, 0.0, 0.0])
    t2 = np.array([0.0, 0.2, -0.1])
    bt = BoneTransforms(np.broadcast_to(np.eye(3), (3, 3, 3)).copy(),
                        np.vstack([np.zeros(3), t1, t2]))
    posed = lbs(body, w, bt, sk)
    expect = body.merged()[0] + (t1 + t2) / 2.0
    assert np.abs(posed.merged()[0] - expect).max() < 1e-12


def test_lbs_commutes_with_global_rigid_motion():
    sk = chain(4, 0.25)
    body = BodyMesh((capsule((0, 0, 0), (0, 0.75, 0), 0.06, part="arms"),))
    w = heat_diffusion_weights(body, sk, world_rest(sk), voxel_res=16)
    rng = np.random.default_rng(3)
    rots = np.stack([random_rotation(rng, 0.4) for _ in range(4)])
    bt = BoneTransforms(rots, np.zeros((4, 3)))
    base = lbs(body, w, bt, sk).merged()[0]

    g = random_rotation(rng)
    gt = rng.normal(size=3)
    rots2 = rots.copy()
    rots2[0] = g @ rots[0]
    tr2 = np.zeros((4, 3))
    tr2[0] = gt
    moved = lbs(body, w, BoneTransforms(rots2, tr2), sk).merged()[0]
    assert np.abs(moved - (base @ g.T + gt)).max() < 1e-12


def test_fit_fixed_point_at_truth():
    sk = chain(5, 0.25)
    rng = np.random.default_rng(2)
    rots = np.stack([random_rotation(rng, 0.3) for _ in range(5)])
    bt = BoneTransforms(rots, np.zeros((5, 3)))
    target = forward_kinematics(sk, bt)
    cfg = FitConfig(wprior=0.0)
    fitted, info = fit_pose_to_keypoints(sk, target, cfg=cfg, init=bt)
    assert np.abs(fitted.rotations - rots).max() < 1e-12
    assert info["final_cost"] < 1e-20


def test_fit_recovers_perturbed_chain_within_1mm():
    sk = chain(6, 0.25)
    rng = np.random.default_rng(1)
    rots = np.stack([random_rotation(rng, 0.25) for _ in range(6)])
    target = forward_kinematics(sk, BoneTransforms(rots, np.zeros((6, 3))))
    pert = np.stack([
        axis_angle_to_matrix(rng.normal(scale=np.deg2rad(5) / np.sqrt(3), size=3)) @ R
        for R in rots])
    fitted, info = fit_pose_to_keypoints(
        sk, target, init=BoneTransforms(pert, np.zeros((6, 3))))
    assert info["joint_residuals"].max() < 1e-3
    hist = info["cost_history"]
    assert all(b <= a + 1e-18 for a, b in zip(hist, hist[1:]))


def test_fit_pure_3d_runs_without_camera():
    sk = chain(4, 0.3)
    rng = np.random.default_rng(5)
    rots = np.stack([random_rotation(rng, 0.2) for _ in range(4)])
    target = forward_kinematics(sk, BoneTransforms(rots, np.zeros((4, 3))))
    cfg = FitConfig(w2d=0.0)
    fitted, info = fit_pose_to_keypoints(sk, target, cfg=cfg)
    assert info["joint_residuals"].max() < 1e-3


def test_fit_2d_term_requires_camera():
    sk = chain(3, 0.3)
    target = forward_kinematics(sk, BoneTransforms.identity(3))
    with pytest.raises(ValidationError):
        fit_pose_to_keypoints(sk, target, cfg=FitConfig(w2d=1.0))
